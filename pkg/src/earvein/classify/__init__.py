from .data import Dataset, Standardizer, fit_standardizer, stratified_split
from .evaluate import EvalReport, Misclassification, evaluate
from .model import (KINDS, TrainConfig, TrainedModel, load_model, predict, predict_labels,
                    predict_scores, save_model, train)

__all__ = [
    "Dataset", "Standardizer", "fit_standardizer", "stratified_split",
    "EvalReport", "Misclassification", "evaluate",
    "KINDS", "TrainConfig", "TrainedModel", "load_model", "predict", "predict_labels",
    "predict_scores", "save_model", "train",
]
