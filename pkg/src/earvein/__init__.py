"""Pig identification from backlit ear vein images."""

from .errors import PipelineError, SegmentationEmpty, VeinsNotFound

__version__ = "0.1.0"

__all__ = ["PipelineError", "SegmentationEmpty", "VeinsNotFound"]
