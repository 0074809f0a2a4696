"""One-vs-rest L2 logistic regression fitted by backtracking gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAD_TOL = 1e-6
MAX_ITER = 1000


def _log1pexp(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_grad(theta: np.ndarray, x: np.ndarray, t: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Summed negative log-likelihood plus ``l2/2 * |w|^2`` and its gradient.

    ``theta = [w..., b]``; targets ``t`` are 0/1; the bias is not penalized.
    """
    w, b = theta[:-1], theta[-1]
    z = x @ w + b
    loss = float(np.sum(_log1pexp(z) - t * z) + 0.5 * l2 * w @ w)
    r = _sigmoid(z) - t
    g = np.empty_like(theta)
    g[:-1] = x.T @ r + l2 * w
    g[-1] = r.sum()
    return loss, g


@dataclass
class BinaryFit:
    theta: np.ndarray
    iterations: int
    grad_norm: float


def fit_binary(x: np.ndarray, t: np.ndarray, l2: float = 1.0, tol: float = GRAD_TOL,
               max_iter: int = MAX_ITER) -> BinaryFit:
    theta = np.zeros(x.shape[1] + 1)
    f, g = loss_grad(theta, x, t, l2)
    # 1/L for the logistic loss, then adapted by backtracking
    step = 1.0 / (0.25 * (np.linalg.norm(x, 2) ** 2 + len(x)) + l2)
    it = 0
    gnorm = float(np.abs(g).max())
    while it < max_iter and gnorm >= tol:
        step *= 2.0
        gg = g @ g
        while True:
            cand = theta - step * g
            fc, gc = loss_grad(cand, x, t, l2)
            if fc <= f - 0.5 * step * gg or step < 1e-20:
                break
            step *= 0.5
        theta, f, g = cand, fc, gc
        gnorm = float(np.abs(g).max())
        it += 1
    return BinaryFit(theta, it, gnorm)


@dataclass
class LRParams:
    weights: np.ndarray     # (n_classes, d + 1), last column is the bias
    l2: float
    iterations: list[int]

    def to_dict(self) -> dict:
        return {"l2": self.l2, "weights": self.weights.tolist(), "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "LRParams":
        return cls(np.array(d["weights"], dtype=np.float64), float(d["l2"]), list(d["iterations"]))


def fit_lr(x: np.ndarray, y: np.ndarray, n_classes: int, l2: float = 1.0) -> LRParams:
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    if len(np.unique(y)) < 2:
        raise ValueError("logistic regression needs at least two classes")
    rows, its = [], []
    for c in range(n_classes):
        fit = fit_binary(x, (y == c).astype(np.float64), l2)
        rows.append(fit.theta)
        its.append(fit.iterations)
    return LRParams(np.array(rows), float(l2), its)


def lr_scores(p: LRParams, z: np.ndarray) -> np.ndarray:
    """Per-class sigmoid scores, shape (n, n_classes)."""
    z = np.atleast_2d(z)
    return _sigmoid(z @ p.weights[:, :-1].T + p.weights[:, -1])
