"""RBF support vector machine: SMO for the binary dual, one-vs-one voting."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

KKT_TOL = 1e-3
TAU = 1e-12


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def scale_gamma(x: np.ndarray) -> float:
    """1 / (n_features * variance of all training values)."""
    var = float(np.asarray(x).var())
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


@dataclass
class BinarySVM:
    alpha: np.ndarray   # duals, one per training point
    y: np.ndarray       # +1 / -1
    bias: float
    iterations: int
    gap: float          # final max-violating-pair gap

    def decision(self, k: np.ndarray) -> np.ndarray:
        """``k`` is the kernel between queries and the training points."""
        return k @ (self.alpha * self.y) + self.bias


def smo(k: np.ndarray, y: np.ndarray, c: float, tol: float = KKT_TOL,
        max_iter: int = 100_000) -> BinarySVM:
    """Solve the C-SVM dual on a precomputed kernel.

    Working pairs are the maximal violating pair; the loop stops once the
    violation gap falls below ``tol``. ``y`` holds +1/-1.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("binary SMO needs both +1 and -1 labels")
    if c <= 0:
        raise ValueError("C must be positive")
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a, Q = yy'K
    diag = np.diag(k)
    it = 0
    gap = np.inf
    while it < max_iter:
        up = ((alpha < c) & (y > 0)) | ((alpha > 0) & (y < 0))
        low = ((alpha < c) & (y < 0)) | ((alpha > 0) & (y > 0))
        score = -y * grad
        su = np.where(up, score, -np.inf)
        sl = np.where(low, score, np.inf)
        i = int(np.argmax(su))
        j = int(np.argmin(sl))
        gap = su[i] - sl[j]
        if gap < tol:
            break
        # move alpha_i by +y_i t and alpha_j by -y_j t, keeping y'a fixed
        eta = max(diag[i] + diag[j] - 2.0 * k[i, j], TAU)
        t = gap / eta
        t = min(t, c - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else c - alpha[j])
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)
        grad += t * y * (k[:, i] - k[:, j])
        it += 1

    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        # no free vector: rho is bracketed by bound vectors on either side
        hi_set = ((alpha >= c) & (y < 0)) | ((alpha <= 0) & (y > 0))
        lo_set = ((alpha >= c) & (y > 0)) | ((alpha <= 0) & (y < 0))
        hi = yg[hi_set].min() if hi_set.any() else np.inf
        lo = yg[lo_set].max() if lo_set.any() else -np.inf
        rho = float(0.5 * (hi + lo)) if np.isfinite(hi) and np.isfinite(lo) \
            else float(hi if np.isfinite(hi) else lo)
    return BinarySVM(alpha=alpha, y=y, bias=-rho, iterations=it, gap=float(gap))


@dataclass
class PairModel:
    a: int              # class voted for when the decision is positive
    b: int
    sv: np.ndarray      # indices into the shared support-vector matrix
    coef: np.ndarray    # alpha * y for those vectors
    bias: float


@dataclass
class SVMParams:
    gamma: float
    c: float
    support: np.ndarray         # (m, d) standardized support vectors
    pairs: list[PairModel]
    n_classes: int

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "c": self.c, "n_classes": self.n_classes,
                "dim": int(self.support.shape[1]), "support": self.support.tolist(),
                "pairs": [{"a": p.a, "b": p.b, "sv": p.sv.tolist(), "coef": p.coef.tolist(),
                           "bias": p.bias} for p in self.pairs]}

    @classmethod
    def from_dict(cls, d: dict) -> "SVMParams":
        dim = int(d.get("dim", 68))
        support = np.array(d["support"], dtype=np.float64).reshape(-1, dim)
        pairs = [PairModel(p["a"], p["b"], np.array(p["sv"], dtype=np.int64),
                           np.array(p["coef"], dtype=np.float64), float(p["bias"]))
                 for p in d["pairs"]]
        return cls(float(d["gamma"]), float(d["c"]), support, pairs, int(d["n_classes"]))


def fit_svm(x: np.ndarray, y: np.ndarray, n_classes: int, c: float = 10.0,
            gamma: float | str = "scale") -> SVMParams:
    """One-vs-one RBF SVM on standardized ``x`` with integer labels ``y``."""
    present = np.unique(y)
    if len(present) < 2:
        raise ValueError("SVM needs at least two classes")
    g = scale_gamma(x) if gamma == "scale" else float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    kfull = rbf_kernel(x, x, g)
    raw = []
    used = np.zeros(len(x), dtype=bool)
    for a, b in combinations(present.tolist(), 2):
        rows = np.flatnonzero((y == a) | (y == b))
        yy = np.where(y[rows] == a, 1.0, -1.0)
        m = smo(kfull[np.ix_(rows, rows)], yy, c)
        keep = m.alpha > 0
        used[rows[keep]] = True
        raw.append((a, b, rows[keep], (m.alpha * m.y)[keep], m.bias))
    remap = -np.ones(len(x), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    pairs = [PairModel(a, b, remap[r], coef, bias) for a, b, r, coef, bias in raw]
    return SVMParams(gamma=g, c=float(c), support=x[used].copy(), pairs=pairs,
                     n_classes=n_classes)


def svm_scores(p: SVMParams, z: np.ndarray) -> np.ndarray:
    """Pairwise vote shares, shape (n, n_classes)."""
    z = np.atleast_2d(z)
    k = rbf_kernel(z, p.support, p.gamma) if len(p.support) else np.zeros((len(z), 0))
    votes = np.zeros((len(z), p.n_classes))
    for pm in p.pairs:
        f = k[:, pm.sv] @ pm.coef + pm.bias
        votes[f >= 0, pm.a] += 1
        votes[f < 0, pm.b] += 1
    return votes / max(len(p.pairs), 1)
