"""Linear one-vs-rest SVM trained by dual coordinate descent.

Each binary subproblem minimizes

    0.5 * ||w~||^2 + C * sum_i max(0, 1 - y_i <w~, x~_i>)

where x~ is the feature vector augmented with a constant 1 and w~ therefore
carries the (regularized) bias in its last entry. The dual box-constrained QP
is solved coordinate-wise with a random permutation per epoch; iteration
stops when the primal-dual gap drops below ``gap_tol_scale * C * n`` or after
``max_epochs`` full passes. The permutation stream is an internal splitmix64
generator, so training is bit-deterministic for a fixed (data order, seed)
on any platform or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NonFiniteFeature, SingleClass

DEFAULT_C = 1.0
DEFAULT_GAP_TOL_SCALE = 1e-4
DEFAULT_MAX_EPOCHS = 100_000


@njit(cache=True, inline="always")
def _splitmix64(state: np.uint64) -> tuple[np.uint64, np.uint64]:
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _dual_cd(xa, y, c, gap_tol, max_epochs, seed):
    """Dual coordinate descent for one binary hinge-loss subproblem.

    Returns (w_augmented, alpha, epochs, attained_gap).
    """
    n, d = xa.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qdiag = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += xa[i, j] * xa[i, j]
        qdiag[i] = s
    order = np.arange(n)
    state = np.uint64(seed)
    gap = np.inf
    epochs = 0
    for _ in range(max_epochs):
        for i in range(n - 1, 0, -1):
            state, r = _splitmix64(state)
            j = int(r % np.uint64(i + 1))
            order[i], order[j] = order[j], order[i]
        for k in range(n):
            i = order[k]
            if qdiag[i] <= 0.0:
                continue
            g = 0.0
            for j in range(d):
                g += w[j] * xa[i, j]
            g = y[i] * g - 1.0
            pg = g
            if alpha[i] == 0.0:
                pg = min(g, 0.0)
            elif alpha[i] == c:
                pg = max(g, 0.0)
            if pg != 0.0:
                old = alpha[i]
                new = old - g / qdiag[i]
                if new < 0.0:
                    new = 0.0
                elif new > c:
                    new = c
                alpha[i] = new
                delta = (new - old) * y[i]
                for j in range(d):
                    w[j] += delta * xa[i, j]
        epochs += 1
        # primal-dual gap: P - D = ||w||^2 + C * hinge - sum(alpha)
        wsq = 0.0
        for j in range(d):
            wsq += w[j] * w[j]
        hinge = 0.0
        asum = 0.0
        for i in range(n):
            m = 0.0
            for j in range(d):
                m += w[j] * xa[i, j]
            m = 1.0 - y[i] * m
            if m > 0.0:
                hinge += m
            asum += alpha[i]
        gap = wsq + c * hinge - asum
        if gap <= gap_tol:
            break
    return w, alpha, epochs, gap


@dataclass(frozen=True)
class SvmModel:
    """One-vs-rest linear classifier with training metadata."""

    classes: tuple
    coef: np.ndarray       # (n_classes, n_features)
    intercept: np.ndarray  # (n_classes,)
    C: float
    epochs: tuple[int, ...]
    gaps: tuple[float, ...]

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.coef.T + self.intercept

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax of decision values; ties go to the lowest class index."""
        scores = self.decision_function(x)
        return np.asarray(self.classes, dtype=object)[np.argmax(scores, axis=1)]


def primal_objective(w: np.ndarray, b: float, x: np.ndarray, y_signed: np.ndarray,
                     c: float) -> float:
    """Regularized-bias hinge objective used by the trainer (w and b both
    penalized)."""
    margins = 1.0 - y_signed * (x @ w + b)
    return 0.5 * (float(w @ w) + b * b) + c * float(np.maximum(margins, 0.0).sum())


def svm_train(
    x: np.ndarray,
    y,
    C: float = DEFAULT_C,
    seed: int = 0,
    *,
    gap_tol_scale: float = DEFAULT_GAP_TOL_SCALE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
) -> SvmModel:
    """Train one binary model per class (one-vs-rest).

    Each subproblem is solved to duality gap <= gap_tol_scale * C * n or
    ``max_epochs`` passes, whichever comes first. Deterministic for a fixed
    (data order, seed); per-class permutation streams are derived from
    (seed, class index).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise NonFiniteFeature(f"expected 2-d features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteFeature("features contain NaN or infinity")
    if C <= 0:
        raise ValueError("C must be positive")
    labels = np.asarray(y, dtype=object)
    if labels.shape != (x.shape[0],):
        raise NonFiniteFeature("one label per row required")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise SingleClass(f"need >= 2 classes, got {classes}")

    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    gap_tol = gap_tol_scale * C * n
    coef = np.zeros((len(classes), d))
    intercept = np.zeros(len(classes))
    epochs = []
    gaps = []
    for k, cls in enumerate(classes):
        y_signed = np.where(labels == cls, 1.0, -1.0)
        cls_seed = np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0]
        w, _alpha, n_epochs, gap = _dual_cd(
            xa, y_signed, float(C), float(gap_tol), int(max_epochs), cls_seed
        )
        coef[k] = w[:d]
        intercept[k] = w[d]
        epochs.append(int(n_epochs))
        gaps.append(float(gap))
    return SvmModel(
        classes=classes, coef=coef, intercept=intercept, C=float(C),
        epochs=tuple(epochs), gaps=tuple(gaps),
    )
