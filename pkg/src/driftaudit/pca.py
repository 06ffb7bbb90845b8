"""Principal component analysis via eigendecomposition of the population
covariance, with a deterministic sign convention so projections are
reproducible across runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, LayoutMismatch


@dataclass(frozen=True)
class PcaModel:
    """Mean vector, orthonormal components (columns) and their variances,
    sorted by explained variance descending."""

    mean: np.ndarray               # (d,)
    components: np.ndarray         # (d, k), orthonormal columns
    explained_variance: np.ndarray # (k,), non-increasing

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def explained_variance_ratio(self) -> np.ndarray:
        total = float(self.explained_variance.sum())
        if total <= 0.0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / total


def pca_fit(x: np.ndarray) -> PcaModel:
    """Fit principal axes of the pooled rows of ``x``.

    Uses the population (1/N) covariance. The sign of each component is
    fixed so its largest-magnitude entry is positive. If every feature has
    exactly zero variance the components are undefined and a rank-0 model
    is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise DegenerateData(f"need a (rows >= 2, features >= 1) matrix, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DegenerateData("non-finite entries")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    if float(np.trace(cov)) == 0.0:
        d = x.shape[1]
        return PcaModel(mean=mean, components=np.zeros((d, 0)),
                        explained_variance=np.zeros(0))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(evecs.shape[1]):
        i = int(np.argmax(np.abs(evecs[:, j])))
        if evecs[i, j] < 0:
            evecs[:, j] = -evecs[:, j]
    return PcaModel(mean=mean, components=evecs, explained_variance=evals)


def pca_project(model: PcaModel, x: np.ndarray, n_components: int = 2) -> np.ndarray:
    """Project rows of ``x`` onto the leading components: (x - mean) @ W."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise LayoutMismatch(
            f"feature count {x.shape[1] if x.ndim == 2 else '?'} "
            f"!= model's {model.n_features}"
        )
    k = min(n_components, model.n_components)
    return (x - model.mean) @ model.components[:, :k]
