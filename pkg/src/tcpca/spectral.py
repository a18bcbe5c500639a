"""Eigendecomposition of the latent correlation, rank choice and loadings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .latent_corr import LatentCorrelation, TruncationProfile

DEFAULT_CUMVAR = 0.8


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties pick the first such coordinate.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def scree(self):
        """Rows of ``(component, eigenvalue, cumulative_fraction)``."""
        ev = self.eigenvalues
        cum = np.cumsum(ev) / ev.sum()
        cum[-1] = 1.0
        return [(i + 1, float(v), float(c)) for i, (v, c) in enumerate(zip(ev, cum))]


def eigendecompose(sigma) -> SpectralDecomposition:
    """Full symmetric eigendecomposition with descending eigenvalues.

    ``sigma`` may be a :class:`LatentCorrelation` or a plain symmetric array.
    """
    m = sigma.matrix if isinstance(sigma, LatentCorrelation) else np.asarray(sigma, dtype=float)
    try:
        evals, evecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(evals)[::-1]
    return SpectralDecomposition(evals[order], fix_signs(evecs[:, order]))


def select_rank(eigenvalues, method: str = "cumvar", threshold_or_r=DEFAULT_CUMVAR) -> int:
    """Choose the number of components.

    ``cumvar`` takes the smallest ``r`` whose leading eigenvalues explain at
    least ``threshold_or_r`` of the total, capped at ``p - 1``; ``fixed``
    validates and returns ``threshold_or_r``.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    p = ev.size
    if p < 2:
        raise InputError("need at least two eigenvalues")
    if method == "fixed":
        r = int(threshold_or_r)
        if r != threshold_or_r or not 1 <= r < p:
            raise InputError(f"rank must be an integer in [1, {p - 1}], got {threshold_or_r}")
        return r
    if method != "cumvar":
        raise InputError(f"unknown rank method {method!r}")
    t = float(threshold_or_r)
    if not 0.0 < t <= 1.0:
        raise InputError("cumulative-variance threshold must lie in (0, 1]")
    total = ev.sum()
    if not total > 0:
        raise InputError("eigenvalues must have a positive sum")
    cum = np.cumsum(ev) / total
    # guard against 0.8 being represented as 0.79999... after cumsum
    r = int(np.argmax(cum >= t - 1e-12)) + 1 if np.any(cum >= t - 1e-12) else p
    return min(r, p - 1)


@dataclass(frozen=True)
class CopulaPcaModel:
    """Fitted loadings plus what is needed to map new samples to the latent scale."""

    rank: int
    loadings: np.ndarray
    eigenvalues: np.ndarray
    residual_variance: float
    profile: TruncationProfile
    ecdf_tables: tuple
    feature_ids: tuple = ()

    def reconstruct(self) -> np.ndarray:
        """``V diag(lambda - sigma2) V^T + sigma2 I``."""
        V = self.loadings
        p = V.shape[0]
        s2 = self.residual_variance
        return (V * (self.eigenvalues - s2)) @ V.T + s2 * np.eye(p)


def build_model(sigma, decomposition: SpectralDecomposition, r: int, X=None) -> CopulaPcaModel:
    p = decomposition.eigenvalues.size
    if not 1 <= int(r) < p:
        raise InputError(f"rank must lie in [1, {p - 1}], got {r}")
    r = int(r)
    tail = decomposition.eigenvalues[r:]
    s2 = float(tail.mean())
    if not s2 > 0:
        raise NumericalError(f"residual variance {s2} is not positive")
    tables = ()
    if X is not None:
        tables = tuple(np.sort(col[col > 0]) for col in np.asarray(X.values).T)
    profile = sigma.profile if isinstance(sigma, LatentCorrelation) else None
    fids = sigma.feature_ids if isinstance(sigma, LatentCorrelation) else ()
    return CopulaPcaModel(
        rank=r,
        loadings=decomposition.eigenvectors[:, :r].copy(),
        eigenvalues=decomposition.eigenvalues[:r].copy(),
        residual_variance=s2,
        profile=profile,
        ecdf_tables=tables,
        feature_ids=fids,
    )
