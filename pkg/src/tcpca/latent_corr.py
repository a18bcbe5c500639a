"""Rank-based estimate of the latent correlation matrix.

Kendall's tau-a for every feature pair is mapped back to the latent scale
through the truncated bridge, the resulting matrix is projected onto the
PSD cone, and finally shrunk towards the identity.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import io
from .bridge import R_MAX, invert_bridge
from .data import AbundanceMatrix
from .errors import AllZeroFeature, DegenerateProjection, InputError

logger = logging.getLogger(__name__)

DEFAULT_NU = 0.001


@dataclass(frozen=True)
class TruncationProfile:
    """Per-feature nonzero counts and estimated latent thresholds."""

    n_samples: int
    nonzero_counts: np.ndarray
    thresholds: np.ndarray

    @property
    def zero_fractions(self):
        return 1.0 - self.nonzero_counts / self.n_samples


def compute_thresholds(X: AbundanceMatrix) -> TruncationProfile:
    """``delta_j = Phi^{-1}((n - m_j) / n)``; ``-inf`` for complete columns."""
    n = X.shape[0]
    m = (~X.zero_mask).sum(axis=0)
    if np.any(m == 0):
        raise AllZeroFeature(X.feature_ids[int(np.argmax(m == 0))])
    thresholds = ndtri((n - m) / n)
    return TruncationProfile(int(n), m.astype(np.int64), thresholds)


def kendall_tau_pair(x, y) -> float:
    """Kendall's tau-a; tied pairs contribute zero."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    return float((sx * sy).sum() / (n * (n - 1)))


def _tau_pairs(values, block_cells=4_000_000):
    n, p = values.shape
    acc = np.zeros((p, p))
    step = max(1, block_cells // max(1, n * p))
    for start in range(0, n, step):
        d = np.sign(values[start:start + step, None, :] - values[None, :, :]).reshape(-1, p)
        acc += d.T @ d
    return acc / (n * (n - 1))


def _tau_merge(values):
    from scipy.stats import kendalltau

    n, p = values.shape
    n0 = n * (n - 1) / 2
    ties = []
    for j in range(p):
        _, counts = np.unique(values[:, j], return_counts=True)
        ties.append(float((counts * (counts - 1) / 2).sum()))
    out = np.eye(p)
    for j, k in combinations(range(p), 2):
        denom = math.sqrt((n0 - ties[j]) * (n0 - ties[k]))
        if denom == 0:
            t = 0.0
        else:
            tb = kendalltau(values[:, j], values[:, k], variant="b").statistic
            t = float(tb) * denom / n0
        out[j, k] = out[k, j] = t
    return out


def kendall_tau_matrix(X, method: str = "pairs") -> np.ndarray:
    """Matrix of pairwise Kendall tau-a with unit diagonal.

    ``method="pairs"`` is the exact O(n^2 p^2) scan (integer arithmetic in
    float64, so results are bit-reproducible); ``"merge"`` goes through
    scipy's O(n log n) tau-b and rescales for ties.
    """
    values = X.values if isinstance(X, AbundanceMatrix) else np.asarray(X, dtype=float)
    if values.ndim != 2 or values.shape[0] < 2:
        raise ValueError("need a 2-d array with at least two rows")
    if method == "pairs":
        tau = _tau_pairs(values)
    elif method == "merge":
        tau = _tau_merge(values)
    else:
        raise ValueError(f"unknown method {method!r}")
    np.fill_diagonal(tau, 1.0)
    return tau


def nearest_psd(M) -> np.ndarray:
    """Clip negative eigenvalues to zero and rescale to unit diagonal."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(M, M.T, atol=1e-10, rtol=0):
        raise ValueError("matrix must be symmetric")
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    if evals.min() >= 0:
        clipped = M
    else:
        clipped = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    d = np.diag(clipped).copy()
    if np.any(d <= 1e-12):
        raise DegenerateProjection(f"projected diagonal entry {d.min():.3g} is not positive")
    scale = 1.0 / np.sqrt(d)
    out = clipped * scale[:, None] * scale[None, :]
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def shrink(sigma_p, nu: float = DEFAULT_NU) -> np.ndarray:
    """``(1 - nu) * sigma_p + nu * I``."""
    if not 0.0 < nu < 1.0:
        raise ValueError("shrinkage nu must lie in (0, 1)")
    sigma_p = np.asarray(sigma_p, dtype=float)
    out = (1.0 - nu) * sigma_p
    d = np.diag(sigma_p)
    # a unit diagonal stays exactly one
    out[np.diag_indices_from(out)] = np.where(d == 1.0, 1.0, (1.0 - nu) * d + nu)
    return out


@dataclass(frozen=True)
class LatentCorrelation:
    """Shrunk latent correlation estimate together with its truncation metadata.

    ``clamped_pairs`` lists feature index pairs whose tau fell outside the
    attainable range and were pinned to the end of the inversion bracket.
    """

    matrix: np.ndarray
    shrinkage_nu: float
    profile: TruncationProfile
    feature_ids: tuple = ()
    clamped_pairs: tuple = field(default=())

    @property
    def p(self):
        return self.matrix.shape[0]

    def check_invariants(self, tol=1e-10):
        m = self.matrix
        assert np.allclose(m, m.T, atol=1e-12, rtol=0)
        assert np.all(np.diag(m) == 1.0)
        assert np.linalg.eigvalsh(m).min() >= self.shrinkage_nu - tol
        off = m[~np.eye(self.p, dtype=bool)]
        assert np.all(np.abs(off) < 1)

    def save(self, csv_path, json_path=None):
        ids = self.feature_ids or tuple(f"F{j + 1}" for j in range(self.p))
        io.write_csv(csv_path, ["feature", *ids], ([fid, *row] for fid, row in zip(ids, self.matrix)))
        if json_path is not None:
            with io.atomic_open(json_path, "w", encoding="utf-8") as fh:
                json.dump(self.sidecar(), fh, indent=2)

    def sidecar(self):
        return {
            "nu": self.shrinkage_nu,
            "n_samples": self.profile.n_samples,
            "nonzero_counts": self.profile.nonzero_counts.tolist(),
            "thresholds": [None if not np.isfinite(t) else float(t) for t in self.profile.thresholds],
            "clamped_pairs": [list(pair) for pair in self.clamped_pairs],
        }

    @classmethod
    def load(cls, csv_path, json_path):
        header, rows = io.read_csv(csv_path)
        matrix = np.array([[float(c) for c in row[1:]] for row in rows])
        meta = json.loads(Path(json_path).read_text(encoding="utf-8"))
        thresholds = np.array([-np.inf if t is None else t for t in meta["thresholds"]])
        profile = TruncationProfile(
            int(meta["n_samples"]), np.array(meta["nonzero_counts"], dtype=np.int64), thresholds
        )
        return cls(
            matrix,
            float(meta["nu"]),
            profile,
            tuple(header[1:]),
            tuple(tuple(p) for p in meta.get("clamped_pairs", [])),
        )


def _invert_all(tau, thresholds, tol, threads):
    p = tau.shape[0]
    pairs = list(combinations(range(p), 2))

    def solve(pair):
        j, k = pair
        return invert_bridge(tau[j, k], thresholds[j], thresholds[k], tol)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(solve, pairs))
    else:
        values = [solve(pair) for pair in pairs]
    out = np.eye(p)
    clamped = []
    for (j, k), v in zip(pairs, values):
        out[j, k] = out[k, j] = v
        if abs(v) >= R_MAX:
            clamped.append((j, k))
    return out, tuple(clamped)


def estimate_latent_correlation(
    X: AbundanceMatrix,
    nu: float = DEFAULT_NU,
    tol: float = 1e-6,
    threads: int = 1,
    tau_method: str = "pairs",
) -> LatentCorrelation:
    """Estimate the latent correlation of a truncated Gaussian-copula sample.

    Parameters
    ----------
    X : AbundanceMatrix
        Observations; zeros are treated as truncated.
    nu : float
        Shrinkage towards the identity, in (0, 1).
    tol : float
        Absolute tolerance of each bridge inversion.
    threads : int
        Worker threads for the pairwise inversions. Results do not depend on it.
    """
    if not 0.0 < nu < 1.0:
        raise InputError("shrinkage nu must lie in (0, 1)")
    n, p = X.shape
    if p < 2:
        raise InputError("need at least two features")
    profile = compute_thresholds(X)
    bound = math.sqrt(math.log(p) / n)
    if nu > bound:
        warnings.warn(
            f"nu={nu} exceeds sqrt(log p / n)={bound:.4g}; consistency is not guaranteed",
            stacklevel=2,
        )
    tau = kendall_tau_matrix(X, method=tau_method)
    raw, clamped = _invert_all(tau, profile.thresholds, tol, threads)
    if clamped:
        logger.info("%d feature pairs clamped at |r| = %s", len(clamped), R_MAX)
    sigma = shrink(nearest_psd(raw), nu)
    return LatentCorrelation(sigma, float(nu), profile, tuple(X.feature_ids), clamped)
