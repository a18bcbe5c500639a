"""Latent data recovery and principal scores.

Nonzero observations go through the winsorised empirical cdf and the normal
quantile function.  Zeros are replaced by the conditional mean of the latent
value given the row's nonzero latent values and the constraint that every
zero coordinate lies below its threshold; that mean is estimated by a
coordinate Gibbs sampler with inverse-cdf truncated-normal draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .data import AbundanceMatrix
from .errors import ExtremeTruncation, InputError, NumericalError
from .latent_corr import LatentCorrelation, TruncationProfile, compute_thresholds

__all__ = [
    "GibbsConfig",
    "LatentMatrix",
    "winsorized_ecdf",
    "latent_nonzero",
    "compute_thresholds",
    "gibbs_truncated_mvn_mean",
    "impute_latent",
    "scores",
]

_LOG_TINY = math.log(1e-300)
# standardized bound whose lower-tail mass is 1e-300
_BETA_TINY = float(ndtri_exp(_LOG_TINY))
# below this the plain inverse loses digits and the log-space one takes over
_BETA_DEEP = -5.0
_INIT_MARGIN = 0.1
_BLOCK_CELLS = 5_000_000


@dataclass(frozen=True)
class GibbsConfig:
    n_samples: int = 1000
    burn_in: int = 100
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise InputError("n_samples must be a positive integer")
        if int(self.burn_in) != self.burn_in or self.burn_in < 0:
            raise InputError("burn_in must be a nonnegative integer")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")

    @property
    def sweeps(self):
        return self.burn_in + self.n_samples


@dataclass(frozen=True)
class LatentMatrix:
    values: np.ndarray
    imputed_mask: np.ndarray


def _winsorize(frac, n):
    delta = 1.0 / (2.0 * n)
    return np.clip(frac, delta, 1.0 - delta)


def winsorized_ecdf(column, t: float) -> float:
    """Empirical cdf of ``column`` at ``t``, clamped to ``[1/(2n), 1 - 1/(2n)]``."""
    column = np.asarray(column, dtype=float)
    n = column.size
    return float(_winsorize(np.count_nonzero(column <= t) / n, n))


def latent_nonzero(X: AbundanceMatrix) -> LatentMatrix:
    """Map nonzero entries to the latent scale; zero cells are left as NaN."""
    v = X.values
    n, p = v.shape
    out = np.full((n, p), np.nan)
    for j in range(p):
        col = v[:, j]
        nz = col > 0
        ranks = np.searchsorted(np.sort(col), col[nz], side="right")
        out[nz, j] = ndtri(_winsorize(ranks / n, n))
    return LatentMatrix(out, X.zero_mask.copy())


def _precision(cov):
    try:
        factor = cho_factor(cov, lower=True)
    except LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc
    return cho_solve(factor, np.eye(cov.shape[0]))


def _gibbs_block(state, center, active, prec, upper, uniforms, burn_in):
    """Run coordinate Gibbs on a block of rows and return the sample means.

    ``state``, ``center`` and ``active`` are ``(b, p)``; ``uniforms`` is
    ``(sweeps, b, p)`` in (0, 1].  Only active coordinates move.
    """
    # feature-major copies keep every coordinate update contiguous
    z = np.ascontiguousarray(state.T)
    c = np.ascontiguousarray(center.T)
    act = np.ascontiguousarray(active.T)
    u = np.ascontiguousarray(uniforms.transpose(0, 2, 1))
    diag = np.diag(prec)
    sd = 1.0 / np.sqrt(diag)
    # off-diagonal regression weights of each coordinate on the others
    A = prec / diag[None, :]
    np.fill_diagonal(A, 0.0)
    A = np.ascontiguousarray(A.T)
    coords = [l for l in range(z.shape[0]) if act[l].any()]
    partial = {l: not act[l].all() for l in coords}
    total = np.zeros_like(z)
    for t in range(u.shape[0]):
        for l in coords:
            m = c[l] - A[l] @ (z - c)
            if math.isinf(upper[l]):
                draw = m + sd[l] * ndtri(u[t, l])
            else:
                beta = (upper[l] - m) / sd[l]
                worst = beta[act[l]].min() if partial[l] else beta.min()
                if worst < _BETA_TINY:
                    raise ExtremeTruncation(
                        f"conditional mass below bound {upper[l]:.4g} is under 1e-300"
                    )
                q = ndtri(u[t, l] * ndtr(beta))
                if worst < _BETA_DEEP:
                    deep = beta < _BETA_DEEP
                    q[deep] = ndtri_exp(np.log(u[t, l, deep]) + log_ndtr(beta[deep]))
                draw = np.minimum(m + sd[l] * q, upper[l])
            if partial[l]:
                z[l] = np.where(act[l], draw, z[l])
            else:
                z[l] = draw
        if t >= burn_in:
            total += z
    return (total / (u.shape[0] - burn_in)).T


def gibbs_truncated_mvn_mean(mu, cov, upper, config: GibbsConfig = GibbsConfig()) -> np.ndarray:
    """Mean of ``N(mu, cov)`` restricted to ``{z <= upper}`` by Gibbs sampling.

    Deterministic for a given ``config.seed``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), mu.shape).copy()
    k = mu.size
    if cov.shape != (k, k):
        raise InputError("cov must be k x k")
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
        raise NumericalError("covariance is not symmetric")
    prec = _precision(cov)
    rng = np.random.default_rng(int(config.seed))
    u = 1.0 - rng.random((config.sweeps, 1, k))
    z0 = np.minimum(mu, upper - _INIT_MARGIN)[None, :]
    active = np.ones((1, k), dtype=bool)
    return _gibbs_block(z0, mu[None, :], active, prec, upper, u, config.burn_in)[0]


def _row_uniforms(seed, row, n_sweeps, cols, p):
    rng = np.random.default_rng([int(seed), int(row)])
    u = np.ones((n_sweeps, p))
    u[:, cols] = 1.0 - rng.random((n_sweeps, cols.size))
    return u


def _conditional_start(sigma, z_row, zero_cols, upper):
    """Conditional mean of the zero block given the observed block, projected below the bounds."""
    nz_cols = np.flatnonzero(~np.isin(np.arange(sigma.shape[0]), zero_cols))
    if nz_cols.size == 0:
        mu = np.zeros(zero_cols.size)
    else:
        s_nn = sigma[np.ix_(nz_cols, nz_cols)]
        s_cn = sigma[np.ix_(zero_cols, nz_cols)]
        try:
            factor = cho_factor(s_nn, lower=True)
        except LinAlgError as exc:
            raise NumericalError("observed block of sigma is singular") from exc
        mu = s_cn @ cho_solve(factor, z_row[nz_cols])
    return np.minimum(mu, upper[zero_cols] - _INIT_MARGIN)


def impute_latent(
    X: AbundanceMatrix,
    sigma: LatentCorrelation,
    config: GibbsConfig = GibbsConfig(),
    threads: int = 1,
    profile: TruncationProfile | None = None,
) -> LatentMatrix:
    """Full latent matrix: ecdf scores for nonzeros, conditional means for zeros.

    Row ``i`` draws from the substream seeded by ``(config.seed, i)``, so the
    result does not depend on ``threads``.
    """
    S = sigma.matrix if isinstance(sigma, LatentCorrelation) else np.asarray(sigma, dtype=float)
    n, p = X.shape
    if S.shape != (p, p):
        raise InputError(f"sigma is {S.shape}, data has {p} features")
    profile = profile or compute_thresholds(X)
    upper = np.asarray(profile.thresholds, dtype=float)
    base = latent_nonzero(X)
    mask = X.zero_mask
    z = np.where(mask, 0.0, base.values)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return LatentMatrix(z, mask.copy())
    prec = _precision(S)
    sweeps = config.sweeps
    block = max(1, _BLOCK_CELLS // (sweeps * p))
    chunks = [rows[i:i + block] for i in range(0, rows.size, block)]

    def run(chunk):
        state = z[chunk].copy()
        u = np.empty((sweeps, chunk.size, p))
        for b, i in enumerate(chunk):
            cols = np.flatnonzero(mask[i])
            state[b, cols] = _conditional_start(S, z[i], cols, upper)
            u[:, b, :] = _row_uniforms(config.seed, i, sweeps, cols, p)
        center = np.zeros_like(state)
        return _gibbs_block(state, center, mask[chunk], prec, upper, u, config.burn_in)

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            means = list(pool.map(run, chunks))
    else:
        means = [run(c) for c in chunks]
    for chunk, m in zip(chunks, means):
        sub = z[chunk]
        sub_mask = mask[chunk]
        sub[sub_mask] = m[sub_mask]
        z[chunk] = sub
    return LatentMatrix(z, mask.copy())


def scores(Z, model) -> np.ndarray:
    """``Z @ V``."""
    values = Z.values if isinstance(Z, LatentMatrix) else np.asarray(Z, dtype=float)
    V = model.loadings if hasattr(model, "loadings") else np.asarray(model, dtype=float)
    if values.shape[1] != V.shape[0]:
        raise InputError(f"latent matrix has {values.shape[1]} columns, loadings have {V.shape[0]} rows")
    return values @ V
