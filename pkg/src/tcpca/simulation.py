"""Benchmark harness: latent PPCA data, copula transforms, zero inflation,
and chordal distances of estimated loadings and scores.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import AbundanceMatrix
from .errors import InputError
from .imputation import GibbsConfig
from .pipeline import fit_tcpca
from .spectral import fix_signs

logger = logging.getLogger(__name__)

TRANSFORMS = ("scaling", "cubic", "exponential", "mixed")
METHODS = ("tcpca", "pca_unscaled", "pca_scaled")
DEFAULT_ZERO_LEVELS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50, 0.70, 0.90)


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 200
    p: int = 20
    r: int = 4
    sigma: float = 0.1
    transform: str = "scaling"
    zero_levels: tuple = DEFAULT_ZERO_LEVELS
    replications: int = 20
    seed: int = 0
    methods: tuple = METHODS
    nu: float = 0.001
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)

    def __post_init__(self):
        if not (1 <= self.r < self.p and self.n >= 2):
            raise InputError("need 1 <= r < p and n >= 2")
        if not 0 < self.sigma < 1:
            raise InputError("sigma must lie in (0, 1)")
        if self.transform not in TRANSFORMS:
            raise InputError(f"transform must be one of {TRANSFORMS}")
        if any(not 0.0 <= z < 1.0 for z in self.zero_levels):
            raise InputError("zero levels must lie in [0, 1)")
        if self.replications < 1:
            raise InputError("replications must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise InputError(f"unknown methods {sorted(bad)}; choose from {METHODS}")
        object.__setattr__(self, "zero_levels", tuple(float(z) for z in self.zero_levels))
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class GroundTruth:
    Z: np.ndarray
    U_true: np.ndarray
    W: np.ndarray
    V_true: np.ndarray
    Sigma_true: np.ndarray


@dataclass(frozen=True)
class ResultRow:
    method: str
    transform: str
    zero_level: float
    mean_dist_V: float
    se_dist_V: float
    mean_dist_U: float
    se_dist_U: float
    replications: int


@dataclass(frozen=True)
class SimulationResult:
    """Aggregated distances.  The ``se_*`` columns hold the standard deviation
    across replications, not the standard error of the mean."""

    rows: tuple
    raw: dict = field(default_factory=dict, repr=False)

    COLUMNS = (
        "method", "transform", "zero_level", "mean_dist_V", "se_dist_V",
        "mean_dist_U", "se_dist_U", "replications",
    )

    def get(self, method, zero_level, transform=None):
        for row in self.rows:
            if row.method == method and math.isclose(row.zero_level, zero_level) and (
                transform is None or row.transform == transform
            ):
                return row
        raise KeyError((method, zero_level, transform))

    def to_records(self):
        return [tuple(getattr(r, c) for c in self.COLUMNS) for r in self.rows]

    def markdown(self, which="V"):
        """Zero levels as rows, methods as columns, ``mean ( se )`` cells."""
        methods = list(dict.fromkeys(r.method for r in self.rows))
        levels = list(dict.fromkeys(r.zero_level for r in self.rows))
        lines = [
            "| Zero (%) | " + " | ".join(methods) + " |",
            "|---|" + "---|" * len(methods),
        ]
        for z in levels:
            cells = []
            for m in methods:
                row = self.get(m, z)
                mean, se = (row.mean_dist_V, row.se_dist_V) if which == "V" else (row.mean_dist_U, row.se_dist_U)
                cells.append(f"{mean:.2f} ( {se:.2f} )")
            lines.append(f"| {100 * z:g}% | " + " | ".join(cells) + " |")
        return "\n".join(lines)


def _rng(seed, *keys):
    return np.random.default_rng([int(seed), *map(int, keys)])


def generate_latent(config: SimulationConfig, rep_index: int) -> GroundTruth:
    """Draw ``Z = U W^T + E`` with rows of ``W`` scaled to norm ``sqrt(1 - sigma^2)``."""
    rng = _rng(config.seed, rep_index)
    n, p, r, s = config.n, config.p, config.r, config.sigma
    U = rng.standard_normal((n, r))
    W = rng.standard_normal((p, r))
    W *= math.sqrt(1.0 - s * s) / np.linalg.norm(W, axis=1, keepdims=True)
    E = s * rng.standard_normal((n, p))
    Z = U @ W.T + E
    Sigma = W @ W.T + s * s * np.eye(p)
    # row scaling leaves the diagonal at 1 up to rounding; pin it
    np.fill_diagonal(Sigma, 1.0)
    evals, evecs = np.linalg.eigh(Sigma)
    V = fix_signs(evecs[:, np.argsort(evals)[::-1][:r]])
    return GroundTruth(Z, U, W, V, Sigma)


def apply_transform(Z, kind: str) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if kind == "scaling":
        return 10.0 * Z
    if kind == "cubic":
        return 10.0 * Z**3
    if kind == "exponential":
        return 10.0 * np.exp(Z)
    if kind == "mixed":
        return 10.0 + 10.0 * Z + 10.0 * Z**3 + 10.0 * np.exp(Z)
    raise InputError(f"unknown transform {kind!r}")


def zero_inflate(X_star, pi0: float) -> np.ndarray:
    """Shift to a zero minimum, zero the ``floor(pi0 n p)`` smallest entries
    (ties by row-major position), then round to integers.
    """
    if not 0.0 <= pi0 < 1.0:
        raise InputError("pi0 must lie in [0, 1)")
    X = np.asarray(X_star, dtype=float)
    X = X - X.min()
    k = int(math.floor(pi0 * X.size))
    if k:
        flat = X.ravel()  # copy already made by the subtraction
        order = np.argsort(flat, kind="stable")
        flat[order[:k]] = 0.0
        X = flat.reshape(X.shape)
    return np.rint(X).astype(np.int64)


def _orthonormal_basis(A):
    A = np.asarray(A, dtype=float)
    q, r = np.linalg.qr(A)
    d = np.abs(np.diag(r))
    if d.size == 0 or d.min() <= 1e-10 * max(1.0, d.max()):
        raise InputError("basis is rank deficient")
    return q


def chordal_distance(A, B) -> float:
    """``||P_A - P_B||_F / sqrt(2)`` between the column spaces of A and B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape != B.shape:
        raise InputError(f"shape mismatch {A.shape} vs {B.shape}")
    qa = _orthonormal_basis(A)
    qb = _orthonormal_basis(B)
    r = qa.shape[1]
    # ||P_A - P_B||_F^2 = 2r - 2 ||Qa^T Qb||_F^2
    overlap = np.linalg.norm(qa.T @ qb) ** 2
    return float(math.sqrt(max(0.0, r - overlap)))


def standard_pca(X, scaled: bool, r: int):
    """Loadings and scores of ordinary PCA on the centred (optionally
    standardised) data."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= r < p:
        raise InputError("need 1 <= r < p")
    Xc = X - X.mean(axis=0)
    if scaled:
        sd = Xc.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise InputError(f"zero-variance column {int(np.argmax(sd == 0))} cannot be scaled")
        Xc = Xc / sd
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    V = fix_signs(evecs[:, np.argsort(evals)[::-1][:r]])
    return V, Xc @ V


def _estimate(method, X, r, config):
    if method == "pca_unscaled":
        return standard_pca(X, False, r)
    if method == "pca_scaled":
        return standard_pca(X, True, r)
    # a column whose values are all zero cannot be ranked; there is nothing to estimate
    fit = fit_tcpca(AbundanceMatrix.from_array(X), rank=r, nu=config.nu, gibbs=config.gibbs)
    return fit.model.loadings, fit.scores


def run_replication(config: SimulationConfig, rep_index: int):
    """Distances for every (zero level, method) of one replication.

    Returns a dict ``{(zero_level, method): (dist_V, dist_U)}``.
    """
    truth = generate_latent(config, rep_index)
    X_star = apply_transform(truth.Z, config.transform)
    out = {}
    for level_index, pi0 in enumerate(config.zero_levels):
        X = zero_inflate(X_star, pi0)
        gibbs = replace(config.gibbs, seed=_level_seed(config, rep_index, level_index))
        cfg = replace(config, gibbs=gibbs)
        for method in config.methods:
            V_hat, U_hat = _estimate(method, X, config.r, cfg)
            out[(pi0, method)] = (
                chordal_distance(V_hat, truth.V_true),
                chordal_distance(U_hat, truth.U_true),
            )
    return out


def _level_seed(config, rep_index, level_index):
    return int(_rng(config.seed, rep_index, level_index, 1).integers(2**63))


def _run_one(args):
    config, rep = args
    return run_replication(config, rep)


def run_experiment(config: SimulationConfig, n_jobs: int = 1) -> SimulationResult:
    """Replicate, estimate and aggregate.

    Replications run on independent substreams; with ``n_jobs > 1`` they are
    spread over processes and gathered back in replication order.
    """
    tasks = [(config, rep) for rep in range(config.replications)]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            per_rep = list(pool.map(_run_one, tasks))
    else:
        per_rep = [_run_one(t) for t in tasks]
    rows = []
    raw = {}
    for method in config.methods:
        for pi0 in config.zero_levels:
            d = np.array([rep[(pi0, method)] for rep in per_rep])
            raw[(method, pi0)] = d
            ddof = 1 if len(d) > 1 else 0
            rows.append(
                ResultRow(
                    method, config.transform, pi0,
                    float(d[:, 0].mean()), float(d[:, 0].std(ddof=ddof)),
                    float(d[:, 1].mean()), float(d[:, 1].std(ddof=ddof)),
                    len(d),
                )
            )
    return SimulationResult(tuple(rows), raw)
