"""End-to-end truncated copula PCA fit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AbundanceMatrix
from .imputation import GibbsConfig, LatentMatrix, impute_latent, scores
from .latent_corr import DEFAULT_NU, LatentCorrelation, estimate_latent_correlation
from .spectral import (
    DEFAULT_CUMVAR,
    CopulaPcaModel,
    SpectralDecomposition,
    build_model,
    eigendecompose,
    select_rank,
)


@dataclass(frozen=True)
class FitResult:
    sigma: LatentCorrelation
    decomposition: SpectralDecomposition
    model: CopulaPcaModel
    latent: LatentMatrix
    scores: np.ndarray


def fit_tcpca(
    X: AbundanceMatrix,
    rank=None,
    rank_method: str = "cumvar",
    cumvar_threshold: float = DEFAULT_CUMVAR,
    nu: float = DEFAULT_NU,
    gibbs: GibbsConfig = GibbsConfig(),
    threads: int = 1,
) -> FitResult:
    """Estimate the latent correlation, pick loadings and score every sample.

    Passing ``rank`` implies ``rank_method="fixed"``.
    """
    if rank is not None:
        rank_method = "fixed"
    sigma = estimate_latent_correlation(X, nu=nu, threads=threads)
    dec = eigendecompose(sigma)
    r = select_rank(dec.eigenvalues, rank_method, rank if rank_method == "fixed" else cumvar_threshold)
    model = build_model(sigma, dec, r, X)
    latent = impute_latent(X, sigma, gibbs, threads=threads, profile=sigma.profile)
    return FitResult(sigma, dec, model, latent, scores(latent, model))
