"""Truncated Gaussian copula PCA for zero-inflated abundance data."""
from .bridge import bridge_tt, invert_bridge
from .data import (
    AbundanceMatrix,
    CountMatrix,
    counts_to_abundance,
    filter_features,
    load_count_matrix,
    mclr_transform,
    to_composition,
)
from .errors import InputError, NumericalError, TcpcaError
from .imputation import GibbsConfig, impute_latent, scores
from .latent_corr import LatentCorrelation, estimate_latent_correlation, kendall_tau_matrix
from .pipeline import FitResult, fit_tcpca
from .spectral import CopulaPcaModel, eigendecompose, select_rank

__version__ = "0.1.0"

__all__ = [
    "AbundanceMatrix", "CopulaPcaModel", "CountMatrix", "FitResult", "GibbsConfig",
    "InputError", "LatentCorrelation", "NumericalError", "TcpcaError",
    "bridge_tt", "counts_to_abundance", "eigendecompose", "estimate_latent_correlation",
    "filter_features", "fit_tcpca", "impute_latent", "invert_bridge", "kendall_tau_matrix",
    "load_count_matrix", "mclr_transform", "scores", "select_rank", "to_composition",
]
