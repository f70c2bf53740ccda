"""Dirichlet process mixtures of products of multinomials for categorical data.

Multiple imputation (with or without structural zeros), synthetic data,
pooling of estimates, and MCMC diagnostics.
"""

__version__ = "0.1.0"

from .catdata import (
    MISSING,
    CategoricalDataset,
    DisallowedPatternSet,
    MixtureTruth,
    Schema,
    generate_from_mixture,
    inject_mcar,
    load_csv,
    load_mcz,
    write_csv,
)
from .diagnostics import acf, kstar_mcmc_diag, marginal_compare
from .engines import impute_nozeros, impute_zeros, synthesize, write_outputs
from .errors import (
    ConfigurationError,
    ContractViolation,
    DataError,
    DegenerateTruthError,
    DpmpmError,
    FormatError,
    OracleRefusal,
    SchemaError,
)
from .glm import fit_GLMs, fit_logistic, fit_multinomial, pool_fitted_GLMs
from .pooling import Method, combine, compute_probs, pool_estimated_probs
from .sampler import DpmpmState, HyperParams, TraceLog, gibbs_step, init_state
from .truncation import draw_augmented, gibbs_step_truncated

__all__ = [
    "MISSING", "CategoricalDataset", "DisallowedPatternSet", "MixtureTruth", "Schema",
    "generate_from_mixture", "inject_mcar", "load_csv", "load_mcz", "write_csv",
    "acf", "kstar_mcmc_diag", "marginal_compare",
    "impute_nozeros", "impute_zeros", "synthesize", "write_outputs",
    "ConfigurationError", "ContractViolation", "DataError", "DegenerateTruthError",
    "DpmpmError", "FormatError", "OracleRefusal", "SchemaError",
    "fit_GLMs", "fit_logistic", "fit_multinomial", "pool_fitted_GLMs",
    "Method", "combine", "compute_probs", "pool_estimated_probs",
    "DpmpmState", "HyperParams", "TraceLog", "gibbs_step", "init_state",
    "draw_augmented", "gibbs_step_truncated",
]
