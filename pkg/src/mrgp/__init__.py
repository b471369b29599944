"""Gaussian-process forecasting with functional and augmented data layouts.

The numerical hot spots (scaled distances, gradient contractions, OU path
recursion) run in a compiled extension when it is available and fall back
to NumPy otherwise; ``mrgp.BACKEND`` says which one is active.
"""
from ._backend import BACKEND
from .baseline import AR1Params, ar1_forecast, fit_ar1_mle
from .gp import (
    FitError,
    ForecastDistribution,
    OptimizationError,
    TrainedGP,
    TrainingSet,
    fit,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
    optimize_hyperparams,
    predict,
)
from .kernels import HyperParams, KernelFamily, KernelSpec, kernel_matrix, kernel_matrix_grad
from .representations import (
    AugmentedRow,
    RepresentationKind,
    SeriesGrid,
    build_augmented_rows,
    build_functional,
    build_one_dim,
    forecast_query_rows,
    subsample_rows,
    to_training_set,
)
from .simulation import (
    NoiseKind,
    OUParams,
    SimSpec,
    TestDistribution,
    draw_innovation,
    ou_step_exact,
    regime_onehot,
    simulate_series,
    simulate_test_paths,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AR1Params", "ar1_forecast", "fit_ar1_mle", "FitError", "ForecastDistribution",
    "OptimizationError", "TrainedGP", "TrainingSet", "fit", "log_marginal_likelihood",
    "log_marginal_likelihood_grad", "optimize_hyperparams", "predict", "HyperParams",
    "KernelFamily", "KernelSpec", "kernel_matrix", "kernel_matrix_grad", "AugmentedRow",
    "RepresentationKind", "SeriesGrid", "build_augmented_rows", "build_functional",
    "build_one_dim", "forecast_query_rows", "subsample_rows", "to_training_set", "NoiseKind",
    "OUParams", "SimSpec", "TestDistribution", "draw_innovation", "ou_step_exact",
    "regime_onehot", "simulate_series", "simulate_test_paths", "__version__",
]
