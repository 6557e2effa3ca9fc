"""Debiased-Lasso hypothesis testing for high-dimensional Gaussian designs."""

__version__ = "0.1.0"

from .debias import DebiasedEstimate, debias, mad_tau, scale_factor_d
from .inference import ErrorSummary, TestReport, covfree_test, evaluate, p_values
from .model import CovarianceModel, Instance, SignalSpec, build_covariance, sample_instance, scaling_of
from .procedure import SDLResult, sdl_test
from .solver import LassoFit, calibrate_lambda, fit_lasso, lasso_path, soft_threshold
from .theory import G, minimax_risk, state_evolution_tau, tau_star

__all__ = [
    "CovarianceModel",
    "DebiasedEstimate",
    "ErrorSummary",
    "G",
    "Instance",
    "LassoFit",
    "SDLResult",
    "SignalSpec",
    "TestReport",
    "build_covariance",
    "calibrate_lambda",
    "covfree_test",
    "debias",
    "evaluate",
    "fit_lasso",
    "lasso_path",
    "mad_tau",
    "minimax_risk",
    "p_values",
    "sample_instance",
    "scale_factor_d",
    "scaling_of",
    "sdl_test",
    "soft_threshold",
    "state_evolution_tau",
    "tau_star",
]
