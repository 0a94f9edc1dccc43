"""Generative flexible latent structure regression and generative PLS."""

from .core import (CorrectedEstimates, Dataset, FitResult, GroundTruth, ModelParams,
                   NumericalError, canonicalize_sign, random_orthonormal,
                   sample_inverse_wishart, validate_params)
from .fit import (FitConfig, GflsrFitConfig, fit_gflsr, fit_pls, leading_singular_pair,
                  loading_distance, predict)
from .inference import (corrected_estimates, intervals, predict_interval,
                        residual_bootstrap)
from .io import load_csv, load_fit, save_csv, save_fit
from .psi import PsiFamily, dependence, psi_eval
from .simulate import GflsrScenario, NoiseSpec, paper_loadings_sim3, simulate_gflsr, simulate_pls

__all__ = [
    "CorrectedEstimates", "Dataset", "FitResult", "GroundTruth", "ModelParams", "NumericalError",
    "canonicalize_sign", "random_orthonormal", "sample_inverse_wishart", "validate_params",
    "FitConfig", "GflsrFitConfig", "fit_gflsr", "fit_pls", "leading_singular_pair",
    "loading_distance", "predict", "PsiFamily", "dependence", "psi_eval", "GflsrScenario",
    "NoiseSpec", "paper_loadings_sim3", "simulate_gflsr", "simulate_pls",
    "corrected_estimates", "intervals", "predict_interval", "residual_bootstrap",
    "load_csv", "load_fit", "save_csv", "save_fit",
]
