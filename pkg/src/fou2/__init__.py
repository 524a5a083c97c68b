"""Simulation and drift estimation for the fractional Ornstein-Uhlenbeck process of the second kind."""

__version__ = "0.1.0"

from .estimators import (DriftEstimator, EstimateResult, FOU2Simulator, VarianceResult,
                         asymptotic_variance, estimate_lse_corrected, estimate_moment,
                         estimate_pathwise, quadratic_functional, skorokhod_correction)
from .fbm import SamplePath, TimeGrid, fbm_cov, sample_fbm_exact
from .harness import ExperimentConfig, ExperimentReport, ks_statistic, run_experiment, summarize
from .model import (ModelParams, SimConfig, simulate_stationary, simulate_x,
                    simulate_x_stationary_route, stationary_cov, stationary_variance, x_cov,
                    y1_cov, z_cov)
from .numerics import RngStream

__all__ = [
    "__version__", "RngStream", "TimeGrid", "SamplePath", "fbm_cov", "sample_fbm_exact",
    "ModelParams", "SimConfig", "simulate_x", "simulate_x_stationary_route",
    "simulate_stationary", "z_cov", "y1_cov", "x_cov", "stationary_variance", "stationary_cov",
    "EstimateResult", "VarianceResult", "quadratic_functional", "estimate_moment",
    "estimate_lse_corrected", "estimate_pathwise", "skorokhod_correction", "asymptotic_variance",
    "DriftEstimator", "FOU2Simulator", "ExperimentConfig", "ExperimentReport", "run_experiment",
    "ks_statistic", "summarize",
]
