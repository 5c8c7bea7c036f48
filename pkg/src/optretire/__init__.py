"""Minimal expected time to reach a wealth target with a salary and a risky asset."""

__version__ = "0.1.0"

from .params import ModelParams, Regime
from .gsolve import GFunction, control, g_derivative, solve_g, submartingale_drift, value
from .strategies import Constant, Optimal, Threshold, Zero, parse_strategy
from .sde import SimConfig, SimResult, estimate_hitting_time, simulate_path
from .unitdiff import DiffusionSpec, build_transform, classify_sqrt_boundary, nonnegativity_certificate

__all__ = [
    "ModelParams",
    "Regime",
    "GFunction",
    "control",
    "g_derivative",
    "solve_g",
    "submartingale_drift",
    "value",
    "Constant",
    "Optimal",
    "Threshold",
    "Zero",
    "parse_strategy",
    "SimConfig",
    "SimResult",
    "estimate_hitting_time",
    "simulate_path",
    "DiffusionSpec",
    "build_transform",
    "classify_sqrt_boundary",
    "nonnegativity_certificate",
]
