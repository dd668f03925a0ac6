"""Timeliness of information (ToI) for two-stage transmission/computation tandems.

Submodules:

``analytic``   closed-form ToI and process-related ToI
``gmproc``     Gauss-Markov process helpers
``simulator``  Monte Carlo tandem simulator and estimators
``optimizer``  min-max ToI rate and resource allocation
``cli``        command-line front end
"""
from .analytic import GmParams, MultiSourceRates, TandemRates
from .errors import (
    ConfigError,
    DegenerateAllocation,
    Infeasible,
    InvalidProfile,
    InvalidRate,
    NegativeAge,
    NonConvergence,
    NonMonotoneTimes,
    StabilityViolation,
    ToiError,
    TooFewTasks,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DegenerateAllocation",
    "GmParams",
    "Infeasible",
    "InvalidProfile",
    "InvalidRate",
    "MultiSourceRates",
    "NegativeAge",
    "NonConvergence",
    "NonMonotoneTimes",
    "StabilityViolation",
    "TandemRates",
    "ToiError",
    "TooFewTasks",
]
