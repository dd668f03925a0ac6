"""Zero-mean stationary Gauss-Markov (Ornstein-Uhlenbeck) process helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .analytic import GmParams
from .errors import NegativeAge, NonMonotoneTimes


@dataclass(frozen=True)
class GmPath:
    times: np.ndarray
    values: np.ndarray
    params: GmParams


def _check_age(age):
    age = np.asarray(age, dtype=float)
    if np.any(age < 0) or np.any(np.isnan(age)):
        raise NegativeAge("age must be >= 0")
    return age


def instantaneous_error(age, gm):
    """Error accrued by a sample of the given age: sigma^2 (1 - exp(-kappa age)).

    Accepts scalars or arrays.
    """
    age = _check_age(age)
    out = gm.variance * -np.expm1(-gm.kappa * age)
    return float(out) if out.ndim == 0 else out


def lmmse_predict(sample_value, age, gm):
    """Conditional-mean prediction exp(-kappa age) * x from a stale sample."""
    age = _check_age(age)
    out = np.exp(-gm.kappa * age) * np.asarray(sample_value, dtype=float)
    return float(out) if out.ndim == 0 else out


def sample_path(gm, times, seed=None):
    """Exact discretisation of the process on an arbitrary increasing grid.

    X(t0) ~ N(0, sigma^2); each step multiplies by exp(-kappa dt) and adds
    independent N(0, sigma^2 (1 - exp(-2 kappa dt))) noise.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise NonMonotoneTimes("times must be one-dimensional")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise NonMonotoneTimes("times must be strictly increasing")
    values = np.zeros(times.size)
    if times.size == 0 or gm.sigma == 0.0:
        return GmPath(times, values, gm)

    rng = np.random.default_rng(seed)
    z = rng.standard_normal(times.size)
    rho = np.exp(-gm.kappa * np.diff(times))
    innov = gm.sigma * np.sqrt(-np.expm1(-2.0 * gm.kappa * np.diff(times))) * z[1:]
    values = kernels.ar1_filter(rho, innov, gm.sigma * z[0])
    return GmPath(times, values, gm)
