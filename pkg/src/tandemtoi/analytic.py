"""Closed-form timeliness-of-information (ToI) metrics for two-stage tandems.

Edge tier: M/M/1 transmission queue followed by a dedicated M/M/1
computation queue.  Fog tier: the computation queue is shared with an
aggregate Poisson stream of other-source tasks.

All rates are in tasks per unit time; all ToI values are in time units.
Process-related values are mean-squared errors in signal units squared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidRate, StabilityViolation

#: Relative guard band around every stability boundary.
STABILITY_EPS = 1e-6

ZERO_WAIT_VARIANTS = ("printed", "corrected", "exact")


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidRate(f"{name} must be finite and > 0, got {value!r}")
    return value


def _require_stable(load, capacity, constraint, eps=STABILITY_EPS):
    if load >= (1.0 - eps) * capacity:
        raise StabilityViolation(
            constraint,
            f"stability constraint violated: {constraint} "
            f"(load {load:g} vs capacity {capacity:g}, guard {eps:g})",
        )


@dataclass(frozen=True)
class TandemRates:
    """Single-source edge-tier tandem: generation, transmission, computation."""

    lam: float
    mu_t: float
    mu_c: float

    def __post_init__(self):
        for name in ("lam", "mu_t", "mu_c"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    @property
    def rho_t(self):
        return self.lam / self.mu_t

    @property
    def rho_c(self):
        return self.lam / self.mu_c

    def check_stable(self, eps=STABILITY_EPS):
        _require_stable(self.lam, self.mu_t, "lambda < mu_t", eps)
        _require_stable(self.lam, self.mu_c, "lambda < mu_c", eps)
        return self


@dataclass(frozen=True)
class MultiSourceRates:
    """Fog-tier tandem: tagged source plus an aggregate interferer stream."""

    lambda_i: float
    lambda_other: float
    mu_it: float
    mu_c: float

    def __post_init__(self):
        for name in ("lambda_i", "mu_it", "mu_c"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        lo = float(self.lambda_other)
        if not math.isfinite(lo) or lo < 0.0:
            raise InvalidRate(f"lambda_other must be finite and >= 0, got {lo!r}")
        object.__setattr__(self, "lambda_other", lo)

    @property
    def total(self):
        return self.lambda_i + self.lambda_other

    def check_stable(self, eps=STABILITY_EPS):
        _require_stable(self.lambda_i, self.mu_it, "lambda_i < mu_it", eps)
        _require_stable(self.total, self.mu_c, "lambda_i + lambda_other < mu_c", eps)
        return self


@dataclass(frozen=True)
class GmParams:
    """Stationary Gauss-Markov process with covariance sigma^2 exp(-kappa |tau|)."""

    sigma: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        sigma, kappa = float(self.sigma), float(self.kappa)
        if not math.isfinite(sigma) or sigma < 0.0:
            raise InvalidRate(f"sigma must be finite and >= 0, got {sigma!r}")
        if not math.isfinite(kappa) or kappa <= 0.0:
            raise InvalidRate(f"kappa must be finite and > 0, got {kappa!r}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "kappa", kappa)

    @property
    def variance(self):
        return self.sigma * self.sigma


@dataclass(frozen=True)
class ToiTerms:
    """Intermediate expectations behind the edge-tier closed forms."""

    e_x_wt: float
    e_x_wc: float
    e_exp_T: float
    e_exp_XT: float


def _as_tandem(rates):
    if isinstance(rates, TandemRates):
        return rates
    return TandemRates(*rates)


def _as_multisource(rates):
    if isinstance(rates, MultiSourceRates):
        return rates
    return MultiSourceRates(*rates)


# ---------------------------------------------------------------------------
# edge tier, stochastic (Poisson) generation


def _x_wt(lam, mu_t):
    return lam / (mu_t * mu_t * (mu_t - lam))


def _x_wc(lam, mu_t, mu_c):
    # cross term uses (mu_t + mu_c - lam); the summary formula prints mu_c + mu_c
    return lam / (mu_c * mu_c * (mu_c - lam)) + lam / (mu_t * mu_c * (mu_t + mu_c - lam))


def toi_edge(rates):
    """Average ToI of the M/M/1 -> M/M/1 tandem.

    ``rates`` is a :class:`TandemRates` or a ``(lam, mu_t, mu_c)`` tuple.
    """
    r = _as_tandem(rates).check_stable()
    lam, mu_t, mu_c = r.lam, r.mu_t, r.mu_c
    return (
        lam * lam / (mu_t * mu_t * (mu_t - lam))
        + 1.0 / mu_t
        + lam * lam / (mu_c * mu_c * (mu_c - lam))
        + 1.0 / mu_c
        + lam * lam / (mu_t * mu_c * (mu_t + mu_c - lam))
        + 1.0 / lam
    )


def _vtoi_unit(lam, mu_t, mu_c, kappa):
    """Process-related ToI for sigma = 1."""
    k = kappa
    at, ac = mu_t - lam, mu_c - lam
    s = k + mu_t + mu_c - lam
    bracket = (
        1.0 / (k * (k + lam))
        - 1.0 / ((k + at) * (k + ac))
        + lam / ((k + ac) * (k + at) * s)
        - ac / ((k + at) * (k + mu_t) * s)
        - at / ((k + ac) * (k + mu_c) * s)
    )
    return (
        1.0
        - lam * at * ac / (k * (k + at) * (k + ac))
        + lam * lam * mu_t * mu_c / ((k + mu_t) * (k + mu_c)) * bracket
    )


def vtoi_edge(rates, gm):
    """Process-related ToI (time-average MSE) of the edge-tier tandem."""
    r = _as_tandem(rates).check_stable()
    return gm.variance * _vtoi_unit(r.lam, r.mu_t, r.mu_c, gm.kappa)


def toi_terms(rates, kappa):
    """Intermediate expectations E[X W_t], E[X W_c], E[e^-kT], E[e^-k(X+T)]."""
    r = _as_tandem(rates).check_stable()
    kappa = _positive("kappa", kappa)
    lam, mu_t, mu_c = r.lam, r.mu_t, r.mu_c
    e_exp_T = (mu_t - lam) * (mu_c - lam) / ((kappa + mu_t - lam) * (kappa + mu_c - lam))
    v = _vtoi_unit(lam, mu_t, mu_c, kappa)
    return ToiTerms(
        e_x_wt=_x_wt(lam, mu_t),
        e_x_wc=_x_wc(lam, mu_t, mu_c),
        e_exp_T=e_exp_T,
        e_exp_XT=e_exp_T - kappa * (1.0 - v) / lam,
    )


# ---------------------------------------------------------------------------
# edge tier, zero-wait generation


def _check_zero_wait(mu_t, mu_c):
    mu_t = _positive("mu_t", mu_t)
    mu_c = _positive("mu_c", mu_c)
    _require_stable(mu_t, mu_c, "mu_t < mu_c")
    return mu_t, mu_c


def toi_edge_zero_wait(mu_t, mu_c, variant="printed"):
    """Average ToI when a task is generated the instant the channel frees up.

    ``printed`` is the simpler closed form that treats the generation gap
    as independent of the next computation wait.  ``exact`` keeps that
    correlation and agrees with the simulator.
    """
    a, c = _check_zero_wait(mu_t, mu_c)
    if variant == "printed":
        return 2.0 / a + 1.0 / c + a / (c * (c - a))
    if variant == "exact":
        nu = c - a
        return (
            1.0 / a
            + 2.0 / c
            + a * a / (nu * c * c)
            + c / (a * (c + a))
            - a * a / ((c + a) * c * c)
        )
    raise ValueError(f"unknown variant {variant!r}; expected 'printed' or 'exact'")


def zero_wait_exp_ws(mu_t, mu_c, kappa):
    """E[exp(-kappa (W_c + S_t))] including the atom of W_c at zero."""
    a, c, k = mu_t, mu_c, kappa
    return a / (k + a) - k * a / ((k + c) * (k + c - a))


def _vtoi_zero_wait_unit(a, c, k, variant):
    if variant == "printed":
        nu = c - a
        return (
            1.0
            - a * a * nu / (k * (k + a) * (k + nu))
            + a ** 3 * c * nu / (k * (k + a) * (k + c) ** 2 * (k + nu))
        )
    if variant == "corrected":
        return 1.0 - a * c * zero_wait_exp_ws(a, c, k) / ((k + a) * (k + c))
    if variant == "exact":
        nu = c - a

        def joint(s):
            # E[exp(-k X_n - s U)], U the computation sojourn of the previous task
            return c / (c + s) * (a / (a + k) - s * a / ((nu + s) * (c + k)))

        return 1.0 - a / (c + k) * (joint(k) + c * joint(a + k) / (a + k))
    raise ValueError(
        f"unknown variant {variant!r}; expected one of {', '.join(ZERO_WAIT_VARIANTS)}"
    )


def vtoi_edge_zero_wait(mu_t, mu_c, gm, variant="exact"):
    """Process-related ToI under zero-wait generation.

    ``printed`` keeps the original algebra, independence and all (it can go
    negative); ``corrected`` restores the zero-wait atom of W_c but keeps the
    independence assumption; ``exact`` is the full derivation.
    """
    a, c = _check_zero_wait(mu_t, mu_c)
    return gm.variance * _vtoi_zero_wait_unit(a, c, gm.kappa, variant)


# ---------------------------------------------------------------------------
# fog tier


def toi_fog(rates):
    """Average ToI of the tagged source at a shared (multi-source) computation queue."""
    r = _as_multisource(rates).check_stable()
    li, lo, mu, mc = r.lambda_i, r.lambda_other, r.mu_it, r.mu_c
    lam = li + lo
    mo = mc - lo
    g = mu + mc - lam
    return (
        li * li / (mu * mu * (mu - li))
        + 1.0 / mu
        + 1.0 / mc
        + li * li / ((mc - lam) * mo)
        * (1.0 / mo - li / (mu * (mu - li)) + mo / ((mu - li) * g))
        + li * li * lo / (mc * mo)
        * (2.0 / (mo * mo) - li / (mu * (mu - li) * mo) + mo / ((mu - li) * g * g))
        + li * lo * (mc - lam) / (mc * mo * mo)
        * (1.0 / li - li / (mu * g) + 1.0 / mo)
        + 1.0 / li
    )


def toi_fog_zero_wait(mu_it, mu_c, lambda_other):
    """Average ToI of a zero-wait tagged source at a shared computation queue."""
    mu = _positive("mu_it", mu_it)
    mc = _positive("mu_c", mu_c)
    lo = float(lambda_other)
    if not math.isfinite(lo) or lo < 0.0:
        raise InvalidRate(f"lambda_other must be finite and >= 0, got {lo!r}")
    _require_stable(mu + lo, mc, "mu_it + lambda_other < mu_c")
    mo = mc - lo
    return 2.0 / mu + 1.0 / mc + (mu / (mo - mu) + lo / mc) / mo


def mm1_aoi(lam, mu):
    """Textbook average AoI of a single FCFS M/M/1 queue."""
    lam = _positive("lam", lam)
    mu = _positive("mu", mu)
    _require_stable(lam, mu, "lambda < mu")
    return 1.0 / mu + 1.0 / lam + lam * lam / (mu * mu * (mu - lam))


def stage_delays(rates):
    """Mean sojourn in the transmission and computation stages (M/M/1 each)."""
    r = _as_tandem(rates).check_stable()
    return 1.0 / (r.mu_t - r.lam), 1.0 / (r.mu_c - r.lam)
