"""Min-max ToI resource allocation for multi-device edge offloading.

Each device m generates tasks at rate lam_m, gets a bandwidth share beta_m
and CPU budget f_m, and sees the edge-tier ToI of its own tandem.  The
problem min_{lam, beta, f} max_m Delta_m is solved by alternating two convex
blocks:

* P2 (rates): with (beta, f) fixed the devices decouple, and each lam_m is a
  1-D convex minimisation (vectorised golden-section search).
* P3 (resources): with lam fixed, min tau s.t. Delta_m(beta_m, f_m) <= tau
  and the budgets, a convex program solved with cvxpy and then refined to
  machine precision on its optimality conditions.
"""
from __future__ import annotations

import logging
import math
import threading
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy import optimize

from .analytic import toi_edge
from .errors import (
    DegenerateAllocation,
    Infeasible,
    InvalidProfile,
    NonConvergence,
    StabilityViolation,
)

log = logging.getLogger(__name__)

#: lam_m <= (1 - MARGIN) * min(mu_t, mu_c) inside the optimiser
MARGIN = 1e-4
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

STRATEGIES = (
    "proposed",
    "uniform_computation",
    "proportional_communication",
    "proportional_uniform",
    "task_aware_computation",
    "task_channel_aware",
    "fixed_generation",
)
FIXED_GENERATION_RATE = 0.1


@dataclass(frozen=True)
class DeviceProfile:
    p: float          # transmit power, W
    h: float          # channel propagation coefficient
    c: float          # CPU cycles per bit
    d_bar: float      # mean task size, bits
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("p", "h", "c", "d_bar", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise InvalidProfile(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)

    def spectral_efficiency(self, budget):
        """log2(1 + p h^2 / N0), bit/s/Hz."""
        return math.log2(1.0 + self.p * self.h * self.h / budget.noise)


@dataclass(frozen=True)
class SystemBudget:
    bandwidth: float  # Hz
    noise: float      # W
    f_max: float      # CPU cycles/s

    def __post_init__(self):
        for name in ("bandwidth", "noise", "f_max"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise InvalidProfile(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)


@dataclass
class Allocation:
    lam: np.ndarray
    beta: np.ndarray
    f: np.ndarray
    tau: float
    delta: np.ndarray
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    strategy: str = "proposed"
    infeasible_devices: list = field(default_factory=list)

    def as_dict(self):
        return {
            "strategy": self.strategy,
            "tau": self.tau,
            "lambda": self.lam.tolist(),
            "beta": self.beta.tolist(),
            "f": self.f.tolist(),
            "delta": self.delta.tolist(),
            "history": list(self.history),
            "iterations": self.iterations,
            "converged": self.converged,
            "infeasible_devices": list(self.infeasible_devices),
        }


# ---------------------------------------------------------------------------
# rates and per-device ToI


def service_rates(profile, beta, f, budget):
    """(mu_t, mu_c) for one device: R / d_bar and f / (c d_bar)."""
    beta, f = float(beta), float(f)
    if beta < 0 or f < 0:
        raise InvalidProfile("beta and f must be >= 0")
    rate = budget.bandwidth * beta * profile.spectral_efficiency(budget)
    return rate / profile.d_bar, f / (profile.c * profile.d_bar)


def rate_coefficients(profiles, budget):
    """Per-device (mu_t per unit beta, mu_c per unit f/f_max) as arrays."""
    a = np.array([budget.bandwidth * p.spectral_efficiency(budget) / p.d_bar for p in profiles])
    b = np.array([budget.f_max / (p.c * p.d_bar) for p in profiles])
    return a, b


def device_toi(lam, mu_t, mu_c):
    """Edge-tier ToI of one device; same contract as :func:`analytic.toi_edge`."""
    return toi_edge((lam, mu_t, mu_c))


def _delta(lam, mt, mc):
    """Vectorised ToI, +inf outside the stability region."""
    lam, mt, mc = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (lam, mt, mc)))
    ok = (lam > 0) & (lam < mt) & (lam < mc)
    out = np.full(lam.shape, np.inf)
    l, t, c = lam[ok], mt[ok], mc[ok]
    l2 = l * l
    out[ok] = (
        l2 / (t * t * (t - l)) + 1.0 / t
        + l2 / (c * c * (c - l)) + 1.0 / c
        + l2 / (t * c * (t + c - l)) + 1.0 / l
    )
    return out


def _ddelta(lam, mt, mc):
    """Partial derivatives of Delta w.r.t. (mu_t, mu_c)."""
    l2 = lam * lam
    s = mt + mc - lam
    d_t = (
        -l2 * (3.0 * mt - 2.0 * lam) / (mt ** 3 * (mt - lam) ** 2)
        - 1.0 / mt ** 2
        - l2 * (2.0 * mt + mc - lam) / (mt ** 2 * mc * s * s)
    )
    d_c = (
        -l2 * (3.0 * mc - 2.0 * lam) / (mc ** 3 * (mc - lam) ** 2)
        - 1.0 / mc ** 2
        - l2 * (mt + 2.0 * mc - lam) / (mt * mc ** 2 * s * s)
    )
    return d_t, d_c


# ---------------------------------------------------------------------------
# P2: generation rates


def golden_section(fun, lo, hi, rtol=1e-9, max_iter=200):
    """Vectorised golden-section search for minimisers of unimodal ``fun`` on [lo, hi]."""
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if np.all(b - a <= rtol * np.abs(b)):
            break
        left = fc < fd
        # minimum in [a, d] where left, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INV_PHI * (b - a)
        new_d = a + INV_PHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = fun(np.where(left, c_next, d_next))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    x = 0.5 * (a + b)
    return x


def _p2_rates(mt, mc):
    mt, mc = np.asarray(mt, dtype=float), np.asarray(mc, dtype=float)
    if np.any(mt <= 0) or np.any(mc <= 0):
        bad = np.flatnonzero((mt <= 0) | (mc <= 0)).tolist()
        raise DegenerateAllocation(f"devices {bad} have zero service rate")
    ub = (1.0 - MARGIN) * np.minimum(mt, mc)
    lam = golden_section(lambda x: _delta(x, mt, mc), np.zeros_like(ub) + 1e-12 * ub, ub)
    return lam


def solve_p2(betas, fs, profiles, budget):
    """Optimal generation rate of every device for fixed (beta, f)."""
    a, b = rate_coefficients(profiles, budget)
    mt = a * np.asarray(betas, dtype=float)
    mc = b * np.asarray(fs, dtype=float) / budget.f_max
    return _p2_rates(mt, mc)


# ---------------------------------------------------------------------------
# P3: resources


class _P3Problem:
    """Parametrised (DPP) epigraph program with both resources free.

    Rates are expressed per unit of the device's own generation rate,
    x = mu_t / lam and y = mu_c / lam, so that lam * Delta = G(x, y) is a
    parameter-free convex function and Delta_m <= tau reads G <= lam_m tau.
    """

    def __init__(self, m):
        self.lam = cp.Parameter(m, nonneg=True)
        # budget weights: beta = lam x / a, phi = lam y / b
        self.w_beta = cp.Parameter(m, nonneg=True)
        self.w_phi = cp.Parameter(m, nonneg=True)
        tau = cp.Variable()
        x, y = cp.Variable(m), cp.Variable(m)
        floor = 1.0 / (1.0 - MARGIN)
        cons = [
            x >= floor, cp.sum(cp.multiply(self.w_beta, x)) <= 1,
            y >= floor, cp.sum(cp.multiply(self.w_phi, y)) <= 1,
        ]
        for k in range(m):
            g = (
                1.0
                + cp.inv_prod(cp.hstack([x[k], y[k], x[k] + y[k] - 1.0]))
                + cp.inv_prod(cp.hstack([x[k], x[k], x[k] - 1.0])) + cp.inv_pos(x[k])
                + cp.inv_prod(cp.hstack([y[k], y[k], y[k] - 1.0])) + cp.inv_pos(y[k])
            )
            cons.append(g <= self.lam[k] * tau)
        self.x, self.y, self.tau = x, y, tau
        self.problem = cp.Problem(cp.Minimize(tau), cons)


# cvxpy parameters are mutable, so each thread keeps its own compiled problems
_P3_CACHE = threading.local()


def _p3_problem(m):
    cache = getattr(_P3_CACHE, "problems", None)
    if cache is None:
        cache = _P3_CACHE.problems = {}
    if m not in cache:
        cache[m] = _P3Problem(m)
    return cache[m]


def _check_p3_feasible(lam, a, b, beta_fixed, phi_fixed):
    need_beta = lam / ((1.0 - MARGIN) * a)
    need_phi = lam / ((1.0 - MARGIN) * b)
    bad = set()
    if beta_fixed is not None:
        bad |= set(np.flatnonzero(beta_fixed < need_beta).tolist())
    elif need_beta.sum() >= 1.0:
        bad |= set(range(len(lam)))
    if phi_fixed is not None:
        bad |= set(np.flatnonzero(phi_fixed < need_phi).tolist())
    elif need_phi.sum() >= 1.0:
        bad |= set(range(len(lam)))
    if bad:
        raise Infeasible(
            f"no allocation keeps devices {sorted(bad)} stable for the given rates",
            devices=sorted(bad),
        )


def solve_p3(lambdas, profiles, budget, fixed_beta=None, fixed_f=None, solver="CLARABEL"):
    """Min-max resource split for fixed generation rates.

    Returns ``(beta, f)``.  Either block can be pinned with ``fixed_beta`` /
    ``fixed_f``; a pinned block is returned unchanged.
    """
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("fixed lambdas must be > 0")
    a, b = rate_coefficients(profiles, budget)
    beta_fixed = None if fixed_beta is None else np.asarray(fixed_beta, dtype=float)
    phi_fixed = None if fixed_f is None else np.asarray(fixed_f, dtype=float) / budget.f_max
    _check_p3_feasible(lam, a, b, beta_fixed, phi_fixed)
    if beta_fixed is not None and phi_fixed is not None:
        return beta_fixed.copy(), phi_fixed * budget.f_max

    # one pinned block: bisection on the common delay is exact, no conic solve needed
    if phi_fixed is not None:
        beta, _ = _equalize(lam, phi_fixed, a, b, "beta")
        return beta, phi_fixed * budget.f_max
    if beta_fixed is not None:
        phi, _ = _equalize(lam, beta_fixed, b, a, "phi")
        return beta_fixed.copy(), phi * budget.f_max

    prob = _p3_problem(len(lam))
    prob.lam.value = lam
    prob.w_beta.value = lam / a
    prob.w_phi.value = lam / b
    with warnings.catch_warnings():
        # an inaccurate conic solution is only a starting point for the polish below
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.problem.solve(solver=solver)
        except cp.SolverError:
            prob.problem.solve(solver="SCS", eps=1e-10, max_iters=200_000)
    if prob.problem.status not in ("optimal", "optimal_inaccurate"):
        raise Infeasible(f"P3 solver status {prob.problem.status}")
    if prob.problem.status == "optimal_inaccurate":
        log.debug("P3 conic solve inaccurate for m=%d; relying on refinement", len(lam))

    def _shares(z, coef):
        x = np.maximum(lam * np.asarray(z.value, dtype=float) / coef, 0.0)
        return x / x.sum()

    phi = _shares(prob.y, b)
    beta, _ = _equalize(lam, phi, a, b, "beta")
    beta, phi = _kkt_refine(lam, a, b, beta, phi)
    return beta, phi * budget.f_max


def _equalize(lam, other, coef_self, coef_other, which, iters=60):
    """Exact min-max split of one resource with the other held fixed.

    Bisects on tau until the least shares meeting Delta_m <= tau use the
    whole budget.  Returns ``(shares, tau)``.
    """
    def shares(tau):
        return _min_resource_for(tau, lam, other, coef_self, coef_other, which, iters=iters)

    full = np.ones_like(lam)
    if which == "beta":
        lo = float(np.max(_delta(lam, coef_self * full, coef_other * other)))
    else:
        lo = float(np.max(_delta(lam, coef_other * other, coef_self * full)))
    hi = 2.0 * lo
    while not np.sum(shares(hi)) <= 1.0:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.sum(shares(mid)) <= 1.0:
            hi = mid
        else:
            lo = mid
    x = shares(hi)
    return x / x.sum(), hi


def _kkt_refine(lam, a, b, beta, phi, tol=1e-9):
    """Newton-type solve of the P3 optimality system from a near-optimal point.

    Unknowns are log shares, log tau and the log price ratio theta between
    bandwidth and CPU; at the optimum every Delta_m equals tau, both budgets
    bind, and each device's marginal-rate ratio equals theta.  The input is
    returned unchanged if the solve does not reach ``tol`` or fails to improve.
    """
    m = len(lam)
    mt, mc = a * beta, b * phi
    tau0 = float(np.max(_delta(lam, mt, mc)))
    d_t, d_c = _ddelta(lam, mt, mc)
    theta0 = float(np.median(a * d_t / (b * d_c)))

    def residual(z):
        be, ph = np.exp(z[:m]), np.exp(z[m:2 * m])
        tau, theta = np.exp(z[-2:])
        mt, mc = a * be, b * ph
        if np.any(mt <= lam) or np.any(mc <= lam):
            return np.full(2 * m + 2, 1e3)
        d_t, d_c = _ddelta(lam, mt, mc)
        return np.concatenate([
            _delta(lam, mt, mc) / tau - 1.0,
            np.log(a * d_t / (b * d_c)) - np.log(theta),
            [be.sum() - 1.0, ph.sum() - 1.0],
        ])

    z0 = np.concatenate([np.log(beta), np.log(phi), [np.log(tau0), np.log(theta0)]])
    sol = optimize.root(residual, z0, method="hybr", options={"xtol": 1e-14})
    if not np.all(np.isfinite(sol.x)) or np.max(np.abs(residual(sol.x))) > tol:
        return beta, phi
    nb, nphi = np.exp(sol.x[:m]), np.exp(sol.x[m:2 * m])
    nb, nphi = nb / max(nb.sum(), 1.0), nphi / max(nphi.sum(), 1.0)
    if np.max(_delta(lam, a * nb, b * nphi)) > tau0:
        return beta, phi
    return nb, nphi


def _min_resource_for(tau, lam, other, coef_self, coef_other, which, iters=100):
    """Smallest share of one resource meeting Delta <= tau, others fixed (vectorised bisection).

    Returns +inf where no share in [floor, 1] suffices.
    """
    lo = lam / ((1.0 - MARGIN) * coef_self)
    hi = np.ones_like(lam)

    def delta_at(x):
        if which == "beta":
            return _delta(lam, coef_self * x, coef_other * other)
        return _delta(lam, coef_other * other, coef_self * x)

    feasible = (lo < 1.0) & (delta_at(hi) <= tau)
    lo = np.minimum(lo, 1.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = delta_at(mid) <= tau
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return np.where(feasible, hi, np.inf)


def _project_capped_simplex(v, lower):
    """Euclidean projection onto {x >= lower, sum(x) = 1}."""
    budget = 1.0 - lower.sum()
    y = v - lower
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - budget
    ind = np.arange(1, len(y) + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return lower + np.maximum(y - theta, 0.0)


def solve_p3_reference(lambdas, profiles, budget, rtol=1e-8, pg_iters=400):
    """Independent P3 solver: bisection on tau with projected-gradient feasibility.

    For a trial tau, g_m(beta_m) is the least CPU share that keeps device m
    at Delta_m <= tau; tau is feasible iff min over the bandwidth simplex of
    sum_m g_m(beta_m) is at most 1.  That inner convex problem is solved by
    projected gradient with Armijo backtracking.  Returns (beta, f, tau).
    """
    lam = np.asarray(lambdas, dtype=float)
    a, b = rate_coefficients(profiles, budget)
    _check_p3_feasible(lam, a, b, None, None)
    m = len(lam)

    def g_and_grad(beta, tau):
        phi = _min_resource_for(tau, lam, beta, b, a, "phi")
        mt, mc = a * beta, b * phi
        fin = np.isfinite(phi)
        grad = np.full(m, -np.inf)
        d_t, d_c = _ddelta(lam[fin], mt[fin], mc[fin])
        grad[fin] = -(a[fin] * d_t) / (b[fin] * d_c)
        return phi, grad

    def beta_floor(tau):
        # least bandwidth share with unlimited CPU
        return _min_resource_for(tau, lam, np.full(m, 1e12), a, b, "beta")

    def feasible(tau, beta0):
        lower = beta_floor(tau)
        if not np.all(np.isfinite(lower)) or lower.sum() >= 1.0:
            return False, beta0
        lower = lower * (1.0 + 1e-9)
        beta = _project_capped_simplex(beta0, lower)
        phi, grad = g_and_grad(beta, tau)
        if not np.all(np.isfinite(phi)):
            beta = _project_capped_simplex(lower + (1.0 - lower.sum()) / m, lower)
            phi, grad = g_and_grad(beta, tau)
        val = phi.sum()
        step = 1e-2
        for _ in range(pg_iters):
            if val <= 1.0:
                return True, beta
            while step > 1e-18:
                cand = _project_capped_simplex(beta - step * grad, lower)
                phi_c, grad_c = g_and_grad(cand, tau)
                val_c = phi_c.sum()
                if np.isfinite(val_c) and val_c <= val - 1e-4 * np.dot(grad, beta - cand):
                    break
                step *= 0.5
            else:
                break
            if val - val_c < 1e-15:
                beta, val = cand, val_c
                break
            beta, grad, val = cand, grad_c, val_c
            step *= 2.0
        return val <= 1.0, beta

    beta = np.full(m, 1.0 / m)
    hi = float(np.max(_delta(lam, a * beta, b * beta)))
    if not np.isfinite(hi):
        hi = 1.0
        while not feasible(hi, beta)[0]:
            hi *= 2.0
    lo = float(np.max(_delta(lam, a, b)))  # each device alone with everything
    best = beta
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        ok, cand = feasible(mid, best)
        if ok:
            hi, best = mid, cand
        else:
            lo = mid
    phi = _min_resource_for(hi, lam, best, b, a, "phi")
    phi = phi / max(phi.sum(), 1.0)
    return best, phi * budget.f_max, hi


# ---------------------------------------------------------------------------
# block coordinate descent


def _evaluate(lam, beta, f, a, b, f_max):
    return _delta(lam, a * beta, b * f / f_max)


def solve_p1(profiles, budget, init=None, tol=1e-6, max_iter=200,
             fixed_lam=None, fixed_beta=None, fixed_f=None, strategy="proposed",
             raise_on_nonconvergence=False):
    """Block coordinate descent over (lam) and (beta, f).

    ``init`` is an optional ``(beta, f)`` starting allocation (default
    uniform).  Any block may be pinned via the ``fixed_*`` arguments, which
    is how the baselines reuse this loop.  The tau history is recorded after
    every outer iteration and is non-increasing: a block update that would
    raise the objective (solver round-off) is rejected.
    """
    profiles = list(profiles)
    m = len(profiles)
    if m == 0:
        raise ValueError("need at least one device")
    a, b = rate_coefficients(profiles, budget)
    fm = budget.f_max

    if init is None:
        beta = np.full(m, 1.0 / m) if fixed_beta is None else np.asarray(fixed_beta, float)
        f = np.full(m, fm / m) if fixed_f is None else np.asarray(fixed_f, float)
    else:
        beta, f = (np.asarray(x, dtype=float) for x in init)
    if fixed_beta is not None:
        beta = np.asarray(fixed_beta, dtype=float)
    if fixed_f is not None:
        f = np.asarray(fixed_f, dtype=float)

    if fixed_lam is not None:
        lam = np.broadcast_to(np.asarray(fixed_lam, dtype=float), (m,)).copy()
        beta, f = solve_p3(lam, profiles, budget, fixed_beta, fixed_f)
    else:
        lam = solve_p2(beta, f, profiles, budget)
    delta = _evaluate(lam, beta, f, a, b, fm)
    history = [float(delta.max())]

    converged = False
    it = 0
    resources_fixed = fixed_beta is not None and fixed_f is not None
    for it in range(1, max_iter + 1):
        old = np.concatenate([lam, beta, f / fm])
        if fixed_lam is None:
            cand = solve_p2(beta, f, profiles, budget)
            d_new = _evaluate(cand, beta, f, a, b, fm)
            lam = np.where(d_new <= delta, cand, lam)
            delta = np.minimum(d_new, delta)
        if not resources_fixed:
            nb, nf = solve_p3(lam, profiles, budget, fixed_beta, fixed_f)
            d_new = _evaluate(lam, nb, nf, a, b, fm)
            if d_new.max() <= delta.max():
                beta, f, delta = nb, nf, d_new
        history.append(float(delta.max()))
        new = np.concatenate([lam, beta, f / fm])
        change = np.max(np.abs(new - old) / np.maximum(np.abs(new), 1e-12))
        # with a single free block one exact update is already the fixed point
        if change < tol or fixed_lam is not None or resources_fixed:
            converged = True
            break

    if not converged:
        msg = f"{strategy}: no convergence after {max_iter} iterations"
        if raise_on_nonconvergence:
            raise NonConvergence(msg)
        log.warning(msg)
    return Allocation(
        lam=lam, beta=beta, f=f, tau=float(delta.max()), delta=delta,
        history=history, iterations=it, converged=converged, strategy=strategy,
    )


# ---------------------------------------------------------------------------
# baselines


def proportional_bandwidth(profiles, budget):
    """Bandwidth inversely proportional to spectral efficiency."""
    inv = np.array([1.0 / p.spectral_efficiency(budget) for p in profiles])
    return inv / inv.sum()


def task_aware_cpu(profiles, budget):
    w = np.sqrt([p.alpha * p.d_bar for p in profiles])
    return w / w.sum() * budget.f_max


def task_channel_aware_bandwidth(profiles, budget):
    # R_m taken at full bandwidth so the rule does not depend on beta itself
    w = np.sqrt([p.d_bar / (budget.bandwidth * p.spectral_efficiency(budget)) for p in profiles])
    return w / w.sum()


def run_baseline(strategy, profiles, budget, **kwargs):
    """Allocation produced by one of :data:`STRATEGIES`.

    An infeasible pinned configuration is reported on the returned
    allocation (``tau = inf``, ``infeasible_devices`` set) rather than raised.
    """
    profiles = list(profiles)
    m = len(profiles)
    uniform_f = np.full(m, budget.f_max / m)
    pins = {
        "proposed": {},
        "uniform_computation": {"fixed_f": uniform_f},
        "proportional_communication": {"fixed_beta": proportional_bandwidth(profiles, budget)},
        "proportional_uniform": {
            "fixed_beta": proportional_bandwidth(profiles, budget),
            "fixed_f": uniform_f,
        },
        "task_aware_computation": {"fixed_f": task_aware_cpu(profiles, budget)},
        "task_channel_aware": {
            "fixed_beta": task_channel_aware_bandwidth(profiles, budget),
            "fixed_f": task_aware_cpu(profiles, budget),
        },
        "fixed_generation": {"fixed_lam": np.full(m, FIXED_GENERATION_RATE)},
    }
    if strategy not in pins:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    try:
        return solve_p1(profiles, budget, strategy=strategy, **pins[strategy], **kwargs)
    except Infeasible as exc:
        beta = pins[strategy].get("fixed_beta", np.full(m, 1.0 / m))
        f = pins[strategy].get("fixed_f", uniform_f)
        lam = pins[strategy].get("fixed_lam", np.full(m, np.nan))
        return Allocation(
            lam=np.asarray(lam, float), beta=np.asarray(beta, float), f=np.asarray(f, float),
            tau=math.inf, delta=np.full(m, math.inf), converged=False,
            strategy=strategy, infeasible_devices=exc.devices,
        )


# ---------------------------------------------------------------------------
# convexity diagnostics


def d2delta_dlam2_printed(lam, mu_t, mu_c):
    """Second derivative in lam as printed in the multi-convexity proof."""
    s = mu_t + mu_c
    return (
        2.0 / (mu_t - lam) ** 2
        + 2.0 / (mu_c - lam) ** 2
        + 2.0 / lam ** 3
        + 2.0 * s * s / (mu_t * mu_c * (s - lam) ** 2)
    )


def d2delta_dlam2(lam, mu_t, mu_c):
    """Exact second derivative of Delta in lam."""
    s = mu_t + mu_c
    return (
        2.0 / (mu_t - lam) ** 3
        + 2.0 / (mu_c - lam) ** 3
        + 2.0 / lam ** 3
        + 2.0 * s * s / (mu_t * mu_c * (s - lam) ** 3)
    )


def first_term_d2_printed(lam, mu_t):
    """f''(mu_t) for f = lam^2 / (mu_t^2 (mu_t - lam)), as printed (lam^2 factor dropped)."""
    d = mu_t - lam
    return 6.0 / (mu_t ** 4 * d) + 4.0 / (mu_t ** 3 * d * d) + 2.0 / (mu_t ** 2 * d ** 3)


def verify_multiconvexity(lam, mu_t, mu_c, step=1e-4, rtol=1e-4):
    """Finite-difference convexity checks of Delta at one point.

    (i) d2Delta/dlam2 > 0, compared against both the printed and the exact
    closed form; (ii) the (mu_t, mu_c) Hessian of the cross term
    lam^2 / (mu_t mu_c (mu_t + mu_c - lam)) is positive definite; (iii) the
    first term is convex in mu_t.  Returns a dict of values and booleans;
    ``passed`` requires every check including agreement with the printed
    second derivative, ``convex`` only the sign checks.
    """
    lam, mu_t, mu_c = float(lam), float(mu_t), float(mu_c)
    if not (0 < lam < min(mu_t, mu_c)) or lam + step >= min(mu_t, mu_c) or lam <= step:
        raise StabilityViolation("lambda < min(mu_t, mu_c)")
    h = step

    def delta(x):
        return float(_delta(x, mu_t, mu_c))

    d2_fd = (delta(lam + h) - 2.0 * delta(lam) + delta(lam - h)) / (h * h)
    d2_printed = d2delta_dlam2_printed(lam, mu_t, mu_c)
    d2_exact = d2delta_dlam2(lam, mu_t, mu_c)

    def cross(x, y):
        return lam * lam / (x * y * (x + y - lam))

    hx, hy = h * mu_t, h * mu_c
    f0 = cross(mu_t, mu_c)
    hxx = (cross(mu_t + hx, mu_c) - 2 * f0 + cross(mu_t - hx, mu_c)) / hx ** 2
    hyy = (cross(mu_t, mu_c + hy) - 2 * f0 + cross(mu_t, mu_c - hy)) / hy ** 2
    hxy = (
        cross(mu_t + hx, mu_c + hy) - cross(mu_t + hx, mu_c - hy)
        - cross(mu_t - hx, mu_c + hy) + cross(mu_t - hx, mu_c - hy)
    ) / (4 * hx * hy)
    det = hxx * hyy - hxy * hxy

    def first(x):
        return lam * lam / (x * x * (x - lam))

    f_fd = (first(mu_t + hx) - 2 * first(mu_t) + first(mu_t - hx)) / hx ** 2
    f_exact = lam * lam * first_term_d2_printed(lam, mu_t)

    report = {
        "point": (lam, mu_t, mu_c),
        "d2_fd": d2_fd,
        "d2_printed": d2_printed,
        "d2_exact": d2_exact,
        "d2_positive": d2_fd > 0,
        "d2_matches_printed": abs(d2_fd - d2_printed) <= rtol * abs(d2_printed),
        "d2_matches_exact": abs(d2_fd - d2_exact) <= rtol * abs(d2_exact),
        "cross_hessian": ((hxx, hxy), (hxy, hyy)),
        "cross_det": det,
        "cross_trace": hxx + hyy,
        "cross_pd": det > 0 and hxx + hyy > 0,
        "first_term_d2_fd": f_fd,
        "first_term_d2": f_exact,
        "first_term_convex": f_fd > 0,
    }
    report["convex"] = report["d2_positive"] and report["cross_pd"] and report["first_term_convex"]
    report["passed"] = report["convex"] and report["d2_matches_printed"]
    return report


# ---------------------------------------------------------------------------
# instances


def default_budget(bandwidth=1e4, f_max=5e9, noise_dbm_hz=-174.0):
    noise = 10 ** ((noise_dbm_hz - 30.0) / 10.0) * bandwidth
    return SystemBudget(bandwidth=bandwidth, noise=noise, f_max=f_max)


def random_profiles(m, rng, p=0.25, c=30.0, d_range=(50.0, 300.0), radius=200.0,
                    min_distance=10.0, fading=True):
    """Devices dropped uniformly in a disc around the base station.

    Channel gain h^2 = 10^(-PL/10) * |g|^2 with PL = 128.1 + 37.6 log10(d_km)
    and Rayleigh |g|^2 ~ Exp(1), held fixed (quasi-static).
    """
    rng = np.random.default_rng(rng)
    d = np.sqrt(rng.uniform((min_distance / radius) ** 2, 1.0, m)) * radius
    pl_db = 128.1 + 37.6 * np.log10(d / 1000.0)
    gain = 10 ** (-pl_db / 10.0)
    if fading:
        gain = gain * rng.exponential(1.0, m)
    sizes = rng.uniform(*d_range, m)
    return [
        DeviceProfile(p=p, h=float(np.sqrt(g)), c=c, d_bar=float(s))
        for g, s in zip(gain, sizes)
    ]


def channel_ratio_profiles(ratio, budget, base_efficiency=4.0, p=0.25, c=30.0, d_bar=150.0):
    """Two devices whose spectral efficiencies differ by ``ratio`` (device 2 worse)."""
    def h_for(se):
        return math.sqrt((2.0 ** se - 1.0) * budget.noise / p)

    return [
        DeviceProfile(p=p, h=h_for(base_efficiency * ratio), c=c, d_bar=d_bar),
        DeviceProfile(p=p, h=h_for(base_efficiency), c=c, d_bar=d_bar),
    ]
