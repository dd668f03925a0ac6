"""Monte Carlo simulation of transmission -> computation tandems.

Both stages are single-server FIFO queues with exponential services, so a
run reduces to two Lindley recursions (``kernels.fifo_departures``) over
pre-drawn variates.  Random streams are split from the master seed with
``numpy.random.SeedSequence``::

    SeedSequence(seed, spawn_key=(replication,)).spawn(5)
      -> [generation, transmission, computation,
          interferer arrivals, interferer services]

Variates are drawn as standard exponentials and divided by the rate, so
runs that differ only in a rate share common random numbers.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels
from .analytic import STABILITY_EPS, MultiSourceRates, TandemRates
from .errors import InvalidRate, StabilityViolation, TooFewTasks

log = logging.getLogger(__name__)

POLICIES = ("stochastic", "zero_wait")
MIN_TASKS = 1000
TRACE_COLUMNS = ("source_id", "gen_time", "tx_start", "tx_end", "comp_start", "comp_end")

_GEN, _TX, _COMP, _OTHER_ARR, _OTHER_SRV = range(5)


def default_warmup(num_tasks):
    return min(max(10_000, num_tasks // 100), num_tasks // 2)


@dataclass
class SimConfig:
    num_tasks: int = 1_000_000
    warmup: int | None = None
    seed: int = 0
    policy: str = "stochastic"
    replications: int = 1
    batches: int = 32
    allow_unstable: bool = False

    def __post_init__(self):
        self.num_tasks = int(self.num_tasks)
        if self.warmup is None:
            self.warmup = default_warmup(self.num_tasks)
        self.warmup = int(self.warmup)
        self.policy = self.policy.replace("-", "_")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not self.num_tasks > self.warmup >= 0:
            raise ValueError("need num_tasks > warmup >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.batches < 2:
            raise ValueError("batches must be >= 2")


@dataclass(frozen=True)
class TaskRecord:
    source_id: int
    gen_time: float
    tx_start: float
    tx_end: float
    comp_start: float
    comp_end: float


@dataclass
class TaskTrace:
    """Column-oriented task records, ordered by generation time."""

    source_id: np.ndarray
    gen_time: np.ndarray
    tx_start: np.ndarray
    tx_end: np.ndarray
    comp_start: np.ndarray
    comp_end: np.ndarray

    def __len__(self):
        return len(self.gen_time)

    def __iter__(self):
        cols = [getattr(self, c).tolist() for c in TRACE_COLUMNS]
        for row in zip(*cols):
            yield TaskRecord(int(row[0]), *row[1:])

    def select(self, source_id=0):
        mask = self.source_id == source_id
        return TaskTrace(*(getattr(self, c)[mask] for c in TRACE_COLUMNS))

    def tail(self, skip):
        return TaskTrace(*(getattr(self, c)[skip:] for c in TRACE_COLUMNS))

    @classmethod
    def from_records(cls, records):
        rows = [
            (r.source_id, r.gen_time, r.tx_start, r.tx_end, r.comp_start, r.comp_end)
            for r in records
        ]
        if not rows:
            return cls(np.zeros(0, dtype=np.int64), *(np.zeros(0) for _ in range(5)))
        cols = list(zip(*rows))
        return cls(np.asarray(cols[0], dtype=np.int64), *(np.asarray(c, dtype=float) for c in cols[1:]))

    # per-task quantities in queueing notation
    @property
    def system_time(self):
        return self.comp_end - self.gen_time

    @property
    def wait_t(self):
        return self.tx_start - self.gen_time

    @property
    def service_t(self):
        return self.tx_end - self.tx_start

    @property
    def wait_c(self):
        return self.comp_start - self.tx_end

    @property
    def service_c(self):
        return self.comp_end - self.comp_start


@dataclass
class SimEstimate:
    mean: float
    half_width_95: float
    n_effective: int
    alt_mean: float = math.nan  # second, algebraically distinct estimator
    replication_means: list = field(default_factory=list)

    @property
    def ci(self):
        return self.mean - self.half_width_95, self.mean + self.half_width_95

    def as_dict(self):
        return {
            "mean": self.mean,
            "half_width_95": self.half_width_95,
            "n_effective": self.n_effective,
        }


def _streams(seed, replication):
    ss = np.random.SeedSequence(seed, spawn_key=(replication,))
    return [np.random.default_rng(s) for s in ss.spawn(5)]


def _zero_wait_rates(rates):
    if isinstance(rates, TandemRates):
        return rates.mu_t, rates.mu_c
    mu_t, mu_c = (float(x) for x in rates)
    for name, v in (("mu_t", mu_t), ("mu_c", mu_c)):
        if not v > 0:
            raise InvalidRate(f"{name} must be > 0")
    return mu_t, mu_c


def _check(load, cap, constraint, config):
    if load >= (1.0 - STABILITY_EPS) * cap:
        if config.allow_unstable:
            log.warning("simulating unstable queue: %s violated", constraint)
        else:
            raise StabilityViolation(constraint)


def _tagged_front(n, config, rng, lam=None, mu_t=None):
    """Generation instants and transmission stage of the tagged source."""
    s_t = rng[_TX].standard_exponential(n) / mu_t
    if config.policy == "zero_wait":
        tx_end = np.cumsum(s_t)
        gen = np.empty(n)
        gen[0] = 0.0
        gen[1:] = tx_end[:-1]
        return gen, gen.copy(), tx_end
    gen = np.cumsum(rng[_GEN].standard_exponential(n) / lam)
    tx_start, tx_end = kernels.fifo_departures(gen, s_t)
    return gen, tx_start, tx_end


def simulate_tandem(rates, config, replication=0):
    """Simulate the single-source edge tandem.

    ``rates`` is :class:`TandemRates` (or ``(lam, mu_t, mu_c)``) for the
    stochastic policy; for zero-wait it may also be ``(mu_t, mu_c)``.
    """
    rng = _streams(config.seed, replication)
    n = config.num_tasks
    if config.policy == "zero_wait":
        mu_t, mu_c = _zero_wait_rates(rates)
        _check(mu_t, mu_c, "mu_t < mu_c", config)
        gen, tx_start, tx_end = _tagged_front(n, config, rng, mu_t=mu_t)
    else:
        r = rates if isinstance(rates, TandemRates) else TandemRates(*rates)
        _check(r.lam, r.mu_t, "lambda < mu_t", config)
        _check(r.lam, r.mu_c, "lambda < mu_c", config)
        mu_c = r.mu_c
        gen, tx_start, tx_end = _tagged_front(n, config, rng, lam=r.lam, mu_t=r.mu_t)
    s_c = rng[_COMP].standard_exponential(n) / mu_c
    comp_start, comp_end = kernels.fifo_departures(tx_end, s_c)
    return TaskTrace(np.zeros(n, dtype=np.int64), gen, tx_start, tx_end, comp_start, comp_end)


def _poisson_times(rng, rate, horizon):
    """Poisson arrival instants on (0, horizon]."""
    if rate <= 0.0 or horizon <= 0.0:
        return np.zeros(0)
    chunks, t = [], 0.0
    expected = rate * horizon
    size = int(expected + 6.0 * math.sqrt(expected) + 16)
    while t <= horizon:
        times = t + np.cumsum(rng.standard_exponential(size) / rate)
        chunks.append(times)
        t = times[-1]
        size = max(16, int(rate * (horizon - t) * 1.1) + 16)
    times = np.concatenate(chunks)
    return times[times <= horizon]


def simulate_multisource(rates, config, replication=0, interferers="poisson",
                         n_interferers=1, mu_other_t=None):
    """Simulate the fog tier: tagged tandem plus interfering traffic at queue 2.

    With ``interferers="poisson"`` the aggregate other-source traffic enters
    the computation queue as one Poisson stream of rate ``lambda_other``.
    ``interferers="tandem"`` instead runs ``n_interferers`` independent M/M/1
    transmission queues (rate ``lambda_other / n_interferers`` each, service
    ``mu_other_t``, default ``mu_it``) in front of the shared queue.

    Records of the tagged source have ``source_id == 0``.  For zero-wait,
    ``rates`` may be ``(mu_it, mu_c, lambda_other)``.
    """
    rng = _streams(config.seed, replication)
    n = config.num_tasks
    if config.policy == "zero_wait":
        if isinstance(rates, MultiSourceRates):
            mu_it, mu_c, lo = rates.mu_it, rates.mu_c, rates.lambda_other
        else:
            mu_it, mu_c, lo = (float(x) for x in rates)
        if not (mu_it > 0 and mu_c > 0 and lo >= 0):
            raise InvalidRate("need mu_it > 0, mu_c > 0, lambda_other >= 0")
        _check(mu_it + lo, mu_c, "mu_it + lambda_other < mu_c", config)
        gen, tx_start, tx_end = _tagged_front(n, config, rng, mu_t=mu_it)
    else:
        r = rates if isinstance(rates, MultiSourceRates) else MultiSourceRates(*rates)
        _check(r.lambda_i, r.mu_it, "lambda_i < mu_it", config)
        _check(r.total, r.mu_c, "lambda_i + lambda_other < mu_c", config)
        mu_it, mu_c, lo = r.mu_it, r.mu_c, r.lambda_other
        gen, tx_start, tx_end = _tagged_front(n, config, rng, lam=r.lambda_i, mu_t=mu_it)

    horizon = float(tx_end[-1])
    if interferers == "poisson":
        o_gen = _poisson_times(rng[_OTHER_ARR], lo, horizon)
        o_txs = o_txe = o_gen
        o_src = np.ones(len(o_gen), dtype=np.int64)
    elif interferers == "tandem":
        k = int(n_interferers)
        if k < 1:
            raise ValueError("n_interferers must be >= 1")
        mu_o = mu_it if mu_other_t is None else float(mu_other_t)
        if lo > 0:
            _check(lo / k, mu_o, "lambda_other / n_interferers < mu_other_t", config)
        parts = []
        for j in range(k):
            g = _poisson_times(rng[_OTHER_ARR], lo / k, horizon)
            s = rng[_OTHER_SRV].standard_exponential(len(g)) / mu_o
            a, e = kernels.fifo_departures(g, s)
            keep = e <= horizon
            parts.append((g[keep], a[keep], e[keep], np.full(keep.sum(), j + 1, dtype=np.int64)))
        o_gen, o_txs, o_txe, o_src = (np.concatenate(p) for p in zip(*parts))
    else:
        raise ValueError("interferers must be 'poisson' or 'tandem'")

    m = len(o_txe)
    arrivals = np.concatenate([tx_end, o_txe])
    services = np.concatenate([
        rng[_COMP].standard_exponential(n) / mu_c,
        rng[_OTHER_SRV].standard_exponential(m) / mu_c,
    ])
    order = np.argsort(arrivals, kind="stable")
    start_sorted, end_sorted = kernels.fifo_departures(arrivals[order], services[order])
    comp_start = np.empty(n + m)
    comp_end = np.empty(n + m)
    comp_start[order] = start_sorted
    comp_end[order] = end_sorted

    src = np.concatenate([np.zeros(n, dtype=np.int64), o_src])
    g_all = np.concatenate([gen, o_gen])
    by_gen = np.argsort(g_all, kind="stable")
    return TaskTrace(
        src[by_gen],
        g_all[by_gen],
        np.concatenate([tx_start, o_txs])[by_gen],
        np.concatenate([tx_end, o_txe])[by_gen],
        comp_start[by_gen],
        comp_end[by_gen],
    )


# ---------------------------------------------------------------------------
# estimators


def _post_warmup(trace, config, source_id):
    if trace is None or len(trace) == 0:
        raise TooFewTasks("no task records")
    if np.any(trace.source_id != source_id):
        trace = trace.select(source_id)
    warmup = config.warmup if config is not None else 0
    trace = trace.tail(warmup)
    if len(trace) < MIN_TASKS:
        raise TooFewTasks(f"{len(trace)} post-warmup tasks; need at least {MIN_TASKS}")
    return trace


def _batch_ratio(num, den, batches):
    """Ratio estimator sum(num)/sum(den) with a batch-means 95% half-width."""
    mean = num.sum() / den.sum()
    edges = np.linspace(0, len(num), batches + 1).astype(int)
    bn = np.add.reduceat(num, edges[:-1])
    bd = np.add.reduceat(den, edges[:-1])
    ratios = bn / bd
    sd = ratios.std(ddof=1)
    hw = stats.t.ppf(0.975, batches - 1) * sd / math.sqrt(batches)
    return float(mean), float(hw)


def _segments(trace):
    g, c = trace.gen_time, trace.comp_end
    lo = c[:-1] - g[:-1]          # age just after delivery n-1
    hi = c[1:] - g[:-1]           # age just before delivery n
    return lo, hi


def estimate_toi(trace, config=None, source_id=0):
    """Time-average age over the post-warmup delivery intervals.

    ``alt_mean`` holds the per-task form mean(X T + X^2/2) / mean(X).
    """
    tr = _post_warmup(trace, config, source_id)
    batches = config.batches if config is not None else 32
    lo, hi = _segments(tr)
    area = 0.5 * (hi - lo) * (hi + lo)
    dur = hi - lo
    mean, hw = _batch_ratio(area, dur, batches)
    x = np.diff(tr.gen_time)
    t = tr.system_time[1:]
    alt = float(np.mean(x * t + 0.5 * x * x) / np.mean(x))
    return SimEstimate(mean, hw, len(tr), alt_mean=alt)


def estimate_vtoi(trace, gm, config=None, source_id=0):
    """Time-average of sigma^2 (1 - exp(-kappa age)), integrated exactly per segment.

    ``alt_mean`` holds the per-cycle form
    sigma^2 - sigma^2/kappa * (1/mean X) * mean(exp(-k T_{n-1}) - exp(-k (X_n + T_n))).
    """
    tr = _post_warmup(trace, config, source_id)
    batches = config.batches if config is not None else 32
    lo, hi = _segments(tr)
    k, var = gm.kappa, gm.variance
    dur = hi - lo
    drop = -np.exp(-k * lo) * np.expm1(-k * dur)   # e^{-k lo} - e^{-k hi}
    area = var * (dur - drop / k)
    mean, hw = _batch_ratio(area, dur, batches)
    x = np.diff(tr.gen_time)
    alt = var - var / k * float(np.mean(drop)) / float(np.mean(x))
    if var == 0.0:
        mean, hw, alt = 0.0, 0.0, 0.0
    return SimEstimate(mean, hw, len(tr), alt_mean=alt)


def combine_estimates(estimates):
    """Pool per-replication estimates.

    One replication keeps its batch-means half-width; several use a t
    interval over the replication means.
    """
    if len(estimates) == 1:
        e = estimates[0]
        e.replication_means = [e.mean]
        return e
    means = np.array([e.mean for e in estimates])
    r = len(means)
    hw = stats.t.ppf(0.975, r - 1) * means.std(ddof=1) / math.sqrt(r)
    return SimEstimate(
        float(means.mean()),
        float(hw),
        estimates[0].n_effective,
        alt_mean=float(np.mean([e.alt_mean for e in estimates])),
        replication_means=means.tolist(),
    )


def monte_carlo(kind, rates, config, gm=None, workers=1, **kwargs):
    """Run ``config.replications`` simulations and estimate ToI (and V if ``gm``).

    ``kind`` is ``"edge"`` or ``"fog"``; the policy comes from ``config``.
    Replications use independent streams and may run on ``workers``
    threads; the result does not depend on the worker count.
    """
    sim = {"edge": simulate_tandem, "fog": simulate_multisource}[kind]

    def one(rep):
        trace = sim(rates, config, replication=rep, **kwargs)
        toi = estimate_toi(trace, config)
        return toi, (estimate_vtoi(trace, gm, config) if gm is not None else None)

    reps = range(config.replications)
    if workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(r) for r in reps]
    out = {"toi": combine_estimates([r[0] for r in results])}
    if gm is not None:
        out["vtoi"] = combine_estimates([r[1] for r in results])
    return out


# ---------------------------------------------------------------------------
# trace diagnostics


def fifo_violations(trace):
    """Count per-source deliveries that overtake an earlier-generated task."""
    bad = 0
    for s in np.unique(trace.source_id):
        tr = trace.select(s)
        order = np.argsort(tr.gen_time, kind="stable")
        bad += int(np.sum(np.diff(tr.comp_end[order]) < 0))
    return bad


def work_conservation_gap(arrivals, starts, ends):
    """Largest idle time of a FIFO server while a task was waiting.

    Inputs are in service order; zero for a work-conserving server.
    """
    arrivals, starts, ends = (np.asarray(a, dtype=float) for a in (arrivals, starts, ends))
    earliest = np.maximum(arrivals[1:], ends[:-1])
    gap = np.concatenate([[starts[0] - arrivals[0]], starts[1:] - earliest])
    return float(np.max(np.abs(gap)))


def time_average_in_system(arrivals, departures, t0=None, t1=None):
    """Time-average number of tasks between ``arrivals`` and ``departures``.

    Integrates the occupancy step function over [t0, t1] (default: first
    arrival to last departure).
    """
    arrivals = np.asarray(arrivals, dtype=float)
    departures = np.asarray(departures, dtype=float)
    t0 = arrivals.min() if t0 is None else t0
    t1 = departures.max() if t1 is None else t1
    times = np.concatenate([arrivals, departures])
    steps = np.concatenate([np.ones(len(arrivals)), -np.ones(len(departures))])
    # departures first on ties
    order = np.lexsort((steps, times))
    times, steps = times[order], steps[order]
    level = np.cumsum(steps)
    t_clip = np.clip(times, t0, t1)
    widths = np.diff(np.concatenate([t_clip, [t1]]))
    return float(np.sum(level * widths) / (t1 - t0))


def write_trace_csv(trace, path):
    """Export one row per task with a header row (UTF-8, ``\\n`` endings)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        cols = [getattr(trace, c).tolist() for c in TRACE_COLUMNS]
        for row in zip(*cols):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def read_trace_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return TaskTrace(
        np.array([int(r["source_id"]) for r in rows], dtype=np.int64),
        *(np.array([float(r[c]) for r in rows]) for c in TRACE_COLUMNS[1:]),
    )
