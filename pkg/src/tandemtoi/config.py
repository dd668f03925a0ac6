"""Scenario documents for the command-line tool.

A scenario is one JSON object::

    {
      "kind": "edge",                      # edge | edge_zero_wait | fog | fog_zero_wait
      "rates": {"lambda": 2, "mu_t": 5, "mu_c": 8},
      "gm": {"sigma": 1, "kappa": 1},      # optional
      "sweep": {...},                      # optional, used by ``sweep``
      "optimizer": {...}                   # optional, used by ``optimize``
    }

Rate fields per kind:

=================  ===========================================
edge               lambda, mu_t, mu_c
edge_zero_wait     mu_t, mu_c
fog                lambda_i, lambda_other, mu_it, mu_c
fog_zero_wait      mu_it, mu_c, lambda_other
=================  ===========================================

``sweep`` holds ``params`` (one or two rate names mapped to a list of values
or to ``{"start", "stop", "step"}``), ``metrics`` and ``simulate``.
``optimizer`` holds either ``devices`` (list of device profiles) or
``random_devices`` (``{"m", "seed"}``), an optional ``budget`` and an optional
``channel_ratios`` list for the two-device channel sweep.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import GmParams, MultiSourceRates, TandemRates
from .errors import ConfigError, ToiError
from .optimizer import DeviceProfile, SystemBudget, default_budget

KINDS = ("edge", "edge_zero_wait", "fog", "fog_zero_wait")

RATE_FIELDS = {
    "edge": ("lambda", "mu_t", "mu_c"),
    "edge_zero_wait": ("mu_t", "mu_c"),
    "fog": ("lambda_i", "lambda_other", "mu_it", "mu_c"),
    "fog_zero_wait": ("mu_it", "mu_c", "lambda_other"),
}

METRICS = {
    "edge": ("toi", "vtoi", "delay_t", "delay_c"),
    "edge_zero_wait": ("toi", "vtoi"),
    "fog": ("toi",),
    "fog_zero_wait": ("toi",),
}

GM_FIELDS = ("sigma", "kappa")
DEVICE_FIELDS = ("p", "h", "c", "d_bar", "alpha")
BUDGET_FIELDS = ("bandwidth", "noise", "f_max")


@dataclass
class SweepSpec:
    params: dict                     # name -> tuple of grid values, in grid order
    metrics: tuple
    simulate: bool = False

    def points(self):
        """Grid points in row-major order of ``params``."""
        names = list(self.params)
        grids = [self.params[n] for n in names]
        mesh = np.meshgrid(*grids, indexing="ij")
        return [dict(zip(names, (float(g.flat[i]) for g in mesh))) for i in range(mesh[0].size)]


@dataclass
class OptimizerSpec:
    devices: list
    budget: SystemBudget
    channel_ratios: tuple = ()
    source: dict = field(default_factory=dict)


@dataclass
class Scenario:
    kind: str
    rates: dict                      # field name -> float, names as in RATE_FIELDS
    gm: GmParams | None = None
    sweep: SweepSpec | None = None
    optimizer: OptimizerSpec | None = None

    def rate_object(self, overrides=None):
        """Typed rates for the analytic and simulation layers."""
        r = dict(self.rates)
        r.update(overrides or {})
        if self.kind == "edge":
            return TandemRates(r["lambda"], r["mu_t"], r["mu_c"])
        if self.kind == "fog":
            return MultiSourceRates(r["lambda_i"], r["lambda_other"], r["mu_it"], r["mu_c"])
        return tuple(r[k] for k in RATE_FIELDS[self.kind])

    def gm_with(self, overrides=None):
        if self.gm is None:
            return None
        o = overrides or {}
        return GmParams(o.get("sigma", self.gm.sigma), o.get("kappa", self.gm.kappa))

    def as_dict(self):
        out = {"kind": self.kind, "rates": dict(self.rates)}
        if self.gm is not None:
            out["gm"] = {"sigma": self.gm.sigma, "kappa": self.gm.kappa}
        return out


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{where}': expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"field '{where}': must be finite")
    return value


def _object(value, where):
    if not isinstance(value, dict):
        raise ConfigError(f"field '{where}': expected an object")
    return value


def _no_extra(obj, allowed, where):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"field '{where}': unknown keys {extra}; allowed {list(allowed)}")


def _grid(value, where):
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"field '{where}': empty grid")
        return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    spec = _object(value, where)
    _no_extra(spec, ("start", "stop", "step"), where)
    try:
        start, stop, step = (_number(spec[k], f"{where}.{k}") for k in ("start", "stop", "step"))
    except KeyError as exc:
        raise ConfigError(f"field '{where}': missing {exc.args[0]!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"field '{where}': need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps decimal-looking grids (0.5, 0.75, ...) exact in the output
    return tuple(round(start + i * step, 12) for i in range(count))


def _parse_sweep(doc, kind, has_gm):
    doc = _object(doc, "sweep")
    _no_extra(doc, ("params", "metrics", "simulate"), "sweep")
    params = _object(doc.get("params"), "sweep.params")
    allowed = RATE_FIELDS[kind] + (GM_FIELDS if has_gm else ())
    if not 1 <= len(params) <= 2:
        raise ConfigError("field 'sweep.params': sweep over one or two parameters")
    grids = {}
    for name, grid in params.items():
        if name not in allowed:
            raise ConfigError(f"field 'sweep.params.{name}': not sweepable for kind {kind!r}; choose from {list(allowed)}")
        grids[name] = _grid(grid, f"sweep.params.{name}")
    metrics = doc.get("metrics", ["toi"])
    if not isinstance(metrics, list) or not metrics:
        raise ConfigError("field 'sweep.metrics': expected a non-empty list")
    for mname in metrics:
        if mname not in METRICS[kind]:
            raise ConfigError(f"field 'sweep.metrics': {mname!r} not available for {kind!r}; choose from {list(METRICS[kind])}")
        if mname == "vtoi" and not has_gm:
            raise ConfigError("field 'sweep.metrics': 'vtoi' needs a 'gm' block")
    simulate = doc.get("simulate", False)
    if not isinstance(simulate, bool):
        raise ConfigError("field 'sweep.simulate': expected true or false")
    return SweepSpec(grids, tuple(metrics), simulate)


def _parse_optimizer(doc):
    doc = _object(doc, "optimizer")
    _no_extra(doc, ("devices", "random_devices", "budget", "channel_ratios"), "optimizer")
    try:
        if "budget" in doc:
            b = _object(doc["budget"], "optimizer.budget")
            _no_extra(b, BUDGET_FIELDS, "optimizer.budget")
            budget = SystemBudget(**{k: _number(b[k], f"optimizer.budget.{k}") for k in BUDGET_FIELDS})
        else:
            budget = default_budget()
    except KeyError as exc:
        raise ConfigError(f"field 'optimizer.budget': missing {exc.args[0]!r}") from None
    except ToiError as exc:
        raise ConfigError(f"field 'optimizer.budget': {exc}") from None

    ratios = ()
    if "channel_ratios" in doc:
        if not isinstance(doc["channel_ratios"], list) or not doc["channel_ratios"]:
            raise ConfigError("field 'optimizer.channel_ratios': expected a non-empty list")
        ratios = tuple(_number(r, f"optimizer.channel_ratios[{i}]") for i, r in enumerate(doc["channel_ratios"]))
        if min(ratios) <= 0:
            raise ConfigError("field 'optimizer.channel_ratios': ratios must be > 0")
        return OptimizerSpec([], budget, ratios, {"channel_ratios": list(ratios)})

    if ("devices" in doc) == ("random_devices" in doc):
        raise ConfigError("field 'optimizer': give exactly one of 'devices', 'random_devices' or 'channel_ratios'")
    if "devices" in doc:
        devs = doc["devices"]
        if not isinstance(devs, list) or not devs:
            raise ConfigError("field 'optimizer.devices': expected a non-empty list")
        profiles = []
        for i, d in enumerate(devs):
            where = f"optimizer.devices[{i}]"
            d = _object(d, where)
            _no_extra(d, DEVICE_FIELDS, where)
            missing = [k for k in DEVICE_FIELDS[:4] if k not in d]
            if missing:
                raise ConfigError(f"field '{where}': missing {missing}")
            try:
                profiles.append(DeviceProfile(**{k: _number(v, f"{where}.{k}") for k, v in d.items()}))
            except ToiError as exc:
                raise ConfigError(f"field '{where}': {exc}") from None
        return OptimizerSpec(profiles, budget, (), {"devices": devs})

    from .optimizer import random_profiles

    rd = _object(doc["random_devices"], "optimizer.random_devices")
    _no_extra(rd, ("m", "seed"), "optimizer.random_devices")
    m = rd.get("m")
    seed = rd.get("seed", 0)
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ConfigError("field 'optimizer.random_devices.m': expected an integer >= 1")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("field 'optimizer.random_devices.seed': expected an integer >= 0")
    return OptimizerSpec(random_profiles(m, seed), budget, (), {"random_devices": {"m": m, "seed": seed}})


def parse_scenario(doc):
    """Validate a decoded JSON document and build a :class:`Scenario`."""
    doc = _object(doc, "<root>")
    _no_extra(doc, ("kind", "rates", "gm", "sweep", "optimizer"), "<root>")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"field 'kind': expected one of {list(KINDS)}, got {kind!r}")

    optimizer = _parse_optimizer(doc["optimizer"]) if "optimizer" in doc else None
    if "rates" not in doc:
        if optimizer is None:
            raise ConfigError("field 'rates': missing")
        rates = {}
    else:
        block = _object(doc["rates"], "rates")
        expected = RATE_FIELDS[kind]
        _no_extra(block, expected, "rates")
        missing = [k for k in expected if k not in block]
        if missing:
            raise ConfigError(f"field 'rates': missing {missing} for kind {kind!r}")
        rates = {k: _number(block[k], f"rates.{k}") for k in expected}

    gm = None
    if "gm" in doc:
        g = _object(doc["gm"], "gm")
        _no_extra(g, GM_FIELDS, "gm")
        try:
            gm = GmParams(**{k: _number(v, f"gm.{k}") for k, v in g.items()})
        except ToiError as exc:
            raise ConfigError(f"field 'gm': {exc}") from None

    sweep = _parse_sweep(doc["sweep"], kind, gm is not None) if "sweep" in doc else None
    return Scenario(kind, rates, gm, sweep, optimizer)


def loads(text):
    """Parse scenario JSON text; syntax errors report line and column."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_scenario(doc)


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)
