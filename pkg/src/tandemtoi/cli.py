"""Command-line front end: ``tandemtoi analyze|compare|sweep|optimize``.

Exit codes: 0 success or PASS, 2 configuration or domain error, 3 tolerance
FAIL, 4 infeasible allocation problem.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, optimizer, simulator
from .config import METRICS, Scenario, load
from .errors import ConfigError, Infeasible, StabilityViolation, ToiError

log = logging.getLogger("tandemtoi")

EXIT_OK, EXIT_DOMAIN, EXIT_FAIL, EXIT_INFEASIBLE = 0, 2, 3, 4

METRIC_NOTES = {
    "toi": "average ToI",
    "vtoi": "process-related ToI (time-average MSE)",
    "delay_t": "mean transmission-stage sojourn",
    "delay_c": "mean computation-stage sojourn",
}


def worker_count():
    """Thread cap from ``TOI_THREADS`` (default: CPU count)."""
    raw = os.environ.get("TOI_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"TOI_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError(f"TOI_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def _ordered_map(fn, items, workers):
    """map() on a thread pool; results come back in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# output helpers


def _clean(value):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def dumps_json(doc):
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ""
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def dumps_csv(comment, columns, rows):
    """CSV text: one ``#`` comment line, the column row, then data rows."""
    buf = io.StringIO()
    buf.write("# " + comment.replace("\n", " ") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="")


def format_table(columns, rows):
    """Aligned plain-text table for terminal output."""
    def show(v):
        if isinstance(v, float):
            return f"{v:.6g}" if math.isfinite(v) else str(v)
        return "" if v is None else str(v)

    body = [[show(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)).rstrip() for b in body]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# scenario evaluation


def _apply_policy(scenario, policy):
    """Re-target a scenario when ``--policy`` disagrees with its kind."""
    if policy is None:
        return scenario
    policy = policy.replace("-", "_")
    zero_wait = scenario.kind.endswith("_zero_wait")
    if policy == "zero_wait" and not zero_wait:
        kind = scenario.kind + "_zero_wait"
        keep = {"edge_zero_wait": ("mu_t", "mu_c"), "fog_zero_wait": ("mu_it", "mu_c", "lambda_other")}[kind]
        return Scenario(kind, {k: scenario.rates[k] for k in keep}, scenario.gm, scenario.sweep)
    if policy == "stochastic" and zero_wait:
        raise ConfigError(f"--policy stochastic needs a generation rate; kind {scenario.kind!r} has none")
    return scenario


def _toi_variant(variant):
    # only the process-related zero-wait ToI has a separate "corrected" form
    return "printed" if variant == "printed" else "exact"


def analytic_metrics(scenario, variant="exact", overrides=None, metrics=None, all_variants=False):
    """Closed-form metrics of a scenario as an ordered dict."""
    kind = scenario.kind
    overrides = overrides or {}
    gm = scenario.gm_with(overrides)
    rates = scenario.rate_object({k: v for k, v in overrides.items() if k in scenario.rates})
    wanted = metrics or tuple(m for m in METRICS[kind] if m != "vtoi" or gm is not None)
    out = {}
    if kind == "edge":
        if "toi" in wanted:
            out["toi"] = analytic.toi_edge(rates)
        if "vtoi" in wanted:
            out["vtoi"] = analytic.vtoi_edge(rates, gm)
        if "delay_t" in wanted or "delay_c" in wanted:
            d_t, d_c = analytic.stage_delays(rates)
            if "delay_t" in wanted:
                out["delay_t"] = d_t
            if "delay_c" in wanted:
                out["delay_c"] = d_c
    elif kind == "edge_zero_wait":
        mu_t, mu_c = rates
        if "toi" in wanted:
            out["toi"] = analytic.toi_edge_zero_wait(mu_t, mu_c, _toi_variant(variant))
            if all_variants:
                for v in ("printed", "exact"):
                    out[f"toi_{v}"] = analytic.toi_edge_zero_wait(mu_t, mu_c, v)
        if "vtoi" in wanted:
            out["vtoi"] = analytic.vtoi_edge_zero_wait(mu_t, mu_c, gm, variant)
            if all_variants:
                for v in analytic.ZERO_WAIT_VARIANTS:
                    out[f"vtoi_{v}"] = analytic.vtoi_edge_zero_wait(mu_t, mu_c, gm, v)
    elif kind == "fog":
        out["toi"] = analytic.toi_fog(rates)
    else:
        out["toi"] = analytic.toi_fog_zero_wait(*rates)
    return out


def _sim_config(args, policy):
    return simulator.SimConfig(
        num_tasks=args.tasks, warmup=args.warmup, seed=args.seed,
        policy=policy, replications=args.replications,
    )


def simulated_metrics(scenario, config, overrides=None, metrics=("toi", "vtoi"), workers=1):
    overrides = overrides or {}
    gm = scenario.gm_with(overrides) if "vtoi" in metrics else None
    rates = scenario.rate_object({k: v for k, v in overrides.items() if k in scenario.rates})
    tier = "edge" if scenario.kind.startswith("edge") else "fog"
    return simulator.monte_carlo(tier, rates, config, gm=gm, workers=workers)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(scenario, args):
    scenario = _apply_policy(scenario, args.policy)
    metrics = analytic_metrics(scenario, args.variant, all_variants=True)
    doc = {"command": "analyze", "scenario": scenario.as_dict(), "variant": args.variant, "metrics": metrics}
    rows = [{"metric": k, "value": v, "meaning": METRIC_NOTES.get(k.split("_")[0] if k.startswith(("toi_", "vtoi_")) else k, "")}
            for k, v in metrics.items()]
    sys.stdout.write(format_table(["metric", "value", "meaning"], rows))
    if args.out:
        _write(args.out, dumps_json(doc))
    return EXIT_OK


def cmd_compare(scenario, args):
    scenario = _apply_policy(scenario, args.policy)
    policy = "zero_wait" if scenario.kind.endswith("_zero_wait") else "stochastic"
    config = _sim_config(args, policy)
    formulas = analytic_metrics(scenario, args.variant, metrics=("toi", "vtoi") if scenario.gm else ("toi",))
    sims = simulated_metrics(scenario, config, metrics=tuple(formulas), workers=worker_count())
    results, rows = {}, []
    for name, value in formulas.items():
        est = sims[name]
        rel = abs(est.mean - value) / abs(value) if value != 0 else abs(est.mean)
        passed = rel <= args.tolerance
        lo, hi = est.ci
        results[name] = {
            "analytic": value,
            "simulated": est.mean,
            "half_width_95": est.half_width_95,
            "ci_low": lo,
            "ci_high": hi,
            "n_effective": est.n_effective,
            "rel_error": rel,
            "analytic_in_ci": bool(lo <= value <= hi),
            "verdict": "PASS" if passed else "FAIL",
        }
        rows.append({"metric": name, **results[name]})
    verdict = "PASS" if all(r["verdict"] == "PASS" for r in results.values()) else "FAIL"
    doc = {
        "command": "compare",
        "scenario": scenario.as_dict(),
        "variant": args.variant,
        "simulation": {
            "num_tasks": config.num_tasks, "warmup": config.warmup, "seed": config.seed,
            "policy": config.policy, "replications": config.replications,
        },
        "tolerance": args.tolerance,
        "metrics": results,
        "verdict": verdict,
    }
    cols = ["metric", "analytic", "simulated", "half_width_95", "rel_error", "verdict"]
    sys.stdout.write(format_table(cols, rows))
    sys.stdout.write(f"overall: {verdict} (tolerance {args.tolerance:g})\n")
    if args.out:
        _write(args.out, dumps_json(doc))
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def _sweep_row(scenario, spec, point, args, config):
    row = dict(point)
    try:
        row.update(analytic_metrics(scenario, args.variant, overrides=point, metrics=spec.metrics))
        if spec.simulate:
            sim_names = tuple(m for m in spec.metrics if m in ("toi", "vtoi"))
            sims = simulated_metrics(scenario, config, overrides=point, metrics=sim_names)
            for m in sim_names:
                row[f"{m}_sim"] = sims[m].mean
                row[f"{m}_sim_half_width"] = sims[m].half_width_95
        row["reason"] = ""
    except StabilityViolation as exc:
        row = dict(point, reason="unstable")
        log.info("sweep point %s unstable: %s", point, exc.constraint)
    return row


def cmd_sweep(scenario, args):
    scenario = _apply_policy(scenario, args.policy)
    spec = scenario.sweep
    if spec is None:
        raise ConfigError("field 'sweep': missing; the sweep command needs a 'sweep' block")
    policy = "zero_wait" if scenario.kind.endswith("_zero_wait") else "stochastic"
    config = _sim_config(args, policy) if spec.simulate else None
    points = spec.points()
    rows = _ordered_map(lambda p: _sweep_row(scenario, spec, p, args, config), points, worker_count())

    columns = list(spec.params) + list(spec.metrics)
    if spec.simulate:
        for m in spec.metrics:
            if m in ("toi", "vtoi"):
                columns += [f"{m}_sim", f"{m}_sim_half_width"]
    columns.append("reason")
    fixed = {k: v for k, v in scenario.rates.items() if k not in spec.params}
    notes = "; ".join(f"{m}={METRIC_NOTES[m]}" for m in spec.metrics)
    comment = (
        f"kind={scenario.kind}; fixed={json.dumps(fixed, sort_keys=True)}; "
        f"swept={','.join(spec.params)}; {notes}; "
        f"*_sim=Monte Carlo mean, *_sim_half_width=95% half-width; reason=empty or 'unstable'"
    )
    text = dumps_csv(comment, columns, rows)
    if args.out:
        _write(args.out, text)
        sys.stdout.write(format_table(columns, rows))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _paired_paths(out):
    p = Path(out)
    if p.suffix == ".csv":
        return p.with_suffix(".json"), p
    return p, p.with_suffix(".csv")


def _channel_ratio_sweep(spec, args):
    workers = worker_count()

    def one(ratio):
        profiles = optimizer.channel_ratio_profiles(ratio, spec.budget)
        return ratio, optimizer.solve_p1(profiles, spec.budget)

    results = _ordered_map(one, spec.channel_ratios, workers)
    rows = []
    for ratio, al in results:
        rows.append({
            "channel_ratio": ratio,
            "lambda_1": al.lam[0], "lambda_2": al.lam[1],
            "beta_1": al.beta[0], "beta_2": al.beta[1],
            "f_share_1": al.f[0] / spec.budget.f_max, "f_share_2": al.f[1] / spec.budget.f_max,
            "lambda_ratio": al.lam[0] / al.lam[1],
            "tau": al.tau,
        })
    columns = list(rows[0])
    comment = ("two devices, device 1 spectral efficiency = channel_ratio x device 2; "
               "beta_*=bandwidth shares; f_share_*=CPU shares; tau=max ToI")
    doc = {"command": "optimize", "mode": "channel_ratio", "budget": vars_budget(spec.budget),
           "points": [dict(r, allocation=al.as_dict()) for r, (_, al) in zip(rows, results)]}
    return doc, comment, columns, rows


def vars_budget(budget):
    return {"bandwidth": budget.bandwidth, "noise": budget.noise, "f_max": budget.f_max}


def cmd_optimize(scenario, args):
    spec = scenario.optimizer
    if spec is None:
        raise ConfigError("field 'optimizer': missing; the optimize command needs an 'optimizer' block")
    if spec.channel_ratios:
        doc, comment, columns, rows = _channel_ratio_sweep(spec, args)
        table_cols = columns
    else:
        profiles, budget = spec.devices, spec.budget
        proposed = optimizer.solve_p1(profiles, budget)
        baselines = _ordered_map(
            lambda s: optimizer.run_baseline(s, profiles, budget),
            optimizer.STRATEGIES[1:], worker_count(),
        )
        allocs = [proposed] + baselines
        ref = next(a.tau for a in allocs if a.strategy == "proportional_uniform")
        rows = []
        for al in allocs:
            rows.append({
                "strategy": al.strategy,
                "tau": al.tau,
                "ratio_to_proportional_uniform": al.tau / ref if math.isfinite(al.tau) else math.inf,
                "iterations": al.iterations,
                "converged": al.converged,
                "infeasible_devices": " ".join(map(str, al.infeasible_devices)),
            })
        columns = list(rows[0])
        device_rows = [
            {"device": i, "lambda": proposed.lam[i], "beta": proposed.beta[i],
             "f": proposed.f[i], "delta": proposed.delta[i]}
            for i in range(len(profiles))
        ]
        doc = {
            "command": "optimize",
            "mode": "baselines",
            "devices": [vars(p) for p in profiles],
            "budget": vars_budget(budget),
            "proposed": proposed.as_dict(),
            "strategies": {al.strategy: al.as_dict() for al in allocs},
            "ratios_to_proportional_uniform": {r["strategy"]: r["ratio_to_proportional_uniform"] for r in rows},
        }
        comment = ("tau=max per-device ToI per strategy; ratio relative to proportional_uniform; "
                   "empty tau marks an infeasible pinned configuration")
        sys.stdout.write(format_table(["device", "lambda", "beta", "f", "delta"], device_rows))
        sys.stdout.write("\n")
        table_cols = columns
    sys.stdout.write(format_table(table_cols, rows))
    if args.out:
        json_path, csv_path = _paired_paths(args.out)
        _write(json_path, dumps_json(doc))
        _write(csv_path, dumps_csv(comment, columns, rows))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--out", help="output file (JSON, or CSV for sweep)")
    common.add_argument("--tasks", type=int, default=1_000_000, help="simulated tasks per replication")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--warmup", type=int, default=None, help="leading tasks discarded")
    common.add_argument("--tolerance", type=float, default=0.01, help="relative tolerance for compare")
    common.add_argument("--replications", type=int, default=1)
    common.add_argument("--policy", choices=("stochastic", "zero-wait", "zero_wait"), default=None)
    common.add_argument("--variant", choices=analytic.ZERO_WAIT_VARIANTS, default="exact",
                        help="zero-wait closed form: printed, corrected or exact")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="tandemtoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return parser


cmd_analyze.__doc__ = "closed-form metrics"
cmd_compare.__doc__ = "closed form vs Monte Carlo with PASS/FAIL"
cmd_sweep.__doc__ = "CSV grid of metrics over one or two parameters"
cmd_optimize.__doc__ = "min-max allocation and baseline comparison"


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.tasks < 1 or args.replications < 1:
            raise ConfigError("--tasks and --replications must be >= 1")
        if not args.tolerance > 0:
            raise ConfigError("--tolerance must be > 0")
        scenario = load(args.config)
        return COMMANDS[args.command](scenario, args)
    except Infeasible as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except StabilityViolation as exc:
        print(f"error: {exc} (violated: {exc.constraint})", file=sys.stderr)
        return EXIT_DOMAIN
    except (ToiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
