import csv
import io
import json

import numpy as np
import pytest

from tandemtoi import cli
from tandemtoi.config import loads, parse_scenario
from tandemtoi.errors import ConfigError


def write_cfg(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def run(tmp_path, command, doc, *extra, out="out.json"):
    cfg = write_cfg(tmp_path, doc)
    out_path = tmp_path / out
    code = cli.main([command, "--config", cfg, "--out", str(out_path), *extra])
    return code, out_path


def read_csv(path):
    lines = path.read_text().split("\n")
    assert lines[0].startswith("# ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


EDGE = {"kind": "edge", "rates": {"lambda": 2, "mu_t": 5, "mu_c": 8}, "gm": {"sigma": 1, "kappa": 1}}
ZERO_WAIT = {"kind": "edge_zero_wait", "rates": {"mu_t": 5, "mu_c": 8}, "gm": {"sigma": 1, "kappa": 1}}


# -- analyze ---------------------------------------------------------------------


def test_analyze_edge(tmp_path):
    code, out = run(tmp_path, "analyze", EDGE)
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["metrics"]["toi"] == pytest.approx(0.897841, abs=1e-6)
    assert doc["metrics"]["vtoi"] == pytest.approx(0.5403, abs=5e-5)


def test_analyze_fog_zero_wait(tmp_path):
    code, out = run(tmp_path, "analyze", {"kind": "fog_zero_wait", "rates": {"mu_it": 5, "mu_c": 9, "lambda_other": 2}})
    assert code == 0 and json.loads(out.read_text())["metrics"]["toi"] == pytest.approx(0.9)


def test_analyze_zero_wait_lists_every_variant(tmp_path):
    code, out = run(tmp_path, "analyze", ZERO_WAIT)
    m = json.loads(out.read_text())["metrics"]
    assert code == 0
    assert m["vtoi_printed"] == pytest.approx(-0.58179, abs=1e-5)
    assert m["vtoi_corrected"] == pytest.approx(0.485597, abs=1e-6)
    assert m["vtoi"] == m["vtoi_exact"] and m["toi_printed"] == pytest.approx(0.733333, abs=1e-6)


def test_analyze_policy_flag_retargets(tmp_path):
    code, out = run(tmp_path, "analyze", EDGE, "--policy", "zero-wait", "--variant", "printed")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["scenario"]["kind"] == "edge_zero_wait"
    assert doc["metrics"]["toi"] == pytest.approx(0.733333, abs=1e-6)


def test_unstable_scenario_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "analyze", {"kind": "edge", "rates": {"lambda": 5, "mu_t": 5, "mu_c": 8}})
    assert code == 2
    assert "lambda < mu_t" in capsys.readouterr().err


# -- config errors -----------------------------------------------------------------


@pytest.mark.parametrize(
    "doc, needle",
    [
        ('{"kind": "edge",\n "rates": {"lambda": 2,, }}', "line 2"),
        ({"kind": "cloud", "rates": {}}, "field 'kind'"),
        ({"kind": "edge", "rates": {"lambda": 2, "mu_t": 5}}, "missing ['mu_c']"),
        ({"kind": "edge", "rates": {"lambda": 2, "mu_t": 5, "mu_c": "8"}}, "rates.mu_c"),
        ({"kind": "edge", "rates": {"lambda": 2, "mu_t": 5, "mu_c": 8, "mu": 1}}, "unknown keys"),
        ({"kind": "edge", "rates": {"lambda": 2, "mu_t": 5, "mu_c": 8}, "gm": {"sigma": 1, "kappa": -1}}, "field 'gm'"),
    ],
)
def test_config_diagnostics(tmp_path, capsys, doc, needle):
    code, _ = run(tmp_path, "analyze", doc)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["analyze", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("TOI_THREADS", "zero")
    doc = dict(EDGE, sweep={"params": {"lambda": [1, 2]}})
    code, _ = run(tmp_path, "sweep", doc, out="s.csv")
    assert code == 2


def test_emitted_scenario_round_trips(tmp_path):
    for doc in (EDGE, ZERO_WAIT):
        _, out = run(tmp_path, "analyze", doc)
        emitted = json.loads(out.read_text())
        again = parse_scenario(emitted["scenario"])
        assert again.as_dict() == emitted["scenario"]
        assert all(isinstance(v, float) for v in emitted["metrics"].values())


def test_loader_grid_values_are_exact():
    sc = loads(json.dumps(dict(EDGE, sweep={"params": {"lambda": {"start": 0.5, "stop": 4.5, "step": 0.25}}})))
    grid = sc.sweep.params["lambda"]
    assert len(grid) == 17 and grid[1] == 0.75 and grid[-1] == 4.5
    with pytest.raises(ConfigError):
        loads(json.dumps(dict(EDGE, sweep={"params": {"mu_x": [1]}})))


# -- compare --------------------------------------------------------------------------


def test_compare_pass(tmp_path):
    code, out = run(tmp_path, "compare", EDGE, "--tasks", "1000000", "--seed", "1")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["verdict"] == "PASS"
    assert doc["metrics"]["toi"]["rel_error"] < 0.01


def test_compare_printed_zero_wait_fails(tmp_path):
    code, out = run(tmp_path, "compare", ZERO_WAIT, "--variant", "printed", "--tasks", "200000")
    doc = json.loads(out.read_text())
    assert code == 3 and doc["metrics"]["vtoi"]["verdict"] == "FAIL"


def test_compare_too_few_tasks(tmp_path, capsys):
    code, _ = run(tmp_path, "compare", EDGE, "--tasks", "100")
    assert code == 2 and "post-warmup" in capsys.readouterr().err


def test_compare_replications(tmp_path):
    code, out = run(tmp_path, "compare", EDGE, "--tasks", "50000", "--replications", "3", "--tolerance", "0.05")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["simulation"]["replications"] == 3


# -- sweep ---------------------------------------------------------------------------


def test_sweep_reproduces_u_shape(tmp_path):
    doc = {
        "kind": "edge",
        "rates": {"lambda": 1, "mu_t": 5, "mu_c": 6},
        "sweep": {"params": {"lambda": {"start": 0.5, "stop": 4.5, "step": 0.25}},
                  "metrics": ["toi", "delay_t", "delay_c"]},
    }
    code, out = run(tmp_path, "sweep", doc, out="sweep.csv")
    rows = read_csv(out)
    assert code == 0 and len(rows) == 17
    toi = np.array([float(r["toi"]) for r in rows])
    k = int(np.argmin(toi))
    assert 0 < k < len(toi) - 1
    for col in ("delay_t", "delay_c"):
        assert np.all(np.diff([float(r[col]) for r in rows]) > 0)
    assert b"\r" not in out.read_bytes()


def test_sweep_marks_unstable_rows(tmp_path):
    doc = {"kind": "edge", "rates": {"lambda": 1, "mu_t": 5, "mu_c": 8},
           "sweep": {"params": {"lambda": [4, 5, 6]}}}
    _, out = run(tmp_path, "sweep", doc, out="sweep.csv")
    rows = read_csv(out)
    assert rows[0]["reason"] == "" and rows[0]["toi"]
    assert rows[1] == {"lambda": "5.0", "toi": "", "reason": "unstable"}


def test_two_dimensional_fog_sweep(tmp_path):
    doc = {"kind": "fog", "rates": {"lambda_i": 1, "lambda_other": 1, "mu_it": 4, "mu_c": 8},
           "sweep": {"params": {"lambda_i": [0.5, 1, 2, 3], "lambda_other": [0, 1, 2, 4]}}}
    _, out = run(tmp_path, "sweep", doc, out="fog.csv")
    rows = read_csv(out)
    assert len(rows) == 16
    # more interferer traffic never helps the tagged source
    for li in ("0.5", "1.0", "2.0", "3.0"):
        vals = [float(r["toi"]) for r in rows if r["lambda_i"] == li and r["toi"]]
        assert np.all(np.diff(vals) > 0)


def test_sweep_with_simulation_columns(tmp_path):
    doc = {"kind": "edge", "rates": {"lambda": 1, "mu_t": 5, "mu_c": 8},
           "sweep": {"params": {"lambda": [1, 2]}, "simulate": True}}
    _, out = run(tmp_path, "sweep", doc, "--tasks", "100000", out="sim.csv")
    rows = read_csv(out)
    for r in rows:
        assert abs(float(r["toi_sim"]) - float(r["toi"])) < 4 * float(r["toi_sim_half_width"]) + 0.01


# -- optimize --------------------------------------------------------------------------


def test_optimize_single_device(tmp_path):
    doc = {"kind": "edge", "optimizer": {"devices": [{"p": 0.25, "h": 1e-6, "c": 30, "d_bar": 100}]}}
    code, out = run(tmp_path, "optimize", doc)
    rep = json.loads(out.read_text())
    assert code == 0
    assert rep["proposed"]["beta"] == [pytest.approx(1.0)]
    assert rep["proposed"]["f"] == [pytest.approx(5e9)]
    assert (tmp_path / "out.csv").exists()


def test_optimize_random_instance_dominates(tmp_path):
    doc = {"kind": "edge", "optimizer": {"random_devices": {"m": 5, "seed": 3}}}
    code, out = run(tmp_path, "optimize", doc)
    rep = json.loads(out.read_text())
    ratios = rep["ratios_to_proportional_uniform"]
    assert code == 0 and ratios["proposed"] < 1
    assert all(ratios["proposed"] <= v for v in ratios.values() if v is not None)
    history = rep["proposed"]["history"]
    assert all(b <= a + 1e-10 for a, b in zip(history, history[1:]))
    rows = read_csv(tmp_path / "out.csv")
    assert [r["strategy"] for r in rows][0] == "proposed" and len(rows) == 7


def test_optimize_channel_ratio_sweep(tmp_path):
    doc = {"kind": "edge", "optimizer": {"channel_ratios": [1.5, 3, 6]}}
    code, out = run(tmp_path, "optimize", doc, out="ratio.csv")
    rows = read_csv(out)
    assert code == 0 and len(rows) == 3
    for r in rows:
        assert float(r["beta_2"]) > float(r["beta_1"])
    assert json.loads((tmp_path / "ratio.json").read_text())["mode"] == "channel_ratio"


def test_optimize_needs_block(tmp_path):
    code, _ = run(tmp_path, "optimize", EDGE)
    assert code == 2


def test_optimize_infeasible_exit_code(tmp_path, monkeypatch):
    from tandemtoi import optimizer

    def boom(*args, **kwargs):
        raise optimizer.Infeasible("no stable split", devices=[0])

    monkeypatch.setattr(optimizer, "solve_p1", boom)
    doc = {"kind": "edge", "optimizer": {"random_devices": {"m": 2, "seed": 0}}}
    code, _ = run(tmp_path, "optimize", doc)
    assert code == 4


# -- determinism -------------------------------------------------------------------------


def test_identical_runs_are_byte_identical(tmp_path, monkeypatch):
    doc = dict(EDGE, sweep={"params": {"lambda": [1, 2, 3]}, "simulate": True})
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("TOI_THREADS", threads)
        _, out = run(tmp_path, "sweep", doc, "--tasks", "20000", "--seed", "9", out=f"s{threads}.csv")
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
