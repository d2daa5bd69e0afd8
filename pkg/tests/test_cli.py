"""End-to-end checks of the command-line front door.

Everything runs through ``cli.main`` in-process (argv lists, tmp_path
output dirs); one subprocess test covers the ``python -m`` wiring.
"""

import json
import subprocess
import sys

import pytest

from cascade_secrecy.bounds import side_info_to_json
from cascade_secrecy.cli import main
from cascade_secrecy.payoff import payoff_to_json
from cascade_secrecy.probability import Alphabet, Pmf, pmf_to_json
from cascade_secrecy.simulation import IndexBits, SchemeSpec, scheme_spec_to_json
from cascade_secrecy.ternary import corner_candidate, ternary_example

EX = ternary_example()


def write_config(tmp_path, body, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body), encoding="utf-8")
    return str(path)


def data_rows(csv_text):
    lines = [ln for ln in csv_text.splitlines() if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def bounds_problem(caps):
    return {
        "p_x": pmf_to_json(EX.p_x),
        "payoff": payoff_to_json(EX.payoff),
        "side": side_info_to_json(EX.side),
        "budget": {"r0": 1.0, "r1": "inf", "r2": "inf"},
        "caps": caps,
    }


def corner_sim_config(samples=0, trace=False, seed=7, cell_cap=None):
    spec = SchemeSpec(
        n=1,
        inner=corner_candidate(1),
        index_bits=IndexBits(1, 1, 2, 1, 2),
        side=EX.side,
        seed=0,
    )
    problem = {
        "scheme": scheme_spec_to_json(spec),
        "payoff": payoff_to_json(EX.payoff),
        "secret_set": ["X"],
    }
    if trace:
        problem["trace"] = True
    if cell_cap is not None:
        problem["cell_cap"] = cell_cap
    return {"seed": seed, "samples": samples, "problem": problem}


# ---------------------------------------------------------------------------
# example


def test_example_curve_csv(tmp_path):
    assert main(["example", "--out", str(tmp_path)]) == 0
    raw = (tmp_path / "example_curve.csv").read_bytes()
    assert b"\r" not in raw
    text = raw.decode("utf-8")
    assert "# config_sha256=" in text
    assert "# seed=0" in text
    assert "# version=0.1.0" in text
    # threshold note states the open conditions on the message rates
    assert "R1 > 1.58496250072" in text
    header, rows = data_rows(text)
    assert header == ["R0", "Pi_analytic", "Pi_evaluated"]
    assert len(rows) == 10
    assert ["1", "0.5", "0.5"] in rows
    # 12 significant digits on the irrational grid point
    assert any(r[0] == "1.58496250072" for r in rows)


def test_example_custom_grid(tmp_path):
    cfg = write_config(tmp_path, {"problem": {"grid": [0.0, 0.5, 2.0]}})
    assert main(["example", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = data_rows((tmp_path / "example_curve.csv").read_text())
    assert [r[0] for r in rows] == ["0", "0.5", "2"]
    assert rows[1][1] == "0.25"


# ---------------------------------------------------------------------------
# schema errors: nonzero exit naming the offending field path


@pytest.mark.parametrize(
    "body,needle",
    [
        ({"seed": 0, "problem": {}}, "problem.p_x"),
        ({"seed": "zero", "problem": {}}, "seed"),
        ({"seed": -1, "problem": {}}, "seed"),
        ({"seed": 0, "problem": "nope"}, "problem"),
    ],
)
def test_schema_error_paths(tmp_path, capsys, body, needle):
    cfg = write_config(tmp_path, body)
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert needle in capsys.readouterr().err


def test_budget_field_path(tmp_path, capsys):
    problem = bounds_problem({"u1": 1, "u2": 1, "v1": 1, "v2": 1})
    problem["budget"] = {"r0": "oops", "r1": "inf", "r2": "inf"}
    cfg = write_config(tmp_path, {"seed": 0, "problem": problem})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "problem.budget.r0" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["bounds", "--config", str(tmp_path / "absent.json")]) == 2
    assert "config" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["bounds", "--config", str(path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_seed_required_for_stochastic(tmp_path, capsys):
    cfg = write_config(
        tmp_path, {"problem": bounds_problem({"u1": 1, "u2": 1, "v1": 1, "v2": 1})}
    )
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bounds


def test_bounds_caps_all_one_infeasible(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"seed": 0, "restarts": 2, "problem": bounds_problem({"u1": 1, "u2": 1, "v1": 1, "v2": 1})},
    )
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 3
    reason = json.loads(capsys.readouterr().err)
    assert reason["status"] == "infeasible"
    assert reason["reason"]
    # the result file still records the failed points
    result = json.loads((tmp_path / "bounds_result.json").read_text())
    assert result["best"] is None
    assert result["points"][0]["feasible"] is False
    _, rows = data_rows((tmp_path / "bounds_frontier.csv").read_text())
    assert rows == []


def test_bounds_feasible_csv_and_json(tmp_path):
    # enum_limit 0 keeps this a wiring test; search quality is covered
    # by the acceptance suite at full strength
    problem = dict(
        bounds_problem({"u1": 3, "u2": 2, "v1": 9, "v2": 6}),
        refine_top=2,
        enum_limit=0,
        r0_grid=[1.0, 2.0],
    )
    cfg = write_config(tmp_path, {"seed": 1, "restarts": 2, "problem": problem})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = data_rows((tmp_path / "bounds_frontier.csv").read_text())
    assert header == ["R0", "R1", "R2", "Pi"]
    assert len(rows) == 2
    for row, budget in zip(rows, (1.0, 2.0)):
        r0, r1, r2, pi = map(float, row)
        assert r0 <= budget + 1e-9
        assert 0.0 <= pi <= 2.0 / 3.0 + 1e-9
    result = json.loads((tmp_path / "bounds_result.json").read_text())
    assert [p["r0_budget"] for p in result["points"]] == [1.0, 2.0]
    assert result["best"]["feasible"] is True
    assert result["best"]["candidate"] is not None
    assert "wall_time" not in json.dumps(result)
    prov = result["provenance"]
    assert prov["seed"] == 1 and prov["version"] == "0.1.0"
    assert len(prov["config_sha256"]) == 64


# ---------------------------------------------------------------------------
# simulate


def test_simulate_byte_reproducible(tmp_path):
    cfg = write_config(tmp_path, corner_sim_config())
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    for name in ("simulate_audit.json", "simulate_results.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    audit = json.loads((a / "simulate_audit.json").read_text())
    assert audit["audit"]["passed"] is True
    assert audit["audit"]["markov_chain_4_bits"] <= 1e-9
    assert audit["audit"]["markov_chain_5_bits"] <= 1e-9
    assert "wall_time" not in json.dumps(audit)
    _, rows = data_rows((a / "simulate_results.csv").read_text())
    metrics = dict(rows)
    assert metrics["payoff_exact"] == "0.319829244829"
    assert "payoff_mc_estimate" not in metrics


def test_simulate_samples_and_trace(tmp_path):
    cfg = write_config(tmp_path, corner_sim_config(samples=30, trace=True))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = data_rows((tmp_path / "simulate_results.csv").read_text())
    metrics = dict(rows)
    assert 0.0 <= float(metrics["payoff_mc_estimate"]) <= 1.0
    assert float(metrics["payoff_mc_se"]) > 0.0
    header, trace_rows = data_rows((tmp_path / "simulate_trace.csv").read_text())
    assert header == ["sample", "t", "history", "posterior_entropy", "action", "payoff"]
    assert len(trace_rows) == 30  # one row per sample per coordinate, n=1


def test_simulate_samples_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, corner_sim_config(samples=0))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--samples", "20"]) == 0
    _, rows = data_rows((tmp_path / "simulate_results.csv").read_text())
    assert "payoff_mc_estimate" in dict(rows)


def test_simulate_cell_cap_infeasible(tmp_path, capsys):
    cfg = write_config(tmp_path, corner_sim_config(cell_cap=10))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 3
    reason = json.loads(capsys.readouterr().err)
    assert reason["status"] == "infeasible"
    assert "cells" in reason["reason"]


# ---------------------------------------------------------------------------
# equivocation


def equiv_config(r0_grid=None):
    hamming = [[0.0, 1.0], [1.0, 0.0]]
    problem = {
        "p_x": pmf_to_json(Pmf.uniform(Alphabet("X", 2, ("0", "1")))),
        "secret_set": ["X"],
        "y2_alphabet": {"name": "Y2", "size": 2, "labels": ["0", "1"]},
        "y3_alphabet": {"name": "Y3", "size": 2, "labels": ["0", "1"]},
        "d1": hamming,
        "d2": hamming,
        "max_d1": 1.0,
        "max_d2": 1.0,
        "r0": 1.0,
        "cap_v1": 2,
        "cap_v2": 2,
    }
    if r0_grid is not None:
        problem["r0_grid"] = r0_grid
    return {"seed": 3, "restarts": 4, "problem": problem}


def test_equivocation_result_json(tmp_path):
    cfg = write_config(tmp_path, equiv_config())
    assert main(["equivocation", "--config", cfg, "--out", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "equivocation_result.json").read_text())
    assert result["result"]["feasible"] is True
    # distortion budget 1.0 is vacuous for binary Hamming, so the blank
    # disclosure leaks nothing and equivocation hits H(X) = 1 bit
    assert result["result"]["value"] == 1.0
    assert result["result"]["candidate"] is not None
    assert "sweep" not in result


def test_equivocation_sweep(tmp_path):
    cfg = write_config(tmp_path, equiv_config(r0_grid=[0.0, 0.5, 1.0]))
    assert main(["equivocation", "--config", cfg, "--out", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "equivocation_result.json").read_text())
    values = [p["value"] for p in result["sweep"]]
    assert [p["r0"] for p in result["sweep"]] == [0.0, 0.5, 1.0]
    assert values == sorted(values)


def test_equivocation_field_path(tmp_path, capsys):
    body = equiv_config()
    del body["problem"]["d2"]
    cfg = write_config(tmp_path, body)
    assert main(["equivocation", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "problem.d2" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# overrides and wiring


def test_env_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("CASCADE_SECRECY_SEED", "99")
    assert main(["example", "--out", str(tmp_path / "env")]) == 0
    assert "# seed=99" in (tmp_path / "env" / "example_curve.csv").read_text()
    # a flag beats the environment
    assert main(["example", "--out", str(tmp_path / "flag"), "--seed", "5"]) == 0
    assert "# seed=5" in (tmp_path / "flag" / "example_curve.csv").read_text()


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CASCADE_SECRECY_OUT", str(tmp_path / "fromenv"))
    assert main(["example"]) == 0
    assert (tmp_path / "fromenv" / "example_curve.csv").is_file()


def test_bad_env_value(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CASCADE_SECRECY_SEED", "not-a-number")
    assert main(["example", "--out", str(tmp_path)]) == 2
    assert "CASCADE_SECRECY_SEED" in capsys.readouterr().err


def test_python_dash_m(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "cascade_secrecy", "example", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "example_curve.csv").is_file()
