import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from fairfolio.cli import dispatch
from fairfolio.fair_expost import interval_minmax
from fairfolio.planners import dp_min_regret
from fairfolio.regret import Grouping, Population


@pytest.fixture
def files(tmp_path):
    pop = tmp_path / "pop.csv"
    pop.write_text("tau,group,return\n1,a,1\n2,a,2\n3,b,3\n4,b,4\n")
    rng = np.random.default_rng(0)
    x = rng.normal(0.0004, 0.01, (200, 3))
    lines = ["date,A,B,C"] + [f"d{i}," + ",".join(repr(float(v)) for v in row) for i, row in enumerate(x)]
    ret = tmp_path / "ret.csv"
    ret.write_text("\n".join(lines) + "\n")
    return tmp_path, pop, ret


def run(argv, capsys):
    code = dispatch([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_fair_interval_example(files, capsys):
    _, pop, _ = files
    code, out, _ = run(["fair-interval", "--pop", pop, "--p", "2", "--epsilon", "1e-6"], capsys)
    data = json.loads(out)
    assert code == 0 and data["value"] == 0.5 and data["products"] == [2.0, 4.0]
    lib = interval_minmax(Population([1, 2, 3, 4], [1, 2, 3, 4]), Grouping([0, 0, 1, 1]), 2, 1e-6)
    assert data["value"] == lib.value


def test_infeasible_kappa_exit_1(files, capsys):
    _, pop, _ = files
    code, out, err = run(["fair-interval", "--pop", pop, "--p", "2", "--kappa", "0.4"], capsys)
    assert code == 1 and out == ""
    assert json.loads(err.strip())["error"] == "infeasible"


def test_check_separation(capsys):
    code, out, _ = run(["oracle", "check-separation", "--g", "2", "--p", "4"], capsys)
    data = json.loads(out)
    assert code == 0 and abs(data["det"] - 1 / 3) < 1e-15 and data["rand"] <= 0.2 + 1e-3


def test_frontier_csv(files, capsys):
    _, _, ret = files
    code, out, _ = run(["frontier", "--returns", ret, "--taus", "0,0.1,0.5", "--long-only", "--cash"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "tau,return,w_1,w_2,w_3,w_4" and len(lines) == 4


def test_frontier_infeasible_exit_1(files, capsys):
    _, _, ret = files
    code, _, err = run(["frontier", "--returns", ret, "--taus", "0"], capsys)
    assert code == 1 and json.loads(err.strip())["error"] == "infeasible_risk"


def test_usage_errors(files, capsys):
    _, pop, _ = files
    assert run(["plan-dp", "--pop", pop, "--p", "2", "--bogus"], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["plan-dp", "--pop", pop, "--p", "zero"], capsys)[0] == 2
    assert run(["plan-dp", "--pop", pop, "--p", "0"], capsys)[0] == 2


def test_plan_dp_matches_library(files, capsys):
    _, pop, _ = files
    code, out, _ = run(["plan-dp", "--pop", pop, "--p", "2"], capsys)
    data = json.loads(out)
    lib = dp_min_regret(Population([1, 2, 3, 4], [1, 2, 3, 4]), None, 2)
    assert data["value"] == lib.value and data["products"] == list(lib.products.risks)
    assert data["method"] == "dp"


def test_plan_commands_run(files, capsys):
    d, pop, ret = files
    assert run(["plan-greedy", "--pop", pop, "--p", "2", "--format", "csv"], capsys)[1].startswith("risk,return")
    code, out, _ = run(["plan-two-sided", "--pop", pop, "--p", "1", "--alpha", "inf"], capsys)
    assert code == 0 and json.loads(out)["value"] == 1.0  # product at 2: (1 + 0 + 1 + 2) / 4
    trace = d / "trace.csv"
    code, out, _ = run(["fair-exante", "--pop", pop, "--p", "1", "--T", "50", "--slack", "1", "--trace", trace], capsys)
    assert code == 0 and "probs" in json.loads(out) and trace.read_text().startswith("t,D_1,D_2")
    code, out, _ = run(["fair-expost", "--pop", pop, "--p", "2", "--epsilon", "0.01"], capsys)
    assert code == 0 and json.loads(out)["method"] == "tuple_dp"
    for mode in ("min-regret", "minmax", "game-value"):
        code, out, _ = run(["oracle", mode, "--pop", pop, "--p", "2"], capsys)
        assert code == 0 and "value" in json.loads(out)


def test_population_priced_by_returns_file(files, capsys):
    d, _, ret = files
    pop = d / "taus.csv"
    pop.write_text("tau,group\n0.0,a\n0.05,a\n0.1,b\n")
    code, out, _ = run(["plan-dp", "--pop", pop, "--returns", ret, "--cash", "--p", "1"], capsys)
    assert code == 0 and len(json.loads(out)["products"]) == 1


def test_bounds(capsys):
    code, out, _ = run(["bounds", "--B", "1", "--epsilon", "0.1", "--delta", "0.05", "--g", "2", "--pi-min", "0.5"], capsys)
    assert json.loads(out) == {"no_fairness": 877, "fairness": 9247}


def test_config_and_override(files, capsys):
    d, pop, _ = files
    cfg = d / "run.cfg"
    cfg.write_text("# comment\np = 2\nepsilon = 1e-6\n")
    code, out, _ = run(["fair-interval", "--pop", pop, "--config", cfg], capsys)
    assert code == 0 and json.loads(out)["products"] == [2.0, 4.0]
    code, out, _ = run(["fair-interval", "--pop", pop, "--config", cfg, "--p", "4"], capsys)
    assert json.loads(out)["value"] == 0.0
    bad = d / "bad.cfg"
    bad.write_text("nope=1\n")
    assert run(["fair-interval", "--pop", pop, "--p", "2", "--config", bad], capsys)[0] == 2


def test_manifest(files, capsys):
    d, pop, _ = files
    man = d / "m.json"
    out_path = d / "res.json"
    code, _, _ = run(["plan-dp", "--pop", pop, "--p", "2", "--manifest", man, "--output", out_path], capsys)
    data = json.loads(man.read_text())
    assert code == 0
    assert data["inputs"][str(pop)] == hashlib.sha256(pop.read_bytes()).hexdigest()
    assert data["subcommand"] == "plan-dp" and data["outputs"] == [str(out_path)]
    assert man.stat().st_mtime_ns <= out_path.stat().st_mtime_ns


def test_experiment_seed_env(files, capsys, monkeypatch):
    d, _, _ = files
    args = ["experiment", "perf", "--trials", "1", "--n-consumers", "8", "--p", "2", "--slack", "1", "--T", "20",
            "--out", d]
    monkeypatch.setenv("FAIRFOLIO_SEED", "77")
    code, out, _ = run(args, capsys)
    assert code == 0 and json.loads(out)["metadata"]["config"]["seed"] == 77
    assert (d / "perf_seed77.csv").exists() and (d / "perf_seed77.json").exists()
    code, out, _ = run(args + ["--seed", "5"], capsys)
    assert json.loads(out)["metadata"]["config"]["seed"] == 5


def test_experiment_tables_reproducible(files, capsys):
    args = ["experiment", "generalization", "--trials", "1", "--p", "2", "--slack", "1", "--T", "20",
            "--train-sizes", "5,10", "--test-size", "100", "--format", "csv"]
    a = run(args, capsys)[1]
    b = run(args, capsys)[1]
    assert a == b and a.startswith("trial,")


def test_module_entry_point(files):
    _, pop, _ = files
    proc = subprocess.run(
        [sys.executable, "-m", "fairfolio", "plan-dp", "--pop", str(pop), "--p", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == 0.5
