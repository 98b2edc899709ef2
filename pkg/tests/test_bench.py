import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copulaeda.bench import (BOXES, CSV_COLUMNS, BenchmarkFunction, BisectionConfig,
                             ExperimentResult, ExperimentSpec, ackley, critical_population,
                             evaluate, griewank, read_csv, run_experiment, sphere,
                             summation_cancellation, table_preset, write_csv, write_traces)
from copulaeda.cli import main
from copulaeda.eda import ModelSpec

QUICK = ExperimentSpec("sphere", ModelSpec("umda"), dimension=3, max_evaluations=20_000)


# -- test functions ------------------------------------------------------------
def test_optima_are_exact():
    z = np.zeros(10)
    assert sphere(z) == 0.0 and griewank(z) == 0.0 and ackley(z) == 0.0
    # 1 / 1e-5 is one ulp below 1e5 in binary floating point
    assert summation_cancellation(z) == pytest.approx(1e5, rel=1e-15, abs=0)


def test_function_examples():
    ones = np.ones(10)
    assert sphere(ones) == 10.0
    assert summation_cancellation(ones) == pytest.approx(1 / (1e-5 + 55))
    assert summation_cancellation([1.0, -1.0]) == pytest.approx(1 / (1e-5 + 1))
    assert griewank([np.pi * 2]) == pytest.approx(1 + (2 * np.pi) ** 2 / 4000 - 1)
    assert ackley(np.ones(2)) == pytest.approx(20 - 20 * np.exp(-0.2) + np.e - np.exp(1))


def test_functions_vectorised():
    x = np.random.default_rng(0).normal(size=(7, 5))
    for f in (sphere, griewank, ackley, summation_cancellation):
        np.testing.assert_allclose(f(x), [f(row) for row in x], rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
def test_functions_respect_their_optimum(x):
    assert sphere(x) >= 0 and griewank(x) >= -1e-15 and ackley(x) >= -1e-12
    assert 0 < summation_cancellation(x) <= 1e5


def test_benchmark_function_and_evaluate():
    fn = BenchmarkFunction("sumcan", 4)
    assert fn.direction == "maximize" and fn.optimum_value == 1e5
    assert abs(evaluate(fn, np.zeros(4)) - fn.optimum_value) <= 1e-6
    with pytest.raises(ValueError):
        evaluate(fn, np.zeros(3))
    with pytest.raises(ValueError):
        evaluate(fn, [0, 0, np.nan, 0])
    with pytest.raises(ValueError):
        BenchmarkFunction("rosenbrock")
    prob = fn.problem((-1.0, 2.0))
    assert prob.dimension == 4 and all(i.lo == -1.0 and i.hi == 2.0 for i in prob.init_box)


# -- bisection ---------------------------------------------------------------
def test_bisection_threshold_example():
    out = critical_population(lambda s: s >= 100)
    assert out.found and 96 <= out.size <= 105
    assert [s for s, _ in out.probes[:4]] == [16, 32, 64, 128]
    assert out.size == 100


def test_bisection_edge_cases():
    out = critical_population(lambda s: False, BisectionConfig(max_size=300))
    assert not out.found and out.size == 300
    assert [s for s, _ in out.probes] == [16, 32, 64, 128, 256, 300]
    out = critical_population(lambda s: True)
    assert out.found and out.size == 16 and len(out.probes) == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.floats(0.01, 0.5))
def test_bisection_brackets_any_threshold(threshold, width):
    cfg = BisectionConfig(relative_width_stop=width, max_size=2000)
    out = critical_population(lambda s: s >= threshold, cfg)
    if threshold > 2000:
        assert not out.found
        return
    assert out.found and out.size >= threshold
    failed = [s for s, ok in out.probes if not ok]
    if failed:
        lo = max(failed)
        assert (out.size - lo) / out.size <= width or out.size - lo <= 1
    else:
        assert out.size == 16


def test_bisection_config_validation():
    for kwargs in ({"initial_size": 2}, {"relative_width_stop": 0}, {"runs": 0},
                   {"runs": 5, "required_successes": 6}, {"max_size": 8}):
        with pytest.raises(ValueError):
            BisectionConfig(**kwargs)
    assert BisectionConfig(runs=7).required_successes == 7


# -- experiments ---------------------------------------------------------------
def test_experiment_spec_defaults():
    spec = ExperimentSpec("ackley", ModelSpec("umda"))
    assert spec.box == BOXES["ackley"]["symmetric"] and spec.box_label == "-30:30"
    assert ExperimentSpec("sumcan", ModelSpec("umda")).box_label == "-0.16:0.16"
    with pytest.raises(ValueError):
        ExperimentSpec("sphere", ModelSpec("umda"), (1, 1))


def test_run_experiment_reports_critical_size():
    res = run_experiment(QUICK, runs=3, seed=5)
    assert res.found and res.successes == 3 and res.runs == 3
    assert res.population == min(s for s, ok in res.probes if ok)
    assert all(not ok for s, ok in res.probes if s < res.population)
    evals = [r.evaluations_used for r in res.run_results]
    assert res.evals_mean == pytest.approx(np.mean(evals))
    assert res.evals_std == pytest.approx(np.std(evals, ddof=1))
    assert all(e % res.population == 0 for e in evals)


def test_run_experiment_fixed_population_and_failures():
    res = run_experiment(QUICK, runs=2, seed=1, population=7)
    assert res.population == 7 and res.runs == 2
    assert res.successes == 0 and math.isnan(res.evals_mean)
    assert res.success == "0/2"
    with pytest.raises(ValueError):
        run_experiment(QUICK, runs=0)
    with pytest.raises(ValueError):
        run_experiment(QUICK, seed=-1)
    with pytest.raises(ValueError):
        run_experiment(QUICK, population=6)


def test_same_seed_same_csv_and_different_seed_differs():
    a = write_csv([run_experiment(QUICK, runs=3, seed=11)])
    b = write_csv([run_experiment(QUICK, runs=3, seed=11)])
    c = write_csv([run_experiment(QUICK, runs=3, seed=12)])
    assert a == b and a != c


# -- CSV and traces --------------------------------------------------------------
def test_csv_round_trip(tmp_path):
    rows = [ExperimentResult("UMDA_g", "sphere", "-600:600", 10, 10, 80, 3696.0, 123.25,
                             1e-7 / 3, 0.1 + 0.2),
            ExperimentResult("GCEDA_g", "sumcan", "-0.16:0.16", 0, 10, 2000, math.nan,
                             math.nan, 33633.999999999, 0.0, found=False)]
    path = tmp_path / "r.csv"
    text = write_csv(rows, path)
    assert path.read_text() == text
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(str(path))
    assert back[0] == rows[0]
    assert back[1].best_mean == rows[1].best_mean and math.isnan(back[1].evals_mean)
    assert write_csv(back) == text
    assert read_csv(text)[0] == rows[0]


def test_write_traces(tmp_path):
    res = run_experiment(QUICK, runs=2, seed=2, population=40, trace=True)
    paths = write_traces(res, tmp_path / "traces")
    assert len(paths) == 2
    lines = open(paths[0]).read().splitlines()
    assert lines[0] == "generation,best,mean,var_1,var_2,var_3"
    assert len(lines) - 1 == res.run_results[0].generations
    assert float(lines[-1].split(",")[1]) == res.run_results[0].best_value


def test_table_presets():
    assert [len(table_preset(k)) for k in range(1, 13)] == [8, 8, 8, 8, 2, 2, 2, 4, 8, 8, 2, 2]
    labels = {s.model.label for s in table_preset(9)}
    assert "CVEDA_aic,greedy,g" in labels and "DVEDA_3,greedy,g" in labels
    assert {s.box for s in table_preset(4)} == set(BOXES["sumcan"].values())
    with pytest.raises(ValueError):
        table_preset(13)


# -- command line ----------------------------------------------------------------
SMOKE = ["--function", "sphere", "--dim", "3", "--runs", "2", "--seed", "3",
         "--max-evals", "20000"]


def test_cli_smoke(capsys, tmp_path):
    assert main(SMOKE + ["--box", "-600:600", "--trace", str(tmp_path / "t")]) == 0
    out = capsys.readouterr().out
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0].box == "-600:600" and rows[0].successes == 2
    assert len(os.listdir(tmp_path / "t")) == 2


def test_cli_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(SMOKE + ["--out", str(a)]) == 0
    assert main(SMOKE + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["--algo", "dveda", "--truncation", "12"],
    ["--algo", "cveda", "--dim", "1"],
    ["--box", "5:1"],
    ["--truncation", "0"],
    ["--families", "frank"],
    ["--table", "13"],
    ["--runs", "0"],
    ["--function", "rosenbrock"],
])
def test_cli_rejects_bad_settings(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_cli_accepts_vine_options(capsys):
    argv = ["--algo", "dveda", "--truncation", "aic", "--structure", "greedy", "--dim", "3",
            "--families", "normal,clayton", "--population", "40", "--runs", "1",
            "--max-evals", "400"]
    assert main(argv) == 0
    assert read_csv(capsys.readouterr().out)[0].algorithm == (
        "DVEDA_product+normal+clayton,aic,greedy,g")


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"function": "sumcan", "dim": 3, "box": "-0.1:0.1",
                               "population": 20, "runs": 1, "max-evals": 200}))
    assert main(["--config", str(cfg)]) == 0
    row = read_csv(capsys.readouterr().out)[0]
    assert row.function == "sumcan" and row.box == "-0.1:0.1" and row.population == 20
    # command-line values override the file
    assert main(["--config", str(cfg), "--population", "24"]) == 0
    assert read_csv(capsys.readouterr().out)[0].population == 24
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["--config", str(cfg)]) == 2
    cfg.write_text("[1, 2]")
    assert main(["--config", str(cfg)]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "copulaeda"] + SMOKE,
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[0] == ",".join(CSV_COLUMNS)
    proc = subprocess.run([sys.executable, "-m", "copulaeda", "--help"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "--truncation" in proc.stdout
