"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL`` line with its measurements
and then asserts the outcome. Run this file directly to get only the lines.
Criteria 6 to 9 run full benchmark experiments, take about an hour on one
core and carry the ``slow`` marker (deselect with ``-m "not slow"``).
"""
import functools
import time

import numpy as np
import pytest
from scipy import stats

from copula_cases import MODERATE, SETTINGS, copulas
from copulaeda.bench import (BOXES, BenchmarkFunction, BisectionConfig, ExperimentResult,
                             ExperimentSpec, run_experiment, write_csv)
from copulaeda.bicop import BivCopula, Family
from copulaeda.eda import EdaConfig, ModelSpec, run
from copulaeda.margins import NormalMargin
from copulaeda.numerics import kendall_tau
from copulaeda.vine import FitConfig, VineModel, VineStructure, log_density, sample

RUNS = 10
SEED = 0
REFERENCE = {("cveda", "sphere"): 188, ("dveda", "sphere"): 207,
             ("cveda", "sumcan"): 625, ("dveda", "sumcan"): 1400}


def _spec(function, algo, margins="normal", box=None, truncation=None, budget=500_000):
    model = ModelSpec(algo, margins, FitConfig(truncation=truncation))
    return ExperimentSpec(function, model, box or BOXES[function]["symmetric"],
                          max_evaluations=budget)


@functools.lru_cache(maxsize=None)
def _at_size(spec, size, full=False):
    """Runs at one population, seeded as the benchmark harness seeds them.

    Unless ``full``, stops at the first failure, which already decides a
    10-of-10 requirement.
    """
    if full:
        return run_experiment(spec, RUNS, SEED, population=size)
    problem = BenchmarkFunction(spec.function, spec.dimension).problem(spec.box)
    done = []
    for i in range(RUNS):
        cfg = EdaConfig(size, spec.model, [SEED, size, i], max_evaluations=spec.max_evaluations)
        done.append(run(problem, cfg))
        if not done[-1].success:
            break
    ok = [r.evaluations_used for r in done if r.success]
    best = [r.best_value for r in done]
    return ExperimentResult(spec.model.label, spec.function, spec.box_label,
                            len(ok), len(done), size, np.mean(ok) if ok else np.nan,
                            np.std(ok) if ok else np.nan, np.mean(best), np.std(best),
                            len(ok) == RUNS)


def _passes(result):
    return result.found and result.successes == result.runs == RUNS


def _row(result):
    evals = "-" if np.isnan(result.evals_mean) else f"{result.evals_mean:.0f}"
    return f"{result.algorithm} P={result.population} {result.success} evals={evals}"


# -- criteria ------------------------------------------------------------------
def criterion_1():
    g = np.linspace(0.1, 0.9, 9)
    u, v = np.meshgrid(g, g, indexing="ij")
    t0 = time.perf_counter()
    worst = max(np.max(np.abs(c.h(c.h_inv(u, v), v) - u)) for c in copulas(SETTINGS))
    took = time.perf_counter() - t0
    return worst <= 1e-7 and took < 5, f"max error {worst:.1e}, {took:.2f} s"


def criterion_2():
    grid = np.linspace(0, 1, 21)
    gu, gv = np.meshgrid(grid, grid, indexing="ij")
    bounds = max(max(np.max(np.maximum(gu + gv - 1, 0) - c.cdf(gu, gv)),
                     np.max(c.cdf(gu, gv) - np.minimum(gu, gv))) for c in copulas(SETTINGS))
    e = 1e-4
    f = np.linspace(0.2, 0.8, 5)
    fu, fv = np.meshgrid(f, f)
    x, w = np.polynomial.legendre.leggauss(64)
    x, w = (x + 1) / 2, np.outer(w / 2, w / 2)
    qu, qv = np.meshgrid(x, x, indexing="ij")
    fd = norm = 0.0
    for c in copulas(MODERATE):
        mixed = (c.cdf(fu + e, fv + e) - c.cdf(fu + e, fv - e) - c.cdf(fu - e, fv + e)
                 + c.cdf(fu - e, fv - e)) / (4 * e * e)
        fd = max(fd, np.max(np.abs(c.pdf(fu, fv) - mixed)))
        norm = max(norm, abs(np.sum(c.pdf(qu, qv) * w) - 1))
    ok = bounds <= 1e-12 and fd <= 1e-4 and norm <= 1e-3
    return ok, f"bound violation {bounds:.1e}, pdf-FD {fd:.1e}, |quadrature - 1| {norm:.1e}"


def _implied_corr(kind, r_a, r_b, partial):
    # correlation of a Gaussian vine from its partial correlations
    if kind == "C":
        r01, r02 = r_a, r_b
        r12 = partial * np.sqrt((1 - r01 ** 2) * (1 - r02 ** 2)) + r01 * r02
    else:
        r01, r12 = r_a, r_b
        r02 = partial * np.sqrt((1 - r01 ** 2) * (1 - r12 ** 2)) + r01 * r12
    return np.array([[1, r01, r02], [r01, 1, r12], [r02, r12, 1.0]])


def criterion_3():
    pts = np.random.default_rng(3).normal(size=(100, 3)) * 1.5
    worst = 0.0
    for kind in ("C", "D"):
        r_a, r_b, partial = 0.6, -0.4, 0.5
        trees = ((BivCopula(Family.NORMAL, rho=r_a), BivCopula(Family.NORMAL, rho=r_b)),
                 (BivCopula(Family.NORMAL, rho=partial),))
        model = VineModel(VineStructure(kind, (0, 1, 2)), trees, 2, (NormalMargin(0, 1),) * 3)
        ref = stats.multivariate_normal(np.zeros(3), _implied_corr(kind, r_a, r_b, partial))
        worst = max(worst, np.max(np.abs(np.exp(log_density(model, pts)) - ref.pdf(pts))))
    return worst <= 1e-6, f"max density error {worst:.1e}"


def criterion_4():
    t0 = time.perf_counter()
    model = VineModel(VineStructure("D", (0, 1)), ((BivCopula(Family.NORMAL, rho=0.8),),), 1,
                      (NormalMargin(0, 1),) * 2)
    x = sample(model, 10_000, rng=4)
    tau = kendall_tau(x[:, 0], x[:, 1])
    took = time.perf_counter() - t0
    target = 2 * np.arcsin(0.8) / np.pi
    ok = abs(tau - target) <= 0.02 and took < 10
    return ok, f"tau {tau:.4f} vs {target:.4f}, {took:.2f} s"


def criterion_5():
    t0 = time.perf_counter()
    res = run_experiment(_spec("sphere", "umda"), RUNS, SEED)
    took = time.perf_counter() - t0
    ok = _passes(res) and 40 <= res.population <= 200 and res.evals_mean <= 12_000 and took < 120
    return ok, f"{_row(res)}, {took:.0f} s"


def criterion_6():
    t0 = time.perf_counter()
    umda = [_at_size(_spec("sumcan", "umda", m), 2000, full=True) for m in ("normal", "kernel")]
    gceda = _at_size(_spec("sumcan", "gceda"), 650)
    took = time.perf_counter() - t0
    ok = all(r.successes == 0 for r in umda) and _passes(gceda) and took < 1200
    rows = "; ".join(_row(r) for r in umda + [gceda])
    return ok, f"{rows}; {took:.0f} s"


def criterion_7():
    t0 = time.perf_counter()
    box = BOXES["sphere"]["asymmetric"]
    kernel = _at_size(_spec("sphere", "gceda", "kernel", box), 1100)
    normal = _at_size(_spec("sphere", "gceda", "normal", box), 1100, full=True)
    detail = f"{_row(kernel)}; {_row(normal)}"
    ordered = not _passes(normal)
    if _passes(kernel) and not ordered:
        # both pass at 1100: compare the critical sizes found below the cap
        cfg = BisectionConfig(max_size=1100, runs=RUNS)
        pk = run_experiment(_spec("sphere", "gceda", "kernel", box), RUNS, SEED, cfg).population
        pn = run_experiment(_spec("sphere", "gceda", "normal", box), RUNS, SEED, cfg).population
        ordered = pn > pk
        detail += f"; critical sizes kernel {pk}, normal {pn}"
    took = time.perf_counter() - t0
    return _passes(kernel) and ordered, f"{detail}; {took:.0f} s"


def criterion_8():
    t0 = time.perf_counter()
    rows, ok = [], True
    for (algo, fn), ref in REFERENCE.items():
        for trunc in (None, "aic"):
            res = _at_size(_spec(fn, algo, truncation=trunc), int(2.5 * ref))
            ok &= _passes(res)
            rows.append(f"{_row(res)} on {fn}")
    took = time.perf_counter() - t0
    return ok and took < 2700, "; ".join(rows) + f"; {took:.0f} s"


def _max_levels(fn, algo, generations=None):
    size = REFERENCE[(algo, fn)]
    budget = 500_000 if generations is None else generations * size
    res = _at_size(_spec(fn, algo, truncation="aic", budget=budget), size, full=True)
    return [max(r.truncation_levels) for r in res.run_results]


def criterion_9():
    t0 = time.perf_counter()
    sphere = {a: _max_levels("sphere", a) for a in ("cveda", "dveda")}
    sumcan = {a: _max_levels("sumcan", a, generations=10) for a in ("cveda", "dveda")}
    ok = (sum(k <= 3 for k in sphere["cveda"]) >= 8 and sum(k <= 4 for k in sphere["dveda"]) >= 8
          and all(sum(k == 9 for k in v) >= 8 for v in sumcan.values()))
    detail = (f"Sphere max depth C {sphere['cveda']} D {sphere['dveda']}; "
              f"SumCan C {sumcan['cveda']} D {sumcan['dveda']}; {time.perf_counter() - t0:.0f} s")
    return ok, detail


def criterion_10():
    specs = [_spec("sphere", "gceda", "kernel", budget=6000),
             _spec("sphere", "dveda", truncation="bic", budget=6000)]
    texts = [write_csv([run_experiment(s, 3, 42, population=60) for s in specs])
             for _ in range(2)]
    return texts[0] == texts[1], f"{len(texts[0].encode())} bytes, identical: {texts[0] == texts[1]}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


def _line(number, ok, detail):
    return f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"


@pytest.mark.parametrize("number", [pytest.param(k, marks=pytest.mark.slow) if 6 <= k <= 9 else k
                                    for k in range(1, 11)])
def test_acceptance(number, capsys):
    ok, detail = CRITERIA[number - 1]()
    with capsys.disabled():
        print("\n" + _line(number, ok, detail), flush=True)
    assert ok, detail


if __name__ == "__main__":
    for i, check in enumerate(CRITERIA, 1):
        print(_line(i, *check()), flush=True)
