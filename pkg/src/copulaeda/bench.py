"""Benchmark functions, critical-population bisection and experiment tables."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bicop import Family
from .eda import EdaConfig, ModelSpec, Problem, RunResult, run
from .numerics import Interval
from .vine import FitConfig

__all__ = [
    "BOXES",
    "CSV_COLUMNS",
    "FUNCTIONS",
    "BenchmarkFunction",
    "BisectionConfig",
    "BisectionOutcome",
    "ExperimentResult",
    "ExperimentSpec",
    "ackley",
    "critical_population",
    "evaluate",
    "griewank",
    "read_csv",
    "run_experiment",
    "sphere",
    "summation_cancellation",
    "table_preset",
    "write_csv",
    "write_traces",
]


# -- test functions ------------------------------------------------------------
def sphere(x) -> np.ndarray:
    """Sum of squares; minimum 0 at the origin."""
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def griewank(x) -> np.ndarray:
    """Griewank function; minimum 0 at the origin."""
    x = np.asarray(x, dtype=float)
    i = np.arange(1, x.shape[-1] + 1)
    return 1.0 + np.sum(x * x, axis=-1) / 4000.0 - np.prod(np.cos(x / np.sqrt(i)), axis=-1)


def ackley(x) -> np.ndarray:
    """Ackley function; minimum 0 at the origin.

    The constant terms are paired with the exponentials they cancel so the
    origin evaluates to exactly zero.
    """
    x = np.asarray(x, dtype=float)
    a = 20.0 - 20.0 * np.exp(-0.2 * np.sqrt(np.mean(x * x, axis=-1)))
    b = np.e - np.exp(np.mean(np.cos(2.0 * np.pi * x), axis=-1))
    return a + b


def summation_cancellation(x) -> np.ndarray:
    """``1 / (1e-5 + sum_i |y_i|)`` with ``y_i = x_1 + ... + x_i``; maximum 1e5 at the origin."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (1e-5 + np.sum(np.abs(np.cumsum(x, axis=-1)), axis=-1))


# name -> (function, direction, optimum value)
FUNCTIONS: dict[str, tuple[Callable, str, float]] = {
    "sphere": (sphere, "minimize", 0.0),
    "griewank": (griewank, "minimize", 0.0),
    "ackley": (ackley, "minimize", 0.0),
    "sumcan": (summation_cancellation, "maximize", 1e5),
}

BOXES: dict[str, dict[str, tuple[float, float]]] = {
    "sphere": {"symmetric": (-600.0, 600.0), "asymmetric": (-300.0, 900.0)},
    "griewank": {"symmetric": (-600.0, 600.0), "asymmetric": (-300.0, 900.0)},
    "ackley": {"symmetric": (-30.0, 30.0), "asymmetric": (-15.0, 45.0)},
    "sumcan": {"symmetric": (-0.16, 0.16), "asymmetric": (-0.08, 0.24)},
}


@dataclass(frozen=True)
class BenchmarkFunction:
    """One of the four test functions in a given dimension."""

    name: str
    dimension: int = 10

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    @property
    def direction(self) -> str:
        return FUNCTIONS[self.name][1]

    @property
    def optimum_value(self) -> float:
        return FUNCTIONS[self.name][2]

    def __call__(self, x):
        return FUNCTIONS[self.name][0](x)

    def problem(self, box: tuple[float, float]) -> Problem:
        """Optimisation problem with the same initial interval for every variable."""
        return Problem(self.dimension, self, self.direction, self.optimum_value,
                       (Interval(*box),) * self.dimension, self.name)


def evaluate(fn: BenchmarkFunction, x) -> float:
    """Value of ``fn`` at a single point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fn.dimension,):
        raise ValueError(f"expected a point of length {fn.dimension}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return float(fn(x))


# -- bisection ---------------------------------------------------------------
@dataclass(frozen=True)
class BisectionConfig:
    """Critical population search settings.

    A size passes when at least ``required_successes`` of ``runs`` runs
    succeed. ``required_successes`` defaults to ``runs``.
    """

    initial_size: int = 16
    runs: int = 10
    required_successes: int | None = None
    relative_width_stop: float = 0.05
    max_size: int = 2000

    def __post_init__(self):
        if self.initial_size < 4:
            raise ValueError("initial_size must be at least 4")
        if not 0.0 < self.relative_width_stop < 1.0:
            raise ValueError("relative_width_stop must lie in (0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.required_successes is None:
            object.__setattr__(self, "required_successes", self.runs)
        if not 1 <= self.required_successes <= self.runs:
            raise ValueError("required_successes must lie in 1..runs")
        if self.max_size < self.initial_size:
            raise ValueError("max_size must be at least initial_size")


@dataclass(frozen=True)
class BisectionOutcome:
    """Result of :func:`critical_population`.

    ``size`` is the smallest passing size probed, or ``max_size`` with
    ``found`` false when even that fails. ``probes`` lists every
    (size, passed) pair in probing order.
    """

    size: int
    found: bool
    probes: tuple


def critical_population(passes: Callable[[int], bool],
                        cfg: BisectionConfig = BisectionConfig()) -> BisectionOutcome:
    """Smallest passing population size by doubling then bisection.

    Sizes double from ``initial_size`` until one passes, with the last step
    capped at ``max_size``. The interval between the last failing and first
    passing size is then halved until its width relative to the passing
    end is at most ``relative_width_stop``.

    Parameters
    ----------
    passes : callable
        ``passes(size) -> bool``.
    cfg : BisectionConfig
    """
    probes = []

    def probe(size):
        ok = bool(passes(size))
        probes.append((size, ok))
        return ok

    lo, hi = None, cfg.initial_size
    while not probe(hi):
        if hi >= cfg.max_size:
            return BisectionOutcome(cfg.max_size, False, tuple(probes))
        lo, hi = hi, min(2 * hi, cfg.max_size)
    if lo is None:
        return BisectionOutcome(hi, True, tuple(probes))
    while (hi - lo) / hi > cfg.relative_width_stop and hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return BisectionOutcome(hi, True, tuple(probes))


# -- experiments ---------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentSpec:
    """One table row: a search model on a function and initial box."""

    function: str
    model: ModelSpec
    box: tuple = None
    dimension: int = 10
    max_evaluations: int = 500_000

    def __post_init__(self):
        BenchmarkFunction(self.function, self.dimension)
        box = self.box if self.box is not None else BOXES[self.function]["symmetric"]
        box = (float(box[0]), float(box[1]))
        Interval(*box)
        object.__setattr__(self, "box", box)

    @property
    def box_label(self) -> str:
        return f"{_fmt(self.box[0])}:{_fmt(self.box[1])}"


@dataclass(frozen=True)
class ExperimentResult:
    """Summary of an experiment, one CSV row.

    Evaluation statistics cover the successful runs only (NaN when there
    are none). Best-value statistics cover all reported runs. Standard
    deviations use ``ddof=1`` and are 0 for a single value.
    """

    algorithm: str
    function: str
    box: str
    successes: int
    runs: int
    population: int
    evals_mean: float
    evals_std: float
    best_mean: float
    best_std: float
    found: bool = True
    probes: tuple = field(default=(), compare=False)
    run_results: tuple = field(default=(), compare=False, repr=False)

    @property
    def success(self) -> str:
        return f"{self.successes}/{self.runs}"


CSV_COLUMNS = ("algorithm", "function", "box", "success", "population",
               "evals_mean", "evals_std", "best_mean", "best_std")


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def _std(values) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _run_seed(seed: int, size: int, index: int) -> list[int]:
    return [int(seed), int(size), int(index)]


class _Prober:
    """Runs and caches the seeded runs of each population size."""

    def __init__(self, spec: ExperimentSpec, cfg: BisectionConfig, seed: int, trace: bool,
                 progress: Callable[[str], None] | None):
        self.spec, self.cfg, self.seed, self.trace = spec, cfg, seed, trace
        self.problem = BenchmarkFunction(spec.function, spec.dimension).problem(spec.box)
        self.cache: dict[int, list[RunResult]] = {}
        self.progress = progress

    def _one(self, size: int, index: int) -> RunResult:
        cfg = EdaConfig(size, self.spec.model, _run_seed(self.seed, size, index),
                        max_evaluations=self.spec.max_evaluations, trace=self.trace)
        return run(self.problem, cfg)

    def runs(self, size: int, stop_early: bool) -> list[RunResult]:
        done = self.cache.setdefault(size, [])
        allowed = self.cfg.runs - self.cfg.required_successes
        while len(done) < self.cfg.runs:
            if stop_early and sum(not r.success for r in done) > allowed:
                break
            done.append(self._one(size, len(done)))
        if self.progress:
            ok = sum(r.success for r in done)
            self.progress(f"{self.spec.model.label} {self.spec.function} size {size}: "
                          f"{ok}/{len(done)} successes")
        return done

    def passes(self, size: int) -> bool:
        done = self.runs(size, stop_early=True)
        return sum(r.success for r in done) >= self.cfg.required_successes


def _summarise(spec: ExperimentSpec, size: int, found: bool, runs: Sequence[RunResult],
               probes=()) -> ExperimentResult:
    ok = [r.evaluations_used for r in runs if r.success]
    best = [r.best_value for r in runs]
    return ExperimentResult(
        algorithm=spec.model.label, function=spec.function, box=spec.box_label,
        successes=sum(r.success for r in runs), runs=len(runs), population=size,
        evals_mean=float(np.mean(ok)) if ok else math.nan, evals_std=_std(ok) if ok else math.nan,
        best_mean=float(np.mean(best)), best_std=_std(best), found=found,
        probes=tuple(probes), run_results=tuple(runs))


def run_experiment(spec: ExperimentSpec, runs: int = 10, seed: int = 0,
                   bisection: BisectionConfig | None = None, population: int | None = None,
                   trace: bool = False, progress: Callable[[str], None] | None = None
                   ) -> ExperimentResult:
    """Find the critical population and report the runs at that size.

    Run ``i`` at size ``P`` is seeded with ``(seed, P, i)``, so a size's
    runs are the same whenever it is probed. The reported runs at the
    critical size are therefore exactly the ones that made it pass.
    Probes stop at the first run that makes passing impossible; the
    reported size always gets all ``runs`` runs.

    Parameters
    ----------
    spec : ExperimentSpec
    runs : int
        Runs per probe and in the report.
    seed : int
        Non-negative experiment seed.
    bisection : BisectionConfig, optional
        Search settings; its ``runs`` is overridden by ``runs``.
    population : int, optional
        Skip the search and report this fixed size.
    trace : bool
        Keep per-generation traces in the run results.
    progress : callable, optional
        Receives one line per probe.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    base = bisection or BisectionConfig(runs=runs)
    required = min(base.required_successes, runs)
    if base.required_successes == base.runs:
        required = runs
    cfg = BisectionConfig(base.initial_size, runs, required, base.relative_width_stop,
                          base.max_size)
    prober = _Prober(spec, cfg, seed, trace, progress)
    if population is not None:
        done = prober.runs(int(population), stop_early=False)
        ok = sum(r.success for r in done) >= cfg.required_successes
        return _summarise(spec, int(population), ok, done, ((int(population), ok),))
    outcome = critical_population(prober.passes, cfg)
    done = prober.runs(outcome.size, stop_early=False)
    return _summarise(spec, outcome.size, outcome.found, done, outcome.probes)


# -- CSV ---------------------------------------------------------------------
def _row(result: ExperimentResult) -> list[str]:
    return [result.algorithm, result.function, result.box, result.success,
            str(result.population), repr(result.evals_mean), repr(result.evals_std),
            repr(result.best_mean), repr(result.best_std)]


def write_csv(results: Iterable[ExperimentResult], path=None) -> str:
    """Write results as CSV (to ``path`` if given) and return the text.

    Floats are written with :func:`repr`, which round-trips exactly.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(_row(r))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(source) -> list[ExperimentResult]:
    """Parse CSV text or a file path written by :func:`write_csv`."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = str(source)
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        k, n = row["success"].split("/")
        out.append(ExperimentResult(
            algorithm=row["algorithm"], function=row["function"], box=row["box"],
            successes=int(k), runs=int(n), population=int(row["population"]),
            evals_mean=float(row["evals_mean"]), evals_std=float(row["evals_std"]),
            best_mean=float(row["best_mean"]), best_std=float(row["best_std"]),
            found=int(k) > 0))
    return out


def write_traces(result: ExperimentResult, directory) -> list[str]:
    """Write one trace CSV per reported run into ``directory``.

    Columns are ``generation,best,mean,var_1..var_n``. Returns the paths.
    """
    os.makedirs(directory, exist_ok=True)
    stem = "_".join([result.algorithm, result.function, result.box.replace(":", "_"),
                     f"pop{result.population}"])
    stem = "".join(c if c.isalnum() or c in "-_.+" else "-" for c in stem)
    paths = []
    for i, r in enumerate(result.run_results):
        path = os.path.join(directory, f"{stem}_run{i}.csv")
        n = len(r.trace[0].variances) if r.trace else 0
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best", "mean"] + [f"var_{k + 1}" for k in range(n)])
            for t in r.trace:
                w.writerow([t.generation, repr(t.best), repr(t.mean)] + [repr(v) for v in t.variances])
        paths.append(path)
    return paths


# -- table presets -------------------------------------------------------------
_NORMAL_ONLY = (Family.PRODUCT, Family.NORMAL)


def _vine(algo: str, truncation=None, structure: str = "greedy", candidates=None) -> ModelSpec:
    cfg = FitConfig(truncation=truncation, structure=structure,
                    candidates=candidates or tuple(Family))
    return ModelSpec(algo, "normal", cfg)


def table_preset(table: int) -> list[ExperimentSpec]:
    """Experiment rows of preset ``table`` (1 to 12).

    Presets 1 to 4 compare UMDA and GCEDA with both margin kinds on both
    boxes of Sphere, Griewank, Ackley and Summation Cancellation. Presets 5
    to 8 run the full greedy vines on the same functions (preset 8 adds the
    product-and-normal family restriction). Presets 9 and 10 compare
    truncation levels 3, 6, AIC and BIC on Sphere and Summation
    Cancellation. Presets 11 and 12 use random structures.
    """
    funcs = ["sphere", "griewank", "ackley", "sumcan"]
    if 1 <= table <= 4:
        fn = funcs[table - 1]
        rows = []
        for box in ("symmetric", "asymmetric"):
            for algo in ("umda", "gceda"):
                for margins in ("normal", "kernel"):
                    rows.append(ExperimentSpec(fn, ModelSpec(algo, margins), BOXES[fn][box]))
        return rows
    if 5 <= table <= 8:
        fn = funcs[table - 5]
        rows = [ExperimentSpec(fn, _vine("cveda"))]
        if table == 8:
            rows.append(ExperimentSpec(fn, _vine("cveda", candidates=_NORMAL_ONLY)))
        rows.append(ExperimentSpec(fn, _vine("dveda")))
        if table == 8:
            rows.append(ExperimentSpec(fn, _vine("dveda", candidates=_NORMAL_ONLY)))
        return rows
    if table in (9, 10):
        fn = "sphere" if table == 9 else "sumcan"
        return [ExperimentSpec(fn, _vine(algo, t))
                for algo in ("cveda", "dveda") for t in (3, 6, "aic", "bic")]
    if table == 11:
        return [ExperimentSpec("sphere", _vine(a, "bic", "random")) for a in ("cveda", "dveda")]
    if table == 12:
        return [ExperimentSpec("sumcan", _vine(a, "aic", "random")) for a in ("cveda", "dveda")]
    raise ValueError(f"no preset for table {table}; choose 1 to 12")
