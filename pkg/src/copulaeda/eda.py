"""The generational estimation-of-distribution loop.

Each generation evaluates the population, keeps the best fraction by
truncation selection, fits a search model to it and replaces the whole
population with a sample of the same size (no elitism).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import mvmodel, vine
from .margins import DegenerateSampleError
from .numerics import ConvergenceError, Interval

__all__ = [
    "ALGORITHMS",
    "EdaConfig",
    "EmptySelectionError",
    "ModelSpec",
    "Problem",
    "RunResult",
    "TraceRecord",
    "run",
    "truncation_select",
]

ALGORITHMS = ("umda", "gceda", "cveda", "dveda")

# Numerical failures inside model fitting or sampling that end a run.
_MODEL_FAILURES = (DegenerateSampleError, ConvergenceError, ArithmeticError,
                   FloatingPointError, np.linalg.LinAlgError)


class EmptySelectionError(ValueError):
    """Truncation selection would keep no individuals."""


@dataclass(frozen=True)
class Problem:
    """An optimisation problem with a known optimum value.

    Parameters
    ----------
    dimension : int
    objective : callable
        Maps an ``(M, dimension)`` array to ``M`` objective values.
    direction : {'minimize', 'maximize'}
    optimum_value : float
    init_box : sequence of Interval
        Per-variable range of the uniform initial population.
    name : str
    """

    dimension: int
    objective: Callable[[np.ndarray], np.ndarray]
    direction: str
    optimum_value: float
    init_box: tuple
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"unknown direction {self.direction!r}")
        box = tuple(b if isinstance(b, Interval) else Interval(*b) for b in self.init_box)
        if len(box) == 1 and self.dimension > 1:
            box = box * self.dimension
        if len(box) != self.dimension:
            raise ValueError("init_box needs one interval per variable")
        object.__setattr__(self, "init_box", box)


@dataclass(frozen=True)
class ModelSpec:
    """Search model: algorithm, margin family, vine options and the
    Gaussian-copula correlation estimator (``'kendall'`` or ``'pearson'``)."""

    algorithm: str = "umda"
    margins: str = "normal"
    vine: vine.FitConfig = field(default_factory=vine.FitConfig)
    correlation: str = "kendall"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.margins not in ("normal", "kernel"):
            raise ValueError(f"unknown margin kind {self.margins!r}")
        if self.correlation not in ("kendall", "pearson"):
            raise ValueError(f"unknown correlation estimator {self.correlation!r}")

    @property
    def label(self) -> str:
        """Short name such as ``GCEDA_e`` or ``CVEDA_aic,greedy,g``."""
        suffix = "g" if self.margins == "normal" else "e"
        if self.algorithm == "umda":
            return f"UMDA_{suffix}"
        if self.algorithm == "gceda":
            extra = ",pearson" if self.correlation == "pearson" else ""
            return f"GCEDA_{suffix}{extra}"
        cfg = self.vine
        parts = []
        if set(cfg.candidates) != set(vine.ALL_FAMILIES):
            parts.append("+".join(f.name.lower() for f in cfg.candidates))
        parts.append("full" if cfg.truncation is None else str(cfg.truncation))
        parts.extend([cfg.structure, suffix])
        return f"{self.algorithm.upper()}_{','.join(parts)}"


@dataclass(frozen=True)
class EdaConfig:
    """Run parameters.

    Parameters
    ----------
    population_size : int
        Large enough for selection to keep at least two individuals.
    model : ModelSpec
    seed : int or sequence of int
        Seed of the run's random generator.
    selection_fraction : float
        Fraction kept by truncation selection, in (0, 1).
    precision : float
        A run succeeds once ``|best - optimum| <= precision``.
    max_evaluations : int
        Budget; no new generation starts once it is reached.
    trace : bool
        Record per-generation summaries.
    """

    population_size: int
    model: ModelSpec = field(default_factory=ModelSpec)
    seed: object = 0
    selection_fraction: float = 0.3
    precision: float = 1e-6
    max_evaluations: int = 500_000
    trace: bool = False

    def __post_init__(self):
        if int(self.population_size) != self.population_size or self.population_size < 2:
            raise ValueError("population_size must be an integer >= 2")
        if not 0.0 < self.selection_fraction < 1.0:
            raise ValueError("selection_fraction must lie in (0, 1)")
        if not self.precision >= 0:
            raise ValueError("precision must be nonnegative")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        # every margin estimator needs two points
        if _selected_count(self.population_size, self.selection_fraction) < 2:
            raise ValueError("selection must keep at least two individuals")


@dataclass(frozen=True)
class TraceRecord:
    """Summary of one evaluated generation."""

    generation: int
    best: float
    mean: float
    variances: tuple


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run.

    ``generations`` counts evaluated populations, the initial one included,
    so ``evaluations_used == generations * population_size``.
    ``truncation_levels`` lists the fitted vine depth per model fit and is
    empty for other algorithms.
    """

    success: bool
    evaluations_used: int
    best_value: float
    generations: int
    trace: tuple = ()
    truncation_levels: tuple = ()
    stop_reason: str = ""


def _selected_count(size: int, fraction: float) -> int:
    # the small offset keeps e.g. 0.3 * 10 from flooring to 2
    return int(np.floor(fraction * size + 1e-9))


def truncation_select(population, fitness, fraction: float = 0.3,
                      direction: str = "minimize") -> np.ndarray:
    """Keep the best ``floor(fraction * N)`` individuals.

    Ties keep the lower index first. The rows come back ordered from best
    to worst.

    Raises
    ------
    EmptySelectionError
        If ``floor(fraction * N)`` is zero.
    """
    pop = np.asarray(population)
    f = np.asarray(fitness, dtype=float)
    if pop.shape[0] == 0 or pop.shape[0] != f.size:
        raise ValueError("population and fitness sizes differ or are empty")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    k = _selected_count(pop.shape[0], fraction)
    if k == 0:
        raise EmptySelectionError(f"fraction {fraction} of {pop.shape[0]} keeps nobody")
    key = f if direction == "minimize" else -f
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"unknown direction {direction!r}")
    return pop[np.argsort(key, kind="stable")[:k]]


def _fit_and_sample(spec: ModelSpec, selected, count, rng):
    """Fit the search model and sample; returns (population, truncation level or None)."""
    if spec.algorithm in ("umda", "gceda"):
        kind = "independence" if spec.algorithm == "umda" else "gaussian"
        model = mvmodel.fit(kind, selected, spec.margins, spec.correlation)
        return mvmodel.sample(model, count, rng), None
    kind = vine.VineKind.C if spec.algorithm == "cveda" else vine.VineKind.D
    model = vine.fit(selected, kind, spec.vine, spec.margins, structure_seed=rng)
    return vine.sample(model, count, rng), model.truncation_level


def run(problem: Problem, config: EdaConfig) -> RunResult:
    """Run the EDA until success or until the evaluation budget is spent.

    The initial population is uniform in the problem's box. A numerical
    failure while fitting or sampling, such as a selected population with
    a constant column, ends the run with the best value found so far.
    """
    rng = np.random.default_rng(config.seed)
    n, size = problem.dimension, config.population_size
    lo = np.array([b.lo for b in problem.init_box])
    hi = np.array([b.hi for b in problem.init_box])
    minimize = problem.direction == "minimize"
    spec = config.model
    if spec.algorithm in ("cveda", "dveda"):
        if n < 2:
            raise ValueError("vine algorithms need at least two variables")
        t = spec.vine.truncation
        if isinstance(t, int) and t > n - 1:
            raise ValueError(f"truncation {t} exceeds the {n - 1} trees of the vine")
        if _selected_count(size, config.selection_fraction) < 10:
            raise ValueError("vine algorithms need at least ten selected individuals")

    pop = lo + (hi - lo) * rng.random((size, n))
    best = np.inf if minimize else -np.inf
    evals = generations = 0
    trace, levels = [], []
    reason = "budget"
    while True:
        f = np.asarray(problem.objective(pop), dtype=float)
        evals += size
        generations += 1
        finite = f[np.isfinite(f)]
        if finite.size:
            gen_best = finite.min() if minimize else finite.max()
            best = min(best, gen_best) if minimize else max(best, gen_best)
        if config.trace:
            trace.append(TraceRecord(generations - 1, float(best), float(np.mean(f)),
                                     tuple(np.var(pop, axis=0, ddof=1).tolist())))
        if abs(best - problem.optimum_value) <= config.precision:
            reason = "optimum"
            break
        if evals >= config.max_evaluations:
            reason = "budget"
            break
        selected = truncation_select(pop, f, config.selection_fraction, problem.direction)
        try:
            with np.errstate(all="ignore"):
                new, level = _fit_and_sample(spec, selected, size, rng)
        except _MODEL_FAILURES as exc:
            reason = f"model failure: {type(exc).__name__}"
            break
        if not np.all(np.isfinite(new)):
            reason = "model failure: non-finite sample"
            break
        if level is not None:
            levels.append(level)
        pop = new
    success = reason == "optimum"
    return RunResult(success, evals, float(best), generations, tuple(trace),
                     tuple(levels), reason)
