"""Solve the 10-dimensional Sphere function with UMDA, GCEDA and a D-vine EDA."""
from copulaeda.bench import BenchmarkFunction
from copulaeda.eda import EdaConfig, ModelSpec, run
from copulaeda.vine import FitConfig

problem = BenchmarkFunction("sphere", 10).problem((-600.0, 600.0))
models = [ModelSpec("umda"), ModelSpec("gceda", "kernel"),
          ModelSpec("dveda", vine=FitConfig(truncation="aic"))]
for model in models:
    result = run(problem, EdaConfig(250, model, seed=1))
    print(f"{model.label:24s} success={result.success} evaluations={result.evaluations_used} "
          f"best={result.best_value:.2e} trees={max(result.truncation_levels, default='-')}")
