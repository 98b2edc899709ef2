"""Command-line benchmark harness.

Examples
--------
copulaeda --function sphere --algo umda --margins normal --box -600:600 --runs 10 --seed 7
copulaeda --table 1 --out table1.csv
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench import (BOXES, FUNCTIONS, BisectionConfig, ExperimentSpec, run_experiment,
                    table_preset, write_csv, write_traces)
from .bicop import Family
from .eda import ALGORITHMS, ModelSpec
from .vine import FitConfig

__all__ = ["build_parser", "main"]

log = logging.getLogger("copulaeda")

_FAMILY_NAMES = {
    "product": Family.PRODUCT,
    "normal": Family.NORMAL,
    "t": Family.STUDENT_T,
    "student_t": Family.STUDENT_T,
    "clayton": Family.CLAYTON,
    "rot_clayton": Family.ROT_CLAYTON,
    "gumbel": Family.GUMBEL,
    "rot_gumbel": Family.ROT_GUMBEL,
}


class ConfigError(ValueError):
    """Invalid command-line or configuration-file settings."""


def _box(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"box must look like LO:HI, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"box needs LO < HI, got {text!r}")
    return lo, hi


def _truncation(text: str):
    if text.lower() in ("aic", "bic"):
        return text.lower()
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"truncation must be an integer, aic or bic") from None
    if k < 1:
        raise argparse.ArgumentTypeError("truncation level must be at least 1")
    return k


def _families(text: str) -> tuple:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    try:
        fams = {_FAMILY_NAMES[n] for n in names}
    except KeyError as exc:
        raise argparse.ArgumentTypeError(
            f"unknown family {exc.args[0]!r}; choose from {', '.join(_FAMILY_NAMES)}") from None
    # the independence test can always fall back to the product copula
    fams.add(Family.PRODUCT)
    return tuple(sorted(fams))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="copulaeda",
        description="Run copula and vine EDA benchmark experiments and write a CSV summary.")
    p.add_argument("--config", metavar="FILE",
                   help="JSON object of option defaults, keyed by long option name")
    p.add_argument("--function", choices=sorted(FUNCTIONS), default="sphere")
    p.add_argument("--dim", type=int, default=10, help="problem dimension (default 10)")
    p.add_argument("--algo", choices=ALGORITHMS, default="umda")
    p.add_argument("--margins", choices=("normal", "kernel"), default="normal")
    p.add_argument("--box", type=_box, metavar="LO:HI",
                   help="initial interval of every variable (default: the symmetric box)")
    p.add_argument("--truncation", type=_truncation, metavar="{N|aic|bic}",
                   help="vine truncation: number of trees, aic or bic (default: full)")
    p.add_argument("--structure", choices=("greedy", "random"), default="greedy")
    p.add_argument("--families", type=_families, metavar="LIST",
                   help="comma-separated pair-copula families (default: all seven)")
    p.add_argument("--correlation", choices=("kendall", "pearson"), default="kendall",
                   help="GCEDA correlation estimator (default kendall)")
    p.add_argument("--runs", type=int, default=10, help="runs per population size (default 10)")
    p.add_argument("--seed", type=int, default=0, help="non-negative experiment seed")
    p.add_argument("--population", type=int, metavar="P",
                   help="report a fixed population size instead of searching for it")
    p.add_argument("--initial-size", type=int, default=16)
    p.add_argument("--max-size", type=int, default=2000)
    p.add_argument("--width-stop", type=float, default=0.05,
                   help="relative bisection width at which the search stops")
    p.add_argument("--max-evals", type=int, default=500_000)
    p.add_argument("--full-scale", action="store_true",
                   help="30 runs per size instead of the --runs value")
    p.add_argument("--table", type=int, metavar="K", help="run the preset rows of table K (1-12)")
    p.add_argument("--trace", metavar="DIR", help="write per-run generation traces into DIR")
    p.add_argument("--out", metavar="PATH", help="CSV output path (default: standard output)")
    p.add_argument("-v", "--verbose", action="store_true", help="log probe progress to stderr")
    return p


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> None:
    pre, _ = parser.parse_known_args(argv)
    if not pre.config:
        return
    try:
        with open(pre.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {pre.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        action = known[dest]
        if action.type is not None and isinstance(value, str):
            try:
                value = action.type(value)
            except argparse.ArgumentTypeError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key!r}: invalid choice {value!r}")
        defaults[dest] = value
    parser.set_defaults(**defaults)


def _specs(args) -> list[ExperimentSpec]:
    if args.table is not None:
        try:
            return table_preset(args.table)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.dim < 1:
        raise ConfigError("--dim must be positive")
    if args.algo in ("cveda", "dveda"):
        if args.dim < 2:
            raise ConfigError("vine algorithms need --dim of at least 2")
        if isinstance(args.truncation, int) and args.truncation > args.dim - 1:
            raise ConfigError(f"--truncation {args.truncation} exceeds the {args.dim - 1} "
                              f"trees of a {args.dim}-variable vine")
    fams = args.families or tuple(Family)
    vine_cfg = FitConfig(truncation=args.truncation, structure=args.structure, candidates=fams)
    model = ModelSpec(args.algo, args.margins, vine_cfg, args.correlation)
    box = args.box or BOXES[args.function]["symmetric"]
    return [ExperimentSpec(args.function, model, box, args.dim, args.max_evals)]


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--box -600:600" as two options; glue the value on
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--box":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--box={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    """Entry point; returns 0 on success and 2 on configuration errors."""
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if args.runs < 1 or args.seed < 0:
            raise ConfigError("--runs must be positive and --seed non-negative")
        runs = 30 if args.full_scale else args.runs
        bisection = BisectionConfig(args.initial_size, runs, None, args.width_stop, args.max_size)
        specs = _specs(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, ValueError) as exc:
        print(f"copulaeda: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    results = []
    for spec in specs:
        result = run_experiment(spec, runs, args.seed, bisection, args.population,
                                trace=bool(args.trace), progress=log.info)
        results.append(result)
        if args.trace:
            write_traces(result, args.trace)
    text = write_csv(results, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
