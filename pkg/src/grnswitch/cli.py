"""Command-line front end.

Every subcommand writes one or more tables to ``--out-dir`` and prints the
written paths. Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import build_config, load_config_file
from .errors import ConfigError, DomainError, NumericalError
from .recipes import (ALIASES, RECIPES, charts_check_tables, continuation_tables, equilibrium_tables,
                      hopf_curve_tables, parplane_tables, pwl_tables, resolve_recipe, run_recipe, simulate_tables)
from .tables import emit

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="JSON experiment configuration")
    g.add_argument("--out-dir", type=Path, help="directory for result tables (default: .)")
    g.add_argument("--format", choices=("csv", "json"), help="table format (default: csv)")
    g.add_argument("--tol", type=float, help="integrator tolerance in [1e-12, 1e-6]")
    g.add_argument("--threads", type=int, help="worker processes for grid sweeps")
    m = parser.add_argument_group("model parameters")
    for name in ("gamma", "delta", "xi-a", "xi-b", "sigma", "eps", "mu"):
        m.add_argument(f"--{name}", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grnswitch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one of the model systems")
    _common(p)
    p.add_argument("--system", choices=("full", "qssr", "reduced-K2", "pwl-smoothed"))
    p.add_argument("--initial", type=float, nargs="+", metavar="X")
    p.add_argument("--t-end", type=float)

    p = sub.add_parser("equilibrium", help="equilibrium of the full model and its spectrum")
    _common(p)

    for name, text in (("continue", "continue the equilibrium around a circle in (xi_a, xi_b)"),
                       ("hopf-curve", "trace the Hopf curve seeded on the circle")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--center", type=float, nargs=2, metavar=("XI_A", "XI_B"))
        p.add_argument("--radius", type=float)
        p.add_argument("--points", type=int, help="samples on the circle")
        if name == "hopf-curve":
            p.add_argument("--step", type=float)
            p.add_argument("--max-step", type=float)

    p = sub.add_parser("pwl", help="switching-limit return map and exact event-driven flow")
    _common(p)
    p.add_argument("--p-b0", type=float, nargs="+", metavar="X", help="section points, each > 1")
    p.add_argument("--initial", type=float, nargs=2, metavar=("P_A", "P_B"))
    p.add_argument("--t-max", type=float)

    p = sub.add_parser("charts-check", help="overlap and eigenvalue checks of the blow-up atlas")
    _common(p)
    p.add_argument("--samples", type=int, default=100, help="points per chart pair")

    p = sub.add_parser("parplane", help="classify a (sigma, eps) grid")
    _common(p)
    p.add_argument("--sigma-range", type=float, nargs=3, metavar=("MIN", "MAX", "N"))
    p.add_argument("--eps-range", type=float, nargs=3, metavar=("MIN", "MAX", "N"))

    p = sub.add_parser("reproduce", help="run a named recipe")
    _common(p)
    p.add_argument("name", nargs="?", help="recipe name; see --list")
    p.add_argument("--list", action="store_true", help="list recipes and exit")
    return parser


def _flag_layer(args: argparse.Namespace) -> dict:
    out: dict = {}
    params = {}
    for name in ("gamma", "delta", "xi_a", "xi_b", "sigma", "eps", "mu"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    if params:
        out["params"] = params
    output = {}
    if args.out_dir is not None:
        output["dir"] = str(args.out_dir)
    if args.format is not None:
        output["format"] = args.format
    if output:
        out["output"] = output
    for flag, key in (("tol", "tol"), ("threads", "threads"), ("system", "system"), ("t_end", "t_end")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    if getattr(args, "initial", None) is not None:
        out["initial"] = list(args.initial)
    path = {}
    if getattr(args, "center", None) is not None:
        path["center"] = list(args.center)
    if getattr(args, "radius", None) is not None:
        path["radius"] = args.radius
    if getattr(args, "points", None) is not None:
        path["n"] = args.points
    if path:
        out["path"] = path
    hc = {k: getattr(args, k) for k in ("step", "max_step") if getattr(args, k, None) is not None}
    if hc:
        out["hopf_curve"] = hc
    pwl = {}
    if getattr(args, "p_b0", None) is not None:
        pwl["p_b0"] = list(args.p_b0)
    if getattr(args, "t_max", None) is not None:
        pwl["t_max"] = args.t_max
    if pwl:
        out["pwl"] = pwl
    grid = {}
    for axis in ("sigma", "eps"):
        rng = getattr(args, f"{axis}_range", None)
        if rng is not None:
            lo, hi, n = rng
            if n != int(n):
                raise ConfigError(f"--{axis}-range: N must be an integer")
            grid[axis] = {"min": lo, "max": hi, "n": int(n)}
    if grid:
        out["grid"] = grid
    return out


def _list_recipes() -> str:
    lines = []
    for name in sorted(RECIPES):
        r = RECIPES[name]
        tag = f" [criterion {r.criterion}]" if r.criterion is not None else ""
        lines.append(f"{name:18s} {r.description}{tag}")
    for alias, target in sorted(ALIASES.items()):
        lines.append(f"{alias:18s} alias of {target}")
    return "\n".join(lines)


def _execute(args: argparse.Namespace) -> list[Path]:
    if args.command == "reproduce" and args.list:
        print(_list_recipes())
        return []
    file_layer = load_config_file(args.config) if args.config is not None else {}
    flags = _flag_layer(args)
    if args.command == "reproduce":
        name = args.name or file_layer.get("experiment")
        if not name:
            raise ConfigError("reproduce needs a recipe name (argument or 'experiment' in the config)")
        recipe = resolve_recipe(name)
        cfg = build_config(recipe.defaults, file_layer, flags, {"experiment": recipe.name})
        tables = run_recipe(recipe.name, cfg)
    else:
        cfg = build_config(file_layer, flags)
        if args.command == "simulate":
            tables = simulate_tables(cfg)
        elif args.command == "equilibrium":
            tables = equilibrium_tables(cfg)
        elif args.command == "continue":
            tables = continuation_tables(cfg)
        elif args.command == "hopf-curve":
            tables = hopf_curve_tables(cfg)
        elif args.command == "pwl":
            tables = pwl_tables(cfg)
        elif args.command == "charts-check":
            tables = charts_check_tables(cfg, n=args.samples)
        else:
            tables = parplane_tables(cfg)
    return [emit(t, cfg.out_dir, cfg.fmt) for t in tables]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for path in _execute(args):
            print(path)
    except (ConfigError, DomainError) as exc:
        print(f"grnswitch {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"grnswitch {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"grnswitch {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
