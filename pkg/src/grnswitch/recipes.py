"""Named experiments producing :class:`ResultTable` objects.

Operations (``simulate``, ``equilibrium``, ...) turn a config into tables.
Recipes bundle an operation or an acceptance check with fixed defaults so
that ``grnswitch reproduce <name>`` regenerates a data set. Every acceptance
criterion maps to exactly one recipe (see :data:`CRITERION_RECIPES`).

Column contracts
----------------
``<name>-trajectory``  t, then the state columns of the system
``<name>-sections``    t, state columns at upward crossings of p_b = 1
``equilibrium``        xi_a, xi_b, r_a, r_b, p_a, p_b, residual, re_lambda_k, im_lambda_k (k = 0..3), stability
``continuation``       index, angle, xi_a, xi_b, r_a, r_b, p_a, p_b, re_lambda, im_lambda, stability
``hopf-points``        angle, xi_a, xi_b, r_a, r_b, p_a, p_b, omega
``hopf-curve``         index, xi_a, xi_b, re_lambda, omega
``poincare``           p_b0, p_a1, p_b2, p_a3, p_b4, return_time, flow_p_b4, flow_difference
``pwl-events``         index, t, line, p_a, p_b, normal_speed
``charts-check``       source, target, points, commutation, pushforward
``charts-eigenvalues`` chart, gamma, worst_slow_error, worst_fast_error
``parplane``           i, j, sigma, eps, mu, region, reduced_trace, status
``fig8-deviation``     mu, t, dev_a, dev_b, post_transient
``criterion-NN-name``  quantity, value (provenance carries ``passed``)
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from . import acceptance
from . import charts as ch
from .config import ExperimentConfig
from .equilibria import (circle_path, continue_along_path, critical_eigenvalue, find_hopf_points,
                         solve_equilibrium, trace_hopf_curve)
from .errors import ConfigError, DomainError, ExistenceError
from .model import ModelParams
from .pwl import PwlState, flow_exact, poincare_record, return_map_from_flow
from .reduction import MU0_DEFAULT, SIGMA0_DEFAULT, alpha, trace_at_equilibrium
from .sim import integrate, qssr_deviation
from .tables import ResultTable

__all__ = [
    "Recipe",
    "RECIPES",
    "CRITERION_RECIPES",
    "ALIASES",
    "run_recipe",
    "resolve_recipe",
    "simulate_tables",
    "equilibrium_tables",
    "continuation_tables",
    "hopf_curve_tables",
    "pwl_tables",
    "charts_check_tables",
    "parplane_tables",
    "classify_plane_point",
]

_STATE_COLUMNS = {
    "full": ("r_a", "r_b", "p_a", "p_b"),
    "qssr": ("p_a", "p_b"),
    "reduced-K2": ("u2", "v2"),
    "pwl-smoothed": ("p_a", "p_b"),
}


def _provenance(cfg: ExperimentConfig, name: str, **extra: str) -> dict[str, str]:
    return {"recipe": name, "config_sha256": cfg.digest, "version": __version__, **extra}


def _table(cfg: ExperimentConfig, recipe: str, name: str, columns, **extra: str) -> ResultTable:
    return ResultTable(name, [tuple(c) for c in columns], provenance=_provenance(cfg, recipe, **extra))


def _initial_for(system: str, initial: tuple[float, ...]) -> tuple[float, ...]:
    want = len(_STATE_COLUMNS[system])
    if len(initial) == want:
        return initial
    if system in ("qssr", "pwl-smoothed") and len(initial) == 4:
        return initial[2:]
    raise ConfigError(f"initial: system {system!r} needs {want} values, got {len(initial)}")


# --------------------------------------------------------------------------
# operations

def simulate_tables(cfg: ExperimentConfig, recipe: str = "simulate", prefix: str = "simulate") -> list[ResultTable]:
    system = cfg.system
    s0 = _initial_for(system, cfg.initial)
    sigma_mu = None
    if system == "reduced-K2":
        sigma_mu = (cfg.params.sigma, cfg.params.mu)
    tr = integrate(system, s0, cfg.params, cfg.t_end, cfg.tol, sigma_mu=sigma_mu)
    cols = [("t", "float")] + [(c, "float") for c in _STATE_COLUMNS[system]]
    traj = _table(cfg, recipe, f"{prefix}-trajectory", cols, system=system)
    for t, y in zip(tr.t, tr.y):
        traj.add(t, *y)
    sect = _table(cfg, recipe, f"{prefix}-sections", cols, system=system)
    for t, y in zip(tr.section_times, tr.section_states):
        sect.add(t, *y)
    return [traj, sect]


def _equilibrium_row(eq, xi):
    ev = sorted(eq.eigenvalues, key=lambda z: (-z.real, -z.imag))
    vals = [xi[0], xi[1], *eq.state, eq.residual]
    for z in ev:
        vals += [z.real, z.imag]
    return vals + [eq.stability]


def equilibrium_tables(cfg: ExperimentConfig, recipe: str = "equilibrium") -> list[ResultTable]:
    p = cfg.params
    eq = solve_equilibrium(p)
    cols = [("xi_a", "float"), ("xi_b", "float"), ("r_a", "float"), ("r_b", "float"), ("p_a", "float"),
            ("p_b", "float"), ("residual", "float")]
    for k in range(4):
        cols += [(f"re_lambda_{k}", "float"), (f"im_lambda_{k}", "float")]
    cols.append(("stability", "str"))
    t = _table(cfg, recipe, "equilibrium", cols)
    t.add(*_equilibrium_row(eq, (p.xi_a, p.xi_b)))
    return [t]


_CONT_COLUMNS = [("index", "int"), ("angle", "float"), ("xi_a", "float"), ("xi_b", "float"), ("r_a", "float"),
                 ("r_b", "float"), ("p_a", "float"), ("p_b", "float"), ("re_lambda", "float"),
                 ("im_lambda", "float"), ("stability", "str")]
_HOPF_COLUMNS = [("angle", "float"), ("xi_a", "float"), ("xi_b", "float"), ("r_a", "float"), ("r_b", "float"),
                 ("p_a", "float"), ("p_b", "float"), ("omega", "float")]


def _circle(cfg: ExperimentConfig):
    c = cfg.path
    return circle_path(tuple(c["center"]), c["radius"], c["n"])


def _continuation(cfg: ExperimentConfig):
    path = _circle(cfg)
    pts = continue_along_path(path, cfg.params)
    return path, pts, find_hopf_points(pts, path, cfg.params)


def _angle(s: float) -> float:
    return math.fmod(s, 2 * math.pi)


def continuation_tables(cfg: ExperimentConfig, recipe: str = "continue", prefix: str = "") -> list[ResultTable]:
    path, pts, hopf = _continuation(cfg)
    cont = _table(cfg, recipe, f"{prefix}continuation", _CONT_COLUMNS)
    for k, cp in enumerate(pts):
        lam = critical_eigenvalue(cp.equilibrium.eigenvalues)
        cont.add(k, _angle(cp.s), *cp.xi, *cp.equilibrium.state, lam.real, lam.imag, cp.stability)
    hp = _table(cfg, recipe, f"{prefix}hopf-points", _HOPF_COLUMNS)
    for h in hopf:
        hp.add(_angle(h.s), *h.xi, *h.state, h.omega)
    return [cont, hp]


def hopf_curve_tables(cfg: ExperimentConfig, recipe: str = "hopf-curve", prefix: str = "") -> list[ResultTable]:
    path, pts, hopf = _continuation(cfg)
    if not hopf:
        raise ExistenceError("no Hopf point on the configured circle to seed the curve")
    hc = cfg.hopf_curve
    curve = trace_hopf_curve(cfg.params, hopf[0], step=hc["step"], max_step=hc["max_step"],
                             bounds=(hc["xi_a_max"], hc["xi_b_max"]), max_points=hc["max_points"])
    t = _table(cfg, recipe, f"{prefix}hopf-curve",
               [("index", "int"), ("xi_a", "float"), ("xi_b", "float"), ("re_lambda", "float"), ("omega", "float")])
    guess = None
    for k, (xa, xb) in enumerate(curve):
        q = cfg.params.with_(xi_a=float(xa), xi_b=float(xb))
        eq = solve_equilibrium(q) if guess is None else solve_equilibrium(q, guess=guess)
        guess = eq.r_a
        lam = critical_eigenvalue(eq.eigenvalues)
        t.add(k, xa, xb, lam.real, lam.imag)
    return [t]


def pwl_tables(cfg: ExperimentConfig, recipe: str = "pwl") -> list[ResultTable]:
    p = cfg.params
    poin = _table(cfg, recipe, "poincare", [(c, "float") for c in
                                            ("p_b0", "p_a1", "p_b2", "p_a3", "p_b4", "return_time",
                                             "flow_p_b4", "flow_difference")])
    for x in cfg.pwl["p_b0"]:
        rec = poincare_record(float(x), p)
        flow, _ = return_map_from_flow(float(x), p)
        poin.add(rec.p_b0, rec.p_a1, rec.p_b2, rec.p_a3, rec.p_b4, rec.times[-1], flow, flow - rec.p_b4)
    s0 = _initial_for("pwl-smoothed", cfg.initial)
    traj = flow_exact(PwlState(*s0), p, cfg.pwl["t_max"], cfg.pwl["max_events"])
    ev = _table(cfg, recipe, "pwl-events",
                [("index", "int"), ("t", "float"), ("line", "str"), ("p_a", "float"), ("p_b", "float"),
                 ("normal_speed", "float")], status=traj.status, t_end=repr(traj.t_end))
    for k, e in enumerate(traj.events):
        ev.add(k, e.time, e.line, e.state.p_a, e.state.p_b, e.normal_speed)
    return [poin, ev]


def charts_check_tables(cfg: ExperimentConfig, recipe: str = "charts-check", n: int = 100) -> list[ResultTable]:
    res = acceptance.chart_overlap_errors(n=n, mu=cfg.params.mu if cfg.params.sigma > 0 else 0.5, p=cfg.params)
    t = _table(cfg, recipe, "charts-check", [("source", "str"), ("target", "str"), ("points", "int"),
                                             ("commutation", "float"), ("pushforward", "float")])
    for (a, b), (count, comm, push) in sorted(res.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        t.add(a.value, b.value, count, comm, push)
    e = _table(cfg, recipe, "charts-eigenvalues", [("chart", "str"), ("gamma", "float"),
                                                   ("worst_slow_error", "float"), ("worst_fast_error", "float")])
    rng = np.random.default_rng(5)
    p = cfg.params
    slow, fast = -min(1.0, p.gamma), -max(1.0, p.gamma)
    for chart in ch.ChartId:
        ws = wf = 0.0
        for _ in range(10):
            cv = [rng.uniform(0.01, 1), rng.uniform(0.01, 2),
                  rng.uniform(-2, 2) if chart.j in (None, 2) else rng.uniform(0.01, 2)]
            ev = ch.critical_manifold_eigenvalues(ch.slaved_point(chart, cv, p), p)
            ws, wf = max(ws, abs(ev[0] - slow)), max(wf, abs(ev[1] - fast))
        e.add(chart.value, p.gamma, ws, wf)
    return [t, e]


def classify_plane_point(sigma: float, eps: float, p: ModelParams,
                         mu0: float = MU0_DEFAULT, sigma0: float = SIGMA0_DEFAULT) -> str:
    """Region of ``(sigma, eps)``: outside the slow-manifold window, or on
    either side of the quadratic curve ``eps = alpha sigma^2``."""
    if not (sigma > 0 and eps > 0):
        raise DomainError("sigma and eps must be > 0")
    mu = eps / sigma
    if sigma >= sigma0 or mu >= mu0:
        return "no-manifold-guarantee"
    c = mu / sigma
    a = alpha(p)
    if c == a:
        return "boundary"
    return "hopf-possible" if c > a else "hopf-impossible"


def _plane_item(args):
    i, j, sigma, eps, p = args
    region = classify_plane_point(sigma, eps, p)
    mu = eps / sigma
    trace, status = math.nan, "not-computed"
    if region != "no-manifold-guarantee":
        try:
            trace, status = trace_at_equilibrium(p, sigma, mu), "ok"
        except ExistenceError:
            status = "no-interior-equilibrium"
    return i, j, sigma, eps, mu, region, trace, status


def _axis(spec: dict) -> np.ndarray:
    return np.geomspace(spec["min"], spec["max"], spec["n"])


def parplane_tables(cfg: ExperimentConfig, recipe: str = "parplane") -> list[ResultTable]:
    sig, eps = _axis(cfg.grid["sigma"]), _axis(cfg.grid["eps"])
    items = [(i, j, float(s), float(e), cfg.params) for i, s in enumerate(sig) for j, e in enumerate(eps)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(_plane_item, items, chunksize=max(1, len(items) // (4 * cfg.threads))))
    else:
        rows = [_plane_item(it) for it in items]
    rows.sort(key=lambda r: (r[0], r[1]))
    t = _table(cfg, recipe, "parplane",
               [("i", "int"), ("j", "int"), ("sigma", "float"), ("eps", "float"), ("mu", "float"),
                ("region", "str"), ("reduced_trace", "float"), ("status", "str")],
               alpha=repr(alpha(cfg.params)), mu0=repr(MU0_DEFAULT), sigma0=repr(SIGMA0_DEFAULT))
    for r in rows:
        t.add(*r)
    return [t]


# --------------------------------------------------------------------------
# figure recipes

def _fig3(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
    result = acceptance.check_fig3(cfg.tol)
    tables = []
    for eps in (5e-5, 5e-3):
        sub = cfg.params.with_(eps=eps)
        tr = integrate("full", cfg.initial, sub, cfg.t_end, cfg.tol)
        t = _table(cfg, name, f"fig3-trajectory-eps{eps:g}",
                   [("t", "float")] + [(c, "float") for c in _STATE_COLUMNS["full"]], eps=repr(eps))
        for tt, y in zip(tr.t, tr.y):
            t.add(tt, *y)
        tables.append(t)
    v = _table(cfg, name, "fig3-verdicts", [("eps", "float"), ("verdict", "str"), ("period", "float"),
                                            ("returns", "int"), ("newton_step", "float"), ("status", "str")])
    for eps, (verdict, _final) in sorted(result.details["verdicts"].items()):
        period = verdict.period if verdict.period is not None else math.nan
        v.add(eps, verdict.kind, period, verdict.returns, verdict.residual,
              "ok" if verdict.period is not None else "no-period")
    tables.append(v)
    tables.append(_criterion_table(cfg, name, result))
    return tables


def _fig_circle(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
    return continuation_tables(cfg, name, prefix=f"{name}-")


def _fig7(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
    return continuation_tables(cfg, name, prefix=f"{name}-") + hopf_curve_tables(cfg, name, prefix=f"{name}-")


def _fig8(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
    series = _table(cfg, name, "fig8-deviation", [("mu", "float"), ("t", "float"), ("dev_a", "float"),
                                                  ("dev_b", "float"), ("post_transient", "int")])
    summary = _table(cfg, name, "fig8-summary", [("mu", "float"), ("max_deviation", "float")])
    for eps in (2e-2, 5e-3, 8e-4):
        p = cfg.params.with_(eps=eps)
        tr = integrate("full", cfg.initial, p, cfg.t_end, cfg.tol)
        dev = qssr_deviation(tr, p)
        for row in zip(dev.t, dev.dev_a, dev.dev_b, dev.post_transient):
            series.add(p.mu, row[0], row[1], row[2], int(row[3]))
        summary.add(p.mu, dev.max_after_transient())
    return [series, summary]


def _parplane(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
    return parplane_tables(cfg, name)


# --------------------------------------------------------------------------
# registry

def _criterion_table(cfg: ExperimentConfig, recipe: str, result) -> ResultTable:
    t = _table(cfg, recipe, f"criterion-{result.number:02d}-{result.name}", [("quantity", "str"), ("value", "float")],
               criterion=str(result.number), passed="true" if result.passed else "false")
    for key in sorted(result.values):
        if "seconds" in key:  # wall-clock time would break determinism
            continue
        t.add(key, float(result.values[key]))
    return t


def _criterion_recipe(number: int) -> Callable[[ExperimentConfig, str], list[ResultTable]]:
    def run(cfg: ExperimentConfig, name: str) -> list[ResultTable]:
        return [_criterion_table(cfg, name, acceptance.CRITERIA[number]())]

    return run


@dataclass(frozen=True)
class Recipe:
    name: str
    description: str
    run: Callable[[ExperimentConfig, str], list[ResultTable]]
    defaults: dict
    criterion: int | None = None


RECIPES: dict[str, Recipe] = {}


def _register(name, description, run, defaults=None, criterion=None):
    RECIPES[name] = Recipe(name, description, run, defaults or {}, criterion)


_register("alpha", "critical ray slope alpha = 8/9", _criterion_recipe(1), criterion=1)
_register("fig3", "equilibrium vs limit cycle at eps = 5e-5 and 5e-3", _fig3,
          {"initial": [0.0, 0.0, 0.5, 0.5], "t_end": 1000.0}, criterion=2)
_register("qssr-nocycle", "no limit cycles in the protein-only system", _criterion_recipe(3), criterion=3)
_register("hopf-count", "Hopf points on the parameter circle", _criterion_recipe(4), criterion=4)
_register("trace", "reduced trace vs its two-term expansion", _criterion_recipe(5), criterion=5)
_register("mu-hopf-slope", "slope of mu_Hopf(sigma) at sigma = 0", _criterion_recipe(6), criterion=6)
_register("poincare", "switching-limit return map checks", _criterion_recipe(7), criterion=7)
_register("residual-order", "slow-manifold invariance defect order", _criterion_recipe(8), criterion=8)
_register("charts", "blow-up atlas overlap and eigenvalue checks", _criterion_recipe(9), criterion=9)
_register("hamiltonian", "conservation of H for mu = sigma = 0", _criterion_recipe(10), criterion=10)
_register("nonexistence", "Lie-derivative defect limit and deviation ordering", _criterion_recipe(11),
          criterion=11)
_register("eps-independence", "equilibrium location does not depend on eps", _criterion_recipe(12), criterion=12)
_register("fig4", "(sigma, eps) plane partition", _parplane,
          {"params": {"sigma": 1e-2, "eps": 5e-3}})
_register("fig6-circle", "continuation along the circle at eps = 5e-5 (no Hopf)", _fig_circle,
          {"params": {"eps": 5e-5}, "path": {"center": [1.0, 2.0], "radius": 0.5, "n": 720}})
_register("fig7", "continuation along the circle at eps = 5e-3 and the Hopf curve", _fig7,
          {"params": {"eps": 5e-3}, "path": {"center": [1.0, 2.0], "radius": 0.5, "n": 720}})
_register("fig8", "distance from the quasi-steady-state graph for mu = 10, 2.5, 0.4", _fig8,
          {"params": {"sigma": 2e-3, "eps": 2e-2}, "initial": [0.0, 0.0, 0.5, 0.5], "t_end": 1000.0})

ALIASES = {"parplane": "fig4", "fig6": "fig6-circle"}

CRITERION_RECIPES = {r.criterion: r.name for r in RECIPES.values() if r.criterion is not None}


def resolve_recipe(name: str) -> Recipe:
    key = ALIASES.get(name, name)
    if key not in RECIPES:
        known = ", ".join(sorted(RECIPES) + sorted(ALIASES))
        raise ConfigError(f"unknown recipe {name!r}; known: {known}")
    return RECIPES[key]


def run_recipe(name: str, cfg: ExperimentConfig) -> list[ResultTable]:
    recipe = resolve_recipe(name)
    return recipe.run(cfg, recipe.name)
