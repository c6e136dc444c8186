"""Executable acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult` with the measured quantities so
that the test suite, the CLI and the README all report the same numbers.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import charts as ch
from .equilibria import circle_path, continue_along_path, count_stability_changes, find_hopf_points, solve_equilibrium
from .model import OSCILLATION_PARAMS, ModelParams, lie_derivative_defect, qssr_vector_field
from .pwl import (poincare_derivatives_at_one, poincare_map, poincare_second_derivative_formula,
                  return_map_from_flow)
from .reduction import (ReducedState, alpha, hamiltonian, mu_hopf, mu_hopf_slope, slow_manifold_residual,
                        trace_asymptotic, trace_at_equilibrium)
from .sim import integrate, qssr_deviation, run_to_attractor

__all__ = ["CriterionResult", "CRITERIA", "run_all"]

FIG3_START = (0.0, 0.0, 0.5, 0.5)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    values: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0
    details: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.summary}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_alpha() -> CriterionResult:
    a = alpha(ModelParams(2.0, 3.0, 1.3536, 2.3536, 1e-2))
    err = abs(a - 8 / 9)
    ok = err <= math.ulp(8 / 9)
    return CriterionResult(1, "alpha", ok, f"alpha={a!r}, |alpha-8/9|={err:.1e}", {"alpha": a, "error": err})


@_timed
def check_fig3(tol: float = 1e-9) -> CriterionResult:
    verdicts = {}
    full_verdicts = {}
    values = {}
    t0 = time.perf_counter()
    for eps, chunk in ((5e-5, 50_000.0), (5e-3, 2_000.0)):
        p = OSCILLATION_PARAMS.with_(eps=eps)
        tr, v = run_to_attractor("full", FIG3_START, p, tol=tol, chunk=chunk, keep="last")
        verdicts[eps] = v.kind
        full_verdicts[eps] = (v, tr.final)
        if v.kind == "equilibrium":
            values[f"distance_eps={eps:g}"] = float(np.max(np.abs(tr.final - solve_equilibrium(p).state)))
        if v.kind == "limit-cycle":
            values[f"period_eps={eps:g}"] = v.period
    elapsed = time.perf_counter() - t0
    values["seconds"] = elapsed
    ok = (verdicts[5e-5] == "equilibrium" and verdicts[5e-3] == "limit-cycle" and elapsed <= 60.0
          and values.get("distance_eps=5e-05", math.inf) <= 1e-6)
    return CriterionResult(2, "fig3-dichotomy", ok,
                           f"eps=5e-5 -> {verdicts[5e-5]}, eps=5e-3 -> {verdicts[5e-3]} in {elapsed:.1f}s", values,
                           details={"verdicts": full_verdicts})


def qssr_divergence(p: ModelParams, p_a: float, p_b: float, h: float = 1e-7) -> float:
    """Central-difference divergence of the protein-only field."""
    fa = (qssr_vector_field(p_a + h, p_b, p)[0] - qssr_vector_field(p_a - h, p_b, p)[0]) / (2 * h)
    fb = (qssr_vector_field(p_a, p_b + h, p)[1] - qssr_vector_field(p_a, p_b - h, p)[1]) / (2 * h)
    return fa + fb


def random_params(rng: np.random.Generator) -> ModelParams:
    gamma = rng.uniform(0.5, 3.0)
    return ModelParams(gamma=gamma, delta=rng.uniform(0.5, 4.0), xi_a=rng.uniform(0.5, 3.0),
                       xi_b=gamma * rng.uniform(0.5, 3.0), sigma=rng.uniform(0.01, 0.1))


@_timed
def check_qssr_no_cycle(seed: int = 2024, draws: int = 5, starts: int = 20) -> CriterionResult:
    rng = np.random.default_rng(seed)
    cycles = undecided = 0
    div_err = 0.0
    for _ in range(draws):
        p = random_params(rng)
        for _ in range(starts):
            s0 = rng.uniform(0.05, 3.0, size=2)
            _, v = run_to_attractor("qssr", s0, p, tol=1e-10, chunk=200.0, t_max=20_000.0, keep="last")
            cycles += v.kind == "limit-cycle"
            undecided += v.kind == "undecided"
            # away from the steep layers so finite differences resolve the Hill slope
            pa, pb = rng.uniform(0.05, 3.0, size=2)
            div_err = max(div_err, abs(qssr_divergence(p, pa, pb) + (1 + p.delta)))
    ok = cycles == 0 and div_err <= 1e-6
    return CriterionResult(3, "qssr-no-cycle", ok,
                           f"{cycles} cycles, {undecided} undecided of {draws * starts} runs; "
                           f"max |div+(1+delta)|={div_err:.1e}",
                           {"cycles": cycles, "undecided": undecided, "divergence_error": div_err})


@_timed
def check_hopf_count() -> CriterionResult:
    path = circle_path((1.0, 2.0), 0.5, 720)
    counts = {}
    angles = {}
    t0 = time.perf_counter()
    for eps in (5e-5, 5e-3):
        p = OSCILLATION_PARAMS.with_(eps=eps)
        pts = continue_along_path(path, p)
        hopf = find_hopf_points(pts, path, p)
        counts[eps] = len(hopf)
        assert count_stability_changes(pts) == len(hopf)
        angles[eps] = [math.degrees(h.s) % 360 for h in hopf]
    elapsed = time.perf_counter() - t0
    ok = counts[5e-5] == 0 and counts[5e-3] == 2 and elapsed <= 300
    vals = {"hopf_eps=5e-5": counts[5e-5], "hopf_eps=5e-3": counts[5e-3], "seconds": elapsed}
    for k, a in enumerate(angles[5e-3]):
        vals[f"angle_deg_{k}"] = a
    return CriterionResult(4, "hopf-count", ok,
                           f"eps=5e-5: {counts[5e-5]} Hopf, eps=5e-3: {counts[5e-3]} Hopf "
                           f"(angles {', '.join(f'{a:.2f}' for a in angles[5e-3])} deg)", vals)


@_timed
def check_trace(ts=(1e-2, 5e-3, 2.5e-3)) -> CriterionResult:
    p = OSCILLATION_PARAMS
    ratios = []
    for t in ts:
        diff = abs(trace_at_equilibrium(p, t, t) - trace_asymptotic(p, t, t))
        ratios.append(diff / (2 * t * t))
    variation = max(ratios) / min(ratios)
    ok = variation <= 3.0
    return CriterionResult(5, "trace-consistency", ok,
                           f"ratios {', '.join(f'{r:.4f}' for r in ratios)}; variation {variation:.3f}",
                           {"variation": variation, **{f"ratio_t={t:g}": r for t, r in zip(ts, ratios)}})


@_timed
def check_mu_hopf_slope(h: float = 1e-4) -> CriterionResult:
    p = OSCILLATION_PARAMS
    numeric = (mu_hopf(p, h) - mu_hopf(p, 0.0)) / h
    exact = mu_hopf_slope(p)
    rel = abs(numeric - exact) / exact
    return CriterionResult(6, "mu-hopf-slope", rel <= 0.01,
                           f"finite difference {numeric:.5f} vs formula {exact:.5f} (rel {rel:.1e})",
                           {"numeric": numeric, "formula": exact, "relative_error": rel})


@_timed
def check_poincare() -> CriterionResult:
    p = OSCILLATION_PARAMS
    agree = max(abs(poincare_map(x, p) - return_map_from_flow(x, p)[0]) for x in (1.1, 1.5, 2.0, 5.0))
    d1, d2 = poincare_derivatives_at_one(p)
    formula = poincare_second_derivative_formula(p)
    d2_rel = abs(d2 - formula) / abs(formula)
    xs = np.linspace(1.0 + 1e-3, 10.0, 2000)
    no_fixed = bool(np.all(np.array([poincare_map(x, p) for x in xs]) < xs))
    parts = {
        "closed form vs flow <= 1e-10": agree <= 1e-10,
        "P'(1) = 1 +- 1e-6": abs(d1 - 1) <= 1e-6,
        "P''(1) vs formula <= 1e-4 rel": d2_rel <= 1e-4,
        "no fixed point > 1": no_fixed,
    }
    failed = [k for k, v in parts.items() if not v]
    summary = (f"|closed-flow|={agree:.1e}, P'(1)={d1:.10f}, P''(1)={d2:.6f} vs formula {formula:.6f} "
               f"(rel {d2_rel:.2e}; P''(1)/2 rel {abs(d2 / 2 - formula) / abs(formula):.1e}), "
               f"no fixed point: {no_fixed}")
    if failed:
        summary += "; failed: " + "; ".join(failed)
    return CriterionResult(7, "poincare-map", not failed, summary,
                           {"flow_agreement": agree, "P1": d1, "P2": d2, "P2_formula": formula,
                            "P2_relative_error": d2_rel})


def residual_slopes(p: ModelParams, points, eta2: float = 1e-2, mus=(1e-2, 3e-3, 1e-3, 3e-4)):
    logm = np.log(mus)
    out = []
    for order in (1, 0):
        slopes = []
        for u, v in points:
            res = [slow_manifold_residual(ReducedState(u, v), eta2, mu, p, order=order) for mu in mus]
            slopes.append(np.polyfit(logm, np.log(res), 1)[0])
        out.append(np.array(slopes))
    return out


@_timed
def check_residual_order(seed: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    points = rng.uniform(-3, 3, size=(20, 2))
    s1, s0 = residual_slopes(OSCILLATION_PARAMS, points)
    ok = bool(np.all(np.abs(s1 - 2) <= 0.1) and np.all(np.abs(s0 - 1) <= 0.1))
    return CriterionResult(8, "residual-order", ok,
                           f"first-order slopes in [{s1.min():.3f}, {s1.max():.3f}], "
                           f"zeroth-order in [{s0.min():.3f}, {s0.max():.3f}]",
                           {"slope1_min": s1.min(), "slope1_max": s1.max(), "slope0_min": s0.min(),
                            "slope0_max": s0.max()})


def _sign_pattern(chart: ch.ChartId) -> tuple[int | None, int | None]:
    """Required signs of (ln p_a, ln p_b) in a chart's domain (None: free)."""
    fam = chart.family
    if chart is ch.ChartId.K2:
        return None, None
    if fam == "b-scaling":
        return chart.s, None
    if fam == "b-directional":
        return chart.s, chart.m
    if fam == "a-scaling":
        return None, chart.s
    return chart.m, chart.s


def _merge(a, b):
    if a is None or b is None or a == b:
        return a if a is not None else b, True
    return None, False


def _sample_logs(rng, chart_a: ch.ChartId, chart_b: ch.ChartId, n: int):
    """Random points in the common domain of two charts with moderate
    coordinates; empty when the domains do not overlap."""
    (xa, ya), (xb, yb) = _sign_pattern(chart_a), _sign_pattern(chart_b)
    sx, okx = _merge(xa, xb)
    sy, oky = _merge(ya, yb)
    if not (okx and oky):
        return []
    out = []
    for _ in range(n):
        x = (sx or rng.choice([-1, 1])) * rng.uniform(0.2, 2.0)
        y = (sy or rng.choice([-1, 1])) * rng.uniform(0.2, 2.0)
        out.append(ch.BlowDownImage(rng.uniform(0, 1), rng.uniform(0, 1), math.exp(x), math.exp(y),
                                    rng.uniform(0.01, 0.5)))
    return out


def chart_overlap_errors(pairs=None, n: int = 100, seed: int = 11, mu: float = 0.5, p: ModelParams = OSCILLATION_PARAMS):
    """Worst commutation (relative) and pushforward (absolute) errors per chart pair."""
    rng = np.random.default_rng(seed)
    if pairs is None:
        pairs = [(a, b) for a, b in itertools.permutations(ch.ChartId, 2)]
    results = {}
    for src, tgt in pairs:
        samples = _sample_logs(rng, src, tgt, n)
        if not samples:
            continue
        worst_c = worst_f = 0.0
        for img in samples:
            cp = ch.blow_up(img, src, mu)
            q = ch.change_chart(cp, tgt)
            back = ch.blow_down(q)
            a = np.array([img.p_a, img.p_b, img.sigma])
            b = np.array([back.p_a, back.p_b, back.sigma])
            worst_c = max(worst_c, float(np.max(np.abs(a - b) / np.abs(a))))
            jac = ch.fd_jacobian_richardson(lambda z: ch.change_chart(ch.ChartPoint(src, z, mu), tgt).coords, cp.coords)
            pushed = jac @ ch.chart_vector_field(cp, p)
            worst_f = max(worst_f, float(np.max(np.abs(pushed - ch.chart_vector_field(q, p)))))
        results[(src, tgt)] = (len(samples), worst_c, worst_f)
    return results


@_timed
def check_charts(n: int = 100) -> CriterionResult:
    res = chart_overlap_errors(n=n)
    full = [k for k, v in res.items() if v[0] == n]
    short = [k for k, v in res.items() if v[0] < n]
    worst_c = max(v[1] for v in res.values())
    worst_f = max(v[2] for v in res.values())
    rng = np.random.default_rng(5)
    worst_ev = 0.0
    for gamma in (2.0, 1.0, 3.5):
        p = OSCILLATION_PARAMS.with_(gamma=gamma)
        for chart in ch.ChartId:
            for _ in range(10):
                cv = [rng.uniform(0.01, 1), rng.uniform(0.01, 2), rng.uniform(-2, 2) if chart.j in (None, 2)
                      else rng.uniform(0.01, 2)]
                ev = ch.critical_manifold_eigenvalues(ch.slaved_point(chart, cv, p), p)
                worst_ev = max(worst_ev, abs(ev[0] + min(1.0, gamma)), abs(ev[1] + max(1.0, gamma)))
    ok = worst_c <= 1e-13 and worst_f <= 1e-9 and worst_ev <= 1e-7 and not short
    return CriterionResult(9, "chart-atlas", ok,
                           f"{len(full)} overlapping pairs x {n} points: commutation {worst_c:.1e}, "
                           f"pushforward {worst_f:.1e}; eigenvalue error {worst_ev:.1e}",
                           {"pairs": len(full), "commutation": worst_c, "pushforward": worst_f,
                            "eigenvalues": worst_ev})


@_timed
def check_hamiltonian(tol: float = 1e-10) -> CriterionResult:
    p = OSCILLATION_PARAMS
    drift = 0.0
    for u0, v0 in ((-1.0, 1.5), (-3.0, 0.0), (0.5, 2.5), (-1.7, 2.0)):
        tr = integrate("reduced-K2", (u0, v0), p, 100.0, tol, sigma_mu=(0.0, 0.0))
        h = np.array([hamiltonian(ReducedState(*y), p) for y in tr.y])
        drift = max(drift, float(np.max(np.abs(h - h[0]))))
    return CriterionResult(10, "hamiltonian", drift <= 1e-8, f"max |H(t)-H(0)| = {drift:.2e} over t in [0,100]",
                           {"drift": drift})


def fig8_deviations(t_end: float = 1000.0) -> dict[float, float]:
    out = {}
    for eps in (2e-2, 5e-3, 8e-4):
        p = OSCILLATION_PARAMS.with_(sigma=2e-3, eps=eps)
        tr = integrate("full", FIG3_START, p, t_end)
        out[p.mu] = qssr_deviation(tr, p).max_after_transient()
    return out


@_timed
def check_nonexistence(p_a: float = 2.0) -> CriterionResult:
    mu = 1.0
    sigmas = (1e-2, 1e-3, 1e-4)
    errs = []
    for s in sigmas:
        p = OSCILLATION_PARAMS.with_(sigma=s, mu=mu)
        errs.append(abs(lie_derivative_defect(p_a, p) / (mu * p.delta) - 0.25))
    # first order: err(sigma) <= C sigma with C fixed by the coarsest sigma
    c = max(errs[0] / sigmas[0], 1e-14)
    first_order = all(e <= c * s * 1.5 + 1e-15 for e, s in zip(errs, sigmas))
    devs = fig8_deviations()
    ordered = devs[10.0] > devs[2.5] > devs[0.4]
    ok = first_order and ordered
    return CriterionResult(11, "nonexistence", ok,
                           f"|L/(mu delta)-1/4| = {', '.join(f'{e:.1e}' for e in errs)}; "
                           f"deviation mu=10: {devs[10.0]:.3f} > mu=2.5: {devs[2.5]:.3f} > mu=0.4: {devs[0.4]:.3f}"
                           f" -> {ordered}",
                           {**{f"defect_error_sigma={s:g}": e for s, e in zip(sigmas, errs)},
                            **{f"deviation_mu={m:g}": d for m, d in devs.items()}})


@_timed
def check_eps_independence() -> CriterionResult:
    a = solve_equilibrium(OSCILLATION_PARAMS.with_(eps=1e-5)).state
    b = solve_equilibrium(OSCILLATION_PARAMS.with_(eps=1e-2)).state
    shift = float(np.max(np.abs(a - b)))
    return CriterionResult(12, "eps-independence", shift <= 1e-12, f"location shift {shift:.1e}", {"shift": shift})


CRITERIA = {
    1: check_alpha,
    2: check_fig3,
    3: check_qssr_no_cycle,
    4: check_hopf_count,
    5: check_trace,
    6: check_mu_hopf_slope,
    7: check_poincare,
    8: check_residual_order,
    9: check_charts,
    10: check_hamiltonian,
    11: check_nonexistence,
    12: check_eps_independence,
}


def run_all(numbers=None) -> list[CriterionResult]:
    return [CRITERIA[k]() for k in (numbers or sorted(CRITERIA))]
