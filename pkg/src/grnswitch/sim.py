"""Stiff integration of the model hierarchy and attractor classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError
from .model import (ModelParams, _phi_scalar, full_jacobian, full_vector_field, hill_minus, hill_plus,
                    qssr_jacobian, qssr_vector_field)
from .reduction import ReducedState, reduced_field, reduced_jacobian

__all__ = [
    "SYSTEMS",
    "Trajectory",
    "AttractorVerdict",
    "DeviationSeries",
    "integrate",
    "classify_attractor",
    "run_to_attractor",
    "qssr_deviation",
    "system_rhs",
]

SYSTEMS = ("full", "qssr", "reduced-K2", "pwl-smoothed")
_SECTION_INDEX = {"full": 3, "qssr": 1, "reduced-K2": 1, "pwl-smoothed": 1}
_SECTION_LEVEL = {"full": 1.0, "qssr": 1.0, "reduced-K2": 0.0, "pwl-smoothed": 1.0}


@dataclass
class Trajectory:
    system: str
    t: np.ndarray
    y: np.ndarray
    section_times: np.ndarray
    section_states: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def extend(self, other: "Trajectory") -> "Trajectory":
        if other.system != self.system:
            raise DomainError("cannot join trajectories of different systems")
        stats = {k: self.stats.get(k, 0) + other.stats.get(k, 0) for k in ("nfev", "njev", "nlu")}
        return Trajectory(
            self.system,
            np.concatenate([self.t, other.t[1:]]),
            np.concatenate([self.y, other.y[1:]]),
            np.concatenate([self.section_times, other.section_times]),
            np.concatenate([self.section_states, other.section_states]),
            stats,
        )


def _pwl_smoothed(p: ModelParams):
    s = p.sigma
    if not s > 0:
        raise DomainError("the smoothed PWL system needs sigma > 0")

    def rhs(_t, y):
        pa, pb = y
        return np.array([p.xi_a * _phi_scalar((pb - 1) / s) - pa,
                         p.delta * (p.xi_b / p.gamma * (1 - _phi_scalar((pa - 1) / s)) - pb)])

    def jac(_t, y):
        pa, pb = y
        da = _phi_scalar((pa - 1) / s)
        db = _phi_scalar((pb - 1) / s)
        return np.array([[-1.0, p.xi_a * db * (1 - db) / s],
                         [-p.delta * p.xi_b / p.gamma * da * (1 - da) / s, -p.delta]])

    return rhs, jac


def system_rhs(system: str, p: ModelParams, sigma_mu: tuple[float, float] | None = None):
    """``(rhs(t, y), jac(t, y))`` for one of :data:`SYSTEMS`.

    ``reduced-K2`` runs in slow time with ``(sigma, mu)`` taken from
    ``sigma_mu`` when given (this allows ``sigma = 0``), else from ``p``.
    """
    if system == "full":
        p.require_smooth()
        return (lambda t, y: full_vector_field(y, p)), (lambda t, y: full_jacobian(y, p))
    if system == "qssr":
        p.require_smooth()
        return (lambda t, y: qssr_vector_field(y[0], y[1], p)), (lambda t, y: qssr_jacobian(y[0], y[1], p))
    if system == "reduced-K2":
        sig, mu = sigma_mu if sigma_mu is not None else (p.sigma, p.mu)
        return ((lambda t, y: reduced_field(ReducedState(y[0], y[1]), sig, mu, p)),
                (lambda t, y: reduced_jacobian(ReducedState(y[0], y[1]), sig, mu, p)))
    if system == "pwl-smoothed":
        return _pwl_smoothed(p)
    raise DomainError(f"unknown system {system!r}; expected one of {SYSTEMS}")


def integrate(system: str, s0, p: ModelParams, t_end: float, tol: float = 1e-9, *,
              t0: float = 0.0, sigma_mu: tuple[float, float] | None = None,
              max_step: float = math.inf) -> Trajectory:
    """Radau IIA (order 5) with the analytic Jacobian; upward crossings of the
    section ``p_b = 1`` (``v2 = 0`` in K2) are recorded as events."""
    if not 1e-12 <= tol <= 1e-6:
        raise DomainError("tol must lie in [1e-12, 1e-6]")
    y0 = np.asarray(s0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise DomainError("initial state must be finite")
    rhs, jac = system_rhs(system, p, sigma_mu)
    idx, level = _SECTION_INDEX[system], _SECTION_LEVEL[system]

    def section(_t, y):
        return y[idx] - level

    section.direction = 1.0
    sol = solve_ivp(rhs, (t0, t0 + t_end), y0, method="Radau", jac=jac, rtol=tol, atol=tol,
                    events=section, max_step=max_step)
    if sol.status < 0:
        raise NumericalError(f"{system} integration failed near t={sol.t[-1]:.6g}: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NumericalError(f"{system} integration produced non-finite values")
    ev_t = sol.t_events[0]
    ev_y = sol.y_events[0] if len(ev_t) else np.empty((0, len(y0)))
    stats = {"nfev": sol.nfev, "njev": sol.njev, "nlu": sol.nlu}
    return Trajectory(system, sol.t, sol.y.T, ev_t, ev_y, stats)


@dataclass(frozen=True)
class AttractorVerdict:
    kind: str  # "equilibrium" | "limit-cycle" | "undecided"
    period: float | None = None
    amplitude: tuple[float, float] | None = None
    residual: float | None = None
    returns: int = 0
    return_spread: float | None = None


def _newton_residual(system: str, y: np.ndarray, p: ModelParams,
                     sigma_mu: tuple[float, float] | None) -> float:
    """Length of a Newton step toward the nearby equilibrium (a distance estimate)."""
    rhs, jac = system_rhs(system, p, sigma_mu)
    f = rhs(0.0, y)
    try:
        step = np.linalg.solve(jac(0.0, y), f)
    except np.linalg.LinAlgError:
        return math.inf
    return float(np.max(np.abs(step)))


def classify_attractor(tr: Trajectory, p: ModelParams, *, min_returns: int = 50,
                       return_tol: float = 1e-7, min_amplitude: float = 1e-3,
                       eq_tol: float = 1e-9, sigma_mu: tuple[float, float] | None = None) -> AttractorVerdict:
    """Equilibrium if the terminal Newton step is below ``eq_tol``; limit cycle
    if there are at least ``min_returns`` section returns, the last ones agree
    to ``return_tol`` and the last cycle has amplitude above ``min_amplitude``."""
    residual = _newton_residual(tr.system, tr.final, p, sigma_mu)
    if residual < eq_tol:
        return AttractorVerdict("equilibrium", residual=residual, returns=len(tr.section_times))
    n = len(tr.section_times)
    if n >= min_returns:
        states = tr.section_states
        last = states[-5:]
        spread = float(np.max(np.abs(np.diff(last, axis=0))))
        t_lo, t_hi = tr.section_times[-2], tr.section_times[-1]
        window = (tr.t >= t_lo) & (tr.t <= t_hi)
        idx = _SECTION_INDEX[tr.system]
        cols = [idx - 1, idx] if tr.system != "full" else [2, 3]
        seg = tr.y[window][:, cols]
        amp = tuple(float(v) for v in seg.max(axis=0) - seg.min(axis=0)) if len(seg) else (0.0, 0.0)
        if spread <= return_tol and min(amp) > min_amplitude:
            period = float(np.mean(np.diff(tr.section_times[-5:])))
            return AttractorVerdict("limit-cycle", period=period, amplitude=amp, residual=residual,
                                    returns=n, return_spread=spread)
        return AttractorVerdict("undecided", amplitude=amp, residual=residual, returns=n, return_spread=spread)
    return AttractorVerdict("undecided", residual=residual, returns=n)


def run_to_attractor(system: str, s0, p: ModelParams, *, tol: float = 1e-9, chunk: float = 2000.0,
                     t_max: float = 1e6, sigma_mu: tuple[float, float] | None = None,
                     keep: str = "all", **classify_kw) -> tuple[Trajectory, AttractorVerdict]:
    """Integrate in chunks until :func:`classify_attractor` reaches a verdict.

    ``keep='last'`` retains only the latest chunk's samples (section events
    are always accumulated) to bound memory on long runs.
    """
    tr = integrate(system, s0, p, chunk, tol, sigma_mu=sigma_mu)
    verdict = classify_attractor(tr, p, sigma_mu=sigma_mu, **classify_kw)
    while verdict.kind == "undecided" and tr.t[-1] < t_max:
        nxt = integrate(system, tr.final, p, chunk, tol, t0=float(tr.t[-1]), sigma_mu=sigma_mu)
        if keep == "last":
            nxt.section_times = np.concatenate([tr.section_times, nxt.section_times])
            nxt.section_states = np.concatenate([tr.section_states, nxt.section_states])
            tr = nxt
        else:
            tr = tr.extend(nxt)
        verdict = classify_attractor(tr, p, sigma_mu=sigma_mu, **classify_kw)
    return tr, verdict


@dataclass(frozen=True)
class DeviationSeries:
    t: np.ndarray
    dev_a: np.ndarray
    dev_b: np.ndarray
    post_transient: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return np.maximum(self.dev_a, self.dev_b)

    def max_after_transient(self) -> float:
        return float(np.max(self.total[self.post_transient]))


def qssr_deviation(tr: Trajectory, p: ModelParams) -> DeviationSeries:
    """Distance of a full-system trajectory from the quasi-steady-state graph."""
    if tr.system != "full":
        raise DomainError("deviation from the quasi-steady-state graph needs a full-system trajectory")
    r_a, r_b, p_a, p_b = tr.y.T
    n = p.n
    dev_a = np.abs(r_a - hill_plus(np.maximum(p_b, 0.0), 1.0, n))
    dev_b = np.abs(r_b - hill_minus(np.maximum(p_a, 0.0), 1.0, n) / p.gamma)
    cutoff = tr.t[0] + 5.0 / min(1.0, p.gamma)
    return DeviationSeries(tr.t, dev_a, dev_b, tr.t >= cutoff)
