"""Piecewise-linear protein system obtained in the step-function limit.

The field is ``p_a' = xi_a [p_b > 1] - p_a`` and
``p_b' = delta (xi_b / gamma [p_a < 1] - p_b)``. Inside each quadrant it is
linear, so the flow and the switching times are available in closed form.
The normal speed across each switching line does not depend on the side, so
orbits cross the lines and never slide along them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import ModelParams

__all__ = [
    "PwlState",
    "PwlEvent",
    "PwlTrajectory",
    "PoincareRecord",
    "pwl_field",
    "flow_exact",
    "poincare_map",
    "poincare_record",
    "return_map_from_flow",
    "poincare_derivatives_at_one",
    "poincare_second_derivative_formula",
    "region_equilibria",
    "boundary_equilibrium_limits",
    "boundary_approach",
    "SNAP_TOL",
]

SNAP_TOL = 1e-13


def _side(x: float) -> int:
    if abs(x - 1.0) <= SNAP_TOL:
        return 0
    return 1 if x > 1.0 else -1


@dataclass(frozen=True)
class PwlState:
    p_a: float
    p_b: float

    def __post_init__(self):
        if not (self.p_a >= 0 and self.p_b >= 0):
            raise DomainError("protein concentrations must be >= 0")

    @property
    def on_a(self) -> bool:
        return _side(self.p_a) == 0

    @property
    def on_b(self) -> bool:
        return _side(self.p_b) == 0

    @property
    def region(self) -> str:
        """``'a<1,b>1'`` style tag; ``'='`` marks a coordinate on its switching line."""
        sym = {-1: "<", 0: "=", 1: ">"}
        return f"a{sym[_side(self.p_a)]}1,b{sym[_side(self.p_b)]}1"


def _rates(p_a, p_b, b_high: bool, a_low: bool, p: ModelParams):
    return (p.xi_a * b_high - p_a, p.delta * (p.xi_b / p.gamma * a_low - p_b))


def pwl_field(s: PwlState, p: ModelParams) -> np.ndarray:
    if s.on_a or s.on_b:
        raise DomainError(f"PWL field is undefined on the switching lines (state {s})")
    return np.array(_rates(s.p_a, s.p_b, s.p_b > 1.0, s.p_a < 1.0, p), dtype=float)


@dataclass(frozen=True)
class PwlEvent:
    time: float
    line: str  # "a" for p_a = 1, "b" for p_b = 1
    state: PwlState
    normal_speed: float


@dataclass(frozen=True)
class _Piece:
    t0: float
    p_a0: float
    p_b0: float
    target_a: float
    target_b: float


@dataclass
class PwlTrajectory:
    delta: float
    pieces: list[_Piece] = field(default_factory=list)
    events: list[PwlEvent] = field(default_factory=list)
    status: str = "t-max"
    t_end: float = 0.0

    def at(self, t: float) -> PwlState:
        """Exact state at time ``t`` in ``[0, t_end]``."""
        if not 0 <= t <= self.t_end:
            raise DomainError(f"t={t} outside [0, {self.t_end}]")
        starts = [pc.t0 for pc in self.pieces]
        k = max(0, int(np.searchsorted(starts, t, side="right")) - 1)
        pc = self.pieces[k]
        dt = t - pc.t0
        p_a = pc.target_a + (pc.p_a0 - pc.target_a) * math.exp(-dt)
        p_b = pc.target_b + (pc.p_b0 - pc.target_b) * math.exp(-self.delta * dt)
        return PwlState(max(p_a, 0.0), max(p_b, 0.0))

    def sample(self, times) -> np.ndarray:
        return np.array([[s.p_a, s.p_b] for s in (self.at(float(t)) for t in times)])


def _hit_time(x0: float, target: float, rate: float) -> float:
    """Time for ``target + (x0 - target) e^{-rate t}`` to reach 1 (inf if never)."""
    if (x0 - 1.0) * (target - 1.0) >= 0 and x0 != 1.0:
        return math.inf
    num, den = x0 - target, 1.0 - target
    if den == 0.0 or num / den <= 1.0:
        return math.inf
    return math.log(num / den) / rate


def flow_exact(s: PwlState, p: ModelParams, t_max: float, max_events: int = 10_000) -> PwlTrajectory:
    """Event-driven closed-form flow up to ``t_max``.

    A state on a switching line is sent to the side its (side-independent)
    normal speed points to. Reaching the corner (1, 1), or starting there,
    ends the flow with status ``'corner'``.
    """
    if t_max < 0:
        raise DomainError("t_max must be >= 0")
    traj = PwlTrajectory(delta=p.delta)
    p_a, p_b = s.p_a, s.p_b
    side_a, side_b = _side(p_a), _side(p_b)
    t = 0.0
    while True:
        if side_a == 0 and side_b == 0:
            traj.pieces.append(_Piece(t, 1.0, 1.0, 1.0, 1.0))
            traj.status, traj.t_end = "corner", t
            return traj
        if side_b == 0:
            p_b = 1.0
            speed = p.delta * (p.xi_b / p.gamma * (side_a < 0) - 1.0)
            if speed == 0.0:
                raise DomainError("tangency with p_b = 1: the PWL flow is degenerate here")
            side_b = 1 if speed > 0 else -1
        if side_a == 0:
            p_a = 1.0
            speed = p.xi_a * (side_b > 0) - 1.0
            if speed == 0.0:
                raise DomainError("tangency with p_a = 1: the PWL flow is degenerate here")
            side_a = 1 if speed > 0 else -1
        target_a = p.xi_a * (side_b > 0)
        target_b = p.xi_b / p.gamma * (side_a < 0)
        traj.pieces.append(_Piece(t, p_a, p_b, target_a, target_b))
        ta = _hit_time(p_a, target_a, 1.0)
        tb = _hit_time(p_b, target_b, p.delta)
        dt = min(ta, tb)
        if t + dt >= t_max:
            traj.t_end = t_max
            traj.status = "t-max"
            return traj
        if len(traj.events) >= max_events:
            traj.t_end = t
            traj.status = "max-events"
            return traj
        t += dt
        new_a = target_a + (p_a - target_a) * math.exp(-dt)
        new_b = target_b + (p_b - target_b) * math.exp(-p.delta * dt)
        if abs(ta - tb) <= SNAP_TOL * max(1.0, dt):
            new_a = new_b = 1.0
        elif ta < tb:
            new_a = 1.0
        else:
            new_b = 1.0
        p_a, p_b = new_a, new_b
        side_a, side_b = _side(p_a), _side(p_b)
        if side_a == 0 and side_b == 0:
            traj.events.append(PwlEvent(t, "ab", PwlState(1.0, 1.0), 0.0))
            continue
        if side_a == 0:
            traj.events.append(PwlEvent(t, "a", PwlState(1.0, p_b), p.xi_a * (side_b > 0) - 1.0))
        else:
            traj.events.append(PwlEvent(t, "b", PwlState(p_a, 1.0),
                                        p.delta * (p.xi_b / p.gamma * (side_a < 0) - 1.0)))


# --------------------------------------------------------------------------
# return map to {p_a = 1, p_b > 1}

def _require_oscillatory(p: ModelParams):
    if not (p.xi_a > 1.0 and p.xi_b > p.gamma):
        raise DomainError("the return map needs xi_a > 1 and xi_b > gamma")


@dataclass(frozen=True)
class PoincareRecord:
    p_b0: float
    p_a1: float
    p_b2: float
    p_a3: float
    p_b4: float
    times: tuple[float, float, float, float]


def poincare_record(p_b0: float, p: ModelParams) -> PoincareRecord:
    """Four-stage return from ``(1, p_b0)`` with intermediate values and
    cumulative hitting times."""
    _require_oscillatory(p)
    if not p_b0 > 1.0:
        raise DomainError("the section is {p_a = 1, p_b > 1}")
    d, g = p.delta, p.gamma
    pa1 = p.xi_a + (1.0 - p.xi_a) * p_b0 ** (-1.0 / d)
    pb2 = pa1 ** (-d)
    pa3 = ((p.xi_b - g) / (p.xi_b - g * pb2)) ** (1.0 / d)
    pb4 = p.xi_b / g + (1.0 - p.xi_b / g) * ((p.xi_a - 1.0) / (p.xi_a - pa3)) ** d
    t1 = math.log(p_b0) / d
    t2 = t1 + math.log(pa1)
    t3 = t2 - math.log(pa3)
    t4 = t3 + math.log((p.xi_a - pa3) / (p.xi_a - 1.0))
    return PoincareRecord(p_b0, pa1, pb2, pa3, pb4, (t1, t2, t3, t4))


def poincare_map(p_b0: float, p: ModelParams) -> float:
    return poincare_record(p_b0, p).p_b4


def return_map_from_flow(p_b0: float, p: ModelParams) -> tuple[float, list[PwlEvent]]:
    """Return value obtained by running :func:`flow_exact` for four crossings."""
    _require_oscillatory(p)
    traj = flow_exact(PwlState(1.0, p_b0), p, t_max=math.inf, max_events=4)
    if len(traj.events) < 4 or traj.events[3].line != "a":
        raise DomainError(f"orbit did not return to the section (status {traj.status})")
    return traj.events[3].state.p_b, traj.events[:4]


def _poincare_unchecked(x: float, p: ModelParams) -> float:
    # same closed form, usable on both sides of x = 1
    d, g = p.delta, p.gamma
    pa1 = p.xi_a + (1.0 - p.xi_a) * x ** (-1.0 / d)
    pb2 = pa1 ** (-d)
    pa3 = ((p.xi_b - g) / (p.xi_b - g * pb2)) ** (1.0 / d)
    return p.xi_b / g + (1.0 - p.xi_b / g) * ((p.xi_a - 1.0) / (p.xi_a - pa3)) ** d


def poincare_second_derivative_formula(p: ModelParams) -> float:
    _require_oscillatory(p)
    return -(p.delta + 1) * p.xi_a * p.xi_b / (2 * p.delta * (p.xi_b - p.gamma))


def poincare_derivatives_at_one(p: ModelParams, h: float | None = None, levels: int = 4) -> tuple[float, float]:
    """P'(1) and P''(1) by Richardson-extrapolated central differences.

    The default step shrinks with xi_b/gamma - 1, since the curvature grows
    like its inverse.
    """
    _require_oscillatory(p)
    if h is None:
        h = 1e-2 * min(1.0, p.xi_b / p.gamma - 1.0)

    def d1(step):
        return (_poincare_unchecked(1 + step, p) - _poincare_unchecked(1 - step, p)) / (2 * step)

    def d2(step):
        return (_poincare_unchecked(1 + step, p) - 2 * _poincare_unchecked(1.0, p)
                + _poincare_unchecked(1 - step, p)) / step**2

    def richardson(f):
        table = [f(h / 2**k) for k in range(levels)]
        for order in range(1, levels):
            factor = 4**order
            table = [(factor * table[k + 1] - table[k]) / (factor - 1) for k in range(len(table) - 1)]
        return table[0]

    return richardson(d1), richardson(d2)


# --------------------------------------------------------------------------
# equilibria off the switching lines

def region_equilibria(p: ModelParams) -> dict[str, tuple[float, float]]:
    """Equilibria of the linear pieces that lie inside their own quadrant.

    ``(0, xi_b/gamma)`` in ``a<1,b<1`` when ``xi_b < gamma``;
    ``(xi_a, xi_b/gamma)`` in ``a<1,b>1`` when ``xi_a < 1 < xi_b/gamma``.
    The other two quadrants never contain their equilibrium.
    """
    out = {}
    for b_high in (False, True):
        for a_low in (False, True):
            q = (p.xi_a * b_high, p.xi_b / p.gamma * a_low)
            if (q[0] < 1.0) == a_low and q[0] != 1.0 and (q[1] > 1.0) == b_high and q[1] != 1.0:
                out[PwlState(*q).region] = q
    return out


_LIMIT_CASES = ("iv", "v", "vi", "vii")


def boundary_equilibrium_limits(p: ModelParams, which: str) -> tuple[float, float]:
    """Point of the switching set where a quadrant equilibrium ends.

    ``iv``: xi_a in [0,1), xi_b -> gamma from below, (0, xi_b/gamma) -> (0, 1).
    ``v``: xi_a in [0,1), xi_b -> gamma from above, (xi_a, xi_b/gamma) -> (xi_a, 1).
    ``vi``: xi_b > gamma, xi_a -> 1 from below, (xi_a, xi_b/gamma) -> (1, xi_b/gamma).
    ``vii``: xi_a > 1, xi_b -> gamma from below, (0, xi_b/gamma) -> (0, 1).
    The parameter that is held fixed is read from ``p``.
    """
    if which not in _LIMIT_CASES:
        raise DomainError(f"unknown case {which!r}; expected one of {_LIMIT_CASES}")
    if which in ("iv", "v"):
        if not 0.0 <= p.xi_a < 1.0:
            raise DomainError(f"case {which} holds xi_a fixed in [0, 1); got {p.xi_a}")
        return (0.0, 1.0) if which == "iv" else (p.xi_a, 1.0)
    if which == "vi":
        if not p.xi_b > p.gamma:
            raise DomainError(f"case vi needs xi_b > gamma for (xi_a, xi_b/gamma) to exist; got xi_b={p.xi_b}")
        return (1.0, p.xi_b / p.gamma)
    if not p.xi_a > 1.0:
        raise DomainError(f"case vii holds xi_a > 1 fixed; got {p.xi_a}")
    return (0.0, 1.0)


def boundary_approach(p: ModelParams, which: str, gaps) -> tuple[np.ndarray, np.ndarray]:
    """Quadrant equilibria along parameters at distance ``gaps`` from the
    boundary of ``which``; returns ``(gaps, points)``."""
    boundary_equilibrium_limits(p, which)
    pts = []
    for gap in gaps:
        if which in ("iv", "vii"):
            q = p.with_(xi_b=p.gamma - gap)
            key = "a<1,b<1"
        elif which == "v":
            q = p.with_(xi_b=p.gamma + gap)
            key = "a<1,b>1"
        else:
            q = p.with_(xi_a=1.0 - gap)
            key = "a<1,b>1"
        eq = region_equilibria(q)
        if key not in eq:
            raise DomainError(f"no equilibrium in {key} at gap {gap}")
        pts.append(eq[key])
    return np.asarray(gaps, dtype=float), np.array(pts)
