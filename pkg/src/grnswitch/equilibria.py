"""Equilibria of the 4D model, their spectra, continuation along parameter
paths in the (xi_a, xi_b) plane, Hopf detection and Hopf-curve tracing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from scipy.optimize import brentq

from .errors import DomainError, ExistenceError, NumericalError
from .model import ModelParams, _hill_pair_scalar, _hill_slope, full_jacobian, full_vector_field

__all__ = [
    "Equilibrium4",
    "ParamPath",
    "ContinuationPoint",
    "HopfPoint",
    "equilibrium_condition",
    "solve_equilibrium",
    "stability_flag",
    "circle_path",
    "continue_along_path",
    "count_stability_changes",
    "detect_hopf",
    "find_hopf_points",
    "critical_eigenvalue",
    "trace_hopf_curve",
]

MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class Equilibrium4:
    state: np.ndarray
    params: ModelParams
    eigenvalues: np.ndarray
    residual: float

    @property
    def r_a(self) -> float:
        return float(self.state[0])

    @property
    def p(self) -> tuple[float, float]:
        return float(self.state[2]), float(self.state[3])

    @property
    def stability(self) -> str:
        return stability_flag(self.eigenvalues)


def stability_flag(eigenvalues: np.ndarray, tol: float = MARGINAL_TOL) -> str:
    """'stable', 'unstable' or 'marginal' (some |Re| within ``tol``, none above)."""
    re = np.real(eigenvalues)
    if np.any(re > tol):
        return "unstable"
    if np.all(re < -tol):
        return "stable"
    return "marginal"


def equilibrium_condition(r_a: float, p: ModelParams) -> float:
    """Scalar equilibrium condition F(r_a) = r_a - h+(xi_b/gamma h-(xi_a r_a)); increasing in r_a."""
    n = p.n
    hm = _hill_pair_scalar(p.xi_a * r_a, 1.0, n)[1]
    return r_a - _hill_pair_scalar(p.xi_b / p.gamma * hm, 1.0, n)[0]


def _condition_slope(r_a: float, p: ModelParams) -> float:
    n = p.n
    pa = p.xi_a * r_a
    a_plus, a_minus = _hill_pair_scalar(pa, 1.0, n)
    pb = p.xi_b / p.gamma * a_minus
    b_plus, b_minus = _hill_pair_scalar(pb, 1.0, n)
    return 1.0 + _hill_slope(pb, n, b_plus, b_minus) * p.xi_b / p.gamma * _hill_slope(pa, n, a_plus, a_minus) * p.xi_a


def _bracket(p: ModelParams) -> tuple[float, float]:
    return 0.0, 1.0 / p.xi_a + 1.0


def _bisect(p: ModelParams, lo: float, hi: float, width: float = 1e-14) -> float:
    f_lo = equilibrium_condition(lo, p)
    f_hi = equilibrium_condition(hi, p)
    if f_lo > 0 or f_hi < 0:
        raise ExistenceError(f"[{lo}, {hi}] does not bracket the equilibrium condition")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = equilibrium_condition(mid, p)
        if f_mid == 0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish(r: float, p: ModelParams, iterations: int = 3) -> float:
    best, best_f = r, abs(equilibrium_condition(r, p))
    for _ in range(iterations):
        step = equilibrium_condition(best, p) / _condition_slope(best, p)
        cand = best - step
        f = abs(equilibrium_condition(cand, p))
        if not f < best_f:
            break
        best, best_f = cand, f
    return best


def _warm_root(p: ModelParams, guess: float) -> float:
    """Root of the equilibrium condition bracketed outward from ``guess``.

    The condition is close to a step function for large Hill exponents, so
    Newton alone ping-pongs; Brent's method on a local bracket does not.
    """
    lo_b, hi_b = _bracket(p)
    guess = min(max(guess, lo_b), hi_b)
    width = 1e-6 * max(1.0, guess)
    while True:
        lo, hi = max(lo_b, guess - width), min(hi_b, guess + width)
        if equilibrium_condition(lo, p) <= 0 <= equilibrium_condition(hi, p):
            break
        if lo == lo_b and hi == hi_b:
            raise ExistenceError("equilibrium condition has no sign change on its bracket")
        width *= 4.0
    return brentq(equilibrium_condition, lo, hi, args=(p,), xtol=1e-16, rtol=4 * np.finfo(float).eps)


def _finish(r_a: float, p: ModelParams) -> Equilibrium4:
    n = p.n
    r_b = _hill_pair_scalar(p.xi_a * r_a, 1.0, n)[1] / p.gamma
    state = np.array([r_a, r_b, p.xi_a * r_a, p.xi_b * r_b])
    residual = float(np.max(np.abs(full_vector_field(state, p))))
    eigenvalues = np.linalg.eigvals(full_jacobian(state, p))
    return Equilibrium4(state=state, params=p, eigenvalues=eigenvalues, residual=residual)


def solve_equilibrium(p: ModelParams, bracket: tuple[float, float] | None = None,
                      guess: float | None = None) -> Equilibrium4:
    """Unique equilibrium of the full model.

    The location does not depend on ``eps``; ``eps`` only enters the spectrum.
    Without a ``guess`` the monotone scalar condition is bisected to width
    1e-14; with one, Brent's method runs on a bracket grown around it. Both
    finish with a Newton polish that is kept only if it lowers the residual.
    """
    p.require_smooth()
    if guess is not None:
        return _finish(_polish(_warm_root(p, guess), p), p)
    lo, hi = bracket if bracket is not None else _bracket(p)
    return _finish(_polish(_bisect(p, lo, hi), p), p)


# --------------------------------------------------------------------------
# continuation along paths

@dataclass(frozen=True)
class ParamPath:
    """Ordered samples of (xi_a, xi_b) with an optional exact parametrization.

    ``curve(s)`` maps the path parameter onto (xi_a, xi_b); ``s`` holds the
    sample parameters. Without a curve, segments are linear.
    """

    s: np.ndarray
    points: np.ndarray
    closed: bool = False
    curve: Callable[[float], tuple[float, float]] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) != len(self.s):
            raise DomainError("ParamPath needs matching (N,) parameters and (N, 2) samples")
        if np.any(self.points <= 0):
            raise DomainError("path samples must lie in (0, inf)^2")

    def at(self, s: float) -> tuple[float, float]:
        if self.curve is not None:
            return self.curve(s)
        xa = np.interp(s, self.s, self.points[:, 0])
        xb = np.interp(s, self.s, self.points[:, 1])
        return float(xa), float(xb)

    @classmethod
    def polyline(cls, points: Sequence[Sequence[float]], closed: bool = False) -> "ParamPath":
        pts = np.asarray(points, dtype=float)
        return cls(s=np.arange(len(pts), dtype=float), points=pts, closed=closed)


def circle_path(center: tuple[float, float] = (1.0, 2.0), radius: float = 0.5,
                n: int = 720, start_angle: float = 1.25 * math.pi) -> ParamPath:
    """Counter-clockwise circle, starting by default in the lower-left quadrant."""
    cx, cy = center

    def curve(theta: float) -> tuple[float, float]:
        return cx + radius * math.cos(theta), cy + radius * math.sin(theta)

    s = start_angle + 2 * math.pi * np.arange(n) / n
    pts = np.array([curve(t) for t in s])
    return ParamPath(s=s, points=pts, closed=True, curve=curve)


@dataclass(frozen=True)
class ContinuationPoint:
    s: float
    xi: tuple[float, float]
    equilibrium: Equilibrium4

    @property
    def stability(self) -> str:
        return self.equilibrium.stability


def continue_along_path(path: ParamPath, p: ModelParams) -> list[ContinuationPoint]:
    """Natural-parameter continuation of the equilibrium along ``path``.

    Each sample is warm-started from the previous equilibrium. Only
    ``gamma, delta, sigma, eps`` are taken from ``p``.
    """
    out: list[ContinuationPoint] = []
    prev_r = None
    for s, (xa, xb) in zip(path.s, path.points):
        q = p.with_(xi_a=float(xa), xi_b=float(xb))
        eq = solve_equilibrium(q) if prev_r is None else solve_equilibrium(q, guess=prev_r)
        out.append(ContinuationPoint(float(s), (float(xa), float(xb)), eq))
        prev_r = eq.r_a
    return out


def critical_eigenvalue(eigenvalues: np.ndarray) -> complex:
    """Eigenvalue with the largest real part (positive imaginary part for pairs)."""
    ev = np.asarray(eigenvalues)
    k = int(np.argmax(ev.real + 1e-300 * np.sign(ev.imag)))
    lam = complex(ev[k])
    return complex(lam.real, abs(lam.imag))


def _segments(points: list[ContinuationPoint], closed: bool):
    pairs = list(zip(points[:-1], points[1:]))
    if closed and len(points) > 2:
        pairs.append((points[-1], points[0]))
    return pairs


def count_stability_changes(points: list[ContinuationPoint], closed: bool = True) -> int:
    """Number of sign changes of the leading real part along the samples."""
    changes = 0
    for a, b in _segments(points, closed):
        ra = critical_eigenvalue(a.equilibrium.eigenvalues).real
        rb = critical_eigenvalue(b.equilibrium.eigenvalues).real
        if (ra < 0) != (rb < 0):
            changes += 1
    return changes


@dataclass(frozen=True)
class HopfPoint:
    xi: tuple[float, float]
    s: float
    state: np.ndarray
    omega: float
    eigenvalues: np.ndarray

    @property
    def real_part(self) -> float:
        return critical_eigenvalue(self.eigenvalues).real


def _leading_real(xi: tuple[float, float], p: ModelParams, guess: float | None):
    q = p.with_(xi_a=xi[0], xi_b=xi[1])
    eq = solve_equilibrium(q, guess=guess) if guess is not None else solve_equilibrium(q)
    return critical_eigenvalue(eq.eigenvalues).real, eq


def detect_hopf(a: ContinuationPoint, b: ContinuationPoint, path: ParamPath, p: ModelParams,
                tol: float = 1e-9) -> HopfPoint:
    """Bisect the path parameter between two samples whose leading real parts
    have opposite signs, until ``|Re lambda| <= tol``."""
    lo, hi = a.s, b.s
    if path.closed and hi < lo:
        hi += 2 * math.pi if path.curve is not None else len(path.s)
    f_lo = critical_eigenvalue(a.equilibrium.eigenvalues).real
    f_hi = critical_eigenvalue(b.equilibrium.eigenvalues).real
    if (f_lo < 0) == (f_hi < 0):
        raise DomainError("segment does not contain a change of stability")
    guess = a.equilibrium.r_a
    mid_eq = a.equilibrium
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        re, mid_eq = _leading_real(path.at(mid), p, guess)
        guess = mid_eq.r_a
        if abs(re) <= tol or hi - lo < 1e-15:
            break
        if (re < 0) == (f_lo < 0):
            lo, f_lo = mid, re
        else:
            hi = mid
    lam = critical_eigenvalue(mid_eq.eigenvalues)
    if abs(lam.imag) <= 1e-12:
        raise DomainError(f"crossing eigenvalue is real ({lam.real:.3e}); not a Hopf point")
    xi = path.at(mid)
    return HopfPoint(xi=(float(xi[0]), float(xi[1])), s=float(mid), state=mid_eq.state,
                     omega=lam.imag, eigenvalues=mid_eq.eigenvalues)


def find_hopf_points(points: list[ContinuationPoint], path: ParamPath, p: ModelParams) -> list[HopfPoint]:
    found = []
    for a, b in _segments(points, path.closed):
        ra = critical_eigenvalue(a.equilibrium.eigenvalues).real
        rb = critical_eigenvalue(b.equilibrium.eigenvalues).real
        if (ra < 0) != (rb < 0):
            found.append(detect_hopf(a, b, path, p))
    return found


# --------------------------------------------------------------------------
# two-parameter Hopf curve

def _hopf_function(x: np.ndarray, p: ModelParams, guess: float | None):
    re, eq = _leading_real((float(x[0]), float(x[1])), p, guess)
    return re, eq


def _hopf_gradient(x: np.ndarray, p: ModelParams, guess: float | None) -> np.ndarray:
    g = np.empty(2)
    for k in range(2):
        h = 1e-6 * max(1.0, abs(x[k]))
        e = np.zeros(2)
        e[k] = h
        g[k] = (_hopf_function(x + e, p, guess)[0] - _hopf_function(x - e, p, guess)[0]) / (2 * h)
    return g


def trace_hopf_curve(p: ModelParams, seed: HopfPoint, *, step: float = 1e-2,
                     max_step: float = 5e-2, bounds: tuple[float, float] | None = None,
                     max_points: int = 2000, tol: float = 1e-13) -> np.ndarray:
    """Pseudo-arclength continuation of the zero set of the leading real part.

    The equilibrium equations are eliminated by solving them exactly at every
    evaluation, so the curve is the zero set of ``Re lambda(xi_a, xi_b)``.
    Both branches from ``seed`` are followed until they leave
    ``(1, xa_max] x (gamma, xb_max]``, the critical pair turns real, or
    ``max_points`` is reached. Returns the polyline ordered along the curve.
    """
    xa_max, xb_max = bounds if bounds is not None else (3.0, 3.0 * p.gamma)

    def inside(x):
        return 1.0 < x[0] <= xa_max and p.gamma < x[1] <= xb_max

    x0 = np.array(seed.xi, dtype=float)
    guess0 = float(seed.state[0])
    grad0 = _hopf_gradient(x0, p, guess0)
    t0 = np.array([-grad0[1], grad0[0]])
    t0 /= np.linalg.norm(t0)

    branches = []
    for direction in (1.0, -1.0):
        x, t, h, guess = x0.copy(), direction * t0, step, guess0
        branch = []
        while len(branch) < max_points:
            halvings = 0
            while True:
                xp = x + h * t
                y = xp.copy()
                converged = False
                its = 0
                for its in range(1, 16):
                    if not (y[0] > 0 and y[1] > 0):
                        break
                    g, eq = _hopf_function(y, p, guess)
                    grad = _hopf_gradient(y, p, eq.r_a)
                    jac = np.array([grad, t])
                    rhs = np.array([g, t @ (y - xp)])
                    dy = np.linalg.solve(jac, -rhs)
                    y = y + dy
                    if np.linalg.norm(dy) < 1e-11 and abs(g) < 1e-9:
                        converged = True
                        break
                if converged:
                    g, eq = _hopf_function(y, p, guess)
                    converged = abs(g) <= max(tol, 1e-9 * 1e-3)
                if converged:
                    break
                halvings += 1
                h *= 0.5
                if halvings > 10:
                    raise NumericalError(f"Hopf curve continuation failed near xi={x}")
            lam = critical_eigenvalue(eq.eigenvalues)
            if not inside(y) or abs(lam.imag) <= 1e-12:
                break
            branch.append(y.copy())
            new_grad = _hopf_gradient(y, p, eq.r_a)
            new_t = np.array([-new_grad[1], new_grad[0]])
            new_t /= np.linalg.norm(new_t)
            if new_t @ t < 0:
                new_t = -new_t
            x, t, guess = y, new_t, eq.r_a
            if its <= 3:
                h = min(h * 1.5, max_step)
            elif its > 6:
                h *= 0.5
        branches.append(branch)
    forward, backward = branches
    pts = list(reversed(backward)) + [x0] + forward
    return np.array(pts)
