"""Slow-manifold reduction in the scaling chart K2.

With ``p_a = exp(sigma u)``, ``p_b = exp(sigma v)`` and slow time, the flow
on the attracting slow manifold is, to first order in ``mu``::

    u' = G_a(phi(v), sigma u) + mu xi_a exp(-sigma u) Omega_a
    v' = delta (g_b(r_b0, sigma v) + mu xi_b exp(-sigma v) Omega_b)

where ``r_b0 = (1 - phi(u)) / gamma`` and ``g_b(x, y) = xi_b x exp(-y) - 1``.
At ``mu = sigma = 0`` this is a Hamiltonian centre around ``q2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ExistenceError, NumericalError
from .model import ModelParams, _phi_scalar

__all__ = [
    "ReducedState",
    "SlowManifoldGraph",
    "HopfData",
    "omega_corrections",
    "omega_gradients",
    "slow_manifold_residual",
    "reduced_field",
    "reduced_jacobian",
    "hamiltonian",
    "q2_equilibrium",
    "q2_continued",
    "trace_at_equilibrium",
    "trace_asymptotic",
    "trace_slope",
    "mu_hopf",
    "mu_hopf_slope",
    "hopf_data",
    "alpha",
    "classify_ray",
    "MU0_DEFAULT",
    "SIGMA0_DEFAULT",
]

MU0_DEFAULT = 1.0
SIGMA0_DEFAULT = 0.05
_NEWTON_FD_STEP = 1e-7


@dataclass(frozen=True)
class ReducedState:
    u2: float
    v2: float

    def __post_init__(self):
        if not (math.isfinite(self.u2) and math.isfinite(self.v2)):
            raise DomainError("reduced coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.u2, self.v2])


def _dphi(x: float) -> float:
    e = math.exp(-abs(x))
    return e / (1.0 + e) ** 2


def _ddphi(x: float) -> float:
    return _dphi(x) * (1.0 - 2.0 * _phi_scalar(x))


def _g_a(x: float, y: float, p: ModelParams) -> float:
    return p.xi_a * x * math.exp(-y) - 1.0


def _g_b(x: float, y: float, p: ModelParams) -> float:
    # without the delta factor
    return p.xi_b * x * math.exp(-y) - 1.0


def omega_corrections(rs: ReducedState, eta2: float, p: ModelParams) -> tuple[float, float]:
    """First-order corrections of the slow-manifold graph over K2."""
    u, v = rs.u2, rs.v2
    r_b0 = (1.0 - _phi_scalar(u)) / p.gamma
    om_a = -p.delta * _dphi(v) * _g_b(r_b0, eta2 * v, p)
    om_b = _dphi(u) * _g_a(_phi_scalar(v), eta2 * u, p) / p.gamma**2
    return om_a, om_b


def omega_gradients(rs: ReducedState, eta2: float, p: ModelParams) -> np.ndarray:
    """``[[dOa/du, dOa/dv], [dOb/du, dOb/dv]]``."""
    u, v = rs.u2, rs.v2
    g, d = p.gamma, p.delta
    r_b0 = (1.0 - _phi_scalar(u)) / g
    ev = math.exp(-eta2 * v)
    eu = math.exp(-eta2 * u)
    gb = _g_b(r_b0, eta2 * v, p)
    ga = _g_a(_phi_scalar(v), eta2 * u, p)
    return np.array([
        [d * p.xi_b / g * _dphi(u) * _dphi(v) * ev,
         -d * (_ddphi(v) * gb - eta2 * _dphi(v) * p.xi_b * r_b0 * ev)],
        [(_ddphi(u) * ga - eta2 * _dphi(u) * p.xi_a * _phi_scalar(v) * eu) / g**2,
         _dphi(u) * p.xi_a * _dphi(v) * eu / g**2],
    ])


@dataclass(frozen=True)
class SlowManifoldGraph:
    """``(u2, v2, eta2, mu) -> (r_a, r_b)``, truncated at ``order`` in mu."""

    params: ModelParams
    order: int = 1

    def __post_init__(self):
        if self.order not in (0, 1):
            raise DomainError("graph order must be 0 or 1")

    def __call__(self, u2: float, v2: float, eta2: float, mu: float) -> tuple[float, float]:
        p = self.params
        r_a = _phi_scalar(v2)
        r_b = (1.0 - _phi_scalar(u2)) / p.gamma
        if self.order == 1 and mu != 0:
            om_a, om_b = omega_corrections(ReducedState(u2, v2), eta2, p)
            r_a += mu * om_a
            r_b += mu * om_b
        return r_a, r_b

    def gradient(self, u2: float, v2: float, eta2: float, mu: float) -> np.ndarray:
        """Jacobian of (r_a, r_b) with respect to (u2, v2)."""
        p = self.params
        jac = np.array([[0.0, _dphi(v2)], [-_dphi(u2) / p.gamma, 0.0]])
        if self.order == 1 and mu != 0:
            jac = jac + mu * omega_gradients(ReducedState(u2, v2), eta2, p)
        return jac


def slow_manifold_residual(rs: ReducedState, eta2: float, mu: float, p: ModelParams,
                           order: int = 1) -> float:
    """Invariance defect of the truncated graph under the K2 field.

    Evaluated on the graph: the fast rates minus the rates induced by moving
    along the graph with the slow velocity. O(mu^2) for ``order=1`` and
    O(mu) for ``order=0``.
    """
    if mu < 0:
        raise DomainError("mu must be >= 0")
    graph = SlowManifoldGraph(p, order)
    u, v = rs.u2, rs.v2
    r_a, r_b = graph(u, v, eta2, mu)
    fast = np.array([_phi_scalar(v) - r_a, 1.0 - _phi_scalar(u) - p.gamma * r_b])
    slow = mu * np.array([_g_a(r_a, eta2 * u, p), p.delta * _g_b(r_b, eta2 * v, p)])
    defect = fast - graph.gradient(u, v, eta2, mu) @ slow
    return float(np.hypot(*defect))


def reduced_field(rs: ReducedState, sigma: float, mu: float, p: ModelParams) -> np.ndarray:
    """First-order reduced planar field (slow time)."""
    if sigma < 0 or mu < 0:
        raise DomainError("sigma and mu must be >= 0")
    u, v = rs.u2, rs.v2
    r_b0 = (1.0 - _phi_scalar(u)) / p.gamma
    du = _g_a(_phi_scalar(v), sigma * u, p)
    dv = _g_b(r_b0, sigma * v, p)
    if mu != 0:
        om_a, om_b = omega_corrections(rs, sigma, p)
        du += mu * p.xi_a * math.exp(-sigma * u) * om_a
        dv += mu * p.xi_b * math.exp(-sigma * v) * om_b
    return np.array([du, p.delta * dv])


def reduced_jacobian(rs: ReducedState, sigma: float, mu: float, p: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`reduced_field`."""
    u, v = rs.u2, rs.v2
    g, d = p.gamma, p.delta
    eu, ev = math.exp(-sigma * u), math.exp(-sigma * v)
    r_b0 = (1.0 - _phi_scalar(u)) / g
    jac = np.array([
        [-sigma * p.xi_a * _phi_scalar(v) * eu, p.xi_a * _dphi(v) * eu],
        [-d * p.xi_b / g * _dphi(u) * ev, -d * sigma * p.xi_b * r_b0 * ev],
    ])
    if mu != 0:
        om_a, om_b = omega_corrections(rs, sigma, p)
        grad = omega_gradients(rs, sigma, p)
        jac[0, 0] += mu * p.xi_a * eu * (grad[0, 0] - sigma * om_a)
        jac[0, 1] += mu * p.xi_a * eu * grad[0, 1]
        jac[1, 0] += d * mu * p.xi_b * ev * grad[1, 0]
        jac[1, 1] += d * mu * p.xi_b * ev * (grad[1, 1] - sigma * om_b)
    return jac


def hamiltonian(rs: ReducedState, p: ModelParams) -> float:
    """First integral of the ``mu = sigma = 0`` reduced flow."""
    u, v = rs.u2, rs.v2
    ratio = p.xi_b / p.gamma
    return float(p.delta * ratio * np.logaddexp(0.0, u) + p.xi_a * np.logaddexp(0.0, v)
                 - p.delta * (ratio - 1.0) * u - v)


def _require_interior(p: ModelParams):
    if not (p.xi_a > 1.0 and p.xi_b > p.gamma):
        raise ExistenceError(f"q2 exists only for xi_a > 1 and xi_b > gamma (got xi_a={p.xi_a}, xi_b={p.xi_b})")


def q2_equilibrium(p: ModelParams) -> ReducedState:
    _require_interior(p)
    u = math.log(p.xi_b - p.gamma) - math.log(p.gamma)
    v = -math.log(p.xi_a - 1.0)
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ExistenceError("q2 diverges at these parameters")
    return ReducedState(u, v)


def _fd_jacobian2(f, x: np.ndarray, step: float) -> np.ndarray:
    jac = np.empty((2, 2))
    for k in range(2):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros(2)
        e[k] = h
        jac[:, k] = (f(x + e) - f(x - e)) / (2 * h)
    return jac


def q2_continued(p: ModelParams, sigma: float, mu: float, max_iter: int = 50,
                 tol: float = 1e-13) -> ReducedState:
    """Equilibrium of the reduced field near ``q2`` by damped Newton."""
    x = q2_equilibrium(p).as_array()
    if sigma == 0 and mu == 0:
        return ReducedState(float(x[0]), float(x[1]))

    def f(z):
        return reduced_field(ReducedState(*z), sigma, mu, p)

    fx = f(x)
    for _ in range(max_iter):
        norm = np.linalg.norm(fx)
        if norm <= tol:
            return ReducedState(float(x[0]), float(x[1]))
        step = np.linalg.solve(_fd_jacobian2(f, x, _NEWTON_FD_STEP), -fx)
        lam = 1.0
        while True:
            cand = x + lam * step
            f_cand = f(cand)
            if np.linalg.norm(f_cand) < norm or lam < 1e-6:
                break
            lam *= 0.5
        if np.linalg.norm(cand - x) <= 1e-15 * max(1.0, np.linalg.norm(x)):
            x, fx = cand, f_cand
            break
        x, fx = cand, f_cand
    if np.linalg.norm(fx) <= 1e-12:
        return ReducedState(float(x[0]), float(x[1]))
    raise NumericalError(f"Newton for the reduced equilibrium did not converge (|F|={np.linalg.norm(fx):.2e})")


def trace_at_equilibrium(p: ModelParams, sigma: float, mu: float) -> float:
    rs = q2_continued(p, sigma, mu)
    return float(np.trace(reduced_jacobian(rs, sigma, mu, p)))


def trace_slope(p: ModelParams) -> float:
    """Coefficient of mu in the leading-order trace."""
    return (p.xi_a - 1) * (p.xi_b - p.gamma) / (p.xi_a * p.xi_b) * p.delta * (1 + p.gamma) / p.gamma


def trace_asymptotic(p: ModelParams, sigma: float, mu: float) -> float:
    return -sigma * (1 + p.delta) + mu * trace_slope(p)


def alpha(p: ModelParams) -> float:
    """Critical ratio mu/sigma separating Hopf-possible from Hopf-impossible rays."""
    return p.gamma * (1 + p.delta) / (p.delta * (1 + p.gamma))


def mu_hopf_slope(p: ModelParams) -> float:
    """d mu_Hopf / d sigma at sigma = 0."""
    _require_interior(p)
    return p.xi_a * p.xi_b / ((p.xi_a - 1) * (p.xi_b - p.gamma)) * alpha(p)


def mu_hopf(p: ModelParams, sigma: float, mu_max: float = 10.0, xtol: float = 1e-12) -> float:
    """Value of mu at which the reduced trace vanishes, for fixed sigma."""
    _require_interior(p)
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    if sigma == 0:
        return 0.0

    def tr(mu):
        return trace_at_equilibrium(p, sigma, mu)

    if tr(0.0) >= 0:
        raise ExistenceError("trace is not negative at mu = 0; root not bracketed")
    hi = min(2.0 * mu_hopf_slope(p) * sigma, mu_max)
    while tr(hi) <= 0:
        if hi >= mu_max:
            raise ExistenceError(f"no sign change of the trace for mu in (0, {mu_max}]")
        hi = min(2 * hi, mu_max)
    return float(brentq(tr, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class HopfData:
    trace: float
    determinant: float
    mu_hopf: float | None
    alpha: float


def hopf_data(p: ModelParams, sigma: float, mu: float, solve: bool = True) -> HopfData:
    rs = q2_continued(p, sigma, mu)
    jac = reduced_jacobian(rs, sigma, mu, p)
    mh = mu_hopf(p, sigma) if solve else None
    return HopfData(float(np.trace(jac)), float(np.linalg.det(jac)), mh, alpha(p))


def classify_ray(c: float, p: ModelParams) -> str:
    """Verdict for the ray ``mu = c * sigma``."""
    if not c > 0:
        raise DomainError("ray slope must be > 0")
    a = alpha(p)
    if abs(c - a) < 1e-12:
        raise DomainError(f"ray slope {c} is on the boundary alpha = {a}")
    return "hopf-possible" if c > a else "hopf-impossible"
