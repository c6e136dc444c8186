"""Blow-up atlas around the switching set of the smooth-to-PWL limit.

Every chart is described by its sign data and by how it writes the
logarithmic coordinates ``(X, Y, S) = (ln p_a, ln p_b, sigma)``. Chart
variables are always ordered ``(eta, rho, w)``: in K2 this is ``(eta, u, v)``,
in the cylinder scaling charts ``K_i2`` the third entry is ``v`` (i in {1,3})
or ``u`` (i in {4,5}), and in the directional charts ``K_ij`` it is the
chart's ``sigma``.

Vector fields are the exact pushforwards of the extended system, so no time
rescaling is involved and rates in overlapping charts are related by the
Jacobian of the change of coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, OverlapError
from .model import ModelParams, _phi_scalar

__all__ = [
    "ChartId",
    "ChartPoint",
    "BlowDownImage",
    "blow_down",
    "blow_up",
    "chart_vector_field",
    "extended_vector_field",
    "change_chart",
    "kappa_from_k2",
    "critical_manifold_eigenvalues",
    "slaved_point",
    "fd_jacobian_richardson",
    "OVERLAP_MARGIN",
]

OVERLAP_MARGIN = 1e-12
_FD_REL = 1e-6


class ChartId(Enum):
    K2 = "K2"
    K12 = "K12"
    K14 = "K14"
    K15 = "K15"
    K32 = "K32"
    K34 = "K34"
    K35 = "K35"
    K41 = "K41"
    K42 = "K42"
    K43 = "K43"
    K51 = "K51"
    K52 = "K52"
    K53 = "K53"

    @property
    def i(self) -> int | None:
        return None if self is ChartId.K2 else int(self.value[1])

    @property
    def j(self) -> int | None:
        return None if self is ChartId.K2 else int(self.value[2])

    @property
    def s(self) -> int:
        """Direction sign of the cylinder: -1 for i in {1,4}, +1 for i in {3,5}."""
        if self.i is None:
            raise DomainError("K2 carries no direction sign")
        return -1 if self.i in (1, 4) else 1

    @property
    def m(self) -> int:
        """Side sign of a directional chart: -1 for j in {1,4}, +1 for j in {3,5}."""
        if self.j is None or self.j == 2:
            raise DomainError(f"{self.value} carries no side sign")
        return -1 if self.j in (1, 4) else 1

    @property
    def family(self) -> str:
        if self is ChartId.K2:
            return "scaling"
        side = "b" if self.i in (1, 3) else "a"
        kind = "scaling" if self.j == 2 else "directional"
        return f"{side}-{kind}"

    @property
    def variable_names(self) -> tuple[str, str, str]:
        if self is ChartId.K2:
            return ("eta", "u", "v")
        if self.j == 2:
            return ("eta", "rho", "v" if self.i in (1, 3) else "u")
        return ("eta", "rho", "sigma")


@dataclass(frozen=True)
class ChartPoint:
    """``coords = (r_a, r_b, eta, rho_or_u, third)`` in ``chart``."""

    chart: ChartId
    coords: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (5,) or not np.all(np.isfinite(c)):
            raise DomainError("chart coordinates must be five finite numbers")
        object.__setattr__(self, "coords", c)
        if self.mu < 0:
            raise DomainError("mu must be >= 0")
        if c[2] < 0:
            raise DomainError("eta must be >= 0")
        if self.chart is not ChartId.K2:
            if c[3] < 0:
                raise DomainError("rho must be >= 0")
            if self.chart.j != 2 and c[4] < 0:
                raise DomainError("directional sigma must be >= 0")

    @property
    def chart_vars(self) -> np.ndarray:
        return self.coords[2:]


@dataclass(frozen=True)
class BlowDownImage:
    r_a: float
    r_b: float
    p_a: float
    p_b: float
    sigma: float

    @property
    def logs(self) -> tuple[float, float, float]:
        return math.log(self.p_a), math.log(self.p_b), self.sigma


def _log_coords(chart: ChartId, eta: float, b: float, c: float) -> tuple[float, float, float]:
    """(ln p_a, ln p_b, sigma) of chart variables ``(eta, b, c)``."""
    fam = chart.family
    if chart is ChartId.K2:
        return eta * b, eta * c, eta
    s = chart.s
    if fam == "b-scaling":
        return s * eta, eta * b * c, eta * b
    if fam == "b-directional":
        return s * eta, chart.m * eta * b, eta * b * c
    if fam == "a-scaling":
        return eta * b * c, s * eta, eta * b
    return chart.m * eta * b, s * eta, eta * b * c


def blow_down(cp: ChartPoint) -> BlowDownImage:
    r_a, r_b, eta, b, c = cp.coords
    x, y, sig = _log_coords(cp.chart, eta, b, c)
    return BlowDownImage(float(r_a), float(r_b), math.exp(x), math.exp(y), float(sig))


def _require(cond: bool, what: str, target: ChartId):
    if not cond:
        raise OverlapError(f"point is outside the domain of {target.value}: needs {what}")


def blow_up(image: BlowDownImage, target: ChartId, mu: float = 0.0) -> ChartPoint:
    """Inverse of :func:`blow_down` on the part of ``target`` where it is a
    diffeomorphism (positive radial variables)."""
    return _from_logs(image.r_a, image.r_b, *image.logs, target, mu)


def _from_logs(r_a: float, r_b: float, x: float, y: float, sig: float, target: ChartId, mu: float) -> ChartPoint:
    tol = OVERLAP_MARGIN
    fam = target.family
    if target is ChartId.K2:
        _require(sig > tol, "sigma > 0", target)
        vars3 = (sig, x / sig, y / sig)
    else:
        s = target.s
        lead, other = (x, y) if fam.startswith("b") else (y, x)
        lead_name = "ln p_a" if fam.startswith("b") else "ln p_b"
        other_name = "ln p_b" if fam.startswith("b") else "ln p_a"
        _require(s * lead > tol, f"{s:+d}*{lead_name} > 0", target)
        eta = s * lead
        if fam.endswith("scaling"):
            _require(sig > tol, "sigma > 0", target)
            vars3 = (eta, sig / eta, other / sig)
        else:
            m = target.m
            _require(m * other > tol, f"{m:+d}*{other_name} > 0", target)
            _require(sig >= 0, "sigma >= 0", target)
            vars3 = (eta, m * other / eta, sig / (m * other))
    return ChartPoint(target, np.array([r_a, r_b, *vars3]), mu)


def kappa_from_k2(cp: ChartPoint, target: ChartId) -> ChartPoint:
    """Explicit change of coordinates from K2 into ``K_ij``, i in {1,3}."""
    if cp.chart is not ChartId.K2:
        raise DomainError("kappa_from_k2 expects a K2 point")
    if target.i not in (1, 3):
        raise DomainError("explicit maps exist for i in {1,3} only")
    r_a, r_b, eta, u, v = cp.coords
    s = target.s
    _require(s * u > OVERLAP_MARGIN, f"{s:+d}*u2 > 0", target)
    eta_i = s * eta * u
    if target.j == 2:
        out = (eta_i, s / u, v)
    else:
        m = target.m
        _require(m * v > OVERLAP_MARGIN, f"{m:+d}*v2 > 0", target)
        out = (eta_i, m * s * v / u, m / v)
    return ChartPoint(target, np.array([r_a, r_b, *out]), cp.mu)


def change_chart(cp: ChartPoint, target: ChartId) -> ChartPoint:
    """Coordinates of ``cp`` in ``target``.

    Maps out of K2 into the Sigma_b cylinders use the explicit formulas; all
    other pairs go through the logarithmic coordinates of the blow-down
    (never through ``exp``, which would lose digits when the exponents are
    small) and require positive radial variables in the source.
    """
    if target is cp.chart:
        return cp
    if cp.chart is ChartId.K2 and target.i in (1, 3):
        return kappa_from_k2(cp, target)
    eta, rho = cp.coords[2], cp.coords[3]
    if eta <= 0 or (cp.chart is not ChartId.K2 and rho <= 0):
        raise OverlapError("changes of chart need eta > 0 and rho > 0 in the source chart")
    r_a, r_b, eta, b, c = (float(v) for v in cp.coords)
    return _from_logs(r_a, r_b, *_log_coords(cp.chart, eta, b, c), target, cp.mu)


# --------------------------------------------------------------------------
# vector fields

def _g_a(x: float, y: float, p: ModelParams) -> float:
    return p.xi_a * x * math.exp(-y) - 1.0


def _g_b(x: float, y: float, p: ModelParams) -> float:
    return p.delta * (p.xi_b * x * math.exp(-y) - 1.0)


def _phi_ratio(num: float, den: float) -> float:
    """phi(num/den) with the flat limit at den = 0."""
    if den == 0.0:
        if num == 0.0:
            raise DomainError("phi(0/0) is undefined")
        return 1.0 if num > 0 else 0.0
    return _phi_scalar(num / den)


def _slaving_arguments(chart: ChartId, eta: float, b: float, c: float):
    """(num, den) pairs for ln p_a / sigma and ln p_b / sigma, with eta cancelled."""
    fam = chart.family
    if chart is ChartId.K2:
        return (b, 1.0), (c, 1.0)
    s = chart.s
    if fam == "b-scaling":
        return (s, b), (c, 1.0)
    if fam == "b-directional":
        return (s, b * c), (chart.m, c)
    if fam == "a-scaling":
        return (c, 1.0), (s, b)
    return (chart.m, c), (s, b * c)


def slaved_point(chart: ChartId, chart_vars, p: ModelParams, mu: float = 0.0) -> ChartPoint:
    """Point of the critical manifold above the given chart variables."""
    eta, b, c = (float(v) for v in chart_vars)
    arg_a, arg_b = _slaving_arguments(chart, eta, b, c)
    r_a = _phi_ratio(*arg_b)
    r_b = (1.0 - _phi_ratio(*arg_a)) / p.gamma
    return ChartPoint(chart, np.array([r_a, r_b, eta, b, c]), mu)


def chart_vector_field(cp: ChartPoint, p: ModelParams) -> np.ndarray:
    """Right-hand side in ``cp.chart``, ordered like ``cp.coords``.

    Only ``gamma, delta, xi_a, xi_b`` are read from ``p``; ``mu`` comes from
    the point and sigma is encoded in the chart variables.
    """
    chart, mu = cp.chart, cp.mu
    r_a, r_b, eta, b, c = (float(v) for v in cp.coords)
    arg_a, arg_b = _slaving_arguments(chart, eta, b, c)
    rates = np.empty(5)
    rates[0] = _phi_ratio(*arg_b) - r_a
    rates[1] = 1.0 - _phi_ratio(*arg_a) - p.gamma * r_b

    if chart is ChartId.K2:
        rates[2] = 0.0
        rates[3] = mu * _g_a(r_a, eta * b, p)
        rates[4] = mu * _g_b(r_b, eta * c, p)
        return rates

    fam = chart.family
    s = chart.s
    if fam.startswith("b"):
        g_lead = _g_a(r_a, s * eta, p)

        def g_other(y):
            return _g_b(r_b, y, p)
    else:
        g_lead = _g_b(r_b, s * eta, p)

        def g_other(y):
            return _g_a(r_a, y, p)

    if fam.endswith("scaling"):
        rho, w = b, c
        rates[2] = mu * s * eta * rho * g_lead
        rates[3] = -mu * s * rho**2 * g_lead
        rates[4] = mu * g_other(eta * rho * w)
    else:
        rho, sig = b, c
        m = chart.m
        g_o = g_other(m * rho * eta)
        rates[2] = mu * s * eta * rho * sig * g_lead
        rates[3] = mu * m * rho * sig * (g_o - s * m * rho * g_lead)
        rates[4] = -mu * m * sig**2 * g_o
    return rates


def extended_vector_field(image: BlowDownImage, mu: float, p: ModelParams) -> np.ndarray:
    """Rates of ``(r_a, r_b, p_a, p_b, sigma)`` for the system with eps = mu*sigma."""
    x, y, sig = image.logs
    if sig <= 0:
        raise DomainError("the extended field is smooth only for sigma > 0")
    return np.array([
        _phi_scalar(y / sig) - image.r_a,
        1.0 - _phi_scalar(x / sig) - p.gamma * image.r_b,
        mu * sig * image.p_a * _g_a(image.r_a, x, p),
        mu * sig * image.p_b * _g_b(image.r_b, y, p),
        0.0,
    ])


def _fd_jacobian(f, x: np.ndarray) -> np.ndarray:
    return _fd_jacobian_step(f, x, _FD_REL)


def fd_jacobian_richardson(f, x: np.ndarray, rel: float = 1e-4, levels: int = 2) -> np.ndarray:
    """Central differences extrapolated over ``levels`` halvings of the step.

    Steps are relative to each coordinate, so small radial variables are not
    stepped across. Plain central differences with a 1e-6 step leave errors
    of order 1e-8 where chart coordinates are large or small; the
    extrapolated tableau brings them to rounding level.
    """
    table = [_fd_jacobian_step(f, x, rel / 2**k, scale_floor=0.0) for k in range(levels)]
    for order in range(1, levels):
        factor = 4.0**order
        table = [(factor * table[k + 1] - table[k]) / (factor - 1) for k in range(len(table) - 1)]
    return table[0]


def _fd_jacobian_step(f, x: np.ndarray, rel: float, scale_floor: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        h = rel * (max(scale_floor, abs(x[k])) or 1.0)
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.column_stack(cols)


def critical_manifold_eigenvalues(cp: ChartPoint, p: ModelParams) -> tuple[float, float]:
    """Nontrivial eigenvalues of the layer problem at a point of the critical
    manifold, from a finite-difference Jacobian in ``(r_a, r_b)``."""
    if cp.mu != 0:
        raise DomainError("the layer problem is defined at mu = 0")
    expected = slaved_point(cp.chart, cp.chart_vars, p)
    if np.max(np.abs(expected.coords[:2] - cp.coords[:2])) > 1e-10:
        raise DomainError("point is off the critical manifold (slaving residual > 1e-10)")

    def layer(r):
        q = ChartPoint(cp.chart, np.concatenate([r, cp.coords[2:]]), 0.0)
        return chart_vector_field(q, p)[:2]

    jac = _fd_jacobian(layer, cp.coords[:2])
    ev = np.sort(np.linalg.eigvals(jac).real)[::-1]
    return float(ev[0]), float(ev[1])
