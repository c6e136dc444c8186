"""Parameters, Hill/sigmoid primitives and the smooth vector fields of the
activator-inhibitor model.

The scaled model in fast time ``t`` is::

    r_a' = h+(p_b; 1, 1/sigma) - r_a
    r_b' = h-(p_a; 1, 1/sigma) - gamma r_b
    p_a' = eps (xi_a r_a - p_a)
    p_b' = eps delta (xi_b r_b - p_b)

with ``eps = mu * sigma`` when the two small parameters are tied together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "RawParams",
    "ModelParams",
    "State4",
    "QssrPoint",
    "OSCILLATION_PARAMS",
    "phi",
    "phi_prime",
    "hill_plus",
    "hill_minus",
    "full_vector_field",
    "full_jacobian",
    "qssr_vector_field",
    "qssr_jacobian",
    "normalize_parameters",
    "raw_vector_field",
    "lie_derivative_defect",
]

# beyond this |n log(p/theta)| the Hill ratio is evaluated through the sigmoid
_LOG_SPACE_THRESHOLD = 30.0


@dataclass(frozen=True)
class RawParams:
    """Dimensional parameters of the unscaled model (rates in 1/time)."""

    m_a: float
    m_b: float
    gamma_a: float
    gamma_b: float
    k_a: float
    k_b: float
    delta_a: float
    delta_b: float
    theta_a: float
    theta_b: float
    eps_raw: float
    n: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise DomainError(f"RawParams.{name} must be strictly positive, got {value!r}")
        if self.n < 1:
            raise DomainError(f"Hill exponent n must be >= 1, got {self.n!r}")


@dataclass(frozen=True)
class ModelParams:
    """Scaled parameters.

    ``sigma`` is the inverse Hill exponent (``sigma = 0`` is the switching
    limit and only accepted by the piecewise-linear code) and ``eps`` the
    time-scale ratio. ``mu = eps / sigma`` is derived.
    """

    gamma: float
    delta: float
    xi_a: float
    xi_b: float
    sigma: float
    eps: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "delta", "xi_a", "xi_b"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise DomainError(f"eps must be finite and >= 0, got {self.eps!r}")

    @classmethod
    def from_mu(cls, gamma: float, delta: float, xi_a: float, xi_b: float,
                sigma: float, mu: float) -> "ModelParams":
        if not sigma > 0:
            raise DomainError("mu is only meaningful for sigma > 0")
        return cls(gamma, delta, xi_a, xi_b, sigma, mu * sigma)

    @property
    def mu(self) -> float:
        if self.sigma <= 0:
            raise DomainError("mu = eps/sigma is undefined for sigma = 0")
        return self.eps / self.sigma

    @property
    def n(self) -> float:
        """Hill exponent ``1/sigma``."""
        if self.sigma <= 0:
            raise DomainError("Hill exponent is infinite for sigma = 0")
        return 1.0 / self.sigma

    def with_(self, **changes) -> "ModelParams":
        """Copy with some fields replaced; ``mu=`` is translated into ``eps``."""
        if "mu" in changes:
            mu = changes.pop("mu")
            sigma = changes.get("sigma", self.sigma)
            if "eps" in changes:
                raise DomainError("give either eps or mu, not both")
            changes["eps"] = mu * sigma
        return replace(self, **changes)

    def require_smooth(self) -> None:
        if not self.sigma > 0:
            raise DomainError("smooth vector fields need sigma > 0; use grnswitch.pwl for sigma = 0")


#: Parameter values used for the oscillation example (gamma=2, delta=3, ...).
OSCILLATION_PARAMS = ModelParams(gamma=2.0, delta=3.0, xi_a=1.3536, xi_b=2.3536, sigma=1e-2, eps=5e-3)


class State4(NamedTuple):
    """Phase point of the full model; ``np.asarray(state)`` gives the vector."""

    r_a: float
    r_b: float
    p_a: float
    p_b: float


# --------------------------------------------------------------------------
# sigmoid and Hill functions

def _phi_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def phi(x):
    """Logistic sigmoid ``e^x / (1 + e^x)``, overflow-free for any finite x."""
    if np.ndim(x) == 0:
        return _phi_scalar(float(x))
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def phi_prime(x):
    """Derivative ``phi (1 - phi)``, evaluated without cancellation."""
    if np.ndim(x) == 0:
        e = math.exp(-abs(float(x)))
        return e / (1.0 + e) ** 2
    e = np.exp(-np.abs(np.asarray(x, dtype=float)))
    return e / (1.0 + e) ** 2


def _hill_pair_scalar(p: float, theta: float, n: float) -> tuple[float, float]:
    if p == 0.0:
        return 0.0, 1.0
    x = n * math.log(p / theta)
    if abs(x) > _LOG_SPACE_THRESHOLD:
        small = _phi_scalar(-abs(x))
    else:
        ratio = (p / theta) ** n if x <= 0 else (theta / p) ** n
        small = ratio / (1.0 + ratio)
    # the larger value is 1 - small; this makes h+ + h- == 1 in floating point
    if x <= 0:
        return small, 1.0 - small
    return 1.0 - small, small


def _check_hill_args(p, theta, n):
    if not (np.all(np.asarray(theta) > 0) and np.all(np.asarray(n) > 0)):
        raise DomainError("Hill threshold and exponent must be > 0")
    if np.any(np.asarray(p) < 0) or np.any(np.isnan(np.asarray(p, dtype=float))):
        raise DomainError("Hill functions are defined for concentrations p >= 0")


def _hill_pair(p, theta, n):
    _check_hill_args(p, theta, n)
    if np.ndim(p) == 0 and np.ndim(theta) == 0 and np.ndim(n) == 0:
        return _hill_pair_scalar(float(p), float(theta), float(n))
    p, theta, n = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p, theta, n)))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        x = n * np.log(p / theta)
        log_small = phi(-np.abs(x))
        ratio = np.where(x <= 0, (p / theta) ** n, (theta / p) ** n)
        direct_small = ratio / (1.0 + ratio)
    small = np.where(np.abs(x) > _LOG_SPACE_THRESHOLD, log_small, direct_small)
    small = np.where(p == 0, 0.0, small)
    plus = np.where(x <= 0, small, 1.0 - small)
    minus = np.where(x <= 0, 1.0 - small, small)
    return plus, minus


def hill_plus(p, theta=1.0, n=1.0):
    """Activating Hill function ``p^n / (p^n + theta^n)``."""
    return _hill_pair(p, theta, n)[0]


def hill_minus(p, theta=1.0, n=1.0):
    """Repressing Hill function ``theta^n / (p^n + theta^n)``."""
    return _hill_pair(p, theta, n)[1]


def _hill_slope(p: float, n: float, plus: float, minus: float) -> float:
    # d/dp h+(p; 1, n) = n h+ h- / p
    if p <= 0.0:
        return 1.0 if n == 1.0 else 0.0
    return n * plus * minus / p


# --------------------------------------------------------------------------
# vector fields

def full_vector_field(s: Sequence[float], p: ModelParams) -> np.ndarray:
    """Right-hand side of the 4D model at ``s = (r_a, r_b, p_a, p_b)``."""
    p.require_smooth()
    r_a, r_b, p_a, p_b = (float(v) for v in s)
    n = 1.0 / p.sigma
    hp_b = _hill_pair_scalar(max(p_b, 0.0), 1.0, n)[0]
    hm_a = _hill_pair_scalar(max(p_a, 0.0), 1.0, n)[1]
    return np.array([
        hp_b - r_a,
        hm_a - p.gamma * r_b,
        p.eps * (p.xi_a * r_a - p_a),
        p.eps * p.delta * (p.xi_b * r_b - p_b),
    ])


def full_jacobian(s: Sequence[float], p: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`full_vector_field`."""
    p.require_smooth()
    _, _, p_a, p_b = (float(v) for v in s)
    n = 1.0 / p.sigma
    pa_plus, pa_minus = _hill_pair_scalar(max(p_a, 0.0), 1.0, n)
    pb_plus, pb_minus = _hill_pair_scalar(max(p_b, 0.0), 1.0, n)
    eps, d = p.eps, p.delta
    return np.array([
        [-1.0, 0.0, 0.0, _hill_slope(p_b, n, pb_plus, pb_minus)],
        [0.0, -p.gamma, -_hill_slope(p_a, n, pa_plus, pa_minus), 0.0],
        [eps * p.xi_a, 0.0, -eps, 0.0],
        [0.0, eps * d * p.xi_b, 0.0, -eps * d],
    ])


def qssr_vector_field(p_a: float, p_b: float, p: ModelParams) -> np.ndarray:
    """Protein-only field obtained by slaving the mRNAs (slow time)."""
    p.require_smooth()
    n = 1.0 / p.sigma
    hp_b = _hill_pair_scalar(max(float(p_b), 0.0), 1.0, n)[0]
    hm_a = _hill_pair_scalar(max(float(p_a), 0.0), 1.0, n)[1]
    return np.array([
        p.xi_a * hp_b - p_a,
        p.delta * (p.xi_b / p.gamma * hm_a - p_b),
    ])


def qssr_jacobian(p_a: float, p_b: float, p: ModelParams) -> np.ndarray:
    p.require_smooth()
    n = 1.0 / p.sigma
    a_plus, a_minus = _hill_pair_scalar(max(float(p_a), 0.0), 1.0, n)
    b_plus, b_minus = _hill_pair_scalar(max(float(p_b), 0.0), 1.0, n)
    return np.array([
        [-1.0, p.xi_a * _hill_slope(p_b, n, b_plus, b_minus)],
        [-p.delta * p.xi_b / p.gamma * _hill_slope(p_a, n, a_plus, a_minus), -p.delta],
    ])


@dataclass(frozen=True)
class QssrPoint:
    """Point on the critical manifold: mRNAs slaved to the proteins."""

    p_a: float
    p_b: float
    r_a: float = field(init=False)
    r_b: float = field(init=False)
    params: ModelParams = field(repr=False, default=None)

    def __post_init__(self):
        if self.params is None:
            raise DomainError("QssrPoint needs params")
        self.params.require_smooth()
        if self.p_a < 0 or self.p_b < 0:
            raise DomainError("protein concentrations must be >= 0")
        n = self.params.n
        object.__setattr__(self, "r_a", _hill_pair_scalar(self.p_b, 1.0, n)[0])
        object.__setattr__(self, "r_b", _hill_pair_scalar(self.p_a, 1.0, n)[1] / self.params.gamma)

    @property
    def state(self) -> State4:
        return State4(self.r_a, self.r_b, self.p_a, self.p_b)


# --------------------------------------------------------------------------
# parameter normalization

def normalize_parameters(
    r: RawParams,
    convention: Literal["rescaling", "displayed"] = "rescaling",
) -> ModelParams:
    """Map dimensional parameters onto the scaled model.

    Time is rescaled by ``gamma_a``, mRNAs by ``m_i / gamma_a`` and proteins by
    ``theta_i``. With ``convention="rescaling"`` the gains are the ones this
    substitution actually produces, ``xi_i = k_i m_i / (gamma_a delta_i theta_i)``.
    ``convention="displayed"`` drops the ``delta_i`` factors; the two agree only
    when ``delta_a = delta_b = 1``.
    """
    if convention == "rescaling":
        xi_a = r.k_a * r.m_a / (r.gamma_a * r.delta_a * r.theta_a)
        xi_b = r.k_b * r.m_b / (r.gamma_a * r.delta_b * r.theta_b)
    elif convention == "displayed":
        xi_a = r.k_a * r.m_a / (r.gamma_a * r.theta_a)
        xi_b = r.k_b * r.m_b / (r.gamma_a * r.theta_b)
    else:
        raise DomainError(f"unknown convention {convention!r}")
    return ModelParams(
        gamma=r.gamma_b / r.gamma_a,
        delta=r.delta_b / r.delta_a,
        xi_a=xi_a,
        xi_b=xi_b,
        sigma=1.0 / r.n,
        eps=r.delta_a / r.gamma_a * r.eps_raw,
    )


def raw_vector_field(s: Sequence[float], r: RawParams) -> np.ndarray:
    """Right-hand side of the dimensional model (for round-trip checks)."""
    r_a, r_b, p_a, p_b = (float(v) for v in s)
    return np.array([
        r.m_a * _hill_pair_scalar(max(p_b, 0.0), r.theta_b, r.n)[0] - r.gamma_a * r_a,
        r.m_b * _hill_pair_scalar(max(p_a, 0.0), r.theta_a, r.n)[1] - r.gamma_b * r_b,
        r.eps_raw * (r.k_a * r_a - r.delta_a * p_a),
        r.eps_raw * (r.k_b * r_b - r.delta_b * p_b),
    ])


# --------------------------------------------------------------------------
# nonexistence diagnostic

def lie_derivative_defect(p_a: float, p: ModelParams) -> float:
    """Lie derivative of ``r_a - phi(log(p_b)/sigma)`` along the full field,
    evaluated on the critical manifold at ``(p_a, p_b = 1)``.

    A value bounded away from zero as ``sigma -> 0`` (fixed ``mu``) rules out
    an invariant manifold close to the critical manifold near ``p_b = 1``.
    """
    p.require_smooth()
    if not p_a > 1:
        raise DomainError(f"the diagnostic is taken at p_a > 1, got {p_a!r}")
    point = QssrPoint(p_a, 1.0, params=p)
    rates = full_vector_field(point.state, p)
    # gradient of r_a - phi(log(p_b)/sigma) at p_b = 1
    grad_pb = -phi_prime(0.0) / p.sigma
    return float(rates[0] + grad_pb * rates[3])
