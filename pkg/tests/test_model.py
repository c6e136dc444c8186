import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from grnswitch.equilibria import solve_equilibrium
from grnswitch.errors import DomainError
from grnswitch.model import (ModelParams, QssrPoint, RawParams, full_jacobian, full_vector_field, hill_minus,
                             hill_plus, lie_derivative_defect, normalize_parameters, phi, phi_prime,
                             qssr_jacobian, qssr_vector_field, raw_vector_field)
from grnswitch.pwl import PwlState, pwl_field
from grnswitch.sim import integrate

from oracles import fd_jacobian, full_field_direct, hill_minus_mp, hill_plus_mp

conc = st.floats(1e-3, 1e3)
exponent = st.floats(1.0, 1000.0)


# --- Hill and sigmoid -------------------------------------------------------

@pytest.mark.parametrize("n", [1.0, 7.5, 100.0, 1e4])
def test_hill_at_threshold_is_half(n):
    assert hill_plus(1.0, 1.0, n) == 0.5


def test_hill_vanishes_at_zero():
    assert hill_plus(0.0, 1.0, 2.0) == 0.0
    assert hill_minus(0.0, 1.0, 2.0) == 1.0


def test_hill_steep_limit():
    tail = 2.0**-100 / (1 + 2.0**-100)
    assert hill_minus(2.0, 1.0, 100.0) == pytest.approx(tail, rel=1e-14)
    assert hill_plus(2.0, 1.0, 100.0) == 1.0 - tail


@given(conc, st.floats(0.1, 10.0), exponent)
def test_hill_pair_sums_to_one(p, theta, n):
    assert hill_plus(p, theta, n) + hill_minus(p, theta, n) == 1.0


@given(conc, exponent)
def test_hill_matches_high_precision(p, n):
    ref_plus, ref_minus = hill_plus_mp(p, n), hill_minus_mp(p, n)
    small_ref, small = (ref_plus, hill_plus(p, 1.0, n)) if ref_plus < 0.5 else (ref_minus, hill_minus(p, 1.0, n))
    assert small == pytest.approx(small_ref, rel=1e-12, abs=1e-300)


@given(conc, conc, exponent)
def test_hill_monotone(p, q, n):
    lo, hi = sorted((p, q))
    assert hill_plus(lo, 1.0, n) <= hill_plus(hi, 1.0, n)


def test_hill_vectorized_matches_scalar():
    ps = np.array([0.0, 0.3, 1.0, 1.7, 50.0])
    np.testing.assert_array_equal(hill_plus(ps, 1.0, 40.0), [hill_plus(float(x), 1.0, 40.0) for x in ps])


@pytest.mark.parametrize("args", [(-1.0, 1.0, 2.0), (1.0, 0.0, 2.0), (1.0, 1.0, -1.0)])
def test_hill_domain_errors(args):
    with pytest.raises(DomainError):
        hill_plus(*args)


def test_phi_basics():
    assert phi(0.0) == 0.5
    h = 1e-5
    assert (phi(h) - phi(-h)) / (2 * h) == pytest.approx(0.25, abs=1e-10)
    assert abs(phi(5.0) + phi(-5.0) - 1.0) <= math.ulp(1.0)
    assert phi(1e4) == 1.0 and phi(-1e4) == 0.0
    assert phi_prime(0.0) == 0.25


@given(st.floats(-700, 700))
def test_phi_symmetry(x):
    assert abs(phi(x) + phi(-x) - 1.0) <= math.ulp(1.0)


@given(conc, st.floats(1e-3, 1.0))
def test_phi_of_log_is_hill(p, sigma):
    x = math.log(p) / sigma
    assert phi(x) == pytest.approx(hill_plus(p, 1.0, 1.0 / sigma), rel=1e-14)
    # the tails, where cancellation would show
    assert phi(-x) == pytest.approx(hill_minus(p, 1.0, 1.0 / sigma), rel=1e-13, abs=1e-300)


# --- vector fields ----------------------------------------------------------

def test_full_field_matches_direct_transcription(osc):
    s = (0.0, 0.0, 0.5, 0.5)
    ref = full_field_direct(s, 2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3)
    np.testing.assert_allclose(full_vector_field(s, osc), ref, rtol=1e-14, atol=1e-300)


@given(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 5), st.floats(0.01, 5)),
       st.floats(0.005, 0.5))
def test_full_field_random_points(s, sigma):
    p = ModelParams(2.0, 3.0, 1.3536, 2.3536, sigma, 1e-2)
    ref = full_field_direct(s, 2.0, 3.0, 1.3536, 2.3536, sigma, 1e-2)
    np.testing.assert_allclose(full_vector_field(s, p), ref, rtol=1e-12, atol=1e-15)


def test_full_field_vanishes_on_critical_manifold_at_eps_zero(osc):
    p = osc.with_(eps=0.0)
    for pa, pb in [(0.5, 0.5), (1.2, 0.9), (3.0, 2.0)]:
        rates = full_vector_field(QssrPoint(pa, pb, params=p).state, p)
        assert rates[0] == 0.0 and rates[1] == 0.0


def test_full_field_vanishes_at_equilibrium(osc):
    eq = solve_equilibrium(osc)
    assert np.max(np.abs(full_vector_field(eq.state, osc))) <= 1e-12


def test_smooth_fields_reject_sigma_zero():
    p = ModelParams(2.0, 3.0, 1.3536, 2.3536, 0.0, 0.0)
    with pytest.raises(DomainError):
        full_vector_field((0, 0, 1, 1), p)
    with pytest.raises(DomainError):
        qssr_vector_field(1.0, 1.0, p)
    with pytest.raises(DomainError):
        ModelParams(2.0, 3.0, 1.0, 1.0, 0.0, 1.0).mu


@given(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0.2, 3), st.floats(0.2, 3)))
def test_full_jacobian_matches_finite_differences(s):
    p = ModelParams(2.0, 3.0, 1.3536, 2.3536, 0.2, 5e-3)
    np.testing.assert_allclose(full_jacobian(s, p), fd_jacobian(lambda z: full_vector_field(z, p), s),
                               atol=1e-7)


def test_qssr_divergence_is_constant(rng):
    p = ModelParams(2.0, 3.0, 1.3536, 2.3536, 0.05, 0.0)
    for pa, pb in rng.uniform(0.05, 3.0, size=(100, 2)):
        jac = fd_jacobian(lambda z: qssr_vector_field(z[0], z[1], p), (pa, pb), h=1e-7)
        assert np.trace(jac) == pytest.approx(-(1 + p.delta), abs=1e-6)
        np.testing.assert_allclose(qssr_jacobian(pa, pb, p), jac, atol=1e-6)


def test_qssr_at_threshold(osc):
    for pa in (0.3, 1.0, 2.5):
        assert qssr_vector_field(pa, 1.0, osc)[0] == osc.xi_a / 2 - pa


def test_qssr_approaches_pwl_field_away_from_switching_lines(rng):
    base = ModelParams(2.0, 3.0, 1.3536, 2.3536, 1e-2, 0.0)
    pts = [pt for pt in rng.uniform(0.2, 3.0, size=(200, 2)) if min(abs(pt - 1)) > 0.1][:20]
    for pa, pb in pts:
        ref = pwl_field(PwlState(pa, pb), base)
        errs = [np.max(np.abs(qssr_vector_field(pa, pb, base.with_(sigma=s)) - ref)) for s in (0.05, 0.02, 0.01)]
        assert errs[-1] <= 1e-3
        assert errs[0] >= errs[1] >= errs[2]


# --- normalization ----------------------------------------------------------

def _raw(**kw):
    base = dict(m_a=1.0, m_b=1.0, gamma_a=1.0, gamma_b=1.0, k_a=1.0, k_b=1.0, delta_a=1.0, delta_b=1.0,
                theta_a=1.0, theta_b=1.0, eps_raw=0.01, n=100.0)
    base.update(kw)
    return RawParams(**base)


def test_normalize_identity():
    p = normalize_parameters(_raw())
    assert (p.gamma, p.delta, p.xi_a, p.xi_b, p.sigma, p.eps) == (1.0, 1.0, 1.0, 1.0, 0.01, 0.01)


def test_normalize_rate_ratios():
    p = normalize_parameters(_raw(gamma_b=2.0, delta_b=3.0))
    assert p.gamma == 2.0 and p.delta == 3.0


def test_normalize_conventions_differ_only_through_protein_decay():
    r = _raw(delta_a=2.0, delta_b=3.0, k_a=5.0)
    a, b = normalize_parameters(r), normalize_parameters(r, convention="displayed")
    assert a.xi_a * 2.0 == pytest.approx(b.xi_a) and a.xi_b * 3.0 == pytest.approx(b.xi_b)
    with pytest.raises(DomainError):
        normalize_parameters(r, convention="other")


def test_raw_params_validation():
    with pytest.raises(DomainError):
        _raw(n=0.0)


RAW = dict(m_a=2.0, m_b=0.7, gamma_a=1.5, gamma_b=2.5, k_a=1.1, k_b=3.0, delta_a=0.8, delta_b=1.9,
           theta_a=0.6, theta_b=1.4, eps_raw=0.05, n=6.0)


def _to_scaled(x, r):
    return np.array([x[0] * r.gamma_a / r.m_a, x[1] * r.gamma_a / r.m_b, x[2] / r.theta_a, x[3] / r.theta_b])


def test_normalize_transforms_the_field_pointwise(rng):
    r = RawParams(**RAW)
    p = normalize_parameters(r)
    scale = np.array([r.gamma_a / r.m_a, r.gamma_a / r.m_b, 1 / r.theta_a, 1 / r.theta_b])
    for x in rng.uniform(0.05, 3.0, size=(20, 4)):
        lhs = scale * raw_vector_field(x, r) / r.gamma_a
        np.testing.assert_allclose(lhs, full_vector_field(_to_scaled(x, r), p), rtol=1e-12, atol=1e-14)


def test_normalize_round_trip_by_integration():
    r = RawParams(**RAW)
    p = normalize_parameters(r)
    x0 = np.array([0.2, 0.1, 0.5, 1.2])
    t_raw = np.linspace(0, 40, 9)
    raw = solve_ivp(lambda t, y: raw_vector_field(y, r), (0, 40), x0, method="DOP853", rtol=1e-11, atol=1e-12,
                    t_eval=t_raw)
    scaled = solve_ivp(lambda t, y: full_vector_field(y, p), (0, 40 * r.gamma_a), _to_scaled(x0, r),
                       method="DOP853", rtol=1e-11, atol=1e-12, t_eval=t_raw * r.gamma_a)
    mapped = np.array([_to_scaled(col, r) for col in raw.y.T])
    np.testing.assert_allclose(mapped, scaled.y.T, atol=1e-8)


# --- nonexistence diagnostic --------------------------------------------------

def test_lie_defect_limit(osc):
    vals = [lie_derivative_defect(2.0, osc.with_(sigma=s, mu=1.0)) for s in (1e-2, 1e-3, 1e-4)]
    for s, v in zip((1e-2, 1e-3, 1e-4), vals):
        assert abs(v - 0.75) <= 0.75 * s
    assert abs(vals[-1] - 0.75) <= 1e-12


def test_lie_defect_is_linear_in_mu(osc):
    assert lie_derivative_defect(2.0, osc.with_(mu=0.0)) == 0.0
    one = lie_derivative_defect(2.0, osc.with_(mu=0.3))
    two = lie_derivative_defect(2.0, osc.with_(mu=0.6))
    assert two == pytest.approx(2 * one, rel=1e-10)
    for mu in (0.1, 1.0, 7.0):
        assert lie_derivative_defect(1.5, osc.with_(mu=mu)) / mu == pytest.approx(one / 0.3, rel=1e-12)


def test_lie_defect_domain(osc):
    with pytest.raises(DomainError):
        lie_derivative_defect(1.0, osc)


# --- params and invariance ----------------------------------------------------

def test_params_mu_round_trip():
    p = ModelParams.from_mu(2.0, 3.0, 1.3536, 2.3536, 1e-2, 0.5)
    assert p.eps == pytest.approx(5e-3) and p.mu == pytest.approx(0.5)
    with pytest.raises(DomainError):
        p.with_(mu=1.0, eps=1.0)
    with pytest.raises(DomainError):
        ModelParams(-1.0, 3.0, 1.0, 1.0, 0.1)


def test_positive_octant_is_invariant(osc, rng):
    tol = 1e-9
    for s0 in rng.uniform(0.0, 2.0, size=(5, 4)):
        tr = integrate("full", s0, osc, 300.0, tol)
        assert tr.y.min() >= -10 * tol
