import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grnswitch.equilibria import (ParamPath, circle_path, continue_along_path, count_stability_changes,
                                  critical_eigenvalue, equilibrium_condition, find_hopf_points, solve_equilibrium,
                                  stability_flag, trace_hopf_curve)
from grnswitch.errors import DomainError
from grnswitch.model import ModelParams, qssr_jacobian
from grnswitch.reduction import q2_continued, trace_asymptotic

from oracles import fd_jacobian, full_field_direct

P = ModelParams(2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3)
params = st.builds(
    lambda g, d, xa, xb, s, e: ModelParams(g, d, xa, xb, s, e),
    st.floats(0.3, 4), st.floats(0.3, 4), st.floats(0.2, 4), st.floats(0.2, 8),
    st.floats(0.005, 0.2), st.floats(1e-6, 0.1))


def mp_equilibrium(p):
    """Scalar fixed-point condition in 50-digit arithmetic, solved by bisection."""
    with mpmath.workdps(50):
        n = 1 / mpmath.mpf(p.sigma)

        def cond(r_a):
            p_a = p.xi_a * r_a
            r_b = 1 / (1 + p_a**n) / p.gamma
            p_b = p.xi_b * r_b
            return r_a - 1 / (1 + p_b**-n)

        lo, hi = mpmath.mpf(0), mpmath.mpf(1)
        for _ in range(160):
            mid = (lo + hi) / 2
            if cond(mid) < 0:
                lo = mid
            else:
                hi = mid
        r_a = (lo + hi) / 2
        p_a = p.xi_a * r_a
        r_b = 1 / (1 + p_a**n) / p.gamma
        return np.array([float(r_a), float(r_b), float(p_a), float(p.xi_b * r_b)])


@given(params)
def test_equilibrium_matches_high_precision_root(p):
    eq = solve_equilibrium(p)
    np.testing.assert_allclose(eq.state, mp_equilibrium(p), rtol=1e-10, atol=1e-14)
    assert eq.residual <= 1e-12


@given(params)
def test_condition_brackets_the_root(p):
    assert equilibrium_condition(0.0, p) <= 0 <= equilibrium_condition(1.0, p)


def test_location_is_independent_of_eps():
    base = solve_equilibrium(P).state
    for eps in (1e-6, 1e-3, 0.1, 1.0):
        np.testing.assert_allclose(solve_equilibrium(P.with_(eps=eps)).state, base, rtol=1e-13)


def test_equilibrium_near_the_switching_point():
    eq = solve_equilibrium(P)
    assert eq.p == pytest.approx((1.0, 1.0), abs=0.05)
    assert np.max(np.abs(full_field_direct(eq.state, 2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3))) <= 1e-12


@given(st.floats(0.0, 1.0))
def test_warm_start_finds_the_same_root(guess):
    cold = solve_equilibrium(P)
    warm = solve_equilibrium(P, guess=guess)
    np.testing.assert_allclose(warm.state, cold.state, rtol=1e-12)


def test_spectrum_matches_finite_difference_jacobian():
    eq = solve_equilibrium(P)
    jac = fd_jacobian(lambda s: full_field_direct(s, 2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3), eq.state, h=1e-8)
    ref = np.sort_complex(np.linalg.eigvals(jac))
    np.testing.assert_allclose(np.sort_complex(eq.eigenvalues), ref, atol=1e-6)


@pytest.mark.parametrize("eps", [1e-6, 1e-5, 1e-4])
def test_spectrum_splits_into_fast_and_slow(eps):
    p = P.with_(eps=eps)
    eq = solve_equilibrium(p)
    ev = sorted(eq.eigenvalues, key=lambda z: z.real)
    assert [ev[0].real, ev[1].real] == pytest.approx([-2.0, -1.0], abs=10 * eps)
    slow = np.sort_complex(np.array(ev[2:]))
    qssr_ev = np.linalg.eigvals(qssr_jacobian(*eq.p, p))
    ref = np.sort_complex(eps * qssr_ev)
    # first-order correction relative to the slow rate is eps times that rate
    np.testing.assert_allclose(slow, ref, rtol=2 * eps * np.max(np.abs(qssr_ev)))


def test_stability_flag():
    assert stability_flag(np.array([-1.0, -2e-9])) == "stable"
    assert stability_flag(np.array([-1.0, 5e-10])) == "marginal"
    assert stability_flag(np.array([-1.0, 2e-9])) == "unstable"
    assert critical_eigenvalue(np.array([-1.0, 0.1 - 2j, 0.1 + 2j])) == complex(0.1, 2.0)


def test_path_validation():
    with pytest.raises(DomainError):
        ParamPath.polyline([[1.0, 2.0], [0.0, 2.0]])
    path = ParamPath.polyline([[1.0, 2.0], [2.0, 4.0]])
    assert path.at(0.5) == (1.5, 3.0)


def test_circle_with_small_eps_has_no_stability_change():
    pts = continue_along_path(circle_path(n=180), P.with_(eps=5e-5))
    assert count_stability_changes(pts) == 0
    assert all(pt.stability == "stable" for pt in pts)


@pytest.fixture(scope="module")
def hopf_on_circle():
    path = circle_path(n=180)
    pts = continue_along_path(path, P)
    return path, pts, find_hopf_points(pts, path, P)


def test_circle_with_larger_eps_has_two_hopf_points(hopf_on_circle):
    path, pts, hopf = hopf_on_circle
    assert count_stability_changes(pts) == 2
    assert len(hopf) == 2
    for h in hopf:
        assert abs(h.real_part) <= 1e-9
        assert h.omega > 0
        # the crossing sits where the reduced trace asymptotics predict
        q = P.with_(xi_a=h.xi[0], xi_b=h.xi[1])
        assert abs(trace_asymptotic(q, q.sigma, q.mu)) <= 0.05


def test_unstable_arc_is_inside_the_lower_left_quadrant(hopf_on_circle):
    path, pts, _ = hopf_on_circle
    for pt in pts:
        if pt.stability == "unstable":
            assert pt.xi[0] < 1.0 + 0.5 and pt.xi[1] < 2.0 + 0.5
            assert pt.xi[0] > 1.0 and pt.xi[1] > P.gamma


def test_hopf_eigenvalues_independently(hopf_on_circle):
    _, _, hopf = hopf_on_circle
    for h in hopf:
        jac = fd_jacobian(lambda s: full_field_direct(s, 2.0, 3.0, h.xi[0], h.xi[1], 1e-2, 5e-3), h.state, h=1e-8)
        ev = np.linalg.eigvals(jac)
        assert np.max(ev.real) == pytest.approx(0.0, abs=1e-7)


def test_hopf_curve(hopf_on_circle):
    _, _, hopf = hopf_on_circle
    curve = trace_hopf_curve(P, hopf[0], bounds=(2.0, 4.0))
    assert np.all(curve[:, 0] > 1.0) and np.all(curve[:, 1] > P.gamma)
    for h in hopf:
        assert np.min(np.linalg.norm(curve - np.array(h.xi), axis=1)) <= 0.05
    rng = np.random.default_rng(5)
    for xi in curve[rng.choice(len(curve), size=min(10, len(curve)), replace=False)]:
        eq = solve_equilibrium(P.with_(xi_a=xi[0], xi_b=xi[1]))
        lam = critical_eigenvalue(eq.eigenvalues)
        assert abs(lam.real) <= 1e-8 and lam.imag > 0


def test_q2_continued_agrees_with_the_full_equilibrium_in_log_coordinates():
    eq = solve_equilibrium(P)
    q = q2_continued(P, P.sigma, P.mu)
    u, v = math.log(eq.p[0]) / P.sigma, math.log(eq.p[1]) / P.sigma
    assert (q.u2, q.v2) == pytest.approx((u, v), abs=1e-9)
