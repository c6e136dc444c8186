import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from grnswitch.errors import DomainError
from grnswitch.model import ModelParams
from grnswitch.pwl import (PwlState, boundary_approach, boundary_equilibrium_limits, flow_exact, poincare_derivatives_at_one,
                           poincare_map, poincare_record, poincare_second_derivative_formula, pwl_field,
                           region_equilibria, return_map_from_flow)

P = ModelParams(2.0, 3.0, 1.3536, 2.3536, 0.0)
oscillatory = st.builds(
    lambda g, d, xa, xb_ratio: ModelParams(g, d, xa, xb_ratio * g, 0.0),
    st.floats(0.3, 4), st.floats(0.3, 4), st.floats(1.05, 4), st.floats(1.05, 4))  # the closed form loses digits as both gains near 1


def hybrid_oracle(state, p, n_events, rtol=1e-13):
    """Event-located numerical integration of the piecewise-linear field."""
    y = np.array(state, dtype=float)
    t, out = 0.0, []
    side = [np.sign(y[0] - 1), np.sign(y[1] - 1)]
    for _ in range(n_events):
        # on a line, step to the side the normal speed points to
        if side[1] == 0:
            side[1] = np.sign(p.xi_b / p.gamma * (side[0] < 0) - 1)
        if side[0] == 0:
            side[0] = np.sign(p.xi_a * (side[1] > 0) - 1)
        b_high, a_low = side[1] > 0, side[0] < 0

        def rhs(_, z, b_high=b_high, a_low=a_low):
            return [p.xi_a * b_high - z[0], p.delta * (p.xi_b / p.gamma * a_low - z[1])]

        hit_a = lambda _, z: z[0] - 1.0  # noqa: E731
        hit_b = lambda _, z: z[1] - 1.0  # noqa: E731
        hit_a.direction = -side[0]
        hit_b.direction = -side[1]
        hit_a.terminal = hit_b.terminal = True
        sol = solve_ivp(rhs, (t, t + 1e3), y, method="DOP853", rtol=rtol, atol=1e-15, events=(hit_a, hit_b))
        if len(sol.t_events[0]):
            t, y, line = sol.t_events[0][0], sol.y_events[0][0], "a"
            y[0], side[0] = 1.0, 0
        else:
            t, y, line = sol.t_events[1][0], sol.y_events[1][0], "b"
            y[1], side[1] = 1.0, 0
        out.append((t, line, y.copy()))
    return out


def test_field_examples():
    np.testing.assert_array_equal(pwl_field(PwlState(0.5, 1.5), P), [1.3536 - 0.5, 3 * (2.3536 / 2 - 1.5)])
    np.testing.assert_array_equal(pwl_field(PwlState(2.0, 0.5), P), [-2.0, -1.5])
    with pytest.raises(DomainError):
        pwl_field(PwlState(1.0, 0.5), P)
    with pytest.raises(DomainError):
        PwlState(-0.1, 1.0)


def test_region_tags():
    assert PwlState(0.5, 1.5).region == "a<1,b>1"
    assert PwlState(1.0, 0.5).region == "a=1,b<1"


def test_event_sequence_from_the_section():
    traj = flow_exact(PwlState(1.0, 1.5), P, t_max=math.inf, max_events=4)
    rec = poincare_record(1.5, P)
    assert [e.line for e in traj.events] == ["b", "a", "b", "a"]
    got = [traj.events[0].state.p_a, traj.events[1].state.p_b, traj.events[2].state.p_a, traj.events[3].state.p_b]
    assert got == pytest.approx([rec.p_a1, rec.p_b2, rec.p_a3, rec.p_b4], rel=1e-13)
    assert [e.time for e in traj.events] == pytest.approx(list(rec.times), rel=1e-13)
    assert traj.status == "max-events"


def test_exact_flow_matches_numerical_integration():
    for start in [(1.0, 1.5), (0.4, 0.3), (2.0, 3.0), (0.2, 1.8)]:
        traj = flow_exact(PwlState(*start), P, t_max=math.inf, max_events=8)
        ref = hybrid_oracle(start, P, 8)
        for ev, (t, line, y) in zip(traj.events, ref):
            assert ev.line == line
            assert ev.time == pytest.approx(t, abs=1e-9)
            assert [ev.state.p_a, ev.state.p_b] == pytest.approx(list(y), abs=1e-9)
        times = np.linspace(0, traj.events[-1].time, 7)
        mid = traj.sample(times)
        assert np.all(np.isfinite(mid))


def test_orbits_spiral_into_the_corner():
    x, values = 1.5, []
    for _ in range(200):
        x = poincare_map(x, P)
        values.append(x)
    assert all(b < a for a, b in zip(values, values[1:]))
    assert 1.0 < values[-1] < 1.05


def test_corner_status():
    traj = flow_exact(PwlState(1.0, 1.0), P, t_max=10.0)
    assert traj.status == "corner" and traj.events == []


@given(oscillatory, st.floats(1.01, 20))
def test_closed_form_return_agrees_with_the_flow(p, x):
    flow_value, _ = return_map_from_flow(x, p)
    assert poincare_map(x, p) == pytest.approx(flow_value, rel=1e-12)


@given(oscillatory, st.floats(1.01, 20))
def test_return_map_contracts(p, x):
    assert 1.0 < poincare_map(x, p) < x


@given(oscillatory)
def test_return_map_is_tangent_to_identity(p):
    d1, d2 = poincare_derivatives_at_one(p)
    assert d1 == pytest.approx(1.0, abs=1e-6)
    assert d2 < 0


def test_second_derivative_formula_is_half_the_curvature():
    rng = np.random.default_rng(11)
    for _ in range(20):
        g, d = rng.uniform(0.5, 3, 2)
        p = ModelParams(g, d, rng.uniform(1.1, 3), g * rng.uniform(1.1, 3), 0.0)
        _, d2 = poincare_derivatives_at_one(p)
        assert d2 / 2 == pytest.approx(poincare_second_derivative_formula(p), rel=1e-5)


def test_second_derivative_by_independent_differences():
    """Fourth-order stencil on the flow-based return map, away from x = 1."""
    h = 0.02
    xs = 1.1 + h * np.arange(-2, 3)
    ys = [return_map_from_flow(x, P)[0] for x in xs]
    stencil = (-ys[0] + 16 * ys[1] - 30 * ys[2] + 16 * ys[3] - ys[4]) / (12 * h * h)
    closed = [poincare_map(x, P) for x in xs]
    closed_stencil = (-closed[0] + 16 * closed[1] - 30 * closed[2] + 16 * closed[3] - closed[4]) / (12 * h * h)
    assert stencil == pytest.approx(closed_stencil, rel=1e-6)


def test_return_map_domain():
    with pytest.raises(DomainError):
        poincare_map(1.0, P)
    with pytest.raises(DomainError):
        poincare_map(1.5, P.with_(xi_a=0.8))


def test_region_equilibria_conditions():
    assert region_equilibria(P) == {}
    low = region_equilibria(P.with_(xi_b=1.5))
    assert low == {"a<1,b<1": (0.0, 0.75)}
    both = region_equilibria(P.with_(xi_a=0.5, xi_b=3.0))
    assert both == {"a<1,b>1": (0.5, 1.5)}


@pytest.mark.parametrize("which,changes,limit", [
    ("iv", {"xi_a": 0.5}, (0.0, 1.0)),
    ("v", {"xi_a": 0.5}, (0.5, 1.0)),
    ("vi", {"xi_b": 3.0}, (1.0, 1.5)),
    ("vii", {"xi_a": 1.5}, (0.0, 1.0)),
])
def test_boundary_limits_are_approached_linearly(which, changes, limit):
    p = P.with_(**changes)
    assert boundary_equilibrium_limits(p, which) == limit
    gaps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    _, pts = boundary_approach(p, which, gaps)
    dist = np.linalg.norm(pts - np.array(limit), axis=1)
    np.testing.assert_allclose(dist / gaps, dist[0] / gaps[0], rtol=1e-9)


def test_boundary_limit_errors():
    with pytest.raises(DomainError, match="xi_b > gamma"):
        boundary_equilibrium_limits(P.with_(xi_b=1.0), "vi")
    with pytest.raises(DomainError):
        boundary_equilibrium_limits(P, "iv")
    with pytest.raises(DomainError):
        boundary_equilibrium_limits(P, "viii")


def test_tangency_and_concavity_over_uniform_draws():
    rng = np.random.default_rng(2)
    for _ in range(50):
        xa = 3.0 - rng.uniform(0, 2)  # (1, 3]
        xb = 6.0 - rng.uniform(0, 4)  # (gamma, 3 gamma]
        d1, d2 = poincare_derivatives_at_one(P.with_(xi_a=xa, xi_b=xb))
        assert abs(d1 - 1) <= 1e-6
        assert d2 < 0
