import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from awrascle.grid import Torus
from awrascle.transport import TimeSpanError, Trajectory, advect, flow_diagnostics, trace_feet

T64 = Torus((64,))
X64 = T64.nodes[0]


def steady(field, t1=1.0, torus=T64, method="spline"):
    return Trajectory.steady(torus, np.asarray(field, dtype=float), 0.0, t1, method)


def _characteristic(vel, t_from, t_to, y):
    sol = solve_ivp(lambda t, x: vel(x), (t_from, t_to), y, method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


# -- trajectories --------------------------------------------------------------------


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(T64, [0.0, 0.0], np.zeros((2, 1, 64)))
    with pytest.raises(ValueError):
        Trajectory(T64, [0.0, 1.0], np.zeros((3, 1, 64)))
    with pytest.raises(ValueError):
        Trajectory(T64, [0.0, 1.0], np.zeros((2, 1, 32)))


def test_linear_in_time():
    tr = Trajectory(T64, [0.0, 1.0, 3.0], np.stack([np.zeros(64), np.ones(64), 5 * np.ones(64)]))
    assert np.allclose(tr.field_at(2.0), 3.0)
    assert np.allclose(tr(0.5, np.array([[0.123, 2.0]])), 0.5)
    with pytest.raises(TimeSpanError):
        tr.field_at(3.5)


# -- feet ------------------------------------------------------------------------------


def test_constant_velocity_feet_exact():
    feet = trace_feet(steady(np.full((1, 64), 0.7)), 1.0, 0.0, substeps=3)
    assert np.abs(feet.unwrapped - (T64.nodes - 0.7)).max() < 1e-14
    assert feet.wrapped.min() >= 0 and feet.wrapped.max() < 2 * np.pi


def test_zero_velocity_feet_identity():
    feet = trace_feet(steady(np.zeros((1, 64))), 1.0, 0.0)
    assert np.array_equal(feet.unwrapped, T64.nodes)


def test_feet_match_ode_oracle():
    # one transport step of dt = 0.05 with the default four RK4 substeps
    v = steady(np.sin(X64)[None], method="trig")
    feet = trace_feet(v, 0.05, 0.0)
    ref = _characteristic(np.sin, 0.05, 0.0, X64)
    assert np.abs(feet.unwrapped[0] - ref).max() < 1e-10


def test_feet_outside_span():
    with pytest.raises(TimeSpanError):
        trace_feet(steady(np.zeros((1, 64))), 1.5, 0.0)
    with pytest.raises(ValueError):
        trace_feet(steady(np.zeros((1, 64))), 1.0, 0.0, substeps=0)


# -- advect ----------------------------------------------------------------------------


@pytest.mark.parametrize("method,tol", [("spline", 1e-8), ("trig", 1e-12)])
def test_exact_translation(method, tol):
    v = steady(np.ones((1, 64)), np.pi / 2, method=method)
    times, eta = advect(np.sin(X64), v, np.pi / 2, np.pi / 64, method=method)
    assert len(times) == 33
    assert np.abs(eta[-1] - np.sin(X64 - np.pi / 2)).max() <= tol


def test_pure_source():
    v = steady(np.zeros((1, 64)))
    g = steady(np.ones(64))
    _, eta = advect(np.cos(X64), v, 1.0, 0.125, g=g)
    assert np.abs(eta - (np.cos(X64) + 0.125 * np.arange(9)[:, None])).max() < 1e-14


def test_variable_velocity_against_characteristics():
    vel = lambda x: 0.3 + 0.1 * np.sin(x)
    v = steady(vel(X64)[None])
    _, eta = advect(np.sin(X64), v, 1.0, 0.05)
    feet = _characteristic(vel, 1.0, 0.0, X64)
    assert np.abs(eta[-1] - np.sin(feet)).max() < 1e-6


def test_stepwise_mode_is_consistent():
    vel = lambda x: 0.3 + 0.1 * np.sin(x)
    v = steady(vel(X64)[None])
    _, a = advect(np.sin(X64), v, 1.0, 0.05)
    _, b = advect(np.sin(X64), v, 1.0, 0.05, mode="stepwise")
    assert np.abs(a - b).max() < 1e-4
    with pytest.raises(ValueError):
        advect(np.sin(X64), v, 1.0, 0.05, mode="sideways")


def test_final_only_matches_full():
    v = steady(0.5 * np.cos(X64)[None])
    _, full = advect(np.sin(X64), v, 1.0, 0.1)
    _, last = advect(np.sin(X64), v, 1.0, 0.1, final_only=True)
    assert np.array_equal(full[-1], last[-1]) and np.isnan(last[1:-1]).all()


def test_dt_must_divide():
    with pytest.raises(ValueError):
        advect(np.sin(X64), steady(np.ones((1, 64))), 1.0, 0.3)


def test_nonfinite_aborts():
    with pytest.raises(ValueError):
        advect(np.full(64, np.inf), steady(np.ones((1, 64))), 1.0, 0.5)


def test_vector_field_transport_2d():
    t = Torus((32, 32))
    X, Y = t.nodes
    v = Trajectory.steady(t, np.stack([np.full_like(X, 0.5), np.full_like(X, -0.25)]), 0.0, 1.0, "trig")
    eta0 = np.stack([np.sin(X), np.cos(Y)])
    _, eta = advect(eta0, v, 1.0, 0.25, method="trig")
    assert eta.shape == (5, 2, 32, 32)
    assert np.abs(eta[-1, 0] - np.sin(X - 0.5)).max() < 1e-12
    assert np.abs(eta[-1, 1] - np.cos(Y + 0.25)).max() < 1e-12


@settings(max_examples=15)
@given(st.floats(-1, 1), st.floats(0.05, 0.5), st.integers(1, 3))
def test_discrete_maximum_principle(c, a, m):
    eta0 = np.sin(m * X64) + 0.3 * np.cos(X64)
    v = steady((c + a * np.sin(X64))[None])
    _, eta = advect(eta0, v, 1.0, 0.1)
    # overshoot of the interpolant itself between the nodes
    fine = T64.interpolate(eta0, np.linspace(0, 2 * np.pi, 2**16, endpoint=False)[:, None])
    eps = max(fine.max() - eta0.max(), eta0.min() - fine.min())
    assert eps < 1e-2
    assert eta.min() >= eta0.min() - eps - 1e-7 and eta.max() <= eta0.max() + eps + 1e-7


def test_reversibility():
    vel = (0.4 + 0.2 * np.sin(X64))[None]
    eta0 = np.exp(np.sin(X64))
    _, fwd = advect(eta0, steady(vel), 1.0, 0.05)
    _, back = advect(fwd[-1], steady(-vel), 1.0, 0.05)
    assert np.abs(back[-1] - eta0).max() < 1e-5


def test_constancy_along_characteristics():
    vel = lambda x: 0.2 + 0.3 * np.cos(x)
    v = steady(vel(X64)[None], method="trig")
    eta0 = np.cos(2 * X64)
    _, eta = advect(eta0, v, 1.0, 0.05, method="trig")
    fwd = trace_feet(v, 0.0, 1.0, substeps=80)
    along = T64.interpolate(eta[-1], fwd.wrapped[0][:, None], "trig")
    assert np.abs(along - eta0).max() < 1e-6


# -- flow-map diagnostics -------------------------------------------------------------


def test_flow_identity_and_translation():
    d0 = flow_diagnostics(steady(np.zeros((1, 64))), 0.5)
    assert d0.sup_grad_minus_identity == 0 and d0.jacobian_min == d0.jacobian_max == 1
    dc = flow_diagnostics(steady(np.full((1, 64), 0.9)), 0.5)
    assert dc.sup_grad_minus_identity < 1e-12


def test_flow_map_slope():
    v = steady(np.sin(X64)[None], 0.4)
    Ts = np.array([0.4, 0.2, 0.1, 0.05])
    g = [flow_diagnostics(v, T).sup_grad_minus_identity for T in Ts]
    slope = np.polyfit(np.log(Ts), np.log(g), 1)[0]
    assert abs(slope - 1.0) <= 0.15


def test_flow_jacobian_2d_incompressible():
    t = Torus((32, 32))
    X, Y = t.nodes
    v = Trajectory.steady(t, np.stack([np.sin(Y), np.sin(X)]), 0.0, 0.3)
    d = flow_diagnostics(v, 0.3)
    assert d.jacobian_min > 0.99 and d.jacobian_max < 1.01
