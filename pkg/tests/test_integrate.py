import logging

import numpy as np
import pytest
from conftest import closed_loop_oracle
from hypothesis import given
from hypothesis import strategies as st

from geoatt.errors import NotOrthogonal, StepRejected
from geoatt.feedback import control_U, lyapunov
from geoatt.integrate import _So3Generator
from geoatt.integrate import METHODS, SimulationSpec, propagate, simulate, simulate_reduced, step
from geoatt.linalg import ProjectionPair, haar_sample, orthogonality_residual, random_projection, vee

E1 = ProjectionPair(np.diag([1.0, 0.0, 0.0]))
SADDLE = np.diag([1.0, -1.0, -1.0])


@pytest.mark.parametrize("method", METHODS)
def test_equilibria_are_fixed(method):
    np.testing.assert_allclose(step(np.eye(3), E1, 0.1, method), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(step(SADDLE, E1, 0.1, method), SADDLE, atol=1e-15)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_step_stays_on_group(method, n):
    proj = random_projection(n, 1, n, 1.5)
    R = haar_sample(n, n)
    out = step(R, proj, 0.05, method)
    tol = 1e-12 if method == "lie_rk4" else 1e-10
    assert orthogonality_residual(out) <= tol
    assert np.linalg.det(out) > 0


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        step(np.eye(3), E1, 0.0)
    with pytest.raises(ValueError):
        step(np.eye(3), E1, 0.1, "euler")
    with pytest.raises(StepRejected):
        step(np.full((3, 3), np.nan), E1, 0.1)


def _endpoint(R0, proj, dt, T, method):
    _, R = propagate(R0[None], proj, dt, T, method=method)
    return R[0]


@pytest.mark.parametrize("method", METHODS)
def test_fourth_order(method):
    # error against a dt/16 reference; halving dt must cut it by ~16
    for seed in (1, 2, 3):
        R0 = haar_sample(3, seed)
        proj = random_projection(3, 1 + seed % 2, seed, 1.3)
        T, dt = 1.0, 0.025
        ref = _endpoint(R0, proj, dt / 16, T, method)
        e1 = np.linalg.norm(_endpoint(R0, proj, dt, T, method) - ref)
        e2 = np.linalg.norm(_endpoint(R0, proj, dt / 2, T, method) - ref)
        assert np.log2(e1 / e2) >= 3.9


@pytest.mark.parametrize("method", METHODS)
def test_richardson_ratio(method):
    # two half steps against one full step: the defect shrinks ~16x per halving
    R0 = haar_sample(3, 21)
    proj = random_projection(3, 1, 21, 1.0)

    def defect(dt):
        return np.linalg.norm(step(step(R0, proj, dt, method), proj, dt, method) - step(R0, proj, 2 * dt, method))

    # local defect is O(dt^5), so the ratio per halving is ~32 for one step pair
    r = [defect(0.04) / defect(0.02), defect(0.02) / defect(0.01)]
    assert all(25 < x < 40 for x in r)


@pytest.mark.parametrize("method", METHODS)
def test_matches_reference_solution(method):
    R0 = haar_sample(4, 7)
    proj = random_projection(4, 2, 7, 0.7)
    times, states = propagate(R0[None], proj, 1e-3, 3.0, method=method, record_every=500)
    ref = closed_loop_oracle(R0, proj, times)
    assert np.max(np.linalg.norm(states[:, 0] - ref, axis=(-2, -1))) <= 1e-10


def test_propagate_per_sample_gain():
    R0 = np.stack([haar_sample(3, s) for s in range(4)])
    ks = np.array([0.5, 1.0, 2.0, 3.0])
    _, batched = propagate(R0, E1, 0.01, 1.0, k=ks)
    for j in range(4):
        _, single = propagate(R0[j : j + 1], ProjectionPair(E1.P, ks[j]), 0.01, 1.0)
        np.testing.assert_allclose(batched[j], single[0], atol=1e-14)


def test_propagate_stops_when_all_converged():
    R0 = np.stack([np.eye(3), haar_sample(3, 1)])
    t, _ = propagate(R0, E1, 0.01, 100.0, stop_V=1e-9)
    assert t < 100.0
    t0, R = propagate(np.eye(3)[None], E1, 0.01, 100.0, stop_V=1e-9)
    assert t0 == 0.0


def test_propagate_shape_check():
    with pytest.raises(ValueError):
        propagate(np.eye(3), E1, 0.1, 1.0)


def test_simulation_spec_validation():
    with pytest.raises(NotOrthogonal):
        SimulationSpec(E1, np.ones((3, 3)))
    with pytest.raises(ValueError):
        SimulationSpec(E1, np.eye(4))
    with pytest.raises(ValueError):
        SimulationSpec(E1, np.eye(3), dt=2.0, t_max=1.0)
    with pytest.raises(ValueError):
        SimulationSpec(E1, np.eye(3), stop_V=-1.0)
    with pytest.raises(ValueError):
        SimulationSpec(E1, np.eye(3), method="euler")


def test_simulate_identity_single_state():
    tr = simulate(SimulationSpec(E1, np.eye(3)))
    assert len(tr.times) == 1 and tr.converged
    assert tr.channels["V"][0] == 0


@pytest.fixture(scope="module")
def sec8_run():
    from geoatt.scenario import paper_sec8_R0

    proj = ProjectionPair(np.diag([0.0, 1.0, 0.0]), 1.0)
    return simulate(SimulationSpec(proj, paper_sec8_R0(), dt=1e-3, t_max=10.0))


def test_sec8_simulation(sec8_run):
    ch = sec8_run.channels
    assert ch["V"][0] == pytest.approx(3 + 1 / np.sqrt(3) + 1 / np.sqrt(6), abs=1e-15)
    assert ch["V"][-1] <= 1e-6
    assert np.max(ch["ortho_resid"]) <= 1e-10
    assert np.all(np.diff(ch["V"]) <= 1e-10)
    dt = np.diff(sec8_run.times)
    np.testing.assert_allclose(dt, 1e-3, rtol=1e-9)
    for R in sec8_run.states[::500]:
        assert orthogonality_residual(R) <= 1e-8


def test_sec8_effort_channel(sec8_run):
    ch = sec8_run.channels
    assert np.all(ch["Vdot"] <= 1e-12)
    # V(t) - V(0) equals the integral of dV/dt
    integral = np.trapezoid(ch["Vdot"], sec8_run.times)
    assert abs(ch["V"][-1] - ch["V"][0] - integral) <= 1e-6


def test_sec8_great_circle_in_full_attitude(sec8_run):
    # P = e2 e2^T: the column R e2 stays in span{e2, R0 e2}
    path = sec8_run.states[:, :, 1]
    e2 = np.array([0.0, 1.0, 0.0])
    b = path[0] - (path[0] @ e2) * e2
    b /= np.linalg.norm(b)
    resid = path - np.outer(path @ e2, e2) - np.outer(path @ b, b)
    assert np.max(np.linalg.norm(resid, axis=1)) <= 1e-8


def test_geodesic_axis_distance_long_run(sec8_run):
    proj = ProjectionPair(np.diag([0.0, 1.0, 0.0]), 1.0)
    tr = simulate(SimulationSpec(proj, sec8_run.states[0], dt=1e-3, t_max=20.0, stop_V=0.0))
    ch = tr.channels
    assert abs(ch["dist_axis_2"][-1] - np.arccos(-1 / np.sqrt(3))) <= 1e-4
    # the other two axes take longer routes
    for i in (1, 3):
        assert ch[f"dist_axis_{i}"][-1] > ch[f"err_axis_{i}"][0] + 1e-3


def test_distance_plus_remaining_error_is_constant(sec8_run):
    ch = sec8_run.channels
    total = ch["dist_axis_2"] + ch["err_axis_2"]
    assert np.max(np.abs(total - total[0])) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_lyapunov_monotone_random_runs(seed):
    n = 3 + seed % 3
    proj = random_projection(n, seed % n, seed, [0.5, 1.0, 2.0][seed % 3])
    tr = simulate(SimulationSpec(proj, haar_sample(n, seed), dt=1e-2, t_max=15.0))
    assert np.all(np.diff(tr.channels["V"]) <= 1e-10)
    assert np.max(tr.channels["ortho_resid"]) <= 1e-10


def test_warning_near_unstable_set(caplog):
    with caplog.at_level(logging.WARNING, logger="geoatt.integrate"):
        tr = simulate(SimulationSpec(E1, SADDLE, dt=0.1, t_max=1.0))
    assert any("will not converge" in r.message for r in caplog.records)
    assert not tr.converged
    np.testing.assert_allclose(tr.final, SADDLE, atol=1e-15)


# reduced dynamics on the sphere


def test_reduced_at_target_is_constant():
    sp = simulate_reduced(np.array([1.0, 0.0, 0.0]), dt=0.01, t_max=1.0)
    np.testing.assert_array_equal(sp.states, np.tile([1.0, 0.0, 0.0], (101, 1)))


def test_reduced_from_e2():
    sp = simulate_reduced(np.array([0.0, 1.0, 0.0]), dt=1e-3, t_max=5.0)
    np.testing.assert_allclose(sp.channels["geodesic_error"], np.arccos(np.tanh(sp.times)), atol=1e-9)
    assert np.max(sp.channels["plane_deviation"]) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(sp.states, axis=1) - 1)) <= 1e-10


def test_reduced_near_antipode():
    r0 = np.array([-0.9, np.sqrt(1 - 0.81), 0.0])
    sp = simulate_reduced(r0, dt=1e-3, t_max=20.0)
    err = sp.channels["geodesic_error"]
    # arccos cannot resolve errors below ~1e-8, so strictness stops there
    big = err[:-1] > 1e-6
    assert np.all(np.diff(err)[big] < 0)
    assert np.all(np.diff(err) <= 1e-12)
    assert err[-1] <= 1e-6


def test_reduced_distance_equals_geodesic():
    rng = np.random.default_rng(3)
    r0 = rng.standard_normal(5)
    r0 /= np.linalg.norm(r0)
    sp = simulate_reduced(r0, dt=1e-3, t_max=25.0)
    assert abs(sp.channels["distance"][-1] - np.arccos(r0[0])) <= 1e-4
    assert np.max(sp.channels["plane_deviation"]) <= 1e-8


def test_reduced_antipode_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="geoatt.integrate"):
        sp = simulate_reduced(np.array([-1.0, 0.0, 0.0]), dt=0.1, t_max=1.0)
    assert caplog.records
    np.testing.assert_array_equal(sp.states[-1], [-1.0, 0.0, 0.0])


def test_reduced_rejects_non_unit():
    with pytest.raises(ValueError):
        simulate_reduced(np.array([1.0, 1.0, 0.0]))


def test_l2_effort_bound_is_not_universal(sec8_run):
    # documented counterexample to int ||U||^2 <= 2 V(0) for rank-one P
    ch = sec8_run.channels
    integral = np.trapezoid(ch["normU_sq"], sec8_run.times)
    assert integral > 2 * ch["V"][0]


def test_l2_effort_bound_full_projection():
    # with P = I the effort identity holds and the bound follows
    for s in range(3):
        proj = ProjectionPair(np.eye(3), 2.0)
        tr = simulate(SimulationSpec(proj, haar_sample(3, s), dt=1e-3, t_max=20.0, stop_V=1e-14))
        integral = np.trapezoid(tr.channels["normU_sq"], tr.times)
        assert integral <= 2 * tr.channels["V"][0] + 1e-6
        assert lyapunov(tr.final) <= 1e-12


@given(st.integers(0, 3), st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_so3_vector_generator_matches_matrix_form(p, seed, k):
    proj = random_projection(3, p, seed, k)
    R = np.stack([haar_sample(3, seed + i) for i in range(4)])
    got = _So3Generator(proj.P, proj.Q, k)(R)
    want = np.stack([vee(control_U(r, proj)) for r in R])
    np.testing.assert_allclose(got, want, atol=1e-14 * max(1.0, k))
