import numpy as np
import numpy.testing as npt
import pytest

from hamnav import se3
from hamnav.control import (
    rk4_step_closed_loop,
    Gains,
    control,
    coordinate_error,
    default_gains,
    desired_hamiltonian,
    dsm,
    error_dynamics_rhs,
    error_hamiltonian,
    error_state,
    reference_state,
    regulate,
    rk4_step_error,
)
from hamnav.rigid_body import AnalyticModel, RigidBodyParams, hexarotor_params, rk4_step, state_from

MG = 0.027 * 9.8


def hexa_model():
    return AnalyticModel(hexarotor_params())


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def make_state(p, R, pm=None):
    return state_from(se3.pack_coord(p, R), np.zeros(6) if pm is None else np.asarray(pm, float))


def scalar_gains(kp=0.25, kR=2.0, kv=0.125, kw=0.02):
    return Gains(kp=kp, kR=kR, kv=kv, kw=kw)


def test_gains_validation():
    with pytest.raises(ValueError):
        Gains(kp=-1.0, kR=1.0, kv=1.0, kw=1.0)
    with pytest.raises(ValueError):
        Gains(kp=1.0, kR=[1.0, -1.0, 1.0], kv=1.0, kw=1.0)
    g = Gains(kp=1.0, kR=[1.0, 2.0, 3.0], kv=0.5, kw=0.25)
    npt.assert_array_equal(np.diag(g.KR), [1.0, 2.0, 3.0])
    npt.assert_array_equal(np.diag(g.Kd), [0.5, 0.5, 0.5, 0.25, 0.25, 0.25])


def test_desired_hamiltonian_zero_at_reference():
    g = scalar_gains()
    model = hexa_model()
    x = make_state([1, 2, 3], rot_z(0.3))
    assert abs(desired_hamiltonian(x, x.copy(), g, model)) < 1e-14


def test_desired_hamiltonian_position_term():
    g = scalar_gains(kp=0.25)
    model = hexa_model()
    x = make_state([2, 0, 0], np.eye(3))
    xref = reference_state(se3.pack_coord([0, 0, 0], np.eye(3)))
    npt.assert_allclose(desired_hamiltonian(x, xref, g, model), 0.5, atol=1e-14)


def test_desired_hamiltonian_pi_rotation_trace():
    kR = 2.0
    g = scalar_gains(kR=kR)
    model = hexa_model()
    x = make_state([0, 0, 0], rot_z(np.pi))
    xref = reference_state(se3.pack_coord([0, 0, 0], np.eye(3)))
    # tr(I - Rz(pi)) = 4, so the attitude term is 2 kR
    npt.assert_allclose(desired_hamiltonian(x, xref, g, model), 2.0 * kR, atol=1e-12)


def test_desired_hamiltonian_positive_definite():
    rng = np.random.default_rng(0)
    model = hexa_model()
    g = default_gains(hexarotor_params())
    xref = reference_state(se3.pack_coord([0, 0, 1], rot_z(0.4)))
    for _ in range(50):
        x = make_state(rng.normal(size=3), se3.random_rotation(rng), 1e-3 * rng.normal(size=6))
        if np.allclose(x, xref):
            continue
        assert desired_hamiltonian(x, xref, g, model) > 0.0


def test_coordinate_error_values():
    g = scalar_gains(kp=0.25, kR=2.0)
    q = se3.pack_coord([1, 0, 0], np.eye(3))
    qref = se3.pack_coord([0, 0, 0], np.eye(3))
    npt.assert_allclose(coordinate_error(q, qref, g), [0.25, 0, 0, 0, 0, 0], atol=1e-14)
    npt.assert_array_equal(coordinate_error(qref, qref, g), np.zeros(6))
    q = se3.pack_coord([0, 0, 0], rot_z(np.pi / 2))
    npt.assert_allclose(coordinate_error(q, qref, g), [0, 0, 0, 0, 0, 2.0], atol=1e-12)


def test_control_gravity_compensation_at_reference():
    model = hexa_model()
    g = default_gains(hexarotor_params())
    x = make_state([1, -2, 0.5], rot_z(0.7))
    u = control(x, x.copy(), g, model)
    R = rot_z(0.7)
    npt.assert_allclose(u[:3], R.T @ [0, 0, MG], atol=1e-12)
    npt.assert_allclose(u[3:], np.zeros(3), atol=1e-12)


def test_control_pure_linear_velocity_offset():
    model = hexa_model()
    g = default_gains(hexarotor_params())
    v = np.array([0.5, -0.3, 0.2])
    x = make_state([0, 0, 0], np.eye(3), np.concatenate([0.027 * v, np.zeros(3)]))
    u = control(x, reference_state(x[:12]), g, model)
    npt.assert_allclose(u[:3], np.array([0, 0, MG]) - g.kv * v, atol=1e-12)
    npt.assert_allclose(u[3:], np.zeros(3), atol=1e-12)


def test_control_rejects_rank_deficient_input_matrix():
    params = hexarotor_params()
    B = np.eye(6)
    B[5, 5] = 0.0
    bad = RigidBodyParams(mass=params.mass, inertia=params.inertia, input_matrix=B)
    with pytest.raises(ValueError, match="underactuated"):
        control(make_state([0, 0, 0], np.eye(3)), reference_state(np.zeros(12)),
                default_gains(params), AnalyticModel(bad))


def test_closed_loop_regulation():
    rng = np.random.default_rng(1)
    params = hexarotor_params()
    model = AnalyticModel(params)
    gains = default_gains(params)
    xref = reference_state(se3.pack_coord([0, 0, 1], np.eye(3)))
    for _ in range(3):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        R0 = se3.so3_exp(rng.uniform(0, np.deg2rad(45)) * axis)
        p0 = np.array([0, 0, 1]) + rng.uniform(-2, 2, size=3)
        x0 = make_state(p0, R0)
        _, xs, hd = regulate(x0, xref, gains, model, model, dt=0.01, steps=2000)
        assert np.linalg.norm(xs[-1][:3] - [0, 0, 1]) < 0.01
        zeta = model.minv(xs[-1][:12]) @ xs[-1][12:]
        assert np.linalg.norm(zeta) < 0.01
        assert np.max(np.diff(hd)) < 1e-9  # monotone energy decay


def test_dsm_values():
    model = hexa_model()
    g = default_gains(hexarotor_params())
    x = make_state([0, 0, 1], np.eye(3))
    xref = reference_state(x[:12])
    npt.assert_allclose(dsm(x, xref, 30.0, g, model), 900.0, atol=1e-12)
    # boundary: H_d = kp dbar^2 / 2 makes the margin vanish
    far = make_state([0, 0, 1 + 2.0], np.eye(3))
    dbar = np.sqrt(2.0 / g.kp * desired_hamiltonian(far, xref, g, model))
    npt.assert_allclose(dsm(far, xref, dbar, g, model), 0.0, atol=1e-12)
    assert dsm(far, xref, dbar * 0.9, g, model) < 0.0


def test_error_dynamics_equilibrium():
    model = hexa_model()
    g = scalar_gains()
    xe = np.zeros(18)
    xe[3:12] = np.eye(3).reshape(9)
    npt.assert_allclose(error_dynamics_rhs(xe, g, model), np.zeros(18), atol=1e-14)


def test_error_dynamics_dissipation_identity():
    # dH_d/dt along the error field equals -zeta^T K_d zeta
    rng = np.random.default_rng(2)
    model = hexa_model()
    g = default_gains(hexarotor_params())
    for _ in range(10):
        xe = np.zeros(18)
        xe[:3] = rng.normal(size=3)
        xe[3:12] = se3.random_rotation(rng).reshape(9)
        xe[12:] = 1e-3 * rng.normal(size=6)
        rhs = error_dynamics_rhs(xe, g, model)
        h = 1e-7
        dH = (error_hamiltonian(xe + h * rhs, g, model)
              - error_hamiltonian(xe - h * rhs, g, model)) / (2 * h)
        zeta = model.minv(xe[:12]) @ xe[12:]
        npt.assert_allclose(dH, -zeta @ g.Kd @ zeta, atol=1e-10)


def test_error_dynamics_matches_full_closed_loop():
    # dual-simulation oracle over one second from a matched initial condition
    params = hexarotor_params()
    model = AnalyticModel(params)
    gains = default_gains(params)
    rstar = rot_z(0.9)
    xref = reference_state(se3.pack_coord([1.0, -0.5, 2.0], rstar))
    x = make_state([0.2, 0.3, 1.5], rot_z(0.4), np.concatenate([0.027 * np.array([0.3, 0, -0.1]), np.zeros(3)]))
    xe = error_state(x, xref)
    for _ in range(100):
        x = rk4_step_closed_loop(x, xref, 0.01, gains, model, model)
        xe = rk4_step_error(xe, 0.01, gains, model, rstar=rstar)
        hd_full = desired_hamiltonian(x, xref, gains, model)
        hd_err = error_hamiltonian(xe, gains, model)
        assert abs(hd_full - hd_err) < 1e-6
    npt.assert_allclose(error_state(x, xref), xe, atol=1e-6)


def test_forward_invariance_of_margin_level_set():
    # trajectories started with a small nonnegative margin keep it nonnegative
    rng = np.random.default_rng(3)
    params = hexarotor_params()
    model = AnalyticModel(params)
    gains = default_gains(params)
    xref = reference_state(se3.pack_coord([0, 0, 1], np.eye(3)))
    dbar = 2.0
    for _ in range(5):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        target = rng.uniform(0.0, 0.1)
        radius = np.sqrt((dbar**2 - target) / (2.0 / gains.kp) * 2.0 / gains.kp)
        # choose a pure position offset whose energy hits the sampled margin
        offset = np.sqrt((dbar**2 - target) * gains.kp / (2.0 * 0.5 * gains.kp))
        x0 = make_state(np.array([0, 0, 1]) + offset * direction, np.eye(3))
        de0 = dsm(x0, xref, dbar, gains, model)
        npt.assert_allclose(de0, target, atol=1e-9)
        x = x0
        for _ in range(300):
            x = rk4_step_closed_loop(x, xref, 0.01, gains, model, model)
            de = dsm(x, xref, dbar, gains, model)
            assert de >= -1e-9
            assert np.linalg.norm(x[:3] - [0, 0, 1]) <= dbar + 1e-9
