import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cooptopp.errors import KinematicsError, ModelError
from cooptopp.manipulators import (build_model, christoffel_coriolis, planar_2r_ik, planar_3r,
                                   prismatic_carriage, stanford_arm)
from cooptopp.rigid import Pose, rot_x
from cooptopp.scenario import jacobian_fd_error

HINT = np.array([-1.57, -0.8, 1.2, 0.0, -1.5, 0.0])
ARM = stanford_arm("r1", base_position=(0, -1.4, 0), tool_rotation=rot_x(np.pi))
PLANAR = planar_3r("p")

offsets6 = st.lists(st.floats(-0.4, 0.4, allow_nan=False), min_size=6, max_size=6).map(np.array)
offsets3 = st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=3, max_size=3).map(np.array)
rates6 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6).map(np.array)


@given(offsets6)
def test_stanford_mass_matrix_spd(dq):
    M = ARM.mass_matrix(HINT + dq)
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


@given(offsets3)
def test_planar_mass_matrix_spd(q):
    assert np.linalg.eigvalsh(PLANAR.mass_matrix(q + [0.5, 1.0, 0.3])).min() > 0


@given(offsets6)
def test_stanford_jacobian_matches_finite_differences(dq):
    assert jacobian_fd_error(ARM, HINT + dq) <= 1e-6


@given(offsets3)
def test_planar_jacobian_matches_finite_differences(q):
    assert jacobian_fd_error(PLANAR, q + [0.5, 1.0, 0.3]) <= 1e-6


@given(offsets6, offsets6)
def test_stanford_ik_round_trip(dq, perturb):
    q = HINT + dq
    target = ARM.forward_kin(q)
    q_back = ARM.inverse_kin(target, q + 0.1 * perturb)
    pose = ARM.forward_kin(q_back)
    assert np.linalg.norm(pose.position - target.position) <= 1e-8
    assert np.linalg.norm(pose.rotation - target.rotation) <= 1e-8


@given(offsets3)
def test_planar_ik_returns_hinted_branch(dq):
    q = np.array([0.6, 1.1, -0.4]) + 0.3 * dq
    target = PLANAR.forward_kin(q)
    assert np.allclose(PLANAR.inverse_kin(target, q + 0.01), q, atol=1e-9)


@given(offsets6, rates6, rates6)
def test_newton_euler_matches_lagrangian_terms(dq, qd, qdd):
    """Recursive Newton-Euler against ``M qdd + C qd + g`` built from the mass matrix."""
    q = HINT + dq
    tau_ne = ARM.inverse_dynamics(q, qd, qdd)
    tau_lag = ARM.mass_matrix(q) @ qdd + ARM.coriolis(q, qd) @ qd + ARM.gravity_vec(q)
    assert np.allclose(tau_ne, tau_lag, atol=1e-6 * max(1.0, np.abs(tau_ne).max()))


@given(offsets6, rates6)
def test_mdot_minus_2c_is_skew(dq, qd):
    q = HINT + dq
    dM = ARM.mass_matrix_derivatives(q)
    Mdot = np.einsum("i,ijk->jk", qd, dM)
    S = Mdot - 2.0 * christoffel_coriolis(dM, qd)
    assert np.allclose(S, -S.T, atol=1e-6)


def test_stanford_gravity_is_potential_gradient():
    q = HINT + 0.1
    h = 1e-6

    def potential(q):
        Rs, ps = ARM.frames(q)
        return sum(-link.mass * ARM.gravity @ (ps[j + 1] + Rs[j + 1] @ link.com)
                   for j, link in enumerate(ARM.links))

    grad = np.array([(potential(q + h * e) - potential(q - h * e)) / (2 * h) for e in np.eye(6)])
    assert np.allclose(grad, ARM.gravity_vec(q), atol=1e-5)


def test_unreachable_pose_raises():
    with pytest.raises(KinematicsError):
        PLANAR.inverse_kin(Pose(np.array([0.2, 0.3, 0.1]), np.eye(3)))
    with pytest.raises(KinematicsError):
        PLANAR.inverse_kin(Pose(np.array([2.0, 0.0, 0.0]), np.eye(3)))


def test_planar_2r_branches():
    up = planar_2r_ik(1.0, 1.0, 1.0, 1.0)
    down = planar_2r_ik(1.0, 1.0, 1.0, 1.0, hint=[1.6, -1.6])
    assert up[1] > 0 > down[1]
    for q in (up, down):
        x = np.cos(q[0]) + np.cos(q[0] + q[1])
        y = np.sin(q[0]) + np.sin(q[0] + q[1])
        assert np.allclose([x, y], [1.0, 1.0])


def test_prismatic_carriage_dynamics():
    c = prismatic_carriage("c", 2.0, axis=(0, 0, 1))
    assert np.allclose(c.inverse_dynamics([0.1], [0.0], [1.0]), [2.0 + 2.0 * 9.81])
    assert np.allclose(c.gravity_vec([0.0]), [2.0 * 9.81])
    assert np.allclose(c.inverse_kin(Pose(np.array([0, 0, 0.3]), np.eye(3))), [0.3])


def test_build_model_validates():
    with pytest.raises(ModelError):
        build_model("scara")
    with pytest.raises(ModelError):
        build_model("prismatic", mass=1.0, torque_lower=[1.0], torque_upper=[-1.0])
    with pytest.raises(ModelError):
        build_model("stanford", base_rotation=np.diag([1.0, 1.0, -1.0]).tolist())
    m = build_model("stanford", lengths=[0.7, 0.5, 0.15, 0.12, 0.1], velocity_bound=2.0)
    assert m.dof == 6 and np.all(m.velocity_bound == 2.0)
