import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cooptopp.errors import ConfigError, EulerSingularityError, KinematicsError
from cooptopp.paths import (CATALOG, PathGrid, catalog_path, coupled_pose,
                            differentiate_joint_path, euler_rate_matrix, euler_rate_transform,
                            linear_path, load_path_csv, polynomial_path, sampled_path,
                            sweep_inverse_kinematics)
from cooptopp.rigid import GraspOffset, RigidObjectModel, vee, zyz_to_matrix

angle = st.floats(-3.0, 3.0, allow_nan=False)
rate = st.floats(-2.0, 2.0, allow_nan=False)


@given(angle, angle, angle, rate, rate, rate)
def test_euler_rate_matrix_gives_angular_velocity(a, b, c, da, db, dc):
    phi, dphi = np.array([a, b, c]), np.array([da, db, dc])
    h = 1e-6
    Rdot = (zyz_to_matrix(phi + h * dphi) - zyz_to_matrix(phi - h * dphi)) / (2 * h)
    omega = vee(Rdot @ zyz_to_matrix(phi).T)
    assert np.allclose(euler_rate_matrix(phi) @ dphi, omega, atol=1e-6)


def test_euler_singularity_is_reported():
    with pytest.raises(EulerSingularityError) as info:
        euler_rate_transform([0.1, 0.0, 0.2], s=0.25)
    assert info.value.s == 0.25 and "s=0.25" in str(info.value)
    assert np.allclose(euler_rate_transform([0.0, 0.5, 0.0]), euler_rate_matrix([0.0, 0.5, 0.0]))


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_derivatives_match_finite_differences(name):
    path = catalog_path(name)
    h = 1e-5
    for s in (0.1, 0.5, 0.9):
        d1 = (path.pose_vector(s + h) - path.pose_vector(s - h)) / (2 * h)
        d2 = (path.pose_vector(s + h) - 2 * path.pose_vector(s) + path.pose_vector(s - h)) / h ** 2
        assert np.allclose(path.derivative(s, 1), d1, atol=1e-8)
        assert np.allclose(path.derivative(s, 2), d2, atol=1e-4)


def test_unknown_catalog_name():
    with pytest.raises(ConfigError):
        catalog_path("P.9")


def test_linear_and_polynomial_paths():
    line = linear_path((0, 0, 0), (1, 2, 3), euler=(0.1, 0.2, 0.3))
    assert np.allclose(line.position(0.5), [0.5, 1.0, 1.5])
    assert np.allclose(line.derivative(0.3, 2), 0.0)
    poly = polynomial_path([(0,), (0,), (0, 0.5, 0.5)], [(0,), (0,), (0,)])
    assert np.isclose(poly.position(1.0)[2], 1.0)
    assert np.isclose(poly.derivative(0.5, 1)[2], 1.0)


def test_sampled_path_from_csv(tmp_path):
    s = np.linspace(0, 1, 41)
    ref = catalog_path("P.1")
    rows = np.column_stack([s, np.array([ref.pose_vector(v) for v in s])])
    f = tmp_path / "p1.csv"
    np.savetxt(f, rows, delimiter=",", header="s,px,py,pz,phi,theta,psi", comments="")
    path = load_path_csv(f)
    for v in (0.13, 0.5, 0.77):
        assert np.allclose(path.pose_vector(v), ref.pose_vector(v), atol=1e-5)
        assert np.allclose(path.derivative(v, 1), ref.derivative(v, 1), atol=1e-3)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1,2\n1,2,3\n")
    with pytest.raises(ConfigError):
        load_path_csv(bad)
    with pytest.raises(ConfigError):
        sampled_path([0, 0.5, 0.4, 1.0], np.zeros((4, 3)), np.zeros((4, 3)))


def test_grid():
    g = PathGrid(4)
    assert np.allclose(g.s, [0, 0.25, 0.5, 0.75, 1.0]) and g.ds == 0.25
    with pytest.raises(ConfigError):
        PathGrid(0)


def test_differentiation_exact_on_quadratics():
    s = np.linspace(0, 1, 101)
    q = np.column_stack([3 * s ** 2 - s + 1, -s ** 2])
    s_n, q_n, dq, ddq = differentiate_joint_path(s, q, 10)
    assert np.allclose(dq[:, 0], 6 * s_n - 1) and np.allclose(ddq[:, 0], 6)
    assert np.allclose(dq[:, 1], -2 * s_n) and np.allclose(ddq[:, 1], -2)
    with pytest.raises(ValueError):
        differentiate_joint_path(s, q, 3)


def test_coupled_pose_keeps_grasp_rigid():
    obj = RigidObjectModel.cuboid(1.0, (0.1, 0.4, 0.1),
                                  offsets=[GraspOffset((0, -0.2, 0)), GraspOffset((0, 0.2, 0))])
    path = catalog_path("P.3")
    for s in (0.0, 0.4, 1.0):
        p1, p2 = coupled_pose(path, obj, 0, s), coupled_pose(path, obj, 1, s)
        assert np.isclose(np.linalg.norm(p1.position - p2.position), 0.4)
        assert np.allclose(p1.rotation, path.rotation(s))
    with pytest.raises(ConfigError):
        coupled_pose(path, obj, 0, 1.5)


def test_stanford_sweep_residuals(stanford_p1):
    sampled = stanford_p1.sampled
    assert len(sampled.q) == 2 and sampled.q[0].shape == (81, 6)
    assert max(r.max() for r in sampled.fk_residual) < 1e-8


def test_sweep_rejects_unreachable_path(planar_prep):
    far = linear_path((0.0, 0.0, 0.5), (2.5, 0.0, 0.5))
    with pytest.raises(KinematicsError, match="s="):
        sweep_inverse_kinematics(planar_prep.models, far, planar_prep.obj, PathGrid(10),
                                 [None, None])
