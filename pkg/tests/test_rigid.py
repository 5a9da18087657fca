import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from cooptopp.errors import ModelError
from cooptopp.rigid import (GraspOffset, RigidObjectModel, cuboid_inertia, cylinder_inertia,
                            is_rotation, object_dynamics_terms, rot_x, rot_y, rot_z,
                            rotation_log, skew, vee, zyz_to_matrix)

angle = st.floats(-np.pi, np.pi, allow_nan=False)
vec3 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3).map(np.array)


@given(vec3, vec3)
def test_skew_is_cross_product(u, w):
    assert np.allclose(skew(u) @ w, np.cross(u, w))
    assert np.allclose(vee(skew(u)), u)


@given(angle, angle, angle)
def test_zyz_is_rotation(a, b, c):
    R = zyz_to_matrix((a, b, c))
    assert is_rotation(R)
    assert np.allclose(R, rot_z(a) @ rot_y(b) @ rot_z(c))


@given(vec3)
def test_rotation_log_inverts_exp(r):
    n = np.linalg.norm(r)
    if n >= np.pi - 1e-3:
        r = r * (np.pi - 1e-3) / n
    R = expm(skew(r))
    assert np.allclose(rotation_log(R), r, atol=1e-7)


def test_rotation_log_near_pi():
    R = rot_x(np.pi)
    r = rotation_log(R)
    assert np.isclose(np.linalg.norm(r), np.pi)
    assert np.allclose(expm(skew(r)), R, atol=1e-9)


def test_is_rotation_rejects_reflections_and_nan():
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not is_rotation(np.full((3, 3), np.nan))
    assert is_rotation(rot_x(0.3) @ rot_y(-1.2))


def test_cuboid_and_cylinder_inertia():
    J = cuboid_inertia(12.0, (1.0, 2.0, 3.0))
    assert np.allclose(np.diag(J), [13.0, 10.0, 5.0])
    C = cylinder_inertia(2.0, 0.5, 1.0, axis=0)
    assert np.isclose(C[0, 0], 0.25)
    assert np.isclose(C[1, 1], 2.0 * (3 * 0.25 + 1.0) / 12)


def test_object_model_validation():
    with pytest.raises(ModelError):
        RigidObjectModel(0.0, np.eye(3))
    with pytest.raises(ModelError):
        RigidObjectModel(1.0, np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ModelError):
        RigidObjectModel(1.0, np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))


@given(angle, angle, angle, vec3)
def test_object_terms_match_euler_equations(a, b, c, w):
    """``C_O v`` is the gyroscopic moment and gravity sits in the force rows."""
    obj = RigidObjectModel.cuboid(3.0, (0.2, 0.5, 0.1), offsets=[GraspOffset()])
    R = zyz_to_matrix((a, b, c))
    M, C, g = object_dynamics_terms(obj, R, w)
    I_w = R @ obj.inertia_body @ R.T
    assert np.allclose(M[3:, 3:], I_w)
    assert np.allclose((C @ np.concatenate([np.zeros(3), w]))[3:], np.cross(w, I_w @ w))
    assert np.allclose(g[:3], [0, 0, 3.0 * 9.81])
    assert np.all(np.linalg.eigvalsh(M) > 0)
