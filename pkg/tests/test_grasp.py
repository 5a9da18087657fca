import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cooptopp.errors import ConfigError, GraspError
from cooptopp.grasp import (ContactModel, cone_membership, force_closure_two_contacts,
                            grasp_block, grasp_closure, grasp_map, grasp_matrix,
                            internal_force_basis, nullspace_residual, object_to_agent_jacobian)
from cooptopp.rigid import is_rotation, rot_z, skew

vec3 = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).map(np.array)
SOFT = ContactModel("soft", normal=(0, 1, 0), mu=0.8, gamma=0.3, delta1=0.5, delta2=0.1)
POINT = ContactModel("point", normal=(1, 0, 0), mu=0.5)
PLANAR = ContactModel("planar-point", normal=(0, 0, 1), mu=1.0)


def test_grasp_block_moves_force_to_com():
    p = np.array([0.1, -0.2, 0.3])
    f, t = np.array([1.0, 2.0, -1.0]), np.array([0.5, 0.0, 0.2])
    w = grasp_block(p) @ np.concatenate([f, t])
    assert np.allclose(w[:3], f) and np.allclose(w[3:], t + np.cross(p, f))
    # kineto-statics duality: the twist map is the transpose
    assert np.allclose(object_to_agent_jacobian(p), grasp_block(p).T)


@given(vec3, vec3)
def test_grasp_matrix_rank_two_contacts(p1, p2):
    G = grasp_matrix([p1, p2])
    assert G.shape == (6, 12)
    assert np.linalg.matrix_rank(G) == 6
    N = internal_force_basis(G)
    assert N.shape == (12, 6) and np.allclose(G @ N, 0, atol=1e-10)


def test_contact_frames_and_bases():
    for c, m in ((SOFT, 4), (POINT, 3), (PLANAR, 2), (ContactModel(), 6)):
        assert c.m == m and c.basis().shape == (6, m)
        assert is_rotation(c.rotation)
        assert np.allclose(c.rotation[:, c.axis], c.normal / np.linalg.norm(c.normal))
    assert SOFT.rows == [0, 1, 2, 5] and SOFT.torsion_index == 3
    W = SOFT.world_basis(rot_z(0.3))
    assert np.allclose(W[:3, SOFT.normal_index], rot_z(0.3) @ SOFT.normal)


def test_contact_validation():
    with pytest.raises(ConfigError):
        ContactModel("sticky")
    with pytest.raises(ConfigError):
        ContactModel("soft", mu=0.0)
    with pytest.raises(ConfigError):
        ContactModel("point", delta1=-1.0)
    with pytest.raises(ConfigError):
        ContactModel("point", normal_axis="w")


def _soft_force(fn, ft_dir, ft_frac, tors_frac, c=SOFT):
    """Contact-frame force with normal ``fn`` and tangential/torsion fractions of the bounds."""
    f = np.zeros(4)
    f[c.normal_index] = fn
    tang = [j for j in range(3) if j != c.normal_index]
    d = np.array([np.cos(ft_dir), np.sin(ft_dir)])
    f[tang] = ft_frac * c.mu * fn * d
    f[3] = tors_frac * c.gamma * fn
    return f


fracs = st.floats(0.0, 0.999)


@given(st.floats(0.1, 50), st.floats(0, 2 * np.pi), fracs, fracs, st.floats(0.01, 100))
def test_cone_scaling(fn, ang, ft, tq, alpha):
    """The cone is a cone: positive multiples of members are members."""
    f = _soft_force(fn, ang, ft, tq)
    assert cone_membership(f, SOFT).member
    assert cone_membership(alpha * f, SOFT).member


@given(st.floats(0.1, 50), st.floats(0, 2 * np.pi), fracs, fracs)
def test_interior_implies_member_and_margins_bite(fn, ang, ft, tq):
    f = _soft_force(fn, ang, ft, tq)
    if cone_membership(f, SOFT, interior=True).member:
        assert cone_membership(f, SOFT).member
    edge = _soft_force(fn, ang, 1.0, 0.0)
    assert not cone_membership(edge, SOFT, interior=True).member


def test_cone_membership_outside():
    assert not cone_membership(_soft_force(1.0, 0.0, 1.5, 0.0), SOFT).member
    assert not cone_membership(_soft_force(-1.0, 0.0, 0.0, 0.0), SOFT).member
    assert not cone_membership(_soft_force(1.0, 0.0, 0.0, 1.5), SOFT).member
    res = cone_membership(np.array([0.0, 2.0]), PLANAR).residuals
    assert res["normal"] < 0 and res["friction"] == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        cone_membership(np.zeros(3), SOFT)


def test_two_contact_force_closure():
    assert force_closure_two_contacts([0, -0.2, 0], [0, 1, 0], 0.5, [0, 0.2, 0], [0, -1, 0], 0.5)
    # normals tilted by more than the friction angle
    n = [np.sin(0.6), np.cos(0.6), 0.0]
    assert not force_closure_two_contacts([0, -0.2, 0], n, 0.5, [0, 0.2, 0], [0, -1, 0], 0.5)
    assert force_closure_two_contacts([0, -0.2, 0], n, 0.8, [0, 0.2, 0], [0, -1, 0], 0.8)
    with pytest.raises(GraspError):
        force_closure_two_contacts([0, 0, 0], [1, 0, 0], 1, [0, 0, 0], [-1, 0, 0], 1)
    opposite = ContactModel("soft", normal=(0, -1, 0))
    assert grasp_closure([SOFT, opposite], [[0, -0.2, 0], [0, 0.2, 0]])
    with pytest.raises(GraspError):
        grasp_closure([SOFT], [[0, 0, 0]])


def test_soft_grasp_map_rank_and_internal_forces():
    c1 = ContactModel("soft", normal=(0, 1, 0))
    c2 = ContactModel("soft", normal=(0, -1, 0))
    p = [np.array([0, -0.2, 0]), np.array([0, 0.2, 0])]
    Gbar = grasp_map(p, [c1, c2], np.eye(3))
    assert Gbar.shape == (6, 8) and np.linalg.matrix_rank(Gbar) == 6
    N = internal_force_basis(Gbar)
    assert N.shape == (8, 2)
    # the squeeze along the contact line is internal
    f = np.zeros(8)
    f[c1.normal_index] = f[4 + c2.normal_index] = 1.0
    assert np.linalg.norm(Gbar @ f) < 1e-12
    h = [c1.world_basis(np.eye(3)) @ f[:4], c2.world_basis(np.eye(3)) @ f[4:]]
    assert nullspace_residual(h, [grasp_block(p[0]), grasp_block(p[1])]) < 1e-12
    assert np.allclose(skew(p[0]) @ [0, 1, 0], 0)
