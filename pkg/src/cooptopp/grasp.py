"""Grasp geometry: grasp matrix, contact wrench bases, friction cones, force closure."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import ConfigError, GraspError
from .rigid import skew

AXES = {"x": 0, "y": 1, "z": 2}
KIND_ALIASES = {
    "rigid": "rigid",
    "soft": "soft",
    "soft-finger": "soft",
    "point": "point",
    "point-with-friction": "point",
    "planar-point": "planar-point",
    "planar": "planar-point",
}


def object_to_agent_jacobian(p_iO) -> np.ndarray:
    """Maps the object twist at its centre of mass to the twist at contact ``i``."""
    J = np.eye(6)
    J[:3, 3:] = -skew(p_iO)
    return J


def grasp_block(p_iO) -> np.ndarray:
    """``G_i``: contact wrench at ``p_iO`` to the equivalent wrench at the centre of mass."""
    return object_to_agent_jacobian(p_iO).T


def grasp_matrix(contact_vectors) -> np.ndarray:
    return np.hstack([grasp_block(p) for p in contact_vectors])


def _contact_frame(normal, normal_axis):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = AXES[normal_axis]
    b, c = (a + 1) % 3, (a + 2) % 3
    for helper in np.eye(3):
        if abs(helper @ n) < 0.9:
            break
    eb = helper - (helper @ n) * n
    eb /= np.linalg.norm(eb)
    R = np.zeros((3, 3))
    R[:, a] = n
    R[:, b] = eb
    R[:, c] = np.cross(n, eb)
    return R


@dataclass(frozen=True)
class ContactModel:
    """One contact between an end-effector and the object.

    ``normal`` is the inward surface normal in the object frame; the contact
    frame axis named by ``normal_axis`` is aligned with it. ``delta1`` (N) and
    ``delta2`` (N m) shrink the cone when interior membership is requested.
    """

    kind: str = "rigid"
    normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    normal_axis: str = "z"
    mu: float = 1.0
    gamma: float = 1.0
    delta1: float = 0.0
    delta2: float = 0.0
    rotation: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ConfigError(f"unknown contact kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.normal_axis not in AXES:
            raise ConfigError(f"normal_axis must be one of x, y, z; got {self.normal_axis!r}")
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float).reshape(3))
        if self.rotation is None:
            object.__setattr__(self, "rotation", _contact_frame(self.normal, self.normal_axis))
        else:
            object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        if kind != "rigid":
            if not self.mu > 0:
                raise ConfigError("friction coefficient mu must be positive")
            if kind == "soft" and not self.gamma > 0:
                raise ConfigError("torsional friction coefficient gamma must be positive")
            if self.delta1 < 0 or self.delta2 < 0:
                raise ConfigError("cone margins must be nonnegative")

    @property
    def axis(self) -> int:
        return AXES[self.normal_axis]

    @property
    def rows(self) -> list:
        """Rows of the contact-frame wrench ``[f; t]`` that the contact transmits."""
        a = self.axis
        if self.kind == "rigid":
            return list(range(6))
        if self.kind == "planar-point":
            return sorted([a, (a + 1) % 3])
        if self.kind == "point":
            return [0, 1, 2]
        return [0, 1, 2, 3 + a]

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def normal_index(self) -> int:
        """Position of the normal force inside ``f``."""
        return self.rows.index(self.axis)

    @property
    def torsion_index(self) -> Optional[int]:
        return 3 if self.kind == "soft" else None

    def basis(self) -> np.ndarray:
        """Wrench basis ``B`` in the contact frame (6 x m)."""
        return np.eye(6)[:, self.rows]

    def world_basis(self, object_rotation) -> np.ndarray:
        """Basis mapping ``f`` to the contact wrench in the inertial frame."""
        Rw = np.asarray(object_rotation) @ self.rotation
        W = np.zeros((6, 6))
        W[:3, :3] = Rw
        W[3:, 3:] = Rw
        return W @ self.basis()


class ConeCheck(NamedTuple):
    member: bool
    residuals: dict


def cone_membership(f, contact: ContactModel, interior: bool = False, tol: float = 0.0) -> ConeCheck:
    """Friction-cone membership of the contact-frame components ``f``.

    Residuals are constraint violations (positive means violated). With
    ``interior`` the margins ``delta1`` and ``delta2`` are subtracted from the
    cone bounds.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (contact.m,):
        raise ValueError(f"contact of kind {contact.kind} expects {contact.m} components, got {f.shape}")
    if contact.kind == "rigid":
        return ConeCheck(True, {})
    d1 = contact.delta1 if interior else 0.0
    d2 = contact.delta2 if interior else 0.0
    n_idx = contact.normal_index
    fn = f[n_idx]
    tangential = [j for j in range(min(contact.m, 3)) if j != n_idx]
    if contact.kind == "planar-point":
        tangential = [1 - n_idx]
    ft = np.linalg.norm(f[tangential])
    res = {"normal": -fn, "friction": ft - (contact.mu * fn - d1)}
    if contact.kind == "soft":
        res["torsion"] = abs(f[3]) - (contact.gamma * fn - d2)
    return ConeCheck(all(v <= tol for v in res.values()), res)


def force_closure_two_contacts(p1, n1, mu1, p2, n2, mu2, tol: float = 1e-12) -> bool:
    """Two-contact test: the segment joining the contacts lies inside both cones.

    ``n1`` and ``n2`` are inward normals at ``p1`` and ``p2``.
    """
    p1, p2 = np.asarray(p1, float), np.asarray(p2, float)
    d = p2 - p1
    dist = np.linalg.norm(d)
    if dist < 1e-12:
        raise GraspError("contact points coincide")
    d /= dist

    def angle(u, v):
        c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        return np.arccos(np.clip(c, -1.0, 1.0))

    return bool(angle(d, n1) <= np.arctan(mu1) + tol and angle(-d, n2) <= np.arctan(mu2) + tol)


def grasp_closure(contacts: Sequence[ContactModel], attach_points) -> bool:
    """Force-closure precondition for the frictional program (two contacts only)."""
    if len(contacts) != 2:
        raise GraspError("force-closure test is implemented for exactly two contacts")
    c1, c2 = contacts
    return force_closure_two_contacts(attach_points[0], c1.normal, c1.mu,
                                      attach_points[1], c2.normal, c2.mu)


def grasp_map(contact_vectors, contacts: Sequence[ContactModel], object_rotation) -> np.ndarray:
    """``[G_1 B_1 ... G_N B_N]`` with bases rotated into the inertial frame."""
    return np.hstack([grasp_block(p) @ c.world_basis(object_rotation)
                      for p, c in zip(contact_vectors, contacts)])


def internal_force_basis(Gbar: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the nullspace of ``Gbar`` (the internal-force directions)."""
    return null_space(Gbar)


def nullspace_residual(h_internal, grasp_blocks) -> float:
    """Norm of the net centre-of-mass wrench produced by the stacked internal wrenches."""
    total = np.zeros(6)
    for h, G in zip(h_internal, grasp_blocks):
        total += np.asarray(G) @ np.asarray(h)
    return float(np.linalg.norm(total))
