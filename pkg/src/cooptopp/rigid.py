"""Rigid-body primitives: rotations, inertia of simple shapes and the carried object."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ModelError

GRAVITY = np.array([0.0, 0.0, -9.81])


class Pose(NamedTuple):
    position: np.ndarray
    rotation: np.ndarray


def skew(u) -> np.ndarray:
    """Cross-product matrix: ``skew(u) @ w == np.cross(u, w)``."""
    u = np.asarray(u, dtype=float)
    return np.array([[0.0, -u[2], u[1]],
                     [u[2], 0.0, -u[0]],
                     [-u[1], u[0], 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew` applied to the skew part of ``S``."""
    A = 0.5 * (S - S.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def zyz_to_matrix(angles) -> np.ndarray:
    """Rotation matrix of the ZYZ Euler triplet ``(phi, theta, psi)``."""
    phi, theta, psi = angles
    return rot_z(phi) @ rot_y(theta) @ rot_z(psi)


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector ``r`` with ``expm(skew(r)) == R``."""
    cos_angle = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    angle = np.arccos(cos_angle)
    if angle < 1e-7:
        return vee(R)
    if np.pi - angle < 1e-6:
        # near pi the skew part vanishes; recover the axis from the symmetric part
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if np.dot(vee(R), axis) < 0:
            axis = -axis
        return angle * axis
    return angle / (2.0 * np.sin(angle)) * np.array(
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.linalg.norm(R.T @ R - np.eye(3)) <= tol and np.linalg.det(R) > 0)


def cuboid_inertia(mass: float, dims: Sequence[float]) -> np.ndarray:
    """Inertia about the centroid of a uniform box with edge lengths ``dims`` (x, y, z)."""
    a, b, c = dims
    return mass / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])


def cylinder_inertia(mass: float, radius: float, length: float, axis: int = 2) -> np.ndarray:
    """Inertia about the centroid of a uniform solid cylinder whose axis is ``axis``."""
    transverse = mass * (3.0 * radius ** 2 + length ** 2) / 12.0
    diag = np.full(3, transverse)
    diag[axis] = 0.5 * mass * radius ** 2
    return np.diag(diag)


@dataclass(frozen=True)
class GraspOffset:
    """Constant offset between the object frame and one end-effector frame.

    ``position`` is expressed in the end-effector frame; ``orientation`` is a
    ZYZ triplet that is added to the object's Euler angles.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(3))


@dataclass(frozen=True)
class RigidObjectModel:
    mass: float
    inertia_body: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    grasp_offsets: tuple = ()

    def __post_init__(self):
        inertia = np.asarray(self.inertia_body, dtype=float)
        object.__setattr__(self, "inertia_body", inertia)
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float).reshape(3))
        object.__setattr__(self, "grasp_offsets", tuple(self.grasp_offsets))
        if not self.mass > 0:
            raise ModelError(f"object mass must be positive, got {self.mass}")
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ModelError("object inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise ModelError("object inertia must be positive definite")

    @classmethod
    def cuboid(cls, mass, dims, offsets=(), gravity=GRAVITY):
        return cls(mass, cuboid_inertia(mass, dims), np.asarray(gravity, dtype=float), tuple(offsets))

    def inertia_world(self, rotation: np.ndarray) -> np.ndarray:
        return rotation @ self.inertia_body @ rotation.T


def object_dynamics_terms(obj: RigidObjectModel, rotation, omega):
    """Newton-Euler terms of the object at its centre of mass.

    Returns ``(M_O, C_O, g_O)`` such that ``M_O @ vdot + C_O @ v + g_O`` is the
    wrench on the object, with the inertia tensor expressed in a frame parallel
    to the inertial frame.
    """
    R = np.asarray(rotation, dtype=float)
    if not is_rotation(R, tol=1e-8):
        raise ModelError("object rotation is not orthonormal")
    inertia = obj.inertia_world(R)
    M = np.zeros((6, 6))
    M[:3, :3] = obj.mass * np.eye(3)
    M[3:, 3:] = inertia
    C = np.zeros((6, 6))
    C[3:, 3:] = skew(omega) @ inertia
    g = np.concatenate([-obj.mass * obj.gravity, np.zeros(3)])
    return M, C, g
