"""Manipulator models.

All models expose the same callbacks: ``mass_matrix``, ``coriolis``,
``gravity_vec``, ``jacobian``, ``forward_kin``, ``inverse_kin`` and
``inverse_dynamics``. Quantities are expressed in the inertial frame; the
geometric Jacobian maps joint rates to ``[linear velocity; angular velocity]``
of the end-effector frame origin.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import KinematicsError, ModelError
from .rigid import (GRAVITY, Pose, cuboid_inertia, cylinder_inertia, is_rotation,
                    rot_x, rot_z, rotation_log)


def _as_bound(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if np.any(np.isnan(arr)):
        raise ModelError(f"{name} contains NaN")
    return arr


class ManipulatorModel:
    """Base class holding joint bounds and base placement."""

    dof: int = 0

    def __init__(self, name, dof, torque_lower=-np.inf, torque_upper=np.inf,
                 velocity_bound=np.inf, base_position=(0, 0, 0), base_rotation=None,
                 gravity=GRAVITY):
        self.name = name
        self.dof = int(dof)
        if self.dof <= 0:
            raise ModelError("dof must be a positive integer")
        self.torque_lower = _as_bound(torque_lower, self.dof, "torque_lower")
        self.torque_upper = _as_bound(torque_upper, self.dof, "torque_upper")
        self.velocity_bound = _as_bound(velocity_bound, self.dof, "velocity_bound")
        if not np.all(self.torque_lower < self.torque_upper):
            raise ModelError(f"{name}: torque_lower must be below torque_upper componentwise")
        if not np.all(self.velocity_bound > 0):
            raise ModelError(f"{name}: velocity bounds must be positive")
        self.base_position = np.asarray(base_position, dtype=float).reshape(3)
        R = np.eye(3) if base_rotation is None else np.asarray(base_rotation, dtype=float)
        if not is_rotation(R, tol=1e-8):
            raise ModelError(f"{name}: base rotation is not orthonormal")
        self.base_rotation = R
        self.gravity = np.asarray(gravity, dtype=float).reshape(3)

    def with_bounds(self, torque_lower=None, torque_upper=None, velocity_bound=None):
        """Copy of the model with some bounds replaced."""
        other = copy.copy(self)
        if torque_lower is not None:
            other.torque_lower = _as_bound(torque_lower, self.dof, "torque_lower")
        if torque_upper is not None:
            other.torque_upper = _as_bound(torque_upper, self.dof, "torque_upper")
        if velocity_bound is not None:
            other.velocity_bound = _as_bound(velocity_bound, self.dof, "velocity_bound")
        if not np.all(other.torque_lower < other.torque_upper):
            raise ModelError(f"{self.name}: torque_lower must be below torque_upper componentwise")
        if not np.all(other.velocity_bound > 0):
            raise ModelError(f"{self.name}: velocity bounds must be positive")
        return other

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, dof={self.dof})"


@dataclass
class Link:
    """One link of a serial chain in standard Denavit-Hartenberg form.

    ``com`` and ``inertia`` (about the centre of mass) are expressed in the
    link's own DH frame.
    """

    a: float
    alpha: float
    d: float
    theta: float = 0.0
    joint: str = "R"
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        if self.joint not in ("R", "P"):
            raise ModelError(f"joint type must be 'R' or 'P', got {self.joint!r}")
        self.com = np.asarray(self.com, dtype=float).reshape(3)
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if self.mass < 0:
            raise ModelError("link mass must be nonnegative")

    def transform(self, q: float):
        theta = self.theta + (q if self.joint == "R" else 0.0)
        d = self.d + (q if self.joint == "P" else 0.0)
        ct, st = math.cos(theta), math.sin(theta)
        ca, sa = math.cos(self.alpha), math.sin(self.alpha)
        R = np.array([[ct, -st * ca, st * sa],
                      [st, ct * ca, -ct * sa],
                      [0.0, sa, ca]])
        p = np.array([self.a * ct, self.a * st, d])
        return R, p


class SerialChain(ManipulatorModel):
    """Open kinematic chain of revolute and prismatic joints.

    The mass matrix is assembled from link centre-of-mass Jacobians, the
    Coriolis matrix from Christoffel symbols of the mass matrix, and
    ``inverse_dynamics`` runs a recursive Newton-Euler pass that shares no code
    with either (it is used as an independent check).
    """

    christoffel_step = 1e-5

    def __init__(self, name, links: Sequence[Link], tool_rotation=None, tool_offset=(0, 0, 0),
                 **kwargs):
        super().__init__(name, len(links), **kwargs)
        self.links = list(links)
        self.tool_rotation = np.eye(3) if tool_rotation is None else np.asarray(tool_rotation, float)
        if not is_rotation(self.tool_rotation, tol=1e-8):
            raise ModelError(f"{name}: tool rotation is not orthonormal")
        self.tool_offset = np.asarray(tool_offset, dtype=float).reshape(3)

    # -- kinematics -------------------------------------------------------
    def frames(self, q):
        """Rotations and origins of frames 0..n in the inertial frame."""
        q = np.asarray(q, dtype=float)
        Rs = [self.base_rotation]
        ps = [self.base_position]
        for link, qi in zip(self.links, q):
            R_rel, p_rel = link.transform(qi)
            ps.append(ps[-1] + Rs[-1] @ p_rel)
            Rs.append(Rs[-1] @ R_rel)
        return Rs, ps

    def forward_kin(self, q) -> Pose:
        Rs, ps = self.frames(q)
        return Pose(ps[-1] + Rs[-1] @ self.tool_offset, Rs[-1] @ self.tool_rotation)

    def _point_jacobian(self, Rs, ps, point, upto):
        J = np.zeros((6, self.dof))
        z = np.array([R[:, 2] for R in Rs[:upto]])
        o = np.array(ps[:upto])
        rev = self._revolute[:upto]
        J[:3, :upto] = np.where(rev[:, None], np.cross(z, point - o), z).T
        J[3:, :upto] = (z * rev[:, None]).T
        return J

    @property
    def _revolute(self):
        return np.array([link.joint == "R" for link in self.links])

    def jacobian(self, q) -> np.ndarray:
        return self.kinematics(q)[1]

    def kinematics(self, q):
        """End-effector pose and geometric Jacobian from one forward pass."""
        Rs, ps = self.frames(q)
        point = ps[-1] + Rs[-1] @ self.tool_offset
        return Pose(point, Rs[-1] @ self.tool_rotation), self._point_jacobian(Rs, ps, point, self.dof)

    # -- dynamics ---------------------------------------------------------
    def _com_data(self, q):
        Rs, ps = self.frames(q)
        out = []
        for j, link in enumerate(self.links):
            if link.mass == 0.0 and not link.inertia.any():
                continue
            R = Rs[j + 1]
            c = ps[j + 1] + R @ link.com
            J = self._point_jacobian(Rs, ps, c, j + 1)
            out.append((link, R, J))
        return out

    def mass_matrix(self, q) -> np.ndarray:
        M = np.zeros((self.dof, self.dof))
        for link, R, J in self._com_data(q):
            Jv, Jw = J[:3], J[3:]
            M += link.mass * Jv.T @ Jv + Jw.T @ (R @ link.inertia @ R.T) @ Jw
        return 0.5 * (M + M.T)

    def gravity_vec(self, q) -> np.ndarray:
        g = np.zeros(self.dof)
        for link, _, J in self._com_data(q):
            g -= link.mass * J[:3].T @ self.gravity
        return g

    def mass_matrix_derivatives(self, q) -> np.ndarray:
        """``dM[i] = dM/dq_i`` by central differences."""
        q = np.asarray(q, dtype=float)
        h = self.christoffel_step
        dM = np.empty((self.dof, self.dof, self.dof))
        for i in range(self.dof):
            e = np.zeros(self.dof)
            e[i] = h
            dM[i] = (self.mass_matrix(q + e) - self.mass_matrix(q - e)) / (2.0 * h)
        return dM

    def coriolis(self, q, qd) -> np.ndarray:
        dM = self.mass_matrix_derivatives(q)
        return christoffel_coriolis(dM, qd)

    def inverse_dynamics(self, q, qd, qdd, gravity=True) -> np.ndarray:
        """Joint torques by recursive Newton-Euler in the inertial frame."""
        q, qd, qdd = (np.asarray(v, dtype=float) for v in (q, qd, qdd))
        Rs, ps = self.frames(q)
        n = self.dof
        w = np.zeros(3)
        wd = np.zeros(3)
        a_origin = -self.gravity.copy() if gravity else np.zeros(3)
        forces, moments, coms = [], [], []
        for j, link in enumerate(self.links):
            z = Rs[j][:, 2]
            r = ps[j + 1] - ps[j]
            if link.joint == "R":
                w_new = w + z * qd[j]
                wd = wd + z * qdd[j] + np.cross(w, z * qd[j])
                w = w_new
                a_origin = a_origin + np.cross(wd, r) + np.cross(w, np.cross(w, r))
            else:
                a_origin = (a_origin + np.cross(wd, r) + np.cross(w, np.cross(w, r))
                            + 2.0 * np.cross(w, z * qd[j]) + z * qdd[j])
            R = Rs[j + 1]
            rc = R @ link.com
            a_com = a_origin + np.cross(wd, rc) + np.cross(w, np.cross(w, rc))
            inertia = R @ link.inertia @ R.T
            forces.append(link.mass * a_com)
            moments.append(inertia @ wd + np.cross(w, inertia @ w))
            coms.append(ps[j + 1] + rc)
        tau = np.zeros(n)
        f_next = np.zeros(3)
        n_next = np.zeros(3)
        for j in range(n - 1, -1, -1):
            f = forces[j] + f_next
            m = (moments[j] + n_next + np.cross(coms[j] - ps[j], forces[j])
                 + np.cross(ps[j + 1] - ps[j], f_next))
            z = Rs[j][:, 2]
            tau[j] = z @ m if self.links[j].joint == "R" else z @ f
            f_next, n_next = f, m
        return tau

    # -- inverse kinematics ------------------------------------------------
    def pose_error(self, q, target: Pose) -> np.ndarray:
        return _pose_error(self.forward_kin(q), target)

    def inverse_kin(self, target: Pose, hint, tol=1e-12, max_iter=100) -> np.ndarray:
        """Newton iteration with backtracking, started at ``hint``.

        Starting from the previous grid point keeps the returned branch the
        one closest to the hint.
        """
        q = np.array(hint, dtype=float)
        pose, J = self.kinematics(q)
        err = _pose_error(pose, target)
        nerr = np.linalg.norm(err)
        for _ in range(max_iter):
            if nerr < tol:
                break
            try:
                dq = np.linalg.solve(J, err)
            except np.linalg.LinAlgError:
                dq = J.T @ np.linalg.solve(J @ J.T + 1e-6 * np.eye(6), err)
            step = np.max(np.abs(dq))
            if step > 0.3:
                dq *= 0.3 / step
            for _ in range(30):
                pose, J_new = self.kinematics(q + dq)
                err_new = _pose_error(pose, target)
                if np.linalg.norm(err_new) < nerr:
                    break
                dq *= 0.5
            else:
                break
            q, J, err = q + dq, J_new, err_new
            nerr = np.linalg.norm(err)
        check_ik_residual(self, q, target)
        return q


def _pose_error(pose: Pose, target: Pose) -> np.ndarray:
    return np.concatenate([target.position - pose.position,
                           rotation_log(target.rotation @ pose.rotation.T)])


def christoffel_coriolis(dM: np.ndarray, qd) -> np.ndarray:
    """Coriolis matrix from Christoffel symbols; ``dM[i] = dM/dq_i``."""
    qd = np.asarray(qd, dtype=float)
    t1 = np.einsum("ikj,i->kj", dM, qd)
    t2 = np.einsum("jki,i->kj", dM, qd)
    t3 = np.einsum("kij,i->kj", dM, qd)
    return 0.5 * (t1 + t2 - t3)


def check_ik_residual(model, q, target: Pose, tol=1e-8):
    pose = model.forward_kin(q)
    dp = np.linalg.norm(pose.position - target.position)
    dR = np.linalg.norm(pose.rotation - target.rotation)
    if not (dp < tol and dR < tol):
        raise KinematicsError(
            f"{model.name}: pose unreachable (position residual {dp:.3e} m, "
            f"rotation residual {dR:.3e})")


def planar_2r_ik(l1, l2, x, y, hint=None):
    """Both-branch inverse kinematics of a planar two-link arm.

    Returns the solution closest to ``hint`` (the ``q2 > 0`` branch when no hint
    is given).
    """
    r2 = x * x + y * y
    c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if c2 > 1.0 + 1e-12 or c2 < -1.0 - 1e-12:
        raise KinematicsError(f"planar 2R target ({x:.4g}, {y:.4g}) is outside the workspace")
    c2 = float(np.clip(c2, -1.0, 1.0))
    sols = []
    for sign in (1.0, -1.0):
        q2 = sign * np.arccos(c2)
        q1 = np.arctan2(y, x) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
        sols.append(np.array([q1, q2]))
    if hint is None:
        return sols[0]
    hint = np.asarray(hint, dtype=float)

    def dist(q):
        d = np.angle(np.exp(1j * (q - hint)))
        return np.linalg.norm(d)

    best = min(sols, key=dist)
    # keep the angles on the hint's sheet
    return hint + np.angle(np.exp(1j * (best - hint)))


class Planar3R(SerialChain):
    """Three-link planar arm with point masses at the distal link ends.

    The arm moves in the local x-y plane of its base frame; with the default
    base rotation that plane is the vertical inertial x-z plane.
    """

    def __init__(self, name, lengths, masses, base_rotation=None, tool_rotation=None, **kwargs):
        if base_rotation is None:
            base_rotation = rot_x(np.pi / 2)
        if tool_rotation is None:
            tool_rotation = rot_x(-np.pi / 2)
        links = [Link(a=l, alpha=0.0, d=0.0, joint="R", mass=m) for l, m in zip(lengths, masses)]
        super().__init__(name, links, tool_rotation=tool_rotation, base_rotation=base_rotation,
                         **kwargs)
        self.lengths = tuple(float(l) for l in lengths)

    def inverse_kin(self, target: Pose, hint=None, tol=1e-12, max_iter=0):
        local_p = self.base_rotation.T @ (target.position - self.base_position)
        R_plane = self.base_rotation.T @ target.rotation @ self.tool_rotation.T
        if abs(local_p[2]) > 1e-9 or abs(R_plane[2, 2] - 1.0) > 1e-9:
            raise KinematicsError(f"{self.name}: target pose leaves the arm's plane")
        phi = np.arctan2(R_plane[1, 0], R_plane[0, 0])
        l1, l2, l3 = self.lengths
        wx = local_p[0] - l3 * np.cos(phi)
        wy = local_p[1] - l3 * np.sin(phi)
        hint12 = None if hint is None else np.asarray(hint, dtype=float)[:2]
        try:
            q12 = planar_2r_ik(l1, l2, wx, wy, hint12)
        except KinematicsError as exc:
            raise KinematicsError(f"{self.name}: {exc}") from None
        q3 = phi - q12[0] - q12[1]
        if hint is not None:
            q3 = hint[2] + np.angle(np.exp(1j * (q3 - hint[2])))
        q = np.array([q12[0], q12[1], q3])
        check_ik_residual(self, q, target)
        return q


class PrismaticCarriage(ManipulatorModel):
    """Single prismatic joint moving a point mass along a fixed axis."""

    def __init__(self, name, mass, axis=(1, 0, 0), **kwargs):
        super().__init__(name, 1, **kwargs)
        if not mass > 0:
            raise ModelError("carriage mass must be positive")
        self.mass = float(mass)
        axis = np.asarray(axis, dtype=float)
        self.axis = axis / np.linalg.norm(axis)

    def forward_kin(self, q) -> Pose:
        return Pose(self.base_position + self.axis * float(np.asarray(q).reshape(-1)[0]),
                    self.base_rotation.copy())

    def jacobian(self, q) -> np.ndarray:
        J = np.zeros((6, 1))
        J[:3, 0] = self.axis
        return J

    def mass_matrix(self, q) -> np.ndarray:
        return np.array([[self.mass]])

    def coriolis(self, q, qd) -> np.ndarray:
        return np.zeros((1, 1))

    def gravity_vec(self, q) -> np.ndarray:
        return np.array([-self.mass * self.axis @ self.gravity])

    def inverse_dynamics(self, q, qd, qdd, gravity=True) -> np.ndarray:
        g = self.gravity if gravity else np.zeros(3)
        return np.array([self.mass * float(np.asarray(qdd).reshape(-1)[0]) - self.mass * self.axis @ g])

    def inverse_kin(self, target: Pose, hint=None) -> np.ndarray:
        q = np.array([self.axis @ (target.position - self.base_position)])
        check_ik_residual(self, q, target)
        return q


# --- built-in models -------------------------------------------------------

STANFORD_MASSES = (15.0, 10.0, 8.0, 1.0, 0.7, 0.5)
STANFORD_LENGTHS = {1: 0.6, 2: 0.5, 4: 0.15, 5: 0.12, 6: 0.1}
STANFORD_RADII = {1: 0.12, 2: 0.1, 4: 0.06, 5: 0.05, 6: 0.05}
STANFORD_BOOM_SECTION = 0.12
STANFORD_BOOM_LENGTH = 1.0


def stanford_arm(name="stanford", masses=STANFORD_MASSES, lengths=None, radii=None,
                 boom_section=STANFORD_BOOM_SECTION, boom_length=STANFORD_BOOM_LENGTH,
                 tool_rotation=None, **kwargs) -> SerialChain:
    """Stanford arm (RRP + spherical wrist) with uniform-density link solids.

    Link 3 is the sliding boom, a cuboid of square section ``boom_section``
    whose far end carries the wrist; all other links are solid cylinders lying
    between consecutive joint origins (links 5 and 6 lie along the last axis).
    """
    L = dict(STANFORD_LENGTHS)
    L.update(lengths or {})
    r = dict(STANFORD_RADII)
    r.update(radii or {})
    m = tuple(float(v) for v in masses)
    l1, l2, l4, l5, l6 = L[1], L[2], L[4], L[5], L[6]
    half_pi = np.pi / 2
    links = [
        # column of height l1 about the base z axis: local y of frame 1 is the base -z
        Link(0.0, -half_pi, l1, 0.0, "R", m[0], (0.0, l1 / 2, 0.0),
             cylinder_inertia(m[0], r[1], l1, axis=1)),
        # shoulder offset along the joint-2 axis (frame-2 y)
        Link(0.0, half_pi, l2, 0.0, "R", m[1], (0.0, -l2 / 2, 0.0),
             cylinder_inertia(m[1], r[2], l2, axis=1)),
        Link(0.0, 0.0, 0.0, 0.0, "P", m[2], (0.0, 0.0, -boom_length / 2),
             cuboid_inertia(m[2], (boom_section, boom_section, boom_length))),
        Link(0.0, -half_pi, l4, 0.0, "R", m[3], (0.0, l4 / 2, 0.0),
             cylinder_inertia(m[3], r[4], l4, axis=1)),
        Link(0.0, half_pi, 0.0, 0.0, "R", m[4], (0.0, 0.0, l5 / 2),
             cylinder_inertia(m[4], r[5], l5, axis=2)),
        Link(0.0, 0.0, l5 + l6, 0.0, "R", m[5], (0.0, 0.0, -l6 / 2),
             cylinder_inertia(m[5], r[6], l6, axis=2)),
    ]
    return SerialChain(name, links, tool_rotation=tool_rotation, **kwargs)


def planar_3r(name="planar-3r", lengths=(0.6, 0.5, 0.2), masses=(3.0, 2.0, 1.0), **kwargs):
    return Planar3R(name, lengths, masses, **kwargs)


def prismatic_carriage(name="carriage", mass=1.0, **kwargs):
    return PrismaticCarriage(name, mass, **kwargs)


def rot_from_list(rows) -> Optional[np.ndarray]:
    return None if rows is None else np.asarray(rows, dtype=float).reshape(3, 3)


BUILDERS = {
    "stanford": stanford_arm,
    "planar-3r": planar_3r,
    "prismatic": prismatic_carriage,
}


def build_model(kind: str, **params) -> ManipulatorModel:
    """Instantiate a built-in model kind with keyword parameters."""
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise ModelError(f"unknown manipulator kind {kind!r}; known: {sorted(BUILDERS)}") from None
    for key in ("base_rotation", "tool_rotation"):
        if key in params:
            params[key] = rot_from_list(params[key])
    if kind == "stanford" and "lengths" in params and not isinstance(params["lengths"], dict):
        vals = list(params["lengths"])
        params["lengths"] = dict(zip((1, 2, 4, 5, 6), vals))
    return builder(**params)


__all__ = [
    "ManipulatorModel", "SerialChain", "Link", "Planar3R", "PrismaticCarriage",
    "stanford_arm", "planar_3r", "prismatic_carriage", "planar_2r_ik", "build_model",
    "christoffel_coriolis", "STANFORD_MASSES", "STANFORD_LENGTHS", "STANFORD_RADII", "rot_z",
]
