"""Object paths, coupled end-effector poses and joint-space path sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, EulerSingularityError, KinematicsError
from .rigid import Pose, RigidObjectModel, zyz_to_matrix


# --- Euler angles -----------------------------------------------------------

def euler_rate_matrix(phi) -> np.ndarray:
    """ZYZ map from Euler-angle rates to angular velocity (no singularity check)."""
    a, b = phi[0], phi[1]
    ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
    return np.array([[0.0, -sa, ca * sb],
                     [0.0, ca, sa * sb],
                     [1.0, 0.0, cb]])


def euler_rate_transform(phi, tol: float = 1e-6, s: Optional[float] = None) -> np.ndarray:
    """ZYZ rate-to-angular-velocity map ``T`` with ``omega = T @ phidot``.

    Raises :class:`EulerSingularityError` where the representation loses a
    degree of freedom (``|sin(theta)| <= tol``).
    """
    if abs(np.sin(phi[1])) <= tol:
        where = "" if s is None else f" at s={s:.6g}"
        raise EulerSingularityError(
            f"ZYZ representation singular{where} (theta={phi[1]:.3g})", s=s)
    return euler_rate_matrix(phi)


# --- path representations ---------------------------------------------------

class _Poly:
    def __init__(self, *coeffs):
        self.p = np.polynomial.Polynomial(coeffs)

    def __call__(self, s, order=0):
        return self.p.deriv(order)(s) if order else self.p(s)


class _Sin:
    """``amp * sin(freq * s + phase) + offset``."""

    def __init__(self, amp, freq=1.0, phase=0.0, offset=0.0):
        self.amp, self.freq, self.phase, self.offset = amp, freq, phase, offset

    def __call__(self, s, order=0):
        arg = self.freq * s + self.phase + order * np.pi / 2
        val = self.amp * self.freq ** order * np.sin(arg)
        return val + (self.offset if order == 0 else 0.0)


def _cos(amp, freq=1.0, offset=0.0):
    return _Sin(amp, freq, np.pi / 2, offset)


class ObjectPathSpec:
    """Object centre-of-mass position and ZYZ orientation as functions of ``s``.

    Derivatives come from ``derivative`` when supplied (a callable
    ``(s, order) -> 6-vector``), otherwise from central differences.
    """

    fd_step = 1e-5

    def __init__(self, position: Callable, euler: Callable, derivative: Optional[Callable] = None,
                 name: str = "custom"):
        self._position = position
        self._euler = euler
        self._derivative = derivative
        self.name = name

    def position(self, s) -> np.ndarray:
        return np.asarray(self._position(s), dtype=float)

    def euler(self, s) -> np.ndarray:
        return np.asarray(self._euler(s), dtype=float)

    def pose_vector(self, s) -> np.ndarray:
        return np.concatenate([self.position(s), self.euler(s)])

    def rotation(self, s) -> np.ndarray:
        return zyz_to_matrix(self.euler(s))

    def derivative(self, s, order: int = 1) -> np.ndarray:
        if order == 0:
            return self.pose_vector(s)
        if self._derivative is not None:
            return np.asarray(self._derivative(s, order), dtype=float)
        h = self.fd_step if order == 1 else 10 * self.fd_step
        if order == 1:
            return (self.pose_vector(s + h) - self.pose_vector(s - h)) / (2 * h)
        if order == 2:
            return (self.pose_vector(s + h) - 2 * self.pose_vector(s) + self.pose_vector(s - h)) / h ** 2
        raise ValueError("only first and second derivatives are available")

    def __repr__(self):
        return f"ObjectPathSpec({self.name!r})"


class _ComponentPath(ObjectPathSpec):
    def __init__(self, components, name):
        self.components = components
        super().__init__(
            lambda s: [c(s) for c in components[:3]],
            lambda s: [c(s) for c in components[3:]],
            lambda s, order: [c(s, order) for c in components],
            name=name)


CATALOG = {
    "P.1": (_Poly(-0.3, 1.2), _Sin(1.0, 1.0, -0.4), _Poly(0.4, 0.6),
            _Poly(0.2, -0.5), _Sin(0.5), _Poly(-0.4)),
    "P.2": (_Sin(1.0), _cos(1.0, offset=-0.5), _Poly(0.3, 0.7),
            _Poly(0.0, 0.5), _Poly(0.0, -0.5), _Poly(0.0)),
    "P.3": (_Poly(0.0, 0.0, 1.0), _cos(1.0, offset=-0.5), _Poly(0.7, -1.0, 1.0),
            _Poly(0.0, 0.5), _Poly(0.0, 0.3), _Poly(0.0, -0.2)),
    "P.4": (_Poly(-0.3, 0.0, 1.0), _Poly(0.0, 0.0, 0.0, 0.5), _Poly(1.6, -1.2),
            _Sin(0.5), _Poly(0.0, -0.3), _Poly(0.0, 0.3)),
    "P.5": (_Poly(-0.5, 1.0), _Poly(0.0, 0.0, 0.0, 0.4), _Poly(1.6, -1.2),
            _cos(0.5), _Poly(0.5), _Poly(0.0, 0.3)),
}


def catalog_path(name: str) -> ObjectPathSpec:
    """Built-in comparison paths ``P.1`` ... ``P.5``."""
    try:
        return _ComponentPath(CATALOG[name], name)
    except KeyError:
        raise ConfigError(f"unknown path {name!r}; catalog has {sorted(CATALOG)}") from None


def linear_path(start, end, euler=(0.0, 0.0, 0.0), name="line") -> ObjectPathSpec:
    """Straight-line translation at constant orientation."""
    start, end = np.asarray(start, float), np.asarray(end, float)
    comps = [_Poly(a, b - a) for a, b in zip(start, end)] + [_Poly(e) for e in euler]
    return _ComponentPath(comps, name)


def polynomial_path(position_coeffs, euler_coeffs, name="poly") -> ObjectPathSpec:
    """Path whose six components are polynomials in ``s`` (coefficients low to high)."""
    comps = [_Poly(*c) for c in list(position_coeffs) + list(euler_coeffs)]
    return _ComponentPath(comps, name)


def sampled_path(s, positions, eulers, name="sampled") -> ObjectPathSpec:
    """Cubic-spline path through dense samples."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size < 4 or np.any(np.diff(s) <= 0):
        raise ConfigError("path samples need at least 4 strictly increasing s values")
    data = np.hstack([np.asarray(positions, float), np.asarray(eulers, float)])
    spline = CubicSpline(s, data, axis=0)
    return ObjectPathSpec(lambda t: spline(t)[:3], lambda t: spline(t)[3:],
                          lambda t, order: spline(t, order), name=name)


def load_path_csv(path) -> ObjectPathSpec:
    """Read ``s, p_x, p_y, p_z, phi, theta, psi`` rows (a header line is allowed)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise ConfigError(f"non-numeric row in {path}: {row}") from None
    data = np.asarray(rows)
    if data.ndim != 2 or data.shape[1] != 7:
        raise ConfigError(f"{path}: expected 7 columns (s, p_x, p_y, p_z, phi, theta, psi)")
    return sampled_path(data[:, 0], data[:, 1:4], data[:, 4:7], name=str(path))


# --- grid and coupled kinematics ----------------------------------------------

@dataclass(frozen=True)
class PathGrid:
    """Uniform grid ``s_0 = 0 < ... < s_K = 1``."""

    K: int

    def __post_init__(self):
        if int(self.K) < 1:
            raise ConfigError("grid needs at least one interval")

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.K + 1)

    @property
    def ds(self) -> float:
        return 1.0 / self.K


def end_effector_rotation(path: ObjectPathSpec, obj: RigidObjectModel, i: int, s: float):
    return zyz_to_matrix(path.euler(s) + obj.grasp_offsets[i].orientation)


def contact_vector(path, obj, i, s) -> np.ndarray:
    """Vector from the object's centre of mass to end-effector ``i``, inertial frame."""
    return end_effector_rotation(path, obj, i, s) @ obj.grasp_offsets[i].position


def coupled_pose(path: ObjectPathSpec, obj: RigidObjectModel, i: int, s: float) -> Pose:
    """End-effector pose that keeps the grasp offsets of contact ``i`` rigid."""
    if not -1e-12 <= s <= 1 + 1e-12:
        raise ConfigError(f"path coordinate {s} outside [0, 1]")
    R = end_effector_rotation(path, obj, i, s)
    return Pose(path.position(s) + R @ obj.grasp_offsets[i].position, R)


# --- joint-space sampling -----------------------------------------------------

@dataclass
class SampledJointPath:
    """Joint positions and path derivatives of every robot at the grid nodes."""

    s: np.ndarray
    q: list
    dq: list
    ddq: list
    fk_residual: list
    fine_step: float


def differentiate_joint_path(s_fine, q_fine, stride: int):
    """First and second path derivatives at every ``stride``-th sample.

    Central differences inside, second-order one-sided stencils at both ends.
    Returns ``(s_nodes, q_nodes, dq, ddq)``.
    """
    s_fine = np.asarray(s_fine, dtype=float)
    q_fine = np.asarray(q_fine, dtype=float)
    if q_fine.ndim == 1:
        q_fine = q_fine[:, None]
    if stride < 4:
        raise ValueError("refinement grid must be at least 4x finer than the node grid")
    steps = np.diff(s_fine)
    h = steps.mean()
    if np.any(np.abs(steps - h) > 1e-9 * max(1.0, abs(h))):
        raise ValueError("refinement grid is not uniform")
    if (len(s_fine) - 1) % stride:
        raise ValueError("refinement grid does not end on a node")
    idx = np.arange(0, len(s_fine), stride)
    n = len(s_fine)
    dq = np.empty((len(idx), q_fine.shape[1]))
    ddq = np.empty_like(dq)
    for k, j in enumerate(idx):
        if 0 < j < n - 1:
            dq[k] = (q_fine[j + 1] - q_fine[j - 1]) / (2 * h)
            ddq[k] = (q_fine[j + 1] - 2 * q_fine[j] + q_fine[j - 1]) / h ** 2
        elif j == 0:
            q0, q1, q2, q3 = q_fine[0], q_fine[1], q_fine[2], q_fine[3]
            dq[k] = (-3 * q0 + 4 * q1 - q2) / (2 * h)
            ddq[k] = (2 * q0 - 5 * q1 + 4 * q2 - q3) / h ** 2
        else:
            q0, q1, q2, q3 = q_fine[-1], q_fine[-2], q_fine[-3], q_fine[-4]
            dq[k] = (3 * q0 - 4 * q1 + q2) / (2 * h)
            ddq[k] = (2 * q0 - 5 * q1 + 4 * q2 - q3) / h ** 2
    return s_fine[idx], q_fine[idx], dq, ddq


def sweep_inverse_kinematics(models: Sequence, path: ObjectPathSpec, obj: RigidObjectModel,
                             grid: PathGrid, hints: Sequence, refine: int = 10,
                             jump_threshold: float = 0.3) -> SampledJointPath:
    """Solve inverse kinematics along the path and differentiate numerically.

    Every robot is swept on a grid ``refine`` times finer than ``grid`` (step
    ``ds / refine``), each solve seeded with the previous sample so the branch
    stays continuous. A step larger than ``jump_threshold`` in any joint is
    treated as a branch ambiguity and rejected.
    """
    if len(hints) != len(models):
        raise ConfigError("one inverse-kinematics hint is needed per robot")
    s_fine = np.linspace(0.0, 1.0, grid.K * refine + 1)
    qs, dqs, ddqs, residuals = [], [], [], []
    s_nodes = None
    for i, model in enumerate(models):
        q_prev = None if hints[i] is None else np.asarray(hints[i], dtype=float)
        samples = np.empty((len(s_fine), model.dof))
        for j, s in enumerate(s_fine):
            target = coupled_pose(path, obj, i, s)
            # linear extrapolation of the last two samples as the Newton seed
            guess = q_prev if j < 2 else 2.0 * q_prev - samples[j - 2]
            try:
                q = model.inverse_kin(target, guess)
            except KinematicsError as exc:
                raise KinematicsError(f"robot {i} ({model.name}) at s={s:.6g}: {exc}") from None
            if j > 0 and np.max(np.abs(q - q_prev)) > jump_threshold:
                raise KinematicsError(
                    f"robot {i} ({model.name}) at s={s:.6g}: joint jump "
                    f"{np.max(np.abs(q - q_prev)):.3g} exceeds {jump_threshold}; ambiguous branch")
            samples[j] = q
            q_prev = q
        s_nodes, qn, dq, ddq = differentiate_joint_path(s_fine, samples, refine)
        res = []
        for k, s in enumerate(s_nodes):
            pose = model.forward_kin(qn[k])
            target = coupled_pose(path, obj, i, s)
            res.append(max(np.linalg.norm(pose.position - target.position),
                           np.linalg.norm(pose.rotation - target.rotation)))
        qs.append(qn)
        dqs.append(dq)
        ddqs.append(ddq)
        residuals.append(np.asarray(res))
    return SampledJointPath(s_nodes, qs, dqs, ddqs, residuals, grid.ds / refine)
