"""Reference answers and independent re-checks of solved trajectories.

Nothing here calls the conic solver. The oracles are closed forms or a grid
search, and the audit re-evaluates every constraint family from the robot and
object models with code paths separate from the program assembly: joint
torques come from recursive Newton-Euler instead of ``M q' / Christoffel``,
object wrenches from finite differences of the path rotation instead of the
Euler-rate map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigError, InfeasibleError
from .grasp import ContactModel, cone_membership, grasp_block
from .paths import ObjectPathSpec, contact_vector
from .rigid import RigidObjectModel, vee
from .transcription import (PathDynamicsCoefficients, TrajectorySolution, TranscribedProgram,
                            traversal_time)


@dataclass
class OracleResult:
    """One comparison against a reference, with the tolerance it was judged by."""

    name: str
    reference: float
    value: float
    error: float
    tol: float
    passed: bool
    family: str = ""
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return (f"{verdict}  {self.name}: value {self.value:.6g} reference {self.reference:.6g} "
                f"error {self.error:.3g} (tol {self.tol:g}){extra}")


def compare(name: str, reference: float, value: float, tol: float, relative: bool = True,
            family: str = "", detail: str = "") -> OracleResult:
    ref, val = float(reference), float(value)
    err = abs(val - ref)
    if relative:
        err /= max(abs(ref), 1e-300)
    return OracleResult(name, ref, val, err, tol, bool(err <= tol), family, detail)


# --- closed-form point mass -----------------------------------------------------------

def bang_bang_pointmass_oracle(L: float, total_mass: float, total_force: float) -> float:
    """Rest-to-rest minimum time of a point mass over distance ``L``: ``2 sqrt(L m / F)``."""
    for label, v in (("L", L), ("total_mass", total_mass), ("total_force", total_force)):
        if not v > 0:
            raise ConfigError(f"{label} must be positive, got {v}")
    if np.isinf(total_force):
        return 0.0
    return 2.0 * np.sqrt(L * total_mass / total_force)


def bang_bang_time_map(s, L: float, total_mass: float, total_force: float) -> np.ndarray:
    """Arrival time at path fraction ``s``: full thrust to the midpoint, full braking after."""
    T = bang_bang_pointmass_oracle(L, total_mass, total_force)
    acc = total_force / total_mass
    x = np.asarray(s, dtype=float) * L
    first = np.sqrt(2.0 * x / acc)
    second = T - np.sqrt(2.0 * np.maximum(L - x, 0.0) / acc)
    return np.where(x <= 0.5 * L, first, second)


# --- dynamic programming over (s, b) ----------------------------------------------------

@dataclass
class SingleDofCoefficients:
    """Scalar path dynamics ``tau = m a + c b + g`` on grid ``s``."""

    s: np.ndarray
    m: np.ndarray
    c: np.ndarray
    g: np.ndarray
    lower: float
    upper: float
    bbar: np.ndarray


def single_dof_reduction(coefs: PathDynamicsCoefficients) -> SingleDofCoefficients:
    """Collapse one single-joint robot holding the object into scalar coefficients.

    With one robot the object wrench fixes the contact wrench, ``h = G^{-1} h_O``,
    so the object terms fold into the joint through ``J^T G^{-1}``.
    """
    if coefs.N != 1 or coefs.m[0].shape[1] != 1:
        raise ConfigError("the scalar reduction needs exactly one robot with one joint")
    K1 = coefs.K + 1
    m, c, g = np.empty(K1), np.empty(K1), np.empty(K1)
    for k in range(K1):
        P = coefs.J[0][k].T @ np.linalg.inv(coefs.G[0][k])
        m[k] = coefs.m[0][k, 0] + (P @ coefs.mO[k])[0]
        c[k] = coefs.c[0][k, 0] + (P @ coefs.cO[k])[0]
        g[k] = coefs.g[0][k, 0] + (P @ coefs.gO)[0]
    return SingleDofCoefficients(coefs.s.copy(), m, c, g, float(coefs.torque_lower[0][0]),
                                 float(coefs.torque_upper[0][0]), coefs.bbar.copy())


def pointmass_coefficients(L: float, total_mass: float, total_force: float, K: int,
                           speed_cap: float = np.inf) -> SingleDofCoefficients:
    """Scalar coefficients of a mass pushed a distance ``L`` by a bounded force.

    With ``x = L s`` the force is ``total_mass * L * a``; ``speed_cap`` bounds
    ``sdot`` (not ``x'``).
    """
    if not (L > 0 and total_mass > 0 and total_force > 0):
        raise ConfigError("length, mass and force must be positive")
    s = np.linspace(0.0, 1.0, int(K) + 1)
    z = np.zeros_like(s)
    return SingleDofCoefficients(s, np.full_like(s, total_mass * L), z, z.copy(),
                                 -float(total_force), float(total_force),
                                 np.full_like(s, speed_cap ** 2))


@dataclass
class DPResult:
    T: float
    b: np.ndarray
    bounds: np.ndarray  # (K + 1) x 2 backward-feasible interval of b per node


def _half_line(alpha, beta):
    """Solution interval of ``alpha * b <= beta``."""
    if abs(alpha) < 1e-14:
        return (-np.inf, np.inf) if beta >= -1e-12 else (np.inf, -np.inf)
    return (-np.inf, beta / alpha) if alpha > 0 else (beta / alpha, np.inf)


def _intersect(*intervals):
    return max(iv[0] for iv in intervals), min(iv[1] for iv in intervals)


def _interp_value(x, levels, V):
    """Piecewise-linear ``V`` at ``x``; infinite when any contributing level is."""
    if levels.size == 1:
        return np.where(np.abs(x - levels[0]) <= 1e-12 * max(1.0, levels[0]), V[0], np.inf)
    x = np.clip(x, levels[0], levels[-1])
    j = np.clip(np.searchsorted(levels, x, side="right") - 1, 0, len(levels) - 2)
    w = (x - levels[j]) / (levels[j + 1] - levels[j])
    v0, v1 = V[j], V[j + 1]
    bad = (np.isinf(v0) & (w < 1)) | (np.isinf(v1) & (w > 0))
    with np.errstate(invalid="ignore"):
        out = (1 - w) * np.where(np.isinf(v0), 0.0, v0) + w * np.where(np.isinf(v1), 0.0, v1)
    return np.where(bad, np.inf, out)


def dp_velocity_profile_oracle(sd: SingleDofCoefficients, n_levels: int = 100,
                               b_max: Optional[float] = None, b0: float = 0.0,
                               bT: float = 0.0) -> DPResult:
    """Minimum traversal time by dynamic programming over ``(s, b = sdot^2)``.

    First a backward sweep finds, node by node, the interval ``[L_k, U_k]`` of
    ``b`` from which the end state is still reachable; each step is a handful
    of linear inequalities in ``b`` because torque is affine in ``(a, b)``.
    Node ``k`` then carries ``n_levels`` values spread over its interval, and
    backward value iteration moves from each level with any acceleration the
    torque bounds of node ``k`` admit, interpolating the value at the landing
    point ``b + 2 ds a``. Candidate landings are the next node's levels inside
    the reachable range plus the two ends of that range.

    A forward pass rebuilds the profile from ``b0``, re-solving each step
    against the interpolated values, so the returned ``b`` satisfies every
    constraint exactly. ``T`` is that profile's traversal time, an upper bound
    on the optimum of the same transcription that tightens as ``n_levels`` grows.
    ``b_max`` caps ``b`` where no velocity bound does.
    """
    s = np.asarray(sd.s, dtype=float)
    K = len(s) - 1
    if K < 1:
        raise ConfigError("the grid needs at least one interval")
    if n_levels < 2:
        raise ConfigError("at least two levels per node are needed")
    ds = np.diff(s)
    cap = np.minimum(np.asarray(sd.bbar, dtype=float), np.inf if b_max is None else b_max)
    lo_t, up_t = sd.lower, sd.upper

    def torque_interval(coef, const):
        """``b`` with ``lower <= coef * b + const <= upper``."""
        return _intersect(_half_line(coef, up_t - const), _half_line(-coef, const - lo_t))

    # backward-feasible intervals
    L, U = np.empty(K + 1), np.empty(K + 1)
    L[K] = U[K] = bT
    w = 1.0 / (2 * ds[K - 1])
    L[K - 1], U[K - 1] = _intersect(
        (0.0, cap[K - 1]),
        torque_interval(sd.c[K - 1] - sd.m[K - 1] * w, sd.m[K - 1] * w * bT + sd.g[K - 1]),
        torque_interval(-sd.m[K] * w, sd.m[K] * w * bT + sd.c[K] * bT + sd.g[K]))
    if bT > cap[K] * (1 + 1e-12):
        L[K - 1], U[K - 1] = np.inf, -np.inf
    for k in range(K - 2, -1, -1):
        w = 1.0 / (2 * ds[k])
        m, c, g = sd.m[k], sd.c[k], sd.g[k]
        if abs(m) < 1e-14:
            # acceleration is free: any landing in [L, U] works
            L[k], U[k] = _intersect((0.0, cap[k]), torque_interval(c, g))
            if L[k + 1] > U[k + 1]:
                L[k], U[k] = np.inf, -np.inf
        else:
            ell, ups = (lo_t, up_t) if m > 0 else (up_t, lo_t)
            # a_min(b) <= (U' - b) w  and  (L' - b) w <= a_max(b)
            L[k], U[k] = _intersect(
                (0.0, cap[k]),
                _half_line(w - c / m, U[k + 1] * w - (ell - g) / m),
                _half_line(c / m - w, (ups - g) / m - L[k + 1] * w))
        if L[k] > U[k] + 1e-12:
            raise InfeasibleError("no admissible profile reaches the final velocity from node "
                                  f"{k}", node=k, s=float(s[k]))
    if not np.all(np.isfinite(U)):
        raise ConfigError("b is unbounded at some node; pass b_max")
    if not L[0] - 1e-12 <= b0 <= U[0] + 1e-12:
        raise InfeasibleError(f"initial b={b0:g} lies outside the admissible [{L[0]:g}, {U[0]:g}]",
                              node=0, s=0.0)
    grids = [np.unique(np.concatenate([np.linspace(max(L[k], 0.0), U[k], n_levels),
                                        [b0] if k == 0 else []])) for k in range(K)]
    grids.append(np.array([bT]))

    def accel_range(k, b):
        rest = sd.c[k] * b + sd.g[k]
        if abs(sd.m[k]) < 1e-14:
            return np.full_like(b, -np.inf), np.full_like(b, np.inf)
        a1, a2 = (lo_t - rest) / sd.m[k], (up_t - rest) / sd.m[k]
        return np.minimum(a1, a2), np.maximum(a1, a2)

    def last_step(b):
        """Time of the final move onto ``bT`` (``inf`` when inadmissible)."""
        a = (bT - b) / (2 * ds[K - 1])
        ok = np.ones_like(b, dtype=bool)
        for k, bk in ((K - 1, b), (K, np.full_like(b, bT))):
            tau = sd.m[k] * a + sd.c[k] * bk + sd.g[k]
            ok &= (tau >= lo_t - 1e-9) & (tau <= up_t + 1e-9)
        with np.errstate(divide="ignore"):
            dt = 2 * ds[K - 1] / (np.sqrt(b) + np.sqrt(bT))
        return np.where(ok, dt, np.inf)

    def step_cost(k, b, V_next):
        """Best ``(cost, landing)`` from each ``b`` at node ``k`` given values at ``k + 1``."""
        nxt = grids[k + 1]
        amin, amax = accel_range(k, b)
        lo = np.clip(b + 2 * ds[k] * amin, nxt[0], nxt[-1])
        hi = np.clip(b + 2 * ds[k] * amax, nxt[0], nxt[-1])
        cand = np.concatenate([np.broadcast_to(nxt, (b.size, nxt.size)),
                               lo[:, None], hi[:, None]], axis=1)
        reach_lo = b + 2 * ds[k] * amin
        reach_hi = b + 2 * ds[k] * amax
        tol = 1e-12 * max(1.0, nxt[-1])
        inside = (cand >= reach_lo[:, None] - tol) & (cand <= reach_hi[:, None] + tol)
        with np.errstate(divide="ignore"):
            dt = 2 * ds[k] / (np.sqrt(b)[:, None] + np.sqrt(cand))
        total = np.where(inside, dt + _interp_value(cand, nxt, V_next), np.inf)
        pick = np.argmin(total, axis=1)
        rows = np.arange(b.size)
        return total[rows, pick], cand[rows, pick]

    values = [None] * K
    values[K - 1] = last_step(grids[K - 1])
    for k in range(K - 2, -1, -1):
        values[k] = step_cost(k, grids[k], values[k + 1])[0]
    b = np.empty(K + 1)
    b[0], b[K] = b0, bT
    for k in range(K - 1):
        cost, land = step_cost(k, np.array([b[k]]), values[k + 1])
        if not np.isfinite(cost[0]):
            raise InfeasibleError("no admissible profile connects the boundary velocities",
                                  node=k, s=float(s[k]))
        b[k + 1] = land[0]
    if not np.isfinite(last_step(np.array([b[K - 1]]))[0]):
        raise InfeasibleError("no admissible profile reaches the final velocity",
                              node=K - 1, s=float(s[K - 1]))
    return DPResult(float(traversal_time(s, b)[-1]), b, np.column_stack([L, U]))


# --- audit --------------------------------------------------------------------------

def _rotation_rates(path: ObjectPathSpec, s: float, h: float = 1e-3):
    """Angular velocity and its path derivative per unit path speed, world frame."""
    def omega(u):
        dR = (-path.rotation(u + 2 * h) + 8 * path.rotation(u + h) - 8 * path.rotation(u - h)
              + path.rotation(u - 2 * h)) / (12 * h)
        return vee(dR @ path.rotation(u).T)

    w = omega(s)
    dw = (-omega(s + 2 * h) + 8 * omega(s + h) - 8 * omega(s - h) + omega(s - 2 * h)) / (12 * h)
    return w, dw


def object_wrench_reference(path: ObjectPathSpec, obj: RigidObjectModel, s, a, b) -> np.ndarray:
    """Wrench the robots must apply at the centre of mass, from Newton-Euler at each node."""
    out = np.empty((len(s), 6))
    for k, (sk, ak, bk) in enumerate(zip(s, a, b)):
        acc = path.derivative(sk, 1)[:3] * ak + path.derivative(sk, 2)[:3] * bk
        ws, dws = _rotation_rates(path, sk)
        sdot = np.sqrt(max(bk, 0.0))
        w = ws * sdot
        alpha = ws * ak + dws * bk
        I = obj.inertia_world(path.rotation(sk))
        out[k, :3] = obj.mass * (acc - obj.gravity)
        out[k, 3:] = I @ alpha + np.cross(w, I @ w)
    return out


def _scaled(residual, scale):
    return float(np.max(np.abs(residual) / np.maximum(1.0, np.abs(scale))))


def _worst(name, family, errors, tol, s, detail=""):
    errors = np.asarray(errors, dtype=float)
    k = int(np.argmax(errors)) if errors.size else 0
    worst = float(errors[k]) if errors.size else 0.0
    where = f"worst at s={s[k]:.4g}" if errors.size else ""
    text = "; ".join(t for t in (where, detail) if t)
    return OracleResult(name, 0.0, worst, worst, tol, bool(worst <= tol), family, text)


def constraint_audit(sol: TrajectorySolution, tp: TranscribedProgram, models: Sequence,
                     obj: RigidObjectModel, path: ObjectPathSpec,
                     tol: float = 1e-6) -> List[OracleResult]:
    """Re-check every constraint family of ``tp`` on ``sol``.

    Equality residuals are reported relative to ``max(1, |reference|)``;
    inequality slacks are absolute violations. Cone checks use the contact
    model's own membership test, never the solver's slack variables.
    """
    coefs = tp.coefs
    s = sol.s
    K = len(s) - 1
    ds = np.diff(s)
    out: List[OracleResult] = []

    # joint torques by recursive Newton-Euler plus the contact wrench
    errs = np.zeros(K + 1)
    for i, model in enumerate(models):
        for k in range(K + 1):
            q = coefs.q[i][k]
            ref = (model.inverse_dynamics(q, sol.qdot[i][k], sol.qddot[i][k])
                   + model.jacobian(q).T @ sol.h[i][k])
            errs[k] = max(errs[k], _scaled(sol.tau[i][k] - ref, ref))
    out.append(_worst("joint torques vs recursive Newton-Euler", "manipulator-dynamics", errs, tol, s))

    hO_ref = object_wrench_reference(path, obj, s, sol.a_node, sol.b)
    errs = [_scaled(sol.hO[k] - hO_ref[k], hO_ref[k]) for k in range(K + 1)]
    out.append(_worst("object wrench vs Newton-Euler", "object-dynamics", errs, tol, s))

    Gs = [[grasp_block(contact_vector(path, obj, i, sk)) for sk in s] for i in range(len(models))]
    if "wrench-sum" in tp.families:
        net = [sum(Gs[i][k] @ (sol.hM[i][k] if sol.hM is not None else sol.h[i][k])
                   for i in range(len(models))) for k in range(K + 1)]
        errs = [_scaled(net[k] - sol.hO[k], sol.hO[k]) for k in range(K + 1)]
        out.append(_worst("net contact wrench equals object wrench", "wrench-sum", errs, tol, s))
    if "distribution" in tp.families:
        errs = [max(_scaled(sol.h[i][k] - tp.distribution[k][i] @ sol.hO[k], sol.h[i][k])
                    for i in range(len(models))) for k in range(K + 1)]
        out.append(_worst("contact wrenches follow the fixed distribution", "distribution", errs, tol, s))
    if "nullspace" in tp.families:
        errs = [float(np.linalg.norm(sum(Gs[i][k] @ sol.hI[i][k] for i in range(len(models)))))
                for k in range(K + 1)]
        out.append(_worst("internal wrenches produce no net wrench", "nullspace", errs, tol, s))
    if sol.fM is not None:
        out.extend(_cone_audit(sol, tp.contacts, tol, s))

    b = sol.b
    errs = np.abs(b[1:] - b[:-1] - 2.0 * ds * sol.a)
    out.append(_worst("b[k+1] - b[k] = 2 ds a[k]", "b-difference", errs, tol, s[:-1]))
    b0, bT = (v ** 2 for v in tp.boundary)
    out.append(OracleResult("boundary path velocities", 0.0, float(max(abs(b[0] - b0), abs(b[-1] - bT))),
                            float(max(abs(b[0] - b0), abs(b[-1] - bT))), tol,
                            bool(max(abs(b[0] - b0), abs(b[-1] - bT)) <= tol), "boundary"))
    T = float(traversal_time(s, b)[-1])
    out.append(compare("solver objective equals traversal time of b", T, sol.objective, tol,
                       family="epigraph"))

    viol = np.zeros(K + 1)
    for i in range(len(models)):
        lo, hi = coefs.torque_lower[i], coefs.torque_upper[i]
        over = np.maximum(sol.tau[i] - hi, lo - sol.tau[i]) / np.maximum(1.0, np.maximum(abs(lo), abs(hi)))
        viol = np.maximum(viol, np.max(np.where(np.isfinite(over), over, 0.0), axis=1))
    out.append(_worst("torques within bounds", "torque-bounds", np.maximum(viol, 0.0), tol, s))

    viol = np.maximum(-b, 0.0)
    for i, model in enumerate(models):
        v = np.asarray(model.velocity_bound, dtype=float)
        speed = np.abs(coefs.dq[i]) * np.sqrt(b)[:, None]
        capped = np.isfinite(v)
        excess = (speed[:, capped] - v[capped]) / np.maximum(1.0, v[capped])
        if excess.size:
            viol = np.maximum(viol, excess.max(axis=1))
    out.append(_worst("joint speeds within bounds", "velocity-bounds", np.maximum(viol, 0.0), tol, s))
    return out


def _cone_audit(sol, contacts: Sequence[ContactModel], tol, s):
    out = []
    cone_err, inner_err, normal_min = [], [], []
    for k in range(len(s)):
        ce = ie = 0.0
        nm = np.inf
        for i, c in enumerate(contacts):
            total = sol.fM[i][k] + sol.fI[i][k]
            chk = cone_membership(total, c)
            ce = max(ce, max(chk.residuals.values()))
            chk = cone_membership(sol.fI[i][k], c, interior=True)
            ie = max(ie, max(chk.residuals.values()))
            nm = min(nm, total[c.normal_index])
        cone_err.append(max(ce, 0.0))
        inner_err.append(max(ie, 0.0))
        normal_min.append(nm)
    out.append(_worst("total contact forces inside the friction cone", "friction-cone", cone_err, tol, s))
    out.append(_worst("internal forces inside the margined cone", "interior-cone", inner_err, tol, s))
    worst = float(np.min(normal_min))
    out.append(OracleResult("normal contact forces strictly positive", 0.0, worst, max(-worst, 0.0), 0.0,
                            bool(worst > 0.0), "friction-cone",
                            f"smallest normal force {worst:.6g} N"))
    return out


def audit_coverage(tp: TranscribedProgram, results: Sequence[OracleResult]) -> dict:
    """Number of audit checks per constraint family of ``tp`` (zero marks a gap)."""
    return {fam: sum(r.family == fam for r in results) for fam in tp.families}


def audit_passed(results: Sequence[OracleResult]) -> bool:
    return all(r.passed for r in results)


def audit_rows(results: Sequence[OracleResult]):
    """Rows for the audit CSV."""
    yield ["check", "family", "value", "reference", "error", "tol", "passed", "detail"]
    for r in results:
        yield [r.name, r.family, f"{r.value:.10g}", f"{r.reference:.10g}", f"{r.error:.3g}",
               f"{r.tol:g}", int(r.passed), r.detail]
