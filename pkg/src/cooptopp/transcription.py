"""Path-space dynamics coefficients and the convex programs built on them.

With ``a = s''`` and ``b = s'^2`` every torque and wrench along the path is
affine in ``(a, b)``. The grid carries ``b`` at the nodes and a piecewise
constant ``a`` on the intervals, linked by ``b[k+1] - b[k] = 2 ds a[k]``.
Node ``k`` evaluates its dynamics with the acceleration of the interval that
starts there (the last node reuses the final interval). The traversal time

    T = sum_k 2 ds / (sqrt(b[k]) + sqrt(b[k+1]))

is minimized through two families of 3-D Lorentz cones:

* per node, ``(b + 1, 2 c, b - 1)`` so that ``c <= sqrt(b)``;
* per interval, ``(u + d, 2, u - d)`` with ``u = c[k] + c[k+1]`` so that
  ``d >= 1 / u``; the objective is ``sum 2 ds d``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .conic import ConicProgram, ProgramBuilder, SolveReport, SolverSettings, solve
from .errors import ConfigError, GraspError, InfeasibleError, SolverError
from .grasp import ContactModel, grasp_block, grasp_closure
from .paths import (ObjectPathSpec, PathGrid, SampledJointPath, contact_vector,
                    euler_rate_matrix, euler_rate_transform)
from .rigid import RigidObjectModel, object_dynamics_terms

VELOCITY_EPS = 1e-12


# --- coefficients ---------------------------------------------------------------------

@dataclass
class PathDynamicsCoefficients:
    """Per-node coefficients of the path-space dynamics.

    Robot ``i``: ``tau = m[i] a + c[i] b + g[i] + J[i]^T h_i``.
    Object: ``h_O = mO a + cO b + gO`` and ``h_O = sum_i G[i] h_i``.
    """

    s: np.ndarray
    m: list
    c: list
    g: list
    J: list
    q: list
    dq: list
    ddq: list
    mO: np.ndarray
    cO: np.ndarray
    gO: np.ndarray
    G: list
    p_iO: np.ndarray
    R_O: np.ndarray
    bbar: np.ndarray
    torque_lower: list
    torque_upper: list
    velocity_bound: list
    names: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.s) - 1

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def N(self) -> int:
        return len(self.m)

    def check_finite(self):
        for label, arrs in (("m", self.m), ("c", self.c), ("g", self.g), ("J", self.J),
                            ("G", self.G)):
            for i, arr in enumerate(arrs):
                if not np.all(np.isfinite(arr)):
                    raise InfeasibleError(f"non-finite coefficient {label}[{i}]")
        for label, arr in (("mO", self.mO), ("cO", self.cO)):
            if not np.all(np.isfinite(arr)):
                raise InfeasibleError(f"non-finite object coefficient {label}")


def velocity_bound_translation(dq_nodes, velocity_bounds) -> np.ndarray:
    """``bbar[k] = min_j (v_j / |q'_j(s_k)|)^2`` over all robots; joints at rest are skipped."""
    K1 = len(dq_nodes[0])
    bbar = np.full(K1, np.inf)
    for dq, v in zip(dq_nodes, velocity_bounds):
        v = np.asarray(v, dtype=float)
        absdq = np.abs(dq)
        with np.errstate(divide="ignore"):
            ratio = np.where(absdq > VELOCITY_EPS, (v[None, :] / np.maximum(absdq, VELOCITY_EPS)) ** 2,
                             np.inf)
        bbar = np.minimum(bbar, ratio.min(axis=1))
    return bbar


def object_path_terms(path: ObjectPathSpec, obj: RigidObjectModel, s: float,
                      strict_euler: bool = False, fd_step: float = 1e-6):
    """``(mO, cO, R_O)`` at one path coordinate.

    ``T_O = blockdiag(I, T(phi))`` maps ``x_O'`` to the twist per unit path
    speed; its path derivative is taken by central differences.
    """
    x1 = path.derivative(s, 1)
    x2 = path.derivative(s, 2)
    phi = path.euler(s)
    T = euler_rate_transform(phi, s=s) if strict_euler else euler_rate_matrix(phi)
    dT = (euler_rate_matrix(path.euler(s + fd_step)) - euler_rate_matrix(path.euler(s - fd_step))) \
        / (2.0 * fd_step)
    TO = np.eye(6)
    TO[3:, 3:] = T
    dTO = np.zeros((6, 6))
    dTO[3:, 3:] = dT
    R = path.rotation(s)
    omega = T @ x1[3:]
    MO, CO, gO = object_dynamics_terms(obj, R, omega)
    v = TO @ x1
    mO = MO @ v
    cO = MO @ (dTO @ x1) + MO @ (TO @ x2) + CO @ v
    return mO, cO, gO, R


def assemble_coefficients(models: Sequence, obj: RigidObjectModel, path: ObjectPathSpec,
                          grid: PathGrid, sampled: SampledJointPath,
                          strict_euler: bool = False) -> PathDynamicsCoefficients:
    """Evaluate every coefficient exactly at the grid nodes."""
    s = grid.s
    if len(sampled.s) != len(s) or np.max(np.abs(sampled.s - s)) > 1e-12:
        raise ConfigError("sampled joint path does not match the grid")
    K1 = len(s)
    N = len(models)
    if len(obj.grasp_offsets) != N:
        raise ConfigError(f"{N} robots but {len(obj.grasp_offsets)} grasp offsets")
    ms, cs, gs, Js = [], [], [], []
    for i, model in enumerate(models):
        n = model.dof
        m_i, c_i, g_i = np.empty((K1, n)), np.empty((K1, n)), np.empty((K1, n))
        J_i = np.empty((K1, 6, n))
        for k in range(K1):
            q, dq, ddq = sampled.q[i][k], sampled.dq[i][k], sampled.ddq[i][k]
            M = model.mass_matrix(q)
            m_i[k] = M @ dq
            c_i[k] = M @ ddq + model.coriolis(q, dq) @ dq
            g_i[k] = model.gravity_vec(q)
            J_i[k] = model.jacobian(q)
        ms.append(m_i)
        cs.append(c_i)
        gs.append(g_i)
        Js.append(J_i)
    mO, cO = np.empty((K1, 6)), np.empty((K1, 6))
    R_O = np.empty((K1, 3, 3))
    p = np.empty((K1, N, 3))
    gO = None
    for k, sk in enumerate(s):
        mO[k], cO[k], gO, R_O[k] = object_path_terms(path, obj, sk, strict_euler)
        for i in range(N):
            p[k, i] = contact_vector(path, obj, i, sk)
    G = [np.array([grasp_block(p[k, i]) for k in range(K1)]) for i in range(N)]
    bbar = velocity_bound_translation(sampled.dq, [mdl.velocity_bound for mdl in models])
    coefs = PathDynamicsCoefficients(
        s.copy(), ms, cs, gs, Js, [q.copy() for q in sampled.q], [d.copy() for d in sampled.dq],
        [d.copy() for d in sampled.ddq], mO, cO, gO, G, p, R_O, bbar,
        [mdl.torque_lower.copy() for mdl in models], [mdl.torque_upper.copy() for mdl in models],
        [mdl.velocity_bound.copy() for mdl in models], [mdl.name for mdl in models])
    coefs.check_finite()
    return coefs


def grasp_rank(coefs: PathDynamicsCoefficients) -> np.ndarray:
    """Smallest singular value of ``G(s_k)`` at every node."""
    out = np.empty(coefs.K + 1)
    for k in range(coefs.K + 1):
        Gk = np.hstack([G[k] for G in coefs.G])
        out[k] = np.linalg.svd(Gk, compute_uv=False)[-1]
    return out


# --- program assembly -----------------------------------------------------------------

MODES = ("rigid", "frictional", "fixed")


def parse_mode(mode: str):
    """``'rigid'``, ``'frictional'`` or ``'fixed:<rule>'`` -> ``(kind, rule)``."""
    kind, _, rule = mode.partition(":")
    if kind not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected rigid, frictional or fixed:<rule>")
    if kind == "fixed":
        rule = rule or "pinv"
        if rule not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution rule {rule!r}; known: {sorted(DISTRIBUTIONS)}")
    elif rule:
        raise ConfigError(f"mode {kind!r} takes no rule")
    return kind, rule


def pinv_distribution(G_blocks):
    """``h = G^+ h_O`` split into per-contact blocks."""
    W = np.linalg.pinv(np.hstack(G_blocks))
    return [W[6 * i:6 * i + 6] for i in range(len(G_blocks))]


def first_carries_distribution(G_blocks):
    """The first contact transmits the whole object wrench."""
    out = [np.linalg.inv(G_blocks[0])]
    out.extend(np.zeros((6, 6)) for _ in G_blocks[1:])
    return out


DISTRIBUTIONS = {"pinv": pinv_distribution, "first": first_carries_distribution}


@dataclass
class TranscribedProgram:
    program: ConicProgram
    mode: str
    coefs: PathDynamicsCoefficients
    layout: dict
    families: dict
    contacts: tuple = ()
    distribution: Optional[list] = None
    boundary: tuple = (0.0, 0.0)

    @property
    def K(self) -> int:
        return self.coefs.K


class _Rows:
    """Collects equality blocks and remembers which constraint family they belong to."""

    def __init__(self, builder: ProgramBuilder):
        self.B = builder
        self.r, self.c, self.v, self.rhs, self.names = [], [], [], [], []
        self.count = 0
        self.families = {}

    def block(self, family: str, label: str, cols, mats, rhs, drop_empty: bool = False):
        """Rows ``sum_j mats[j] @ x[cols[j]] = rhs``."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        nrows = rhs.size
        mats = [np.asarray(M, dtype=float).reshape(nrows, -1) for M in mats]
        cols = [np.atleast_1d(np.asarray(c)) for c in cols]
        full = np.hstack(mats)
        allcols = np.concatenate(cols)
        if drop_empty:
            keep = np.any(full != 0.0, axis=1)
            if not np.all(np.abs(rhs[~keep]) <= 1e-9 * max(1.0, np.max(np.abs(rhs)))):
                raise InfeasibleError(f"{family} {label}: a constraint reduces to 0 = nonzero")
            full, rhs = full[keep], rhs[keep]
            nrows = rhs.size
            if nrows == 0:
                return np.zeros(0, dtype=np.int64)
        rr, cc = np.nonzero(full)
        self.r.append(rr + self.count)
        self.c.append(allcols[cc])
        self.v.append(full[rr, cc])
        self.rhs.append(rhs)
        self.names.extend(f"{family}{label}[{j}]" for j in range(nrows))
        idx = np.arange(self.count, self.count + nrows)
        self.families.setdefault(family, []).append(idx)
        self.count += nrows
        return idx

    def flush(self):
        if self.count:
            offset = self.B.m
            self.B.equalities((np.concatenate(self.r), np.concatenate(self.c), np.concatenate(self.v)),
                              np.concatenate(self.rhs), self.names)
            return {k: np.concatenate(v) + offset for k, v in self.families.items()}
        return {}


def _node_accel(k: int, K: int) -> int:
    return min(k, K - 1) if K > 0 else 0


def _skeleton(B: ProgramBuilder, rows: _Rows, coefs, sdot0, sdotT):
    K, ds = coefs.K, coefs.ds
    if sdot0 < 0 or sdotT < 0:
        raise ConfigError("boundary path velocities must be nonnegative")
    b0, bT = sdot0 ** 2, sdotT ** 2
    bbar = coefs.bbar
    if b0 > bbar[0] * (1 + 1e-12):
        raise InfeasibleError(f"initial path velocity {sdot0} exceeds the velocity bound "
                              f"{np.sqrt(bbar[0]):.6g} at s=0", node=0, s=0.0)
    if bT > bbar[-1] * (1 + 1e-12):
        raise InfeasibleError(f"final path velocity {sdotT} exceeds the velocity bound "
                              f"{np.sqrt(bbar[-1]):.6g} at s=1", node=K, s=1.0)
    b = B.variables("b", K + 1, kind="nonneg", upper=bbar)
    B.set_bounds(b[0], b0, b0)
    B.set_bounds(b[K], bT, bT)
    a = B.variables("a", K)
    # b[k+1] - b[k] - 2 ds a[k] = 0
    kk = np.arange(K)
    r = np.repeat(kk, 3)
    c = np.column_stack([b[1:], b[:-1], a]).ravel()
    v = np.tile([1.0, -1.0, -2.0 * ds], K)
    idx = np.arange(K)
    rows.r.append(r + rows.count)
    rows.c.append(c)
    rows.v.append(v)
    rows.rhs.append(np.zeros(K))
    rows.names.extend(f"b-difference[{j}]" for j in range(K))
    rows.families.setdefault("b-difference", []).append(idx + rows.count)
    rows.count += K
    fixed = {0: b0, K: bT}
    beta = np.full(K + 1, -1)
    epi_node = np.full((K + 1, 3), -1)
    for k in range(K + 1):
        if fixed.get(k, None) == 0.0:
            continue
        blk = B.soc(f"sqrtb[{k}]", 3)
        rows.block("epigraph", f"[node {k}]", [blk[[0, 2]], [b[k]]],
                   [np.eye(2), [[-1.0], [-1.0]]], [1.0, -1.0])
        beta[k] = blk[1]
        epi_node[k] = blk
    epi_int = np.empty((K, 3), dtype=np.int64)
    for k in range(K):
        blk = B.soc(f"recip[{k}]", 3)
        links = [beta[j] for j in (k, k + 1) if beta[j] >= 0]
        if not links:
            raise InfeasibleError(f"interval {k} starts and ends at rest", node=k, s=float(coefs.s[k]))
        rows.block("epigraph", f"[interval {k}]", [[blk[1]]], [[[1.0]]], [2.0])
        rows.block("epigraph", f"[interval {k}]", [blk[[0, 2]], links],
                   [[[1.0, 1.0]], [[-1.0] * len(links)]], [0.0])
        B.add_cost(blk[0], ds)
        B.add_cost(blk[2], -ds)
        epi_int[k] = blk
    return {"b": b, "a": a, "sqrtb": epi_node, "recip": epi_int}


def _robot_rows(rows, coefs, i, k, a_k, b_k, tau, wrench_cols, wrench_map):
    """``tau - m a - c b - J^T wrench_map x = g`` at node ``k``."""
    n = coefs.m[i].shape[1]
    JT = coefs.J[i][k].T @ wrench_map
    rows.block("manipulator-dynamics", f"[{i},{k}]", [tau, [a_k], [b_k], wrench_cols],
               [np.eye(n), -coefs.m[i][k][:, None], -coefs.c[i][k][:, None], -JT],
               coefs.g[i][k])


def _object_rows(rows, coefs, k, a_k, b_k, hO):
    rows.block("object-dynamics", f"[{k}]", [hO, [a_k], [b_k]],
               [np.eye(6), -coefs.mO[k][:, None], -coefs.cO[k][:, None]], coefs.gO)


def _emit_node(kind, B, rows, coefs, k, a_k, b_k, lay, contacts=(), distribution=None):
    N = coefs.N
    hO = lay["hO"][k]
    _object_rows(rows, coefs, k, a_k, b_k, hO)
    if kind in ("rigid", "fixed"):
        for i in range(N):
            _robot_rows(rows, coefs, i, k, a_k, b_k, lay["tau"][i][k], lay["h"][i][k], np.eye(6))
        if kind == "rigid":
            rows.block("wrench-sum", f"[{k}]", [hO] + [lay["h"][i][k] for i in range(N)],
                       [np.eye(6)] + [-coefs.G[i][k] for i in range(N)], np.zeros(6))
        else:
            for i in range(N):
                rows.block("distribution", f"[{i},{k}]", [lay["h"][i][k], hO],
                           [np.eye(6), -distribution[k][i]], np.zeros(6))
        return
    # frictional
    R = coefs.R_O[k]
    bases = [c.world_basis(R) for c in contacts]
    for i in range(N):
        f_cols = np.concatenate([lay["fM"][i][k], lay["fI"][i][k]])
        _robot_rows(rows, coefs, i, k, a_k, b_k, lay["tau"][i][k], f_cols,
                    np.hstack([bases[i], bases[i]]))
    rows.block("wrench-sum", f"[{k}]", [hO] + [lay["fM"][i][k] for i in range(N)],
               [np.eye(6)] + [-coefs.G[i][k] @ bases[i] for i in range(N)], np.zeros(6),
               drop_empty=False)
    rows.block("nullspace", f"[{k}]", [lay["fI"][i][k] for i in range(N)],
               [coefs.G[i][k] @ bases[i] for i in range(N)], np.zeros(6), drop_empty=True)
    for i, contact in enumerate(contacts):
        _cone_rows(B, rows, k, i, contact, lay["fM"][i][k], lay["fI"][i][k], lay)


def _cone_rows(B, rows, k, i, contact: ContactModel, fM, fI, lay):
    """Lifted Lorentz blocks for ``fM + fI`` in the cone and ``fI`` in the margined interior."""
    n_idx = contact.normal_index
    tang = [j for j in range(min(contact.m, 3)) if j != n_idx]
    mu = contact.mu

    def summed(j):
        return np.array([fM[j], fI[j]])

    # friction cone of the total contact force
    blk = B.soc(f"cone[{i},{k}]", 1 + len(tang))
    rows.block("friction-cone", f"[{i},{k}]", [[blk[0]], summed(n_idx)], [[[1.0]], [[-mu, -mu]]], [0.0])
    for t, j in enumerate(tang):
        rows.block("friction-cone", f"[{i},{k}]", [[blk[1 + t]], summed(j)],
                   [[[1.0]], [[-1.0, -1.0]]], [0.0])
    lay["cone"][i].append(blk)
    blk = B.soc(f"interior[{i},{k}]", 1 + len(tang))
    rows.block("interior-cone", f"[{i},{k}]", [[blk[0]], [fI[n_idx]]], [[[1.0]], [[-mu]]],
               [-contact.delta1])
    for t, j in enumerate(tang):
        rows.block("interior-cone", f"[{i},{k}]", [[blk[1 + t]], [fI[j]]], [[[1.0]], [[-1.0]]], [0.0])
    lay["interior"][i].append(blk)
    if contact.torsion_index is not None:
        ti = contact.torsion_index
        g = contact.gamma
        blk = B.soc(f"torsion[{i},{k}]", 2)
        rows.block("friction-cone", f"[{i},{k}]", [[blk[0]], summed(n_idx)], [[[1.0]], [[-g, -g]]], [0.0])
        rows.block("friction-cone", f"[{i},{k}]", [[blk[1]], summed(ti)], [[[1.0]], [[-1.0, -1.0]]], [0.0])
        lay["torsion"][i].append(blk)
        blk = B.soc(f"torsion-interior[{i},{k}]", 2)
        rows.block("interior-cone", f"[{i},{k}]", [[blk[0]], [fI[n_idx]]], [[[1.0]], [[-g]]],
                   [-contact.delta2])
        rows.block("interior-cone", f"[{i},{k}]", [[blk[1]], [fI[ti]]], [[[1.0]], [[-1.0]]], [0.0])
        lay["torsion_interior"][i].append(blk)


def _node_variables(kind, B, coefs, K1, contacts):
    lay = {"hO": B.variables("hO", (K1, 6)), "tau": []}
    for i in range(coefs.N):
        lay["tau"].append(B.variables(f"tau{i + 1}", (K1, coefs.m[i].shape[1]),
                                      lower=coefs.torque_lower[i], upper=coefs.torque_upper[i]))
    if kind in ("rigid", "fixed"):
        lay["h"] = [B.variables(f"h{i + 1}", (K1, 6)) for i in range(coefs.N)]
    else:
        lay["fM"] = [B.variables(f"fM{i + 1}", (K1, c.m)) for i, c in enumerate(contacts)]
        lay["fI"] = [B.variables(f"fI{i + 1}", (K1, c.m)) for i, c in enumerate(contacts)]
        for key in ("cone", "interior", "torsion", "torsion_interior"):
            lay[key] = [[] for _ in contacts]
    return lay


def _check_contacts(coefs, contacts):
    if len(contacts) != coefs.N:
        raise ConfigError(f"{coefs.N} robots but {len(contacts)} contacts")
    for c in contacts:
        if c.kind == "rigid":
            raise ConfigError("frictional mode needs non-rigid contacts")
    if len(contacts) == 2:
        R0 = coefs.R_O[0]
        attach = [R0.T @ coefs.p_iO[0, i] for i in range(2)]
        if not grasp_closure(contacts, attach):
            raise GraspError("the grasp is not force-closure; the frictional program would be infeasible")


def _distribution(coefs, rule):
    builder = DISTRIBUTIONS[rule]
    return [builder([G[k] for G in coefs.G]) for k in range(coefs.K + 1)]


def _build(kind, coefs, sdot0, sdotT, contacts=(), rule=None, check_rank=True) -> TranscribedProgram:
    if check_rank:
        sig = grasp_rank(coefs)
        if np.min(sig) <= 1e-9:
            k = int(np.argmin(sig))
            raise GraspError(f"grasp matrix loses rank at s={coefs.s[k]:.6g}")
    if kind == "frictional":
        _check_contacts(coefs, contacts)
    distribution = _distribution(coefs, rule) if kind == "fixed" else None
    B = ProgramBuilder()
    rows = _Rows(B)
    lay = _skeleton(B, rows, coefs, sdot0, sdotT)
    K1 = coefs.K + 1
    lay.update(_node_variables(kind, B, coefs, K1, contacts))
    for k in range(K1):
        a_k = lay["a"][_node_accel(k, coefs.K)]
        _emit_node(kind, B, rows, coefs, k, a_k, lay["b"][k], lay, contacts, distribution)
    families = rows.flush()
    families["torque-bounds"] = np.concatenate([t.ravel() for t in lay["tau"]])
    families["velocity-bounds"] = lay["b"]
    families["boundary"] = lay["b"][[0, -1]]
    mode = kind if kind != "fixed" else f"fixed:{rule}"
    return TranscribedProgram(B.build(), mode, coefs, lay, families, tuple(contacts),
                              distribution, (sdot0, sdotT))


def build_rigid_program(coefs: PathDynamicsCoefficients, sdot0: float = 0.0,
                        sdotT: float = 0.0) -> TranscribedProgram:
    """Free wrench allocation among rigidly grasping robots."""
    return _build("rigid", coefs, sdot0, sdotT)


def build_frictional_program(coefs: PathDynamicsCoefficients, contacts: Sequence[ContactModel],
                             sdot0: float = 0.0, sdotT: float = 0.0) -> TranscribedProgram:
    """Frictional contacts with manipulation and margined internal contact forces."""
    return _build("frictional", coefs, sdot0, sdotT, contacts=tuple(contacts))


def build_fixed_distribution_program(coefs: PathDynamicsCoefficients, rule: str = "pinv",
                                     sdot0: float = 0.0, sdotT: float = 0.0) -> TranscribedProgram:
    """Rigid grasp with the contact wrenches tied to ``h_O`` by a fixed linear rule."""
    if rule not in DISTRIBUTIONS:
        raise ConfigError(f"unknown distribution rule {rule!r}; known: {sorted(DISTRIBUTIONS)}")
    return _build("fixed", coefs, sdot0, sdotT, rule=rule)


def build_program(mode: str, coefs, contacts=(), sdot0=0.0, sdotT=0.0) -> TranscribedProgram:
    kind, rule = parse_mode(mode)
    if kind == "rigid":
        return build_rigid_program(coefs, sdot0, sdotT)
    if kind == "frictional":
        return build_frictional_program(coefs, contacts, sdot0, sdotT)
    return build_fixed_distribution_program(coefs, rule, sdot0, sdotT)


def node_certificate(tp: TranscribedProgram, k: int,
                     settings: SolverSettings = SolverSettings()) -> SolveReport:
    """Feasibility of node ``k``'s constraints alone, with ``a`` free and ``b`` in its range.

    An infeasible node certifies that the whole program is infeasible.
    """
    coefs = tp.coefs
    kind, rule = parse_mode(tp.mode)
    B = ProgramBuilder()
    rows = _Rows(B)
    K = coefs.K
    lo, hi = 0.0, coefs.bbar[k]
    if k == 0:
        lo = hi = tp.boundary[0] ** 2
    elif k == K:
        lo = hi = tp.boundary[1] ** 2
    b_k = B.variable("b", kind="nonneg", lower=lo, upper=hi)
    a_k = B.variable("a")
    if np.isfinite(hi):
        B.add_cost(b_k, -1e-3)
    sub = _single_node_coefs(coefs, k)
    lay = _node_variables(kind, B, sub, 1, tp.contacts)
    dist = None if tp.distribution is None else [tp.distribution[k]]
    _emit_node(kind, B, rows, sub, 0, a_k, b_k, lay, tp.contacts, dist)
    rows.flush()
    return solve(B.build(), settings)


def _single_node_coefs(coefs, k):
    sl = slice(k, k + 1)
    return PathDynamicsCoefficients(
        coefs.s[sl], [m[sl] for m in coefs.m], [c[sl] for c in coefs.c], [g[sl] for g in coefs.g],
        [J[sl] for J in coefs.J], [q[sl] for q in coefs.q], [d[sl] for d in coefs.dq],
        [d[sl] for d in coefs.ddq], coefs.mO[sl], coefs.cO[sl], coefs.gO, [G[sl] for G in coefs.G],
        coefs.p_iO[sl], coefs.R_O[sl], coefs.bbar[sl], coefs.torque_lower, coefs.torque_upper,
        coefs.velocity_bound, coefs.names)


def first_infeasible_node(tp: TranscribedProgram, nodes=None,
                          settings: SolverSettings = SolverSettings()) -> Optional[int]:
    nodes = range(tp.K + 1) if nodes is None else nodes
    for k in nodes:
        if node_certificate(tp, k, settings).status == "infeasible":
            return int(k)
    return None


def check_boundary_nodes(tp: TranscribedProgram, settings: SolverSettings = SolverSettings()):
    """Raise :class:`InfeasibleError` if a node where the path velocity is prescribed is infeasible."""
    k = first_infeasible_node(tp, (0, tp.K), settings)
    if k is not None:
        raise InfeasibleError(f"node {k} (s={tp.coefs.s[k]:.6g}) admits no feasible torque with the "
                              f"prescribed path velocity", node=k, s=float(tp.coefs.s[k]))


def solve_program(tp: TranscribedProgram, settings: SolverSettings = SolverSettings(),
                  certify: bool = True) -> SolveReport:
    """Solve, and name the first infeasible node when the solver reports infeasibility."""
    if certify:
        check_boundary_nodes(tp, settings)
    report = solve(tp.program, settings)
    if report.status == "infeasible" and certify:
        k = first_infeasible_node(tp, settings=settings)
        where = f"; first infeasible node k={k} (s={tp.coefs.s[k]:.6g})" if k is not None else ""
        raise InfeasibleError(f"program infeasible{where}", node=k,
                              s=None if k is None else float(tp.coefs.s[k]))
    return report


# --- solutions ------------------------------------------------------------------------

@dataclass
class TrajectorySolution:
    s: np.ndarray
    b: np.ndarray
    a: np.ndarray
    a_node: np.ndarray
    t: np.ndarray
    T: float
    tau: list
    hO: np.ndarray
    h: list
    qdot: list
    qddot: list
    status: str
    objective: float
    mode: str
    fM: Optional[list] = None
    fI: Optional[list] = None
    hM: Optional[list] = None
    hI: Optional[list] = None
    report: Optional[SolveReport] = field(default=None, repr=False)

    @property
    def sdot(self) -> np.ndarray:
        return np.sqrt(self.b)

    def to_csv(self, path, active=None):
        """Write one row per node; ``active`` is an :class:`ActiveConstraintReport`."""
        header = ["s", "b", "a", "t"]
        cols = [self.s, self.b, self.a_node, self.t]
        for i, tau in enumerate(self.tau):
            for j in range(tau.shape[1]):
                header.append(f"tau{i + 1}_{j + 1}")
                cols.append(tau[:, j])
        for i, qd in enumerate(self.qdot):
            for j in range(qd.shape[1]):
                header.append(f"qd{i + 1}_{j + 1}")
                cols.append(qd[:, j])
        for i, h in enumerate(self.h):
            for r, lab in enumerate(("fx", "fy", "fz", "mx", "my", "mz")):
                header.append(f"h{i + 1}_{lab}")
                cols.append(h[:, r])
        for tag, fam in (("fM", self.fM), ("fI", self.fI)):
            if fam is None:
                continue
            for i, f in enumerate(fam):
                for j in range(f.shape[1]):
                    header.append(f"{tag}{i + 1}_{j + 1}")
                    cols.append(f[:, j])
        if active is not None:
            for i, flags in enumerate(active.torque_flags):
                header.append(f"active_tau{i + 1}")
                cols.append(flags.any(axis=1).astype(int))
            header.append("active_velocity")
            cols.append(active.velocity_flags.astype(int))
        data = np.column_stack(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in data:
                w.writerow([f"{v:.10g}" for v in row])


def traversal_time(s, b) -> np.ndarray:
    """Cumulative time ``t_k`` of the profile ``b`` on grid ``s``."""
    ds = np.diff(s)
    r = np.sqrt(np.maximum(b, 0.0))
    with np.errstate(divide="ignore"):
        dt = 2.0 * ds / (r[:-1] + r[1:])
    return np.concatenate([[0.0], np.cumsum(dt)])


def recover_trajectory(report: SolveReport, tp: TranscribedProgram) -> TrajectorySolution:
    if not report.near_optimal():
        detail = f": {report.message}" if report.message else f" after {report.iterations} iterations"
        raise SolverError(f"solver finished with status {report.status!r}{detail}",
                          report=report)
    x = report.x
    lay, coefs = tp.layout, tp.coefs
    K = coefs.K
    b = np.maximum(x[lay["b"]], 0.0)
    a = x[lay["a"]]
    a_node = a[[_node_accel(k, K) for k in range(K + 1)]]
    t = traversal_time(coefs.s, b)
    tau = [x[idx] for idx in lay["tau"]]
    hO = x[lay["hO"]]
    sq = np.sqrt(b)
    qdot = [dq * sq[:, None] for dq in coefs.dq]
    qddot = [dq * a_node[:, None] + ddq * b[:, None] for dq, ddq in zip(coefs.dq, coefs.ddq)]
    sol = TrajectorySolution(coefs.s.copy(), b, a, a_node, t, float(t[-1]), tau, hO, [], qdot, qddot,
                             report.status, report.objective, tp.mode, report=report)
    if "h" in lay:
        sol.h = [x[idx] for idx in lay["h"]]
    else:
        sol.fM = [x[idx] for idx in lay["fM"]]
        sol.fI = [x[idx] for idx in lay["fI"]]
        sol.hM, sol.hI = [], []
        for i, c in enumerate(tp.contacts):
            Wb = np.array([c.world_basis(R) for R in coefs.R_O])
            sol.hM.append(np.einsum("krm,km->kr", Wb, sol.fM[i]))
            sol.hI.append(np.einsum("krm,km->kr", Wb, sol.fI[i]))
        sol.h = [hm + hi for hm, hi in zip(sol.hM, sol.hI)]
    return sol


@dataclass
class ActiveConstraintReport:
    torque_flags: list
    velocity_flags: np.ndarray
    node_active: np.ndarray
    interior_fraction: float
    tol: float

    def summary(self) -> str:
        inner = self.node_active[1:-1]
        return (f"{int(inner.sum())}/{inner.size} interior nodes with an active torque or "
                f"velocity constraint ({100 * self.interior_fraction:.1f}%, tol {self.tol:g})")


def active_constraint_report(sol: TrajectorySolution, coefs: PathDynamicsCoefficients,
                             tol: float = 1e-3) -> ActiveConstraintReport:
    """Flag torques within ``tol`` of their range and ``b`` within ``tol`` of ``bbar``."""
    flags = []
    node = np.zeros(len(sol.s), dtype=bool)
    for tau, lo, hi in zip(sol.tau, coefs.torque_lower, coefs.torque_upper):
        span = hi - lo
        finite = np.isfinite(span)
        margin = np.minimum(tau - lo, hi - tau)
        f = np.zeros_like(tau, dtype=bool)
        f[:, finite] = margin[:, finite] <= tol * span[finite]
        flags.append(f)
        node |= f.any(axis=1)
    vel = np.isfinite(coefs.bbar) & (sol.b >= coefs.bbar * (1.0 - tol))
    node |= vel
    inner = node[1:-1]
    frac = float(inner.mean()) if inner.size else 1.0
    return ActiveConstraintReport(flags, vel, node, frac, tol)


def variable_count(mode: str, K: int, dofs: Sequence[int], contact_sizes: Sequence[int] = (),
                   torsion: Sequence[bool] = (), b0_zero: bool = True, bT_zero: bool = True) -> int:
    """Number of program variables for the layout built here."""
    kind, _ = parse_mode(mode)
    K1 = K + 1
    n = K1 + K + 3 * (K1 - int(b0_zero) - int(bT_zero)) + 3 * K
    n += K1 * (6 + sum(dofs))
    if kind in ("rigid", "fixed"):
        n += K1 * 6 * len(dofs)
    else:
        for m_c, tors in zip(contact_sizes, torsion):
            cone = 1 + (min(m_c, 3) - 1)
            n += K1 * (2 * m_c + 2 * cone + (4 if tors else 0))
    return n


def equality_count(mode: str, K: int, dofs: Sequence[int], contact_sizes: Sequence[int] = (),
                   torsion: Sequence[bool] = (), nullspace_rows: int = 6, b0_zero: bool = True,
                   bT_zero: bool = True) -> int:
    kind, _ = parse_mode(mode)
    K1 = K + 1
    rows = K + 2 * (K1 - int(b0_zero) - int(bT_zero)) + 2 * K
    rows += K1 * (sum(dofs) + 6)
    if kind == "rigid":
        rows += K1 * 6
    elif kind == "fixed":
        rows += K1 * 6 * len(dofs)
    else:
        rows += K1 * (6 + nullspace_rows)
        for m_c, tors in zip(contact_sizes, torsion):
            cone = min(m_c, 3)
            rows += K1 * (2 * cone + (4 if tors else 0))
    return rows
