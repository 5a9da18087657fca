"""Reference primal-dual interior-point method for :class:`ConicProgram`.

The program is brought into the form

    minimize c'x  s.t.  A x = b,  G x + s = h,  s in K

(K a product of an orthant and Lorentz cones) and solved through the
homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. Every Newton system is a sparse quasi-definite KKT
matrix factorized by SuperLU with a small static regularization that is
removed again by iterative refinement.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .cones import ConeProduct, NTScaling
from .program import ConicProgram

STATUSES = ("optimal", "infeasible", "unbounded", "max-iter", "numerical-failure")


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 200
    backend: str = "ipm"
    regularization: float = 1e-10
    refine_steps: int = 20
    step_fraction: float = 0.99
    verbose: bool = False


@dataclass
class SolveReport:
    status: str
    x: Optional[np.ndarray]
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    objective: float = np.nan
    iterations: int = 0
    time: float = 0.0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    gap: float = np.nan
    certificate_residual: float = np.nan
    backend: str = "ipm"
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def near_optimal(self, factor: float = 1e3, tol: float = 1e-8) -> bool:
        """Optimal, or stopped with every residual within ``factor * tol``."""
        if self.optimal:
            return True
        lim = factor * tol
        return (self.x is not None and self.status in ("max-iter", "numerical-failure")
                and self.primal_residual <= lim and self.dual_residual <= lim and self.gap <= lim)


# --- standard form --------------------------------------------------------------

@dataclass
class StandardForm:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    cones: ConeProduct
    keep: np.ndarray          # original indices of the reduced variables
    fixed: np.ndarray         # original indices of presolved fixed variables
    fixed_values: np.ndarray
    rows: np.ndarray          # original indices of the kept equality rows
    offset: float
    infeasible: str = ""


def standard_form(program: ConicProgram, tol: float = 1e-9) -> StandardForm:
    """Presolve (fixed variables, empty rows) and build ``G``, ``h`` and the cone."""
    n = program.n
    kind = np.empty(n, dtype=object)
    for cone in program.cones:
        for i in cone.indices:
            kind[i] = cone.kind
    lower, upper = program.lower, program.upper
    fixed_mask = (lower == upper) & (kind != "soc")
    problem = ""
    bad = fixed_mask & (kind == "nonneg") & (lower < 0)
    if np.any(bad):
        problem = f"nonnegative variable {int(np.flatnonzero(bad)[0])} fixed to a negative value"
    fixed = np.flatnonzero(fixed_mask)
    keep = np.flatnonzero(~fixed_mask)
    xf = lower[fixed]
    A = program.A.tocsc()
    b = program.b - A[:, fixed] @ xf
    offset = program.offset + float(program.c[fixed] @ xf)
    A = A[:, keep].tocsr()
    nnz_rows = np.diff(A.indptr) > 0
    empty = np.flatnonzero(~nnz_rows)
    if empty.size and np.max(np.abs(b[empty])) > tol * max(1.0, np.max(np.abs(program.b), initial=0)):
        problem = problem or f"equality row {int(empty[np.argmax(np.abs(b[empty]))])} reduces to 0 = nonzero"
    rows = np.flatnonzero(nnz_rows)
    A = A[rows]
    b = b[rows]
    pos = np.full(n, -1)
    pos[keep] = np.arange(keep.size)

    # orthant rows: nonnegativity and finite bounds
    g_rows, g_cols, g_vals, h = [], [], [], []

    def add(col, val, rhs):
        g_rows.append(len(h))
        g_cols.append(col)
        g_vals.append(val)
        h.append(rhs)

    for i in keep:
        lo, hi = lower[i], upper[i]
        if kind[i] == "nonneg":
            lo = max(lo, 0.0)
        if np.isfinite(lo):
            add(pos[i], -1.0, -lo)
        if np.isfinite(hi):
            add(pos[i], 1.0, hi)
    l = len(h)
    socs = sorted((c for c in program.cones if c.kind == "soc"), key=lambda c: len(c.indices))
    for cone in socs:
        for i in cone.indices:
            add(pos[i], -1.0, 0.0)
    G = sp.csr_matrix((g_vals, (g_rows, g_cols)), shape=(len(h), keep.size))
    cones = ConeProduct(l, [len(c.indices) for c in socs])
    return StandardForm(program.c[keep].astype(float), A, b, G, np.asarray(h, float), cones,
                        keep, fixed, xf, rows, offset, problem)


# --- KKT system -------------------------------------------------------------------

class KKTSystem:
    """Scaled Newton system ``[[0, A', Gs'], [A, 0, 0], [Gs, 0, -I]]`` with ``Gs = W^{-1} G``.

    Solving for ``W dz`` instead of ``dz`` keeps the last block the identity,
    so the conditioning no longer follows the spread of the scaling, which
    reaches twenty orders of magnitude near the optimum. ``W^{-1}`` is block
    diagonal, so ``Gs`` lives on a fixed pattern: the union of the rows of
    ``G`` inside each cone block.
    """

    def __init__(self, sf: StandardForm, delta: float, refine_steps: int):
        self.n, self.p, self.m = sf.A.shape[1], sf.A.shape[0], sf.G.shape[0]
        n, p, m = self.n, self.p, self.m
        self.cones = sf.cones
        self.refine_steps = refine_steps
        G = sf.G.tocsr()
        G.sort_indices()
        l = sf.cones.l
        # orthant rows are scaled entrywise
        Gl = G[:l].tocoo()
        g_rows, g_cols = [Gl.row], [Gl.col]
        self._orth = (Gl.row, Gl.data)
        self._groups = []
        for g in sf.cones.groups:
            q = g.dim
            unions = [np.unique(G.indices[G.indptr[g.start + q * j]:G.indptr[g.start + q * (j + 1)]])
                      for j in range(g.count)]
            width = max((u.size for u in unions), default=0)
            cols = np.zeros((g.count, width), dtype=np.int64)
            mask = np.zeros((g.count, width), dtype=bool)
            dense = np.zeros((g.count, q, width))
            for j, u in enumerate(unions):
                cols[j, :u.size] = u
                mask[j, :u.size] = True
                for i in range(q):
                    r = g.start + q * j + i
                    lo, hi = G.indptr[r], G.indptr[r + 1]
                    dense[j, i, np.searchsorted(u, G.indices[lo:hi])] = G.data[lo:hi]
            full = np.broadcast_to(mask[:, None, :], dense.shape)
            rows = (g.start + q * np.arange(g.count)[:, None, None]
                    + np.arange(q)[None, :, None]) * np.ones((1, 1, width), dtype=np.int64)
            g_rows.append(rows[full])
            g_cols.append(np.broadcast_to(cols[:, None, :], dense.shape)[full])
            self._groups.append((dense, full))
        gr, gc = np.concatenate(g_rows), np.concatenate(g_cols)
        self._gs_pattern = (gr, gc)
        A = sf.A.tocoo()
        off_y, off_z = n, n + p
        rows = [A.row + off_y, A.col, gr + off_z, gc, np.arange(n), np.arange(p) + off_y,
                np.arange(m) + off_z]
        cols = [A.col, A.row + off_y, gc, gr + off_z, np.arange(n), np.arange(p) + off_y,
                np.arange(m) + off_z]
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        dim = n + p + m
        # path programs couple only neighbouring nodes, so a bandwidth-reducing
        # ordering keeps the fill of the factors nearly linear in the grid size
        pattern = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(dim, dim))
        self._order = reverse_cuthill_mckee(pattern, symmetric_mode=True).astype(np.int64)
        inv = np.empty(dim, dtype=np.int64)
        inv[self._order] = np.arange(dim)
        prow, pcol = inv[rows], inv[cols]
        self._A = A
        self._reg = np.concatenate([np.full(n, delta), np.full(p, -delta), np.full(m, -1.0)])
        ids = sp.csc_matrix((np.arange(1, rows.size + 1, dtype=float), (prow, pcol)),
                            shape=(dim, dim))
        self._perm = ids.data.astype(np.int64) - 1
        self._matrix = ids
        self._AT = sf.A.T.tocsr()
        self._A_csr = sf.A.tocsr()
        self._G = G
        self._GT = G.T.tocsr()
        self._Gs = None
        self._W = None
        self._lu = None
        self.pivot = 0.01

    def factor(self, W: Optional[NTScaling]):
        """Factor for scaling ``W`` (``None`` means the identity)."""
        gr, gc = self._gs_pattern
        if W is None:
            vals = [self._orth[1]]
            vals += [dense[full] for dense, full in self._groups]
        else:
            vals = [self._orth[1] / W.d[self._orth[0]]]
            for (dense, full), Winv in zip(self._groups, W.inverse_blocks()):
                vals.append(np.einsum("bij,bjc->bic", Winv, dense)[full])
        gs = np.concatenate(vals) if vals else np.zeros(0)
        self._Gs = sp.csr_matrix((gs, (gr, gc)), shape=(self.m, self.n))
        self._W = W
        A = self._A
        data = np.concatenate([A.data, A.data, gs, gs, self._reg])
        self._matrix.data = data[self._perm]
        self._lu = spla.splu(self._matrix, permc_spec="NATURAL", diag_pivot_thresh=self.pivot)

    def _lu_solve(self, rhs):
        out = np.empty_like(rhs)
        out[self._order] = self._lu.solve(rhs[self._order])
        return out

    def _scaled_solve(self, rx, ry, rz):
        W = self._W
        rzs = rz if W is None else W.apply(rz, inverse=True)
        sol = self._lu_solve(np.concatenate([rx, ry, rzs]))
        n, p = self.n, self.p
        return sol[:n], sol[n:n + p], sol[n + p:]

    def _residual(self, rx, ry, rz, dx, dy, dz, zs):
        wz = zs if self._W is None else self._W.apply(zs)
        return (rx - self._AT @ dy - self._GT @ dz, ry - self._A_csr @ dx,
                rz - self._G @ dx + wz)

    def solve(self, rx, ry, rz):
        """Solve ``A'dy + G'dz = rx, A dx = ry, G dx - W^2 dz = rz``.

        Returns ``dx, dy, dz`` and the scaled ``W dz``. Refinement runs on the
        unscaled equations, since those are the residuals the iteration sees.
        """
        W = self._W
        unscale = (lambda v: v) if W is None else (lambda v: W.apply(v, inverse=True))
        dx, dy, zs = self._scaled_solve(rx, ry, rz)
        dz = unscale(zs)
        scale = max(1.0, _norm(rx), _norm(ry), _norm(rz))
        res = self._residual(rx, ry, rz, dx, dy, dz, zs)
        err = max(_norm(r) for r in res)
        for _ in range(self.refine_steps):
            if err <= 1e-14 * scale:
                break
            cx, cy, czs = self._scaled_solve(*res)
            nx, ny, nzs = dx + cx, dy + cy, zs + czs
            nz = unscale(nzs)
            new = self._residual(rx, ry, rz, nx, ny, nz, nzs)
            new_err = max(_norm(r) for r in new)
            if new_err < err:
                dx, dy, dz, zs = nx, ny, nz, nzs
            # stop once refinement no longer pays off
            if new_err >= 0.5 * err:
                break
            res, err = new, new_err
        return dx, dy, dz, zs


# --- solver -------------------------------------------------------------------------

def _norm(v):
    return float(np.linalg.norm(v, np.inf)) if v.size else 0.0


def solve_ipm(program: ConicProgram, settings: SolverSettings = SolverSettings()) -> SolveReport:
    t0 = time.perf_counter()
    sf = standard_form(program)
    if sf.infeasible:
        return SolveReport("infeasible", None, message=f"presolve: {sf.infeasible}",
                           time=time.perf_counter() - t0)
    report = _hsde(sf, settings)
    report.time = time.perf_counter() - t0
    if report.x is not None:
        x = np.empty(program.n)
        x[sf.keep] = report.x
        x[sf.fixed] = sf.fixed_values
        report.x = x
        if report.y is not None:
            y = np.zeros(program.m)
            y[sf.rows] = report.y
            report.y = y
        if report.status in ("optimal", "max-iter", "numerical-failure"):
            report.objective = program.objective(x)
            report.primal_residual = primal_residual(program, x)
    return report


def primal_residual(program: ConicProgram, x) -> float:
    """Largest equality, bound or cone violation of ``x`` (absolute)."""
    worst = _norm(program.A @ x - program.b)
    worst = max(worst, float(np.max(program.lower - x, initial=0.0)),
                float(np.max(x - program.upper, initial=0.0)))
    for cone in program.cones:
        v = x[list(cone.indices)]
        if cone.kind == "nonneg":
            worst = max(worst, float(np.max(-v, initial=0.0)))
        elif cone.kind == "soc":
            worst = max(worst, float(np.linalg.norm(v[1:]) - v[0]))
    return worst


def _hsde(sf: StandardForm, st: SolverSettings) -> SolveReport:
    c, A, b, G, h, K = sf.c, sf.A, sf.b, sf.G, sf.h, sf.cones
    # unit cost scale: traversal-time costs carry the grid step, and leaving
    # them tiny next to torque-sized constraint data stalls the centering
    cscale = _norm(c)
    cscale = 1.0 / cscale if cscale > 0 else 1.0
    c = c * cscale
    n, p, m = c.size, b.size, h.size
    AT, GT = A.T.tocsr(), G.T.tocsr()
    tol = st.tol
    kkt = KKTSystem(sf, st.regularization, st.refine_steps)
    e = K.identity()
    nu = K.degree
    cx0 = max(1.0, float(np.linalg.norm(c)))
    by0 = max(1.0, float(np.linalg.norm(b)))
    hz0 = max(1.0, float(np.linalg.norm(h)))
    history = []

    def kkt_solve(rx, ry, rz):
        return kkt.solve(rx, ry, rz)[:3]

    # initial point from two least-squares solves with W = I
    try:
        kkt.factor(None)
        x, _, zz = kkt_solve(np.zeros(n), b, h)
        s = -zz
        _, y, z = kkt_solve(-c, np.zeros(p), np.zeros(m))
    except RuntimeError as exc:
        return SolveReport("numerical-failure", None, message=f"initial factorization: {exc}")
    for v in (s, z):
        shift = -K.min_eig(v) if m else -1.0
        if shift >= -1e-8:
            v += (1.0 + shift) * e
    tau, kappa = 1.0, 1.0
    status, message = "max-iter", ""
    it = 0
    pres = dres = gap = cert = np.nan
    for it in range(st.max_iter + 1):
        rx = AT @ y + GT @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        cx, by, hz = float(c @ x), float(b @ y), float(h @ z)
        rt = kappa + cx + by + hz
        sz = float(s @ z)
        mu = (sz + tau * kappa) / (nu + 1)
        pcost, dcost = cx / tau, -(by + hz) / tau
        pres = max(_norm(ry), _norm(rz)) / tau
        dres = float(np.linalg.norm(rx)) / tau / cx0
        gap = sz / tau ** 2
        relgap = gap / max(1.0, min(abs(pcost), abs(dcost)))
        history.append((it, pcost / cscale, dcost / cscale, pres, dres, relgap, tau, kappa))
        if st.verbose:
            print(f"{it:3d} {pcost / cscale:+.8e} {dcost / cscale:+.8e} pres {pres:.1e} dres {dres:.1e} "
                  f"gap {relgap:.1e} tau {tau:.1e} kappa {kappa:.1e}")
        if pres <= tol and dres <= tol and relgap <= tol:
            status = "optimal"
            gap = relgap
            break
        if by + hz < 0:
            cert = float(np.linalg.norm(AT @ y + GT @ z)) / cx0 / -(by + hz)
            if cert <= tol:
                status, message = "infeasible", "dual ray certifies primal infeasibility"
                break
        if cx < 0:
            cert = max(float(np.linalg.norm(A @ x)) / by0,
                       float(np.linalg.norm(G @ x + s)) / hz0) / -cx
            if cert <= tol:
                status, message = "unbounded", "primal ray certifies dual infeasibility"
                break
        if it == st.max_iter:
            gap = relgap
            break
        try:
            W = NTScaling(K, s, z)
            lam = W.lam
            kkt.factor(W)
            x1, y1, z1, zs1 = kkt.solve(-c, b, h)
        except (RuntimeError, FloatingPointError, ValueError) as exc:
            status, message = "numerical-failure", f"iteration {it}: {exc}"
            gap = relgap
            break
        denom_base = float(c @ x1 + b @ y1 + h @ z1) - kappa / tau
        lam_sq = K.product(lam, lam)
        sigma, ds_aff, dz_aff, dt_aff, dk_aff = 0.0, None, None, 0.0, 0.0
        for phase in (0, 1):
            if phase == 0:
                eta_r = 1.0
                ds = lam_sq
                dk = tau * kappa
            else:
                eta_r = 1.0 - sigma
                ds = lam_sq + K.product(ds_aff, dz_aff) - sigma * mu * e
                dk = tau * kappa + dt_aff * dk_aff - sigma * mu
            u = K.divide(lam, ds)
            x2, y2, z2, zs2 = kkt.solve(-eta_r * rx, -eta_r * ry, -eta_r * rz + W.apply(u))
            dtau = ((-eta_r * rt + dk / tau - c @ x2 - b @ y2 - h @ z2) / denom_base)
            dx, dy, dz = x2 + dtau * x1, y2 + dtau * y1, z2 + dtau * z1
            # scaled directions W^{-1} ds and W dz, free of W W^{-1} round-off
            dzs = zs2 + dtau * zs1
            dss = -(u + dzs)
            dsv = W.apply(dss)
            dkap = (-dk - kappa * dtau) / tau
            alpha = min(K.max_step(s, dsv), K.max_step(z, dz))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkap < 0:
                alpha = min(alpha, -kappa / dkap)
            if phase == 0:
                a_aff = min(1.0, alpha)
                sigma = (1.0 - a_aff) ** 3
                ds_aff, dz_aff, dt_aff, dk_aff = dss, dzs, dtau, dkap
            else:
                alpha = min(1.0, st.step_fraction * alpha)
        if not np.isfinite(alpha) or alpha < 1e-12 or not np.all(np.isfinite(dx)):
            status, message = "numerical-failure", f"iteration {it}: step length collapsed"
            gap = relgap
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * dsv
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkap
    if status in ("infeasible",):
        scale = -(b @ y + h @ z)
        return SolveReport(status, None, y / scale, z / scale, iterations=it,
                           certificate_residual=cert, message=message, history=history)
    if status == "unbounded":
        return SolveReport(status, x / -(sf.c @ x), iterations=it, certificate_residual=cert,
                           message=message, history=history)
    return SolveReport(status, x / tau, y / (tau * cscale), z / (tau * cscale), iterations=it,
                       primal_residual=pres,
                       dual_residual=dres, gap=gap, message=message, history=history)
