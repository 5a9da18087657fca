"""Sparse second-order cone programs with variable-level cone declarations.

A :class:`ConicProgram` reads

    minimize    c'x + offset
    subject to  A x = b
                lower <= x <= upper
                x[idx] in K_j          for every cone declaration j

where each ``K_j`` is the free space, the nonnegative orthant or a Lorentz
cone ``{(t, u): ||u|| <= t}`` over an ordered index list whose first entry is
``t``. Every variable must appear in exactly one declaration.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError

CONE_KINDS = ("free", "nonneg", "soc")


class Cone(NamedTuple):
    kind: str
    indices: tuple


@dataclass
class ConicProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cones: List[Cone]
    names: List[str] = field(default_factory=list)
    row_names: List[str] = field(default_factory=list)
    offset: float = 0.0

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def objective(self, x) -> float:
        return float(self.c @ x + self.offset)

    def summary(self) -> dict:
        kinds = {k: 0 for k in CONE_KINDS}
        soc_vars = 0
        for cone in self.cones:
            kinds[cone.kind] += 1
            if cone.kind == "soc":
                soc_vars += len(cone.indices)
        return {"variables": self.n, "equalities": self.m, "nonzeros": int(self.A.nnz),
                "soc_blocks": kinds["soc"], "soc_variables": soc_vars,
                "bounded": int(np.sum(np.isfinite(self.lower) | np.isfinite(self.upper)))}


class ProgramBuilder:
    """Incremental construction of a :class:`ConicProgram`.

    Equality rows are collected as coordinate triplets, so rows touching many
    variables are cheap to add in bulk.
    """

    def __init__(self):
        self._names: list = []
        self._lower: list = []
        self._upper: list = []
        self._cost: list = []
        self.cones: List[Cone] = []
        self._rows: list = []
        self._cols: list = []
        self._vals: list = []
        self._rhs: list = []
        self._row_names: list = []
        self.offset = 0.0

    @property
    def n(self) -> int:
        return len(self._names)

    @property
    def m(self) -> int:
        return len(self._rhs)

    def _new(self, names, lower, upper):
        start = self.n
        count = len(names)
        self._names.extend(names)
        self._lower.extend(np.broadcast_to(np.asarray(lower, float), (count,)).tolist())
        self._upper.extend(np.broadcast_to(np.asarray(upper, float), (count,)).tolist())
        self._cost.extend([0.0] * count)
        return np.arange(start, start + count)

    def variables(self, name: str, shape, kind: str = "free", lower=-np.inf, upper=np.inf):
        """Add variables named ``name[j]`` (or ``name[j,l]`` for a 2-D ``shape``).

        Returns the indices with the requested shape. ``lower`` and ``upper``
        broadcast against it.
        """
        if kind not in ("free", "nonneg"):
            raise ConfigError(f"use soc() for cone blocks, got kind {kind!r}")
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape))
        if shape == (1,):
            names = [name]
        else:
            names = [f"{name}[{','.join(map(str, ix))}]" for ix in np.ndindex(*shape)]
        lower = np.broadcast_to(np.asarray(lower, float), shape).ravel()
        upper = np.broadcast_to(np.asarray(upper, float), shape).ravel()
        idx = self._new(names, lower, upper)
        self.cones.append(Cone(kind, tuple(int(i) for i in idx)))
        return idx.reshape(shape)

    def variable(self, name: str, kind: str = "free", lower=-np.inf, upper=np.inf) -> int:
        return int(self.variables(name, 1, kind, lower, upper)[0])

    def soc(self, name: str, dim: int):
        """New Lorentz-cone block of ``dim`` variables; entry 0 is the cone height."""
        if dim < 2:
            raise ConfigError("second-order cone blocks need at least two entries")
        idx = self._new([f"{name}[{j}]" for j in range(dim)], -np.inf, np.inf)
        self.cones.append(Cone("soc", tuple(int(i) for i in idx)))
        return idx

    def set_bounds(self, idx, lower=None, upper=None):
        for j in np.atleast_1d(idx):
            if lower is not None:
                self._lower[j] = float(lower)
            if upper is not None:
                self._upper[j] = float(upper)

    def add_cost(self, idx, coeffs):
        for j, v in zip(np.atleast_1d(idx), np.broadcast_to(coeffs, np.shape(np.atleast_1d(idx)))):
            self._cost[int(j)] += float(v)

    def equality(self, cols, vals, rhs: float, name: str = "") -> int:
        """Add the row ``sum(vals * x[cols]) == rhs``; returns the row index."""
        row = self.m
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape).ravel()
        keep = vals != 0.0
        self._rows.append(np.full(int(keep.sum()), row, dtype=np.int64))
        self._cols.append(cols[keep])
        self._vals.append(vals[keep])
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return row

    def equalities(self, rows_cols_vals, rhs, names=None):
        """Add a block of rows given as ``(local_row, col, val)`` triplet arrays."""
        r, c, v = (np.asarray(a) for a in rows_cols_vals)
        first = self.m
        rhs = np.asarray(rhs, dtype=float).ravel()
        keep = v != 0.0
        self._rows.append(r[keep].astype(np.int64) + first)
        self._cols.append(c[keep].astype(np.int64))
        self._vals.append(v[keep].astype(float))
        self._rhs.extend(rhs.tolist())
        self._row_names.extend(names if names is not None else [""] * len(rhs))
        return np.arange(first, first + len(rhs))

    def build(self) -> ConicProgram:
        n, m = self.n, self.m
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        A.sum_duplicates()
        return ConicProgram(np.asarray(self._cost), A, np.asarray(self._rhs),
                            np.asarray(self._lower), np.asarray(self._upper), list(self.cones),
                            list(self._names), list(self._row_names), self.offset)


def validate(program: ConicProgram) -> List[str]:
    """Structural defects of ``program``; an empty list means it is well formed."""
    defects = []
    n = program.n
    if program.A.shape[1] != n:
        defects.append(f"A has {program.A.shape[1]} columns for {n} variables")
    if len(program.b) != program.A.shape[0]:
        defects.append(f"rhs has {len(program.b)} entries for {program.A.shape[0]} rows")
    for name, arr in (("lower", program.lower), ("upper", program.upper)):
        if len(arr) != n:
            defects.append(f"{name} bounds have {len(arr)} entries for {n} variables")
    if defects:
        return defects
    if not np.all(np.isfinite(program.c)):
        defects.append("objective has non-finite entries")
    if not np.all(np.isfinite(program.b)):
        defects.append("rhs has non-finite entries")
    if program.A.nnz and not np.all(np.isfinite(program.A.data)):
        defects.append("A has non-finite entries")
    bad = np.flatnonzero(program.lower > program.upper)
    if bad.size:
        defects.append(f"lower bound above upper bound for variables {bad[:10].tolist()}")
    owner = np.full(n, -1)
    for j, cone in enumerate(program.cones):
        if cone.kind not in CONE_KINDS:
            defects.append(f"cone {j} has unknown kind {cone.kind!r}")
            continue
        if cone.kind == "soc" and len(cone.indices) < 2:
            defects.append(f"cone {j} is a second-order block with fewer than two entries")
        for i in cone.indices:
            if not 0 <= i < n:
                defects.append(f"cone {j} references variable {i} outside 0..{n - 1}")
            elif owner[i] >= 0:
                defects.append(f"variable {i} declared in cones {owner[i]} and {j}")
            else:
                owner[i] = j
    missing = np.flatnonzero(owner < 0)
    if missing.size:
        defects.append(f"variables without a cone declaration: {missing[:10].tolist()}")
    row_nnz = np.diff(program.A.tocsr().indptr)
    empty = np.flatnonzero(row_nnz == 0)
    if empty.size:
        defects.append(f"all-zero equality rows: {empty[:10].tolist()}")
    return defects


# --- text dump ------------------------------------------------------------------

def dump(program: ConicProgram, fh) -> None:
    """Write the self-describing sparse text format read by :func:`load`."""
    A = program.A.tocoo()
    w = fh.write
    w("# conic program: minimize c'x + offset s.t. Ax = b, lower <= x <= upper, x in cones\n")
    w(f"n {program.n}\nm {program.m}\noffset {float(program.offset)!r}\n")
    w(f"objective {int(np.count_nonzero(program.c))}\n")
    for i in np.flatnonzero(program.c):
        w(f"{i} {float(program.c[i])!r}\n")
    bounded = np.flatnonzero(np.isfinite(program.lower) | np.isfinite(program.upper))
    w(f"bounds {bounded.size}\n")
    for i in bounded:
        w(f"{i} {float(program.lower[i])!r} {float(program.upper[i])!r}\n")
    w(f"equalities {A.nnz}\n")
    for r, c, v in zip(A.row, A.col, A.data):
        w(f"{r} {c} {float(v)!r}\n")
    w(f"rhs {int(np.count_nonzero(program.b))}\n")
    for i in np.flatnonzero(program.b):
        w(f"{i} {float(program.b[i])!r}\n")
    w(f"cones {len(program.cones)}\n")
    for cone in program.cones:
        w(cone.kind + " " + " ".join(map(str, cone.indices)) + "\n")
    named = [i for i, s in enumerate(program.names) if s]
    w(f"names {len(named)}\n")
    for i in named:
        w(f"{i} {program.names[i]}\n")


def dumps(program: ConicProgram) -> str:
    buf = io.StringIO()
    dump(program, buf)
    return buf.getvalue()


def load(fh) -> ConicProgram:
    lines = (ln.strip() for ln in fh)
    lines = iter([ln for ln in lines if ln and not ln.startswith("#")])

    def header(key):
        parts = next(lines).split()
        if parts[0] != key:
            raise ConfigError(f"program dump: expected section {key!r}, found {parts[0]!r}")
        return parts[1]

    n = int(header("n"))
    m = int(header("m"))
    offset = float(header("offset"))
    c = np.zeros(n)
    for _ in range(int(header("objective"))):
        i, v = next(lines).split()
        c[int(i)] = float(v)
    lower, upper = np.full(n, -np.inf), np.full(n, np.inf)
    for _ in range(int(header("bounds"))):
        i, lo, hi = next(lines).split()
        lower[int(i)], upper[int(i)] = float(lo), float(hi)
    nnz = int(header("equalities"))
    trip = np.array([next(lines).split() for _ in range(nnz)], dtype=float).reshape(nnz, 3)
    A = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(m, n))
    b = np.zeros(m)
    for _ in range(int(header("rhs"))):
        i, v = next(lines).split()
        b[int(i)] = float(v)
    cones = []
    for _ in range(int(header("cones"))):
        parts = next(lines).split()
        cones.append(Cone(parts[0], tuple(int(p) for p in parts[1:])))
    names = [""] * n
    for _ in range(int(header("names"))):
        i, name = next(lines).split(maxsplit=1)
        names[int(i)] = name
    return ConicProgram(c, A, b, lower, upper, cones, names, [""] * m, offset)


def loads(text: str) -> ConicProgram:
    return load(io.StringIO(text))
