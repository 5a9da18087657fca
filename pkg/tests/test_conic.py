import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from cooptopp.conic import (ProgramBuilder, SolverSettings, dumps, loads, solve, solve_ipm,
                            standard_form, validate)
from cooptopp.conic.cones import ConeProduct, NTScaling
from cooptopp.errors import ConfigError

seeds = st.integers(0, 2 ** 31 - 1)


def interior_point(K: ConeProduct, rng):
    v = np.empty(K.size)
    v[:K.l] = rng.uniform(0.1, 2.0, K.l)
    for g in K.groups:
        B = K.blocks(v, g)
        B[:, 1:] = rng.normal(size=(g.count, g.dim - 1))
        B[:, 0] = np.linalg.norm(B[:, 1:], axis=1) + rng.uniform(0.05, 1.0, g.count)
    return v


CONES = ConeProduct(3, [2, 3, 3, 5])


@given(seeds)
def test_jordan_algebra(seed):
    rng = np.random.default_rng(seed)
    u, v = interior_point(CONES, rng), interior_point(CONES, rng)
    e = CONES.identity()
    assert CONES.min_eig(e) == pytest.approx(1.0)
    assert np.allclose(CONES.product(e, v), v)
    assert np.allclose(CONES.product(u, CONES.divide(u, v)), v)


@given(seeds)
def test_max_step_lands_on_boundary(seed):
    rng = np.random.default_rng(seed)
    v = interior_point(CONES, rng)
    dv = rng.normal(size=CONES.size) * 3
    a = CONES.max_step(v, dv)
    if np.isfinite(a):
        assert CONES.min_eig(v + a * dv) == pytest.approx(0.0, abs=1e-7 * max(1, a))
        assert CONES.min_eig(v + 0.999 * a * dv) > -1e-12
    else:
        assert CONES.min_eig(v + 1e6 * dv) >= -1e-6


@given(seeds)
def test_nesterov_todd_scaling(seed):
    rng = np.random.default_rng(seed)
    s, z = interior_point(CONES, rng), interior_point(CONES, rng)
    W = NTScaling(CONES, s, z)
    assert np.allclose(W.apply(z), W.apply(s, inverse=True))
    v = rng.normal(size=CONES.size)
    assert np.allclose(W.apply(W.apply(v), inverse=True), v)
    # dense inverse blocks agree with the structured inverse
    for g, Hinv in zip(CONES.groups, W.inverse_blocks()):
        got = np.einsum("bij,bj->bi", Hinv, CONES.blocks(v, g))
        assert np.allclose(got, CONES.blocks(W.apply(v, inverse=True), g))
    # scaled point is in the cone interior
    assert CONES.min_eig(W.lam) > 0


def projection_program(a, w, rhs):
    """min ||x - a|| s.t. w'x = rhs, written with an epigraph cone."""
    B = ProgramBuilder()
    blk = B.soc("t", len(a) + 1)
    x = B.variables("x", len(a))
    for j in range(len(a)):
        B.equality([blk[j + 1], x[j]], [1.0, -1.0], -a[j])
    B.equality(x, w, rhs)
    B.add_cost(blk[0], 1.0)
    return B.build(), blk, x


@given(seeds)
def test_projection_distance_is_exact(seed):
    rng = np.random.default_rng(seed)
    a, w = rng.normal(size=4), rng.normal(size=4)
    prog, blk, x = projection_program(a, w, 1.0)
    rep = solve_ipm(prog)
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(abs(w @ a - 1.0) / np.linalg.norm(w), abs=1e-7)
    assert rep.primal_residual < 1e-8


def random_lp(seed, n=8, m=4):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(-1, 1, n)
    return A, A @ x0, c


@given(seeds)
def test_lp_matches_highs(seed):
    A, b, c = random_lp(seed)
    B = ProgramBuilder()
    x = B.variables("x", A.shape[1], kind="nonneg", upper=3.0)
    for i in range(A.shape[0]):
        B.equality(x, A[i], b[i])
    B.add_cost(x, c)
    rep = solve_ipm(B.build())
    ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, 3)] * A.shape[1], method="highs")
    assert rep.status == "optimal" and ref.status == 0
    assert rep.objective == pytest.approx(ref.fun, abs=1e-6 * max(1, abs(ref.fun)))


def random_socp(seed, n=10, p=3, nsoc=3, q=4):
    """Feasible and bounded by construction (interior point known, x boxed)."""
    rng = np.random.default_rng(seed)
    B = ProgramBuilder()
    xs = B.variables("x", n, lower=-5, upper=5)
    ys = B.variables("y", 3, kind="nonneg")
    blocks = [B.soc(f"t{j}", q) for j in range(nsoc)]
    x0 = np.zeros(B.n)
    x0[xs] = rng.normal(size=n)
    x0[ys] = rng.uniform(0.5, 1.0, 3)
    for blk in blocks:
        x0[blk[1:]] = rng.normal(size=q - 1)
        x0[blk[0]] = np.linalg.norm(x0[blk[1:]]) + 1.0
        for k in blk:
            mix = rng.normal(size=n) * (rng.random(n) < 0.4)
            cols = np.concatenate([[k], xs])
            vals = np.concatenate([[1.0], mix])
            B.equality(cols, vals, vals @ x0[cols])
    allv = np.arange(B.n)
    for _ in range(p):
        vals = rng.normal(size=allv.size)
        B.equality(allv, vals, vals @ x0)
    for v in np.concatenate([ys] + blocks):
        B.add_cost(v, rng.uniform(0.1, 1.0))
    B.add_cost(xs, rng.normal(size=n))
    return B.build()


@given(seeds)
def test_socp_kkt_certificate(seed):
    """Recheck optimality from the returned primal-dual pair."""
    prog = random_socp(seed)
    rep = solve_ipm(prog)
    assert rep.status == "optimal"
    sf = standard_form(prog)
    xk, y, z = rep.x[sf.keep], rep.y[sf.rows], rep.z
    s = sf.h - sf.G @ xk
    scale = 1 + np.abs(sf.c).max()
    assert np.abs(sf.c + sf.A.T @ y + sf.G.T @ z).max() < 1e-6 * scale
    assert np.abs(sf.A @ xk - sf.b).max() < 1e-7 * (1 + np.abs(sf.b).max())
    assert sf.cones.min_eig(s) > -1e-8 and sf.cones.min_eig(z) > -1e-8
    gap = s @ z
    assert abs(gap) < 1e-6 * max(1.0, abs(rep.objective))


@pytest.mark.parametrize("seed", range(20))
def test_matches_clarabel(seed):
    pytest.importorskip("clarabel")
    prog = random_socp(seed)
    mine = solve(prog)
    ref = solve(prog, SolverSettings(backend="clarabel"))
    assert mine.status == ref.status == "optimal"
    assert mine.objective == pytest.approx(ref.objective, abs=1e-6 * max(1, abs(ref.objective)))


def test_infeasible_and_unbounded():
    B = ProgramBuilder()
    x = B.variables("x", 2, kind="nonneg")
    B.equality(x, [1.0, 1.0], -1.0)
    assert solve_ipm(B.build()).status == "infeasible"

    B = ProgramBuilder()
    x = B.variables("x", 2, kind="nonneg")
    B.equality(x, [1.0, -1.0], 0.0)
    B.add_cost(x, [-1.0, 0.0])
    rep = solve_ipm(B.build())
    assert rep.status == "unbounded"
    assert rep.x[0] > 0 and rep.x[0] == pytest.approx(rep.x[1])

    B = ProgramBuilder()
    blk = B.soc("t", 3)
    B.equality([blk[0]], [1.0], 1.0)
    B.equality([blk[1]], [1.0], 2.0)
    assert solve_ipm(B.build()).status == "infeasible"


def test_presolve_catches_fixed_negative():
    B = ProgramBuilder()
    x = B.variables("x", 2, kind="nonneg")
    B.set_bounds(x[0], lower=-1.0, upper=-1.0)
    B.equality(x, [1.0, 1.0], 1.0)
    rep = solve_ipm(B.build())
    assert rep.status == "infeasible" and "presolve" in rep.message


def test_validate_reports_defects():
    B = ProgramBuilder()
    B.variables("x", 2)
    B._names.append("orphan")
    B._lower.append(1.0)
    B._upper.append(0.0)
    B._cost.append(0.0)
    B.equality([0], [0.0], 1.0)
    defects = validate(B.build())
    assert any("without a cone" in d for d in defects)
    assert any("lower bound above" in d for d in defects)
    assert any("all-zero" in d for d in defects)
    prog, _, _ = projection_program(np.ones(3), np.ones(3), 1.0)
    assert validate(prog) == []


def test_dump_round_trip():
    prog = random_socp(7)
    back = loads(dumps(prog))
    assert validate(back) == []
    assert np.array_equal(back.c, prog.c) and np.array_equal(back.b, prog.b)
    assert (back.A != prog.A).nnz == 0
    assert back.cones == prog.cones and back.names == prog.names
    assert solve_ipm(back).objective == solve_ipm(prog).objective
    with pytest.raises(ConfigError):
        loads("n 1\nrows 0\n")


def test_determinism():
    prog = random_socp(11)
    r1, r2 = solve_ipm(prog), solve_ipm(prog)
    assert np.array_equal(r1.x, r2.x) and r1.iterations == r2.iterations


def test_unknown_backend():
    with pytest.raises(ConfigError):
        solve(random_socp(1), SolverSettings(backend="mosek"))
