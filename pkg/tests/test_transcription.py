import csv

import numpy as np
import pytest

from cooptopp.conic import validate
from cooptopp.errors import ConfigError, InfeasibleError
from cooptopp.scenario import prepare, solve_prepared
from cooptopp.transcription import (active_constraint_report, build_program, equality_count,
                                    parse_mode, recover_trajectory, solve_program,
                                    traversal_time, variable_count, velocity_bound_translation)

RAIL_T = 0.894427191  # 2 sqrt(L m / F) with L=1, m=4, F=20


def counts_for(prep, mode):
    dofs = [m.dof for m in prep.models]
    sizes = [c.m for c in prep.contacts] if mode == "frictional" else ()
    tors = [c.torsion_index is not None for c in prep.contacts] if mode == "frictional" else ()
    K = prep.coefs.K
    return variable_count(mode, K, dofs, sizes, tors), equality_count(mode, K, dofs, sizes, tors)


@pytest.mark.parametrize("mode", ["rigid", "frictional", "fixed:pinv"])
def test_program_size_matches_closed_form(stanford_cfg, mode):
    prep = prepare(stanford_cfg, grid=12)
    tp = build_program(mode, prep.coefs, prep.contacts)
    assert (tp.program.n, tp.program.m) == counts_for(prep, mode)
    assert validate(tp.program) == []


def test_constraint_families_present(stanford_p1):
    tp = build_program("frictional", stanford_p1.coefs, stanford_p1.contacts)
    for fam in ("object-dynamics", "manipulator-dynamics", "nullspace", "friction-cone",
                "interior-cone", "torque-bounds", "velocity-bounds", "boundary", "epigraph"):
        assert len(tp.families[fam]) > 0, fam
    rigid = build_program("rigid", stanford_p1.coefs)
    assert "friction-cone" not in rigid.families and "wrench-sum" in rigid.families


def test_coefficient_shapes(stanford_p1):
    c = stanford_p1.coefs
    K1 = c.K + 1
    assert c.N == 2 and c.s[0] == 0 and c.s[-1] == 1
    for i in range(c.N):
        assert c.m[i].shape == (K1, 6) and c.J[i].shape == (K1, 6, 6) and c.G[i].shape == (K1, 6, 6)
    assert c.mO.shape == (K1, 6) and c.bbar.shape == (K1,)
    assert np.all(c.bbar > 0)


def test_velocity_bound_translation():
    dq = [np.array([[1.0, 0.0], [2.0, 0.5], [0.0, 0.0]])]
    bbar = velocity_bound_translation(dq, [np.array([2.0, 1.0])])
    assert bbar[0] == pytest.approx(4.0)
    assert bbar[1] == pytest.approx(1.0)
    assert np.isinf(bbar[2])


def test_rail_matches_closed_form(rail_cfg, rail_prep):
    res = solve_prepared(rail_cfg, rail_prep)
    assert res.T == pytest.approx(RAIL_T, rel=1e-3)
    assert res.audit_ok
    fixed = solve_prepared(rail_cfg, rail_prep, mode="fixed:pinv")
    assert fixed.T == pytest.approx(res.T, rel=1e-6)


def test_first_carries_rule_is_slower(rail_prep):
    # the first carriage pushes itself and the 2 kg object with 10 N: T = 2 sqrt(3/10)
    tp = build_program("fixed:first", rail_prep.coefs)
    sol = recover_trajectory(solve_program(tp), tp)
    assert sol.T == pytest.approx(2 * np.sqrt(0.3), rel=1e-3)


def test_boundary_velocities(rail_prep):
    tp = build_program("rigid", rail_prep.coefs, sdot0=0.5, sdotT=0.3)
    sol = recover_trajectory(solve_program(tp), tp)
    assert sol.sdot[0] == pytest.approx(0.5, abs=1e-6)
    assert sol.sdot[-1] == pytest.approx(0.3, abs=1e-6)
    assert sol.T < RAIL_T


def test_boundary_velocity_too_fast_names_node(rail_prep):
    coefs = rail_prep.coefs
    coefs_capped = type(coefs)(**{**coefs.__dict__, "bbar": np.full_like(coefs.bbar, 0.25)})
    with pytest.raises(InfeasibleError) as err:
        build_program("rigid", coefs_capped, sdot0=1.0)
    assert err.value.node == 0 and "s=0" in str(err.value)


def test_boundary_torque_infeasibility_names_node(rail_prep):
    coefs = rail_prep.coefs
    g = [gi.copy() for gi in coefs.g]
    m = [mi.copy() for mi in coefs.m]
    mO = coefs.mO.copy()
    for gi, mi in zip(g, m):
        gi[-1] += 50.0
        mi[-1] = 0.0
    mO[-1] = 0.0
    tp = build_program("rigid", type(coefs)(**{**coefs.__dict__, "g": g, "m": m, "mO": mO}),
                       sdotT=0.5)
    with pytest.raises(InfeasibleError) as err:
        solve_program(tp)
    assert err.value.node == coefs.K and f"node {coefs.K}" in str(err.value)


def test_interior_infeasibility_is_located(rail_prep):
    coefs = rail_prep.coefs
    # a massless node with a 50 N bias: no acceleration can help
    k = 57
    g = [gi.copy() for gi in coefs.g]
    m = [mi.copy() for mi in coefs.m]
    mO = coefs.mO.copy()
    for gi, mi in zip(g, m):
        gi[k] += 50.0
        mi[k] = 0.0
    mO[k] = 0.0
    tp = build_program("rigid", type(coefs)(**{**coefs.__dict__, "g": g, "m": m, "mO": mO}))
    with pytest.raises(InfeasibleError) as err:
        solve_program(tp)
    assert err.value.node == k
    assert err.value.s == pytest.approx(coefs.s[k])


def test_mode_parsing():
    assert parse_mode("rigid") == ("rigid", "")
    assert parse_mode("fixed:pinv") == ("fixed", "pinv")
    for bad in ("fixed:median", "loose", "rigid:pinv"):
        with pytest.raises(ConfigError):
            parse_mode(bad)


def test_frictional_needs_contacts(rail_prep):
    with pytest.raises(ConfigError):
        build_program("frictional", rail_prep.coefs, rail_prep.contacts)


def test_traversal_time():
    s = np.linspace(0, 1, 5)
    assert traversal_time(s, np.ones(5))[-1] == pytest.approx(1.0)
    assert np.isinf(traversal_time(s, np.zeros(5))[-1])


def test_active_report_and_csv(rail_cfg, rail_prep, tmp_path):
    res = solve_prepared(rail_cfg, rail_prep)
    rep = active_constraint_report(res.solution, rail_prep.coefs, 1e-3)
    assert rep.interior_fraction == 1.0
    assert "interior nodes" in rep.summary()
    out = tmp_path / "sol.csv"
    res.solution.to_csv(out, rep)
    rows = list(csv.reader(open(out)))
    assert rows[0][:4] == ["s", "b", "a", "t"]
    assert "tau1_1" in rows[0] and "h2_mz" in rows[0] and rows[0][-1] == "active_velocity"
    assert len(rows) == rail_prep.coefs.K + 2
    assert float(rows[-1][3]) == pytest.approx(res.T, rel=1e-8)


def test_frictional_internal_forces(planar_cfg, planar_prep):
    res = solve_prepared(planar_cfg, planar_prep, mode="frictional")
    sol = res.solution
    assert res.audit_ok
    hI = sum(np.einsum("krc,kc->kr", G, h) for G, h in zip(planar_prep.coefs.G, sol.hI))
    assert np.abs(hI).max() < 1e-6
