import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cooptopp.errors import ConfigError, InfeasibleError
from cooptopp.oracles import (audit_coverage, audit_passed, audit_rows, bang_bang_pointmass_oracle,
                              bang_bang_time_map, compare, constraint_audit,
                              dp_velocity_profile_oracle, pointmass_coefficients,
                              single_dof_reduction)
from cooptopp.scenario import load_scenario, prepare, solve_prepared
from cooptopp.transcription import traversal_time


def test_bang_bang_closed_form():
    assert bang_bang_pointmass_oracle(1.0, 4.0, 20.0) == pytest.approx(0.894427191)
    assert bang_bang_pointmass_oracle(4.0, 4.0, 20.0) == pytest.approx(1.788854382)
    assert bang_bang_pointmass_oracle(1.0, 4.0, np.inf) == 0.0
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, 0)]:
        with pytest.raises(ConfigError):
            bang_bang_pointmass_oracle(*bad)


def test_time_map_is_continuous_and_monotone():
    s = np.linspace(0, 1, 401)
    t = bang_bang_time_map(s, 1.0, 4.0, 20.0)
    assert t[0] == 0 and t[-1] == pytest.approx(0.894427191)
    assert np.all(np.diff(t) > 0)
    assert np.abs(np.diff(t)).max() < 0.05


@given(st.floats(0.2, 5.0), st.floats(0.5, 20.0), st.floats(1.0, 100.0))
@settings(max_examples=25)
def test_dp_is_exact_on_bang_bang(L, mass, force):
    dp = dp_velocity_profile_oracle(pointmass_coefficients(L, mass, force, 40), n_levels=20,
                                    b_max=1e6)
    assert dp.T == pytest.approx(bang_bang_pointmass_oracle(L, mass, force), rel=1e-6)


def test_dp_respects_speed_cap():
    # cruise at sdot = 0.8 after accelerating at 5: T = 1/0.8 + 0.8/5
    dp = dp_velocity_profile_oracle(pointmass_coefficients(1.0, 4.0, 20.0, 200, speed_cap=0.8))
    assert dp.T >= 1.25
    assert dp.T == pytest.approx(1.25 + 0.16, rel=0.02)
    assert dp.b.max() <= 0.64 + 1e-12


def test_dp_profile_is_feasible():
    sd = pointmass_coefficients(1.0, 4.0, 20.0, 50)
    dp = dp_velocity_profile_oracle(sd, n_levels=30, b_max=100.0)
    a = np.diff(dp.b) / (2 * np.diff(sd.s))
    tau = sd.m[:-1] * a
    assert np.all(tau <= sd.upper + 1e-9) and np.all(tau >= sd.lower - 1e-9)
    assert dp.b[0] == 0 and dp.b[-1] == 0
    assert np.all(dp.b >= dp.bounds[:, 0] - 1e-12) and np.all(dp.b <= dp.bounds[:, 1] + 1e-12)
    assert dp.T == pytest.approx(traversal_time(sd.s, dp.b)[-1])


def test_dp_rejects_bad_input():
    sd = pointmass_coefficients(1.0, 4.0, 20.0, 10)
    with pytest.raises(ConfigError):
        dp_velocity_profile_oracle(sd, n_levels=1, b_max=1.0)
    free = copy.deepcopy(sd)
    free.m[:] = 0.0  # nothing limits b, so a cap is required
    with pytest.raises(ConfigError):
        dp_velocity_profile_oracle(free)
    with pytest.raises(ConfigError):
        pointmass_coefficients(1.0, 0.0, 20.0, 10)
    heavy = copy.deepcopy(sd)
    heavy.g[:] = 50.0  # bias above the force limit
    with pytest.raises(InfeasibleError):
        dp_velocity_profile_oracle(heavy, b_max=1.0)


@pytest.fixture(scope="module")
def lift():
    cfg = load_scenario("lift")
    prep = prepare(cfg)
    return cfg, prep, solve_prepared(cfg, prep)


def test_lift_dp_agrees_with_socp(lift):
    _, prep, res = lift
    dp = dp_velocity_profile_oracle(single_dof_reduction(prep.coefs), n_levels=100)
    r = compare("lift traversal time", dp.T, res.T, 0.05)
    assert r.passed, r.line()
    assert dp.T >= res.T * (1 - 1e-6)  # the DP profile is feasible, so it cannot beat the optimum


def test_single_dof_reduction_needs_one_joint(stanford_p1):
    with pytest.raises(ConfigError):
        single_dof_reduction(stanford_p1.coefs)


def test_rail_time_map(rail_cfg, rail_prep):
    res = solve_prepared(rail_cfg, rail_prep)
    ref = bang_bang_time_map(res.solution.s, 1.0, 4.0, 20.0)
    assert np.abs(res.solution.t - ref).max() < 5e-3


def test_audit_passes_and_covers_every_family(planar_cfg, planar_prep):
    res = solve_prepared(planar_cfg, planar_prep, mode="frictional")
    assert audit_passed(res.audit)
    cover = audit_coverage(res.program, res.audit)
    assert all(n > 0 for n in cover.values()), cover
    rows = list(audit_rows(res.audit))
    assert rows[0][0] == "check" and len(rows) == len(res.audit) + 1


def test_audit_catches_perturbed_torque(planar_cfg, planar_prep):
    res = solve_prepared(planar_cfg, planar_prep, mode="rigid")
    bad = copy.deepcopy(res.solution)
    bad.tau[0][40, 1] += 1e-3
    results = constraint_audit(bad, res.program, planar_prep.models, planar_prep.obj,
                               planar_prep.path)
    failed = [r for r in results if not r.passed]
    assert failed and all(r.family == "manipulator-dynamics" for r in failed)


def test_audit_catches_speed_violation(planar_cfg, planar_prep):
    res = solve_prepared(planar_cfg, planar_prep, mode="rigid")
    bad = copy.deepcopy(res.solution)
    bad.b = bad.b * 1.5
    results = constraint_audit(bad, res.program, planar_prep.models, planar_prep.obj,
                               planar_prep.path)
    assert not audit_passed(results)
    assert any(r.family == "velocity-bounds" and not r.passed for r in results)
