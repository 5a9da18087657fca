# A single vertical lift, checked two independent ways.
#
# With one joint the problem collapses to a scalar inequality in (s, sdot^2),
# so a dynamic program over that plane gives a feasible profile whose time
# bounds the optimum from above. The conic solution should sit just below it.

import time

from cooptopp.oracles import dp_velocity_profile_oracle, single_dof_reduction
from cooptopp.scenario import load_scenario, prepare, solve_prepared

cfg = load_scenario("lift")
prep = prepare(cfg)
res = solve_prepared(cfg, prep)
print(f"conic program: T = {res.T:.6f} s on K = {prep.coefs.K}")

scalar = single_dof_reduction(prep.coefs)
for levels in (10, 30, 100):
    start = time.perf_counter()
    dp = dp_velocity_profile_oracle(scalar, n_levels=levels)
    print(f"DP {levels:3d} levels: T = {dp.T:.6f} s  "
          f"(rel. gap {dp.T / res.T - 1:+.1e})  {time.perf_counter() - start:.2f} s")

# the two profiles, side by side
print("\n   s     b (SOCP)   b (DP)")
for k in range(0, prep.coefs.K + 1, 10):
    print(f"{prep.coefs.s[k]:5.2f}  {res.solution.b[k]:9.5f}  {dp.b[k]:9.5f}")
