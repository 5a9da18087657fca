# Two carriages on a rail pushing a block one metre.
#
# The optimum here is known in closed form: full thrust to the midpoint, full
# braking after. The conic program should land on it, and the arrival-time
# curve should match node by node.

import numpy as np

from cooptopp.oracles import bang_bang_pointmass_oracle, bang_bang_time_map
from cooptopp.scenario import load_scenario, prepare, solve_prepared

cfg = load_scenario("pointmass-rail")
prep = prepare(cfg)
res = solve_prepared(cfg, prep)

T_ref = bang_bang_pointmass_oracle(L=1.0, total_mass=4.0, total_force=20.0)
print(f"conic program T = {res.T:.6f} s")
print(f"closed form   T = {T_ref:.6f} s")

t_ref = bang_bang_time_map(res.solution.s, 1.0, 4.0, 20.0)
print(f"worst arrival-time gap along the rail: {np.abs(res.solution.t - t_ref).max():.2e} s")

# both carriages saturate, first pushing then braking
tau = np.hstack(res.solution.tau)
for k in (0, len(tau) // 4, 3 * len(tau) // 4, len(tau) - 1):
    print(f"s={res.solution.s[k]:.3f}  forces {tau[k].round(3)} N")

# a fixed 50/50 split costs nothing here; letting one carriage do the pushing does
for mode in ("fixed:pinv", "fixed:first"):
    print(f"{mode:12s} T = {solve_prepared(cfg, prep, mode=mode, audit=False).T:.6f} s")
