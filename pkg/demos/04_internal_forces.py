# Where the frictional grasp loses time.
#
# Each contact force splits into a manipulating part and an internal part that
# the grasp matrix annihilates. The internal part keeps the contacts inside
# their friction cones with margin, which is what a rigid grasp gets for free.

import numpy as np

from cooptopp.grasp import nullspace_residual
from cooptopp.scenario import load_scenario, prepare, solve_prepared
from cooptopp.transcription import active_constraint_report

cfg = load_scenario("stanford-duo")
prep = prepare(cfg)
rigid = solve_prepared(cfg, prep, mode="rigid")
fric = solve_prepared(cfg, prep, mode="frictional")
print(f"P.1 rigid      T = {rigid.T:.4f} s")
print(f"P.1 frictional T = {fric.T:.4f} s\n")

sol, coefs = fric.solution, prep.coefs
print("   s    squeeze(N)  min normal(N)  |sum G h_I|")
for k in range(0, coefs.K + 1, 10):
    squeeze = [f[k][c.normal_index] for f, c in zip(sol.fI, prep.contacts)]
    normal = [(fm[k] + fi[k])[c.normal_index] for fm, fi, c in zip(sol.fM, sol.fI, prep.contacts)]
    res = nullspace_residual([h[k] for h in sol.hI], [G[k] for G in coefs.G])
    print(f"{coefs.s[k]:5.3f}  {np.mean(squeeze):9.2f}  {min(normal):12.2f}  {res:10.1e}")

print()
for label, r in (("rigid", rigid), ("frictional", fric)):
    print(f"{label:10s} {active_constraint_report(r.solution, coefs).summary()}")
print("audit:", "all checks pass" if fric.audit_ok else "FAILED")
