# Two Stanford arms carrying a 10 kg bar along five paths.
#
# Rigid grasps let the arms share the load however they like, so they should
# never be slower than a frictional grasp (which must also squeeze the bar) or
# a fixed pseudo-inverse split. Takes about half a minute.

from cooptopp.scenario import compare, load_scenario

cfg = load_scenario("stanford-duo")
table = compare(cfg, ["rigid", "frictional", "fixed:pinv"])
print(table.text())

for p in table.paths:
    rigid = table.value(p, "rigid")
    extra = {m: 100 * (table.value(p, m) / rigid - 1) for m in ("frictional", "fixed:pinv")}
    print(f"{p}: frictional +{extra['frictional']:.1f}%, fixed split +{extra['fixed:pinv']:.1f}%")
