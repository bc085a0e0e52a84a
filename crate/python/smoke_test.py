"""Quick end-to-end check of the Python bindings on the bundled scenarios."""

import math

import savbottleneck as sb

p = sb.Params.preset("fig2")
print(p)

eq = sb.equilibria(p)
assert abs(eq["MC"]["n_a"] - 960.0) < 1e-9, eq["MC"]
assert eq["ordering_passed"]

prof = sb.profile(p)
assert prof["passed"]

st = sb.stability(p)
assert st["AC0"] == "stable" and st["AC1"] == "unstable" and st["AC2"] == "stable", st
assert abs(st["basin_threshold"] - 60.0) < 0.12

fb = sb.first_best(p)
assert abs(fb["cost"] - 187.0) < 1e-9, fb
assert fb["pareto_slack"] > 0

p4 = sb.Params.preset("fig4")
fb4 = sb.first_best(p4)
lp = sb.first_best_lp(p4, cells=400)
assert abs(lp["objective"] - fb4["social_cost"]) / fb4["social_cost"] < 1e-2
assert len(lp["duals"]) == 400

sec = sb.second_best(p)
assert sec["social_cost"] <= sb.social_cost(p, eq["MC"]["n_a"]) + 1e-6

w = sb.welfare(sb.Params.preset("fig6"))
assert w["chain_holds"]
assert w["n_min"] > 0 and (w["f_a_c"] is None or w["f_a_c"] > 0)

sens = sb.sensitivity(sb.Params.preset("fig3"), "AC2")
assert math.isfinite(sens["dc_dmu"])

adv = sb.strategy(sb.Params.preset("fig6"))
assert "social_activate_ac" in adv

assert sb.verify(p)["passed"]
assert not sb.verify(p, tol=0.0)["passed"]

try:
    p.replace(beta=5.0)
except ValueError as e:
    print("rejected:", e)
else:
    raise AssertionError("beta above theta should be rejected")

assert sb.Params(**p.to_dict()).to_dict() == p.to_dict()
print("smoke test passed")
