"""First-best upkeep: who should fix the machine, and how often.

A shared machine breaks at rate rho and is fixed by member contributions.
Without any incentive constraints the planner simply asks every member
whose contribution cost falls below a threshold to contribute whenever
the machine is down, and lets everyone use it while it is up.
"""

import numpy as np

from upkeep import AgentType, TypeDistribution, solve_first_best

group = TypeDistribution(
    (
        AgentType("casual", u=3.0, c=3.0, mass=1.0),
        AgentType("regular", u=4.0, c=2.0, mass=1.0),
        AgentType("devoted", u=10.0, c=1.25, mass=1.0),
    )
)

rho = 5.5
sol = solve_first_best(group, rho)

print(f"breakage rate        rho = {rho}")
print(f"cost threshold      y_fb = {sol.y_fb:.6f}")
print(f"machine uptime      Q_fb = {sol.Q_fb:.6f}")
print(f"group welfare       W_fb = {sol.W_fb:.6f}")
print()
print("type      cost  contributes?   P        utility")
for t in group.types:
    p = sol.mechanism.P[t.id]
    utility = sol.Q_fb * t.u - p * t.c
    tag = "yes" if p > 0 else "no"
    print(f"{t.id:8s}  {t.c:4.2f}  {tag:12s}  {p:.4f}   {utility:+.4f}")

print()
print("Note the regular member ends up with negative utility: the")
print("planner burdens everyone below the cost threshold, which is why")
print("participation constraints matter (see the next demo).")
print()

print("Comparative statics: a flimsier machine lowers both the")
print("threshold and the uptime.")
print("rho      y_fb     Q_fb")
for r in np.geomspace(1.0, 30.0, 6):
    s = solve_first_best(group, float(r))
    print(f"{r:6.2f}  {s.y_fb:.4f}  {s.Q_fb:.4f}")
