"""
Telling a line from a circle
============================

Recurrence search along the Casimir pullback fields.  The oscillator's
fiber closes up after 2*pi; the so(2,1) fiber runs off along y; the product
with a free particle shows one of each.
"""

import math

from ncint.flows import classify_fiber, detect_period, integrate_flow, invariant_drift
from ncint.systems import builtin

osc = builtin("oscillator")
field = osc.integral_field(1)
traj = integrate_flow(field, [1.0, 0.0], 10.0, 1e-10, coords=osc.coords)
print("energy drift over t=10:", invariant_drift(traj, osc.integrals)[0])

period = detect_period(field, [1.0, 0.0], t_max=100.0, eps=1e-4)
print("period:", period, "error:", period - 2 * math.pi)

for name in ("oscillator", "so21", "oscillator-free", "rotor"):
    s = builtin(name)
    rep = classify_fiber(s, s.sample_points(1, seed=0)[0])
    print(f"{name:16s} m={rep.m} r={rep.r} -> {rep.classification}")
    for d in rep.directions:
        print("   ", d["coefficients"], "period", d.get("period"))
