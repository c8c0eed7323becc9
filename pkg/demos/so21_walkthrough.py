"""
The so(2,1) example, step by step
=================================

Brackets on the coalgebra, the Darboux chart, the Casimir field and the
hypothesis report.  Run with ``python demos/so21_walkthrough.py``.
"""

import numpy as np

from ncint import expr as ex
from ncint.integrability import casimir_pullback_fields, verify_hypotheses
from ncint.lie_poisson import lie_poisson_bivector, so21, verify_casimir
from ncint.poisson import bracket, pushforward_bivector
from ncint.systems import builtin

# The Lie-Poisson bivector read off the structure constants
P = lie_poisson_bivector(so21())
print(P)
x1, x2, x3 = (ex.Var(c) for c in P.coords)
print("{x1,x2} =", bracket(x1, x2, P))
print("{x2,x3} =", bracket(x2, x3, P))
print("{x3,x1} =", bracket(x3, x1, P))

# r is a Casimir: it commutes with every coordinate
r = ex.parse("sqrt(x1^2 + x2^2 - x3^2)")
pts = np.column_stack([np.linspace(-0.4, 0.4, 5), np.linspace(2, 3, 5), np.linspace(-0.8, 0.8, 5)])
print("Casimir residual:", verify_casimir(r, P, pts).max_residual)

# In the chart (r, x1, gamma) the bivector becomes d_gamma ^ d_x1
gamma = ex.parse("0.5*log((x2 + x3)/(x2 - x3))")
print(np.round(pushforward_bivector(P, [r, x1, gamma], pts[0]), 12) + 0.0)

# The symplectic realisation on (r, y, gamma, x1)
so = builtin("so21")
print(so.to_text())
(v_r,) = casimir_pullback_fields(so)
# unsimplified symbolically, but numerically it is d/dy everywhere
for p in so.sample_points(3, seed=1):
    print("v_r at", np.round(p, 3), "=", np.round(v_r.at(p), 12) + 0.0)

# Every hypothesis, on 50 seeded points
report = verify_hypotheses(so, points=50, seed=0)
for name, check in report.to_dict()["checks"].items():
    print(f"{name:18s}", check.get("pass", "advisory"))
print("m =", report.m, "| overall pass:", report.passed)
