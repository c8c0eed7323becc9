"""
What a failing report looks like
================================

Three ways to break the so(2,1) example, and the check that notices each.
"""

from pathlib import Path

from ncint.integrability import verify_hypotheses
from ncint.systems import builtin, load_system

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
cases = {
    "sign-flipped bivector": builtin("so21-corrupted"),
    "x2 posing as a Casimir": builtin("so21-noncasimir"),
    "H3 + 0.1*sin(y)": load_system(fixtures / "so21_perturbed.system"),
}

for label, system in cases.items():
    checks = verify_hypotheses(system, points=20, seed=0).to_dict()["checks"]
    failed = [k for k, v in checks.items() if v.get("pass") is False]
    print(f"{label:24s} fails: {', '.join(failed)}")
