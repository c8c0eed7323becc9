"""Checks for noncommutative integrability of Hamiltonian systems.

The usual entry points are :func:`builtin` / :func:`load_system` to get a
system, :func:`verify_hypotheses` to test it, and :func:`classify_fiber` to
guess the type of an invariant fiber.
"""
from .expr import parse
from .flows import classify_fiber, detect_period, integrate_flow
from .integrability import casimir_pullback_fields, verify_hypotheses
from .lie_poisson import LieAlgebra, lie_poisson_bivector
from .poisson import PoissonStructure, SymplecticForm, bracket, hamiltonian_vector_field
from .systems import SystemDefinition, builtin, load_system, parse_system_file

__version__ = "0.1.0"

__all__ = [
    "parse", "bracket", "hamiltonian_vector_field", "PoissonStructure", "SymplecticForm",
    "LieAlgebra", "lie_poisson_bivector", "SystemDefinition", "builtin", "load_system",
    "parse_system_file", "casimir_pullback_fields", "verify_hypotheses", "integrate_flow",
    "detect_period", "classify_fiber",
]
