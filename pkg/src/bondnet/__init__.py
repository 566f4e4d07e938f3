"""Quasi-static equilibrium of node/bond lattices.

A material is a network of nodes joined by bonds. Bond forces follow a
trilinear force-extension law (elastic, hardening, fracture); the nodal
force balance is solved for the free node positions with a damped Newton
method, and the reactions at prescribed nodes are recovered.
"""
from .equilibrium import (
    EquilibriumProblem,
    Partition,
    SystemState,
    assemble_state,
    jacobian,
    reactions,
    residual,
)
from .kernels import BACKEND
from .material import (
    MaterialLaw,
    force_magnitude,
    secant_coefficient,
    smooth_evaluate,
    tangent_modulus,
)
from .network import Network, build_network, deformed_bond_vectors, validate_network
from .scenario import Scenario, emit_scenario, generate_example, parse_scenario
from .solver import SolveReport, SolverOptions, Status, check_jacobian, load_sweep, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EquilibriumProblem",
    "MaterialLaw",
    "Network",
    "Partition",
    "Scenario",
    "SolveReport",
    "SolverOptions",
    "Status",
    "SystemState",
    "assemble_state",
    "build_network",
    "check_jacobian",
    "deformed_bond_vectors",
    "emit_scenario",
    "force_magnitude",
    "generate_example",
    "jacobian",
    "load_sweep",
    "parse_scenario",
    "reactions",
    "residual",
    "secant_coefficient",
    "smooth_evaluate",
    "solve",
    "tangent_modulus",
    "validate_network",
]
