"""Spin-1/2 rings and ladders as logical qubits: exact-diagonalization
models, adiabatic schedules, twist and pump gates, and the glued-loop
entangling protocol, all at property-testable sizes."""

__version__ = "0.1.0"

from . import (cli, duality, dynamics, hilbert, logical, models, observables,
               protocols, spectral)
from .dynamics import Schedule, Segment, Trajectory, evolve_schedule, evolve_static
from .hilbert import SparseOperator, SpinBasis, StateVector, build_basis
from .logical import LogicalAction, LogicalCode, dimer_state, twist_operator
from .models import LatticeLayout, chain_j1j2, chain_staggered, ladder, ring_network, tfim_chain
from .spectral import EigenSolution, lowest_eigenpairs

__all__ = [
    "__version__",
    "build_basis", "SpinBasis", "StateVector", "SparseOperator",
    "LatticeLayout", "chain_j1j2", "chain_staggered", "ladder",
    "tfim_chain", "ring_network",
    "EigenSolution", "lowest_eigenpairs",
    "Schedule", "Segment", "Trajectory", "evolve_static", "evolve_schedule",
    "LogicalCode", "LogicalAction", "dimer_state", "twist_operator",
    "hilbert", "models", "spectral", "dynamics", "logical",
    "observables", "duality", "protocols", "cli",
]
