"""Minimal dense statevector simulator."""
from . import backend
from .core import (
    Circuit,
    Gate,
    Program,
    SimulationError,
    StateVector,
    apply,
    derive_rng,
    expectation,
    sample,
    sample_counts,
    unitary,
)

__all__ = [
    "Circuit", "Gate", "Program", "SimulationError", "StateVector", "apply",
    "backend", "derive_rng", "expectation", "sample", "sample_counts", "unitary",
]
