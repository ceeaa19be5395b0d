"""Alternating layered ansatz and the fixed preparation circuits.

One layer is an RY row, CZ on pairs (0,1),(2,3),..., a second RY row and
CZ on pairs (1,2),(3,4),...  CZ gates are diagonal, self-inverse and mutually
commuting, so with all angles zero an even number of layers multiplies out
to the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AssembledSystem
from .qsim import Circuit, StateVector, apply


@dataclass(frozen=True)
class AnsatzConfig:
    num_qubits: int
    layers: int
    require_even: bool = False

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("ansatz needs at least one qubit")
        if self.layers < 1:
            raise ValueError("ansatz needs at least one layer")
        if self.require_even and self.layers % 2:
            raise ValueError(
                f"layers must be even for identity at zero parameters, got {self.layers}")

    @property
    def num_params(self) -> int:
        return 2 * self.layers * self.num_qubits


def build_ansatz(config: AnsatzConfig) -> Circuit:
    """Parametrized circuit; RY gates reference slots of the parameter vector
    in layer-major, row-major, qubit order."""
    q = config.num_qubits
    c = Circuit(q)
    k = 0
    for _ in range(config.layers):
        for start in (0, 1):
            for qb in range(q):
                c.ry(qb, param=k)
                k += 1
            for a in range(start, q - 1, 2):
                c.cz(a, a + 1)
    return c


def b_circuit(sys: AssembledSystem) -> Circuit:
    """|0...0> -> |+>^m (x) |v_source>."""
    c = Circuit(sys.m + sys.n)
    for q in range(sys.m):
        c.h(q)
    return c.extend(index_flip(sys.m + sys.n, sys.m, sys.n, sys.source_index))


def plus_circuit(m: int) -> Circuit:
    c = Circuit(m)
    for q in range(m):
        c.h(q)
    return c


def index_flip(num_qubits: int, offset: int, width: int, index: int) -> Circuit:
    """X gates taking |0...0> to |index> on qubits offset..offset+width-1."""
    c = Circuit(num_qubits)
    for k in range(width):
        if (index >> (width - 1 - k)) & 1:
            c.x(offset + k)
    return c


class StatePrep:
    """Builds |psi(theta)> = U_theta|b> and |phi(eta)> = U_eta|+>^m."""

    def __init__(self, sys: AssembledSystem, layers_psi: int = 2, layers_phi: int = 1):
        self.sys = sys
        self.psi_config = AnsatzConfig(sys.m + sys.n, layers_psi, require_even=True)
        self.phi_config = AnsatzConfig(sys.m, layers_phi)
        self.prep_b = b_circuit(sys)
        self.prep_plus = plus_circuit(sys.m)
        self.psi_ansatz = build_ansatz(self.psi_config)
        self.phi_ansatz = build_ansatz(self.phi_config)
        self.psi_circuit = self.prep_b + self.psi_ansatz
        self.phi_circuit = self.prep_plus + self.phi_ansatz
        self.psi_circuit.compile()
        self.phi_circuit.compile()

    @property
    def num_theta(self) -> int:
        return self.psi_config.num_params

    @property
    def num_eta(self) -> int:
        return self.phi_config.num_params

    def _check(self, params, expected: int, name: str) -> np.ndarray:
        p = np.asarray(params, dtype=float)
        if p.shape != (expected,):
            raise ValueError(f"{name} must have {expected} entries, got shape {p.shape}")
        return p

    def psi_state(self, theta) -> StateVector:
        theta = self._check(theta, self.num_theta, "theta")
        return apply(StateVector(self.psi_circuit.num_qubits), self.psi_circuit, theta)

    def phi_state(self, eta) -> StateVector:
        eta = self._check(eta, self.num_eta, "eta")
        return apply(StateVector(self.sys.m), self.phi_circuit, eta)

    def b_state(self) -> StateVector:
        return apply(StateVector(self.prep_b.num_qubits), self.prep_b)

    def structure_probabilities(self, eta) -> np.ndarray:
        return self.phi_state(eta).probabilities()
