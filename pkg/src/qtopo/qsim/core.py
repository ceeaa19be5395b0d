"""Dense statevector simulation.

Basis index convention: qubit 0 is the most significant bit, so on a
register of ``nq`` qubits the bit of qubit ``q`` in index ``i`` is
``(i >> (nq - 1 - q)) & 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import backend

GATE_CODES = {"ry": 0, "x": 1, "h": 2, "cz": 3, "perm": 4}


class SimulationError(ValueError):
    pass


def derive_rng(seed, *keys) -> np.random.Generator:
    """Generator seeded from ``seed`` plus integer keys (circuit ids etc.).

    Seeds and keys may be nested tuples; they are flattened in order.
    """
    def flat(items):
        for item in items:
            if isinstance(item, (tuple, list)):
                yield from flat(item)
            else:
                yield int(item)

    return np.random.default_rng(np.random.SeedSequence(list(flat((seed, *keys)))))


class StateVector:
    __slots__ = ("num_qubits", "amps")

    def __init__(self, num_qubits: int, amps=None):
        self.num_qubits = int(num_qubits)
        dim = 1 << self.num_qubits
        if amps is None:
            self.amps = np.zeros(dim, dtype=np.complex128)
            self.amps[0] = 1.0
        else:
            a = np.array(amps, dtype=np.complex128).ravel()
            if a.shape[0] != dim:
                raise SimulationError(f"expected {dim} amplitudes, got {a.shape[0]}")
            self.amps = a

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "StateVector":
        s = cls(num_qubits)
        s.amps[0] = 0.0
        s.amps[index] = 1.0
        return s

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amps.copy())

    def probabilities(self) -> np.ndarray:
        p = self.amps.real ** 2 + self.amps.imag ** 2
        return p

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amps, other.amps))

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


@dataclass(frozen=True)
class Gate:
    """One gate.  RY angles are ``angle + coeff * params[param]`` when
    ``param`` is set, which lets a circuit be compiled once and rebound."""

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    param: int | None = None
    coeff: float = 1.0
    perm: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in GATE_CODES:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        nq = 2 if self.kind == "cz" else 1
        if self.kind == "perm":
            if self.perm is None or len(self.perm) != 1 << len(self.qubits):
                raise SimulationError("perm gate needs a map over 2**width basis states")
            if sorted(self.perm) != list(range(len(self.perm))):
                raise SimulationError("perm gate map is not a bijection")
            if list(self.qubits) != list(range(self.qubits[0], self.qubits[0] + len(self.qubits))):
                raise SimulationError("perm gate qubits must be contiguous and ascending")
        elif len(self.qubits) != nq:
            raise SimulationError(f"{self.kind} acts on {nq} qubit(s), got {self.qubits}")
        if self.kind == "cz" and self.qubits[0] == self.qubits[1]:
            raise SimulationError("cz needs two distinct qubits")

    def adjoint(self) -> "Gate":
        if self.kind == "ry":
            return Gate("ry", self.qubits, -self.angle, self.param, -self.coeff)
        if self.kind == "perm":
            inv = [0] * len(self.perm)
            for k, p in enumerate(self.perm):
                inv[p] = k
            return Gate("perm", self.qubits, perm=tuple(inv))
        return self


@dataclass
class Program:
    """Flat arrays consumed by the kernels' ``run_program``."""

    codes: np.ndarray
    qa: np.ndarray
    qb: np.ndarray
    angles: np.ndarray
    param_slots: np.ndarray
    param_index: np.ndarray
    param_coeff: np.ndarray
    base_angles: np.ndarray
    perm_data: np.ndarray
    perm_offsets: np.ndarray
    num_params: int

    def bind(self, params) -> np.ndarray:
        if self.num_params == 0:
            return self.angles
        p = np.asarray(params, dtype=float)
        if p.shape != (self.num_params,):
            raise SimulationError(f"expected {self.num_params} parameters, got shape {p.shape}")
        angles = self.angles.copy()
        angles[self.param_slots] = self.base_angles + self.param_coeff * p[self.param_index]
        return angles


class Circuit:
    def __init__(self, num_qubits: int, gates: Iterable[Gate] = ()):
        self.num_qubits = int(num_qubits)
        self.gates: list[Gate] = []
        self._program: Program | None = None
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> "Circuit":
        for q in gate.qubits:
            if not 0 <= q < self.num_qubits:
                raise SimulationError(
                    f"qubit {q} out of range for a {self.num_qubits}-qubit circuit")
        self.gates.append(gate)
        self._program = None
        return self

    def ry(self, q: int, angle: float = 0.0, param: int | None = None) -> "Circuit":
        return self.append(Gate("ry", (q,), float(angle), param))

    def x(self, q: int) -> "Circuit":
        return self.append(Gate("x", (q,)))

    def h(self, q: int) -> "Circuit":
        return self.append(Gate("h", (q,)))

    def cz(self, q1: int, q2: int) -> "Circuit":
        return self.append(Gate("cz", (q1, q2)))

    def permute(self, qubits: Sequence[int], perm: Sequence[int]) -> "Circuit":
        return self.append(Gate("perm", tuple(qubits), perm=tuple(int(p) for p in perm)))

    def extend(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise SimulationError("cannot compose circuits of different widths")
        for g in other.gates:
            self.append(g)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.num_qubits, self.gates).extend(other)

    def adjoint(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.adjoint() for g in reversed(self.gates)])

    @property
    def num_params(self) -> int:
        idx = [g.param for g in self.gates if g.param is not None]
        return max(idx) + 1 if idx else 0

    def __len__(self):
        return len(self.gates)

    def __eq__(self, other):
        return (isinstance(other, Circuit) and self.num_qubits == other.num_qubits
                and self.gates == other.gates)

    def compile(self) -> Program:
        if self._program is not None:
            return self._program
        ng = len(self.gates)
        codes = np.empty(ng, dtype=np.int32)
        qa = np.zeros(ng, dtype=np.int32)
        qb = np.zeros(ng, dtype=np.int32)
        angles = np.zeros(ng)
        offsets = np.zeros(ng, dtype=np.int64)
        perm_chunks: list[tuple[int, ...]] = []
        slots, pidx, coeff, base = [], [], [], []
        pos = 0
        for k, g in enumerate(self.gates):
            codes[k] = GATE_CODES[g.kind]
            qa[k] = g.qubits[0]
            if g.kind == "cz":
                qb[k] = g.qubits[1]
            elif g.kind == "perm":
                qb[k] = len(g.qubits)
                offsets[k] = pos
                perm_chunks.append(g.perm)
                pos += len(g.perm)
            elif g.kind == "ry":
                angles[k] = g.angle
                if g.param is not None:
                    slots.append(k)
                    pidx.append(g.param)
                    coeff.append(g.coeff)
                    base.append(g.angle)
        perm_data = (np.concatenate([np.asarray(c, dtype=np.int64) for c in perm_chunks])
                     if perm_chunks else np.zeros(0, dtype=np.int64))
        self._program = Program(
            codes, qa, qb, angles,
            np.asarray(slots, dtype=np.intp), np.asarray(pidx, dtype=np.intp),
            np.asarray(coeff, dtype=float), np.asarray(base, dtype=float),
            perm_data, offsets, self.num_params,
        )
        return self._program

    def __repr__(self):
        return f"Circuit(num_qubits={self.num_qubits}, gates={len(self.gates)})"


def apply(state: StateVector, circuit: Circuit, params=None) -> StateVector:
    """Apply ``circuit`` to ``state`` in place and return it."""
    if state.num_qubits != circuit.num_qubits:
        raise SimulationError(
            f"circuit on {circuit.num_qubits} qubits applied to {state.num_qubits}-qubit state")
    prog = circuit.compile()
    if prog.num_params and params is None:
        raise SimulationError("parametrized circuit applied without parameters")
    angles = prog.bind(params) if prog.num_params else prog.angles
    if not state.amps.flags.c_contiguous:
        state.amps = np.ascontiguousarray(state.amps)
    backend.kernels().run_program(
        state.amps, state.num_qubits, prog.codes, prog.qa, prog.qb, angles,
        prog.perm_data, prog.perm_offsets)
    return state


def unitary(circuit: Circuit, params=None) -> np.ndarray:
    """Dense matrix of ``circuit`` (columns are images of basis states)."""
    dim = 1 << circuit.num_qubits
    cols = []
    for k in range(dim):
        cols.append(apply(StateVector.basis(circuit.num_qubits, k), circuit, params).amps)
    return np.stack(cols, axis=1)


def expectation(state: StateVector, observable, *, atol: float = 1e-10) -> float:
    """<s|M|s> for a Hermitian matrix or an object exposing ``expectation(amps)``."""
    if hasattr(observable, "expectation"):
        return float(observable.expectation(state.amps))
    M = np.asarray(observable)
    if M.shape != (state.amps.shape[0],) * 2:
        raise SimulationError(f"observable shape {M.shape} does not match the state")
    if not np.allclose(M, M.conj().T, atol=atol):
        raise SimulationError("observable is not Hermitian")
    val = np.vdot(state.amps, M @ state.amps)
    if abs(val.imag) > atol:
        raise SimulationError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def sample_counts(state: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts indexed by basis state."""
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    p = state.probabilities()
    p = p / p.sum()
    return rng.multinomial(int(shots), p)


def sample(state: StateVector, shots: int, seed=0) -> dict[str, int]:
    counts = sample_counts(state, shots, derive_rng(seed))
    nq = state.num_qubits
    return {format(int(i), f"0{nq}b"): int(counts[i]) for i in np.flatnonzero(counts)}
