"""The block operator A, the target observable O and their estimators.

Every sampled estimator here is a sum over measurement settings.  A
setting is a basis change applied to the prepared state, followed by a
computational-basis measurement of all qubits.  The setting also carries a
per-outcome weight vector W: the estimate is the shot average of W, and its
infinite-shot limit is ``probs @ W``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from .ansatz import StatePrep, index_flip
from .model import AssembledSystem, all_stiffness
from .qsim import Circuit, StateVector, apply, derive_rng, sample_counts


class Estimate(NamedTuple):
    value: float
    stderr: float


class BlockOperator:
    """A = sum_j 1/2((1+eps) I - (1-eps) Z_j) (x) K_j, applied blockwise."""

    def __init__(self, sys: AssembledSystem):
        self.sys = sys
        self.blocks = all_stiffness(sys)
        self.shape = (self.blocks.shape[0] * sys.dim,) * 2

    def _split(self, v):
        return np.asarray(v).reshape(self.blocks.shape[0], self.sys.dim)

    def matvec(self, v) -> np.ndarray:
        return np.einsum("xij,xj->xi", self.blocks, self._split(v)).ravel()

    def expectation(self, amps) -> float:
        V = self._split(amps)
        val = np.einsum("xi,xij,xj->", V.conj(), self.blocks, V)
        return float(val.real)

    def dense(self) -> np.ndarray:
        return block_diag(*self.blocks)


def pauli_form(sys: AssembledSystem) -> np.ndarray:
    """Dense A assembled from its Pauli-Z expansion."""
    m, eps = sys.m, sys.epsilon
    Z = np.diag([1.0, -1.0])
    I2 = np.eye(2)
    out = np.zeros(((1 << m) * sys.dim,) * 2)
    for j in range(m):
        zj = np.ones((1, 1))
        for k in range(m):
            zj = np.kron(zj, Z if k == j else I2)
        struct = 0.5 * ((1 + eps) * np.eye(1 << m) - (1 - eps) * zj)
        out += np.kron(struct, sys.K[j])
    return out


@dataclass(frozen=True)
class TargetObservable:
    index: int
    n: int

    @property
    def matrix(self) -> np.ndarray:
        O = np.zeros((1 << self.n, 1 << self.n))
        O[self.index, self.index] = 1.0
        return O

    def unproject(self, num_qubits: int, offset: int) -> Circuit:
        """X gates mapping |v_target> to |0...0> on the node register."""
        return index_flip(num_qubits, offset, self.n, self.index)


@dataclass(frozen=True)
class MeasurementSetting:
    label: str
    basis_change: Circuit
    weights: np.ndarray


def bell_permutation(dim: int, first: int, second: int) -> list[int]:
    """Basis permutation sending ``first`` -> 0 and ``second`` -> 1."""
    slots = iter(range(2, dim))
    return [0 if k == first else 1 if k == second else next(slots) for k in range(dim)]


def bell_unitary(num_qubits: int, offset: int, n: int, i: int, i2: int, sign: int) -> Circuit:
    """M_+- with M|v_i> = (|v_i> +- |v_i2>)/sqrt(2), up to global phase.

    Realised as P^-1 H_last P where P sends v_i, v_i2 to |0..00>, |0..01>
    (order swapped for the minus branch).
    """
    dim = 1 << n
    perm = bell_permutation(dim, i, i2) if sign > 0 else bell_permutation(dim, i2, i)
    inv = [0] * dim
    for k, p in enumerate(perm):
        inv[p] = k
    qubits = list(range(offset, offset + n))
    c = Circuit(num_qubits)
    c.permute(qubits, perm).h(offset + n - 1).permute(qubits, inv)
    return c


def xbm_settings(sys: AssembledSystem) -> list[MeasurementSetting]:
    m, n, eps = sys.m, sys.n, sys.epsilon
    nq = m + n
    outcomes = np.arange(1 << nq)
    node = outcomes & (sys.dim - 1)
    z = 1 - 2 * ((outcomes[None, :] >> (nq - 1 - np.arange(m))[:, None]) & 1)
    struct = 0.5 * ((1 + eps) - (1 - eps) * z)          # (m, outcomes)
    settings = []
    diag = np.zeros(1 << nq)
    for j, (i, i2) in enumerate(sys.edge_ends):
        k = sys.lam / sys.lengths[j]
        if i is not None and i2 is not None:
            # K_j = (lam/l)[(P+ + P-) - (P+ - P-)] = 2 (lam/l) P-
            M = bell_unitary(nq, m, n, i, i2, -1)
            w = 2.0 * k * struct[j] * (node == i)
            settings.append(MeasurementSetting(f"edge{j + 1}-", M.adjoint(), w))
        else:
            only = i if i is not None else i2
            diag += k * struct[j] * (node == only)
    if sys.num_free < sys.dim:
        diag += struct.sum(axis=0) * (node >= sys.num_free)
    if np.any(diag):
        settings.append(MeasurementSetting("diagonal", Circuit(nq), diag))
    return settings


def _moments(probs: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    mean = float(probs @ w)
    return mean, float(probs @ (w * w) - mean * mean)


class Estimators:
    """Exact and shot-based evaluation of <A>, |<b|psi>|^2 and <rho(eta) (x) O>."""

    def __init__(self, sys: AssembledSystem, prep: StatePrep):
        self.sys = sys
        self.prep = prep
        self.A = BlockOperator(sys)
        self.O = TargetObservable(sys.target_index, sys.n)
        self.settings = xbm_settings(sys)
        self.b_inverse = prep.prep_b.adjoint()
        self.unproject = self.O.unproject(sys.m + sys.n, sys.m)
        self.b = prep.b_state()

    # -- <A> ---------------------------------------------------------------
    def expect_A_exact(self, state: StateVector) -> float:
        return self.A.expectation(state.amps)

    def _setting_probs(self, state: StateVector):
        for s in self.settings:
            yield s, apply(state.copy(), s.basis_change).probabilities()

    def xbm_limit(self, state: StateVector) -> Estimate:
        """Infinite-shot value of the XBM estimator and its per-shot spread
        (stderr for one shot per setting)."""
        mean = var = 0.0
        for s, p in self._setting_probs(state):
            mu, v = _moments(p, s.weights)
            mean += mu
            var += v
        return Estimate(mean, float(np.sqrt(max(var, 0.0))))

    def expect_A_sampled_state(self, state: StateVector, shots: int, seed) -> Estimate:
        total = var = 0.0
        for k, s in enumerate(self.settings):
            rotated = apply(state.copy(), s.basis_change)
            counts = sample_counts(rotated, shots, derive_rng(seed, k))
            freq = counts / shots
            mu, v = _moments(freq, s.weights)
            total += mu
            var += v / shots
        return Estimate(total, float(np.sqrt(max(var, 0.0))))

    def expect_A_sampled(self, theta, shots: int, seed) -> Estimate:
        return self.expect_A_sampled_state(self.prep.psi_state(theta), shots, seed)

    # -- |<b|psi>|^2 -------------------------------------------------------
    def expect_bb_exact(self, state: StateVector) -> float:
        return abs(self.b.inner(state)) ** 2

    def expect_bb_inversion_state(self, state: StateVector, shots: int, seed) -> Estimate:
        out = apply(state.copy(), self.b_inverse)
        counts = sample_counts(out, shots, derive_rng(seed, 0))
        p = counts[0] / shots
        return Estimate(float(p), float(np.sqrt(p * (1 - p) / shots)))

    def expect_bb_inversion_test(self, theta, shots: int, seed) -> Estimate:
        return self.expect_bb_inversion_state(self.prep.psi_state(theta), shots, seed)

    # -- <psi|(rho(eta) (x) O)|psi> ---------------------------------------
    def target_weights(self, state: StateVector) -> np.ndarray:
        """g(x) = <psi|(|x><x| (x) O)|psi> for every structure x."""
        p = state.probabilities().reshape(1 << self.sys.m, self.sys.dim)
        return p[:, self.O.index].copy()

    def expect_rhoO_exact(self, theta, eta) -> float:
        g = self.target_weights(self.prep.psi_state(theta))
        return float(self.prep.structure_probabilities(eta) @ g)

    def sample_structures(self, eta, shots: int, seed) -> np.ndarray:
        phi = self.prep.phi_state(eta)
        return sample_counts(phi, shots, derive_rng(seed, 0)) / shots

    def sample_target_weights(self, psi: StateVector, shots: int, seed) -> np.ndarray:
        """Frequencies of (structure = x, node register = 0) after unprojecting O."""
        out = apply(psi.copy(), self.unproject)
        counts = sample_counts(out, shots, derive_rng(seed, 1))
        return counts.reshape(1 << self.sys.m, self.sys.dim)[:, 0] / shots

    def expect_rhoO_sampled_state(self, psi: StateVector, eta, shots: int, seed) -> Estimate:
        P = self.sample_structures(eta, shots, seed)
        f = self.sample_target_weights(psi, shots, seed)
        val = float(P @ f)
        var = (max(P @ f ** 2 - val ** 2, 0.0) + max((P ** 2) @ f - val ** 2, 0.0)) / shots
        return Estimate(val, float(np.sqrt(var)))

    def expect_rhoO_sampled(self, theta, eta, shots: int, seed) -> Estimate:
        return self.expect_rhoO_sampled_state(self.prep.psi_state(theta), eta, shots, seed)
