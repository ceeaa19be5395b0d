"""Classical reference solutions: direct solves and exhaustive enumeration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .model import AssembledSystem, all_stiffness, bitstring, structure_stiffness

BRUTE_FORCE_CAP = 20
PSI_QUBIT_CAP = 16


class OracleError(RuntimeError):
    pass


class CapExceeded(OracleError):
    pass


def _solve_spd(K: np.ndarray, F: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(K), F)
    except LinAlgError as exc:
        raise OracleError(f"stiffness matrix is not positive definite: {exc}") from exc


def solve_temperature(sys: AssembledSystem, x) -> np.ndarray:
    K = structure_stiffness(sys, x)
    U = _solve_spd(K, sys.F)
    res = np.linalg.norm(K @ U - sys.F) / np.linalg.norm(sys.F)
    if res > 1e-12:
        raise OracleError(f"direct solve residual {res:.3e} above tolerance")
    return U


def _all_temperatures(sys: AssembledSystem) -> np.ndarray:
    stack = all_stiffness(sys)
    return np.stack([_solve_spd(K, sys.F) for K in stack])


@dataclass(frozen=True, eq=False)
class OracleTable:
    m: int
    n: int
    U: np.ndarray            # (2**m, 2**n) temperatures per structure
    objective: np.ndarray    # U_target(x)**2
    u_target: np.ndarray
    argmin: int
    r: float
    psi: np.ndarray | None

    @property
    def best(self) -> str:
        return bitstring(self.argmin, self.m)

    @property
    def structures(self) -> list[str]:
        return [bitstring(x, self.m) for x in range(1 << self.m)]

    def ranked(self) -> list[int]:
        """Structure indices sorted by objective; values equal to 12
        significant digits count as tied and fall back to bit-string order."""
        return sorted(range(1 << self.m), key=lambda x: (float(f"{self.objective[x]:.12g}"), x))


def lowest_argmin(values: np.ndarray, rtol: float = 1e-12) -> int:
    """Index of the minimum; near-ties resolve to the lowest index."""
    vmin = values.min()
    tied = np.flatnonzero(values <= vmin + rtol * max(abs(vmin), 1e-300))
    return int(tied[0])


def brute_force(sys: AssembledSystem, target: int | None = None, *,
                cap: int = BRUTE_FORCE_CAP, psi_cap: int = PSI_QUBIT_CAP) -> OracleTable:
    if sys.m > cap:
        raise CapExceeded(f"brute force over 2^{sys.m} structures exceeds the cap m <= {cap}")
    t = sys.target_index if target is None else target
    U = _all_temperatures(sys)
    ut = U[:, t]
    obj = ut ** 2
    r = float(np.sqrt(np.sum(U ** 2) / (1 << sys.m)))
    psi = U.ravel() / 2 ** (sys.m / 2) if sys.m + sys.n <= psi_cap else None
    return OracleTable(sys.m, sys.n, U, obj, ut, lowest_argmin(obj), r, psi)


def exact_psi(sys: AssembledSystem, *, cap: int = PSI_QUBIT_CAP) -> np.ndarray:
    """Stacked solution vector 2^(-m/2) U(x), blocks ordered by x."""
    if sys.m + sys.n > cap:
        raise CapExceeded(f"exact solution vector on {sys.m + sys.n} qubits exceeds cap {cap}")
    return _all_temperatures(sys).ravel() / 2 ** (sys.m / 2)


def b_vector(sys: AssembledSystem) -> np.ndarray:
    return np.kron(np.full(1 << sys.m, 2 ** (-sys.m / 2)), sys.F)


def b_ainv_b(sys: AssembledSystem) -> float:
    """<b|A^-1|b> = 2^-m sum_x F^T K(x)^-1 F."""
    U = _all_temperatures(sys)
    return float(np.sum(U @ sys.F) / (1 << sys.m))
