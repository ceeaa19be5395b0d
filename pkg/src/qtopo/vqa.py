"""Two-stage variational optimisation.

Stage 1 minimises F_u(theta) = -|<b|psi>|^2 / <psi|A|psi>, which pushes
|psi(theta)> towards A^-1|b> (all temperature fields at once).  Stage 2
freezes theta and minimises F_s(eta) = sum_x P_eta(x) g(x), where g(x) is the
weight of |psi> on (structure x, target node).  Measuring |phi(eta)> then
yields the structure.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .ansatz import StatePrep
from .model import AssembledSystem, GroundStructure, assemble, bitstring
from .operators import Estimators
from .oracle import OracleTable, brute_force, lowest_argmin
from .qsim import StateVector, derive_rng, sample_counts

log = logging.getLogger(__name__)

SHIFT = np.pi / 2
ORACLE_CAP = 12
MAX_REDRAWS = 3


class EvaluationError(RuntimeError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, message: str, stage: str, partial: "RunResult"):
        super().__init__(message)
        self.stage = stage
        self.partial = partial


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    iterations: int = 1000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


class Adam:
    """Bias-corrected ADAM over a flat parameter vector."""

    def __init__(self, config: AdamConfig, size: int):
        self.config = config
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        c = self.config
        g = np.asarray(grad, dtype=float)
        if g.shape != self.m.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {self.m.shape}")
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * g
        self.v = c.beta2 * self.v + (1 - c.beta2) * g * g
        m_hat = self.m / (1 - c.beta1 ** self.t)
        v_hat = self.v / (1 - c.beta2 ** self.t)
        return np.asarray(params, dtype=float) - c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps_hat)


@dataclass(frozen=True)
class Backend:
    mode: str = "exact"
    shots: int = 32000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be 'exact' or 'sampled', got {self.mode!r}")
        if self.mode == "sampled" and self.shots < 1:
            raise ValueError("shots must be >= 1 in sampled mode")

    @property
    def sampled(self) -> bool:
        return self.mode == "sampled"


EXACT = Backend()


@dataclass(frozen=True)
class RunConfig:
    mode: str = "exact"
    shots: int = 32000
    seed: int = 0
    adam: AdamConfig = field(default_factory=AdamConfig)
    layers_psi: int = 2
    layers_phi: int = 1
    emit: str | None = None
    oracle_cap: int = ORACLE_CAP

    def __post_init__(self):
        if self.layers_psi < 1 or self.layers_psi % 2:
            raise ValueError(f"layers_psi must be a positive even number, got {self.layers_psi}")
        if self.layers_phi < 1:
            raise ValueError("layers_phi must be >= 1")
        Backend(self.mode, self.shots, self.seed)

    @property
    def backend(self) -> Backend:
        return Backend(self.mode, self.shots, self.seed)


@dataclass
class StageResult:
    history: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    best_params: np.ndarray | None = None
    best_value: float = np.inf
    best_iteration: int = -1
    reference: float | None = None
    r_star: float | None = None

    def record(self, t: int, value: float, grad: np.ndarray, params: np.ndarray) -> None:
        self.history.append(float(value))
        self.grad_norms.append(float(np.linalg.norm(grad)))
        if value < self.best_value:
            self.best_value = float(value)
            self.best_iteration = t
            self.best_params = np.array(params, dtype=float)

    def errors(self) -> list[float] | None:
        if self.reference is None:
            return None
        return [abs(v - self.reference) for v in self.history]


@dataclass
class RunResult:
    mode: str
    stage1: StageResult | None = None
    stage2: StageResult | None = None
    distribution: np.ndarray | None = None
    selected: str | None = None
    selected_probability: float | None = None
    oracle: OracleTable | None = None
    fu_star: float | None = None
    fs_star: float | None = None
    diagnostics: dict = field(default_factory=dict)


class TopologyVQA:
    """Objectives and gradients for one assembled problem."""

    def __init__(self, sys: AssembledSystem, layers_psi: int = 2, layers_phi: int = 1):
        self.sys = sys
        self.prep = StatePrep(sys, layers_psi, layers_phi)
        self.est = Estimators(sys, self.prep)
        self._g_cache: dict[bytes, np.ndarray] = {}
        self._psi_cache: dict[bytes, StateVector] = {}

    # -- stage 1 -------------------------------------------------------------
    def _fu_terms(self, theta, backend: Backend, key: tuple) -> tuple[float, float]:
        """(|<b|psi>|^2, <psi|A|psi>) exactly or from shots."""
        psi = self.prep.psi_state(theta)
        if not backend.sampled:
            return self.est.expect_bb_exact(psi), self.est.expect_A_exact(psi)
        for attempt in range(MAX_REDRAWS + 1):
            seed = (backend.seed, *key, attempt)
            num = self.est.expect_bb_inversion_state(psi, backend.shots, seed + (1,)).value
            den = self.est.expect_A_sampled_state(psi, backend.shots, seed + (0,)).value
            if den > 0:
                return num, den
            log.warning("non-positive <A> estimate at key %s, redrawing", key)
        raise EvaluationError(f"<A> estimate stayed non-positive after {MAX_REDRAWS} redraws (key {key})")

    def f_u(self, theta, backend: Backend = EXACT, key: tuple = ()) -> float:
        num, den = self._fu_terms(theta, backend, key)
        return -num / den

    def r_star(self, theta, backend: Backend = EXACT, key: tuple = ()) -> float:
        num, den = self._fu_terms(theta, backend, key)
        return float(np.sqrt(max(num, 0.0)) / den)

    def f_u_and_grad(self, theta, backend: Backend = EXACT, key: tuple = ()):
        theta = np.asarray(theta, dtype=float)
        num, den = self._fu_terms(theta, backend, key + (0,))
        p = theta.shape[0]
        d_num = np.empty(p)
        d_den = np.empty(p)
        for i in range(p):
            shifted = theta.copy()
            shifted[i] += SHIFT
            n_plus, a_plus = self._fu_terms(shifted, backend, key + (1 + 2 * i,))
            shifted[i] -= 2 * SHIFT
            n_minus, a_minus = self._fu_terms(shifted, backend, key + (2 + 2 * i,))
            d_num[i] = 0.5 * (n_plus - n_minus)
            d_den[i] = 0.5 * (a_plus - a_minus)
        grad = -d_num / den + num * d_den / den ** 2
        return -num / den, grad

    def grad_f_u(self, theta, backend: Backend = EXACT, key: tuple = ()) -> np.ndarray:
        return self.f_u_and_grad(theta, backend, key)[1]

    # -- stage 2 -------------------------------------------------------------
    def psi_star(self, theta_star) -> StateVector:
        k = np.asarray(theta_star, dtype=float).tobytes()
        if k not in self._psi_cache:
            self._psi_cache[k] = self.prep.psi_state(theta_star)
        return self._psi_cache[k]

    def target_weights(self, theta_star) -> np.ndarray:
        k = np.asarray(theta_star, dtype=float).tobytes()
        if k not in self._g_cache:
            self._g_cache[k] = self.est.target_weights(self.psi_star(theta_star))
        return self._g_cache[k]

    def f_s(self, eta, theta_star, backend: Backend = EXACT, key: tuple = ()) -> float:
        if not backend.sampled:
            return float(self.prep.structure_probabilities(eta) @ self.target_weights(theta_star))
        return self.est.expect_rhoO_sampled_state(
            self.psi_star(theta_star), eta, backend.shots, (backend.seed, *key)).value

    def f_s_and_grad(self, eta, theta_star, backend: Backend = EXACT, key: tuple = ()):
        eta = np.asarray(eta, dtype=float)
        value = self.f_s(eta, theta_star, backend, key + (0,))
        grad = np.empty(eta.shape[0])
        for i in range(eta.shape[0]):
            shifted = eta.copy()
            shifted[i] += SHIFT
            plus = self.f_s(shifted, theta_star, backend, key + (1 + 2 * i,))
            shifted[i] -= 2 * SHIFT
            minus = self.f_s(shifted, theta_star, backend, key + (2 + 2 * i,))
            grad[i] = 0.5 * (plus - minus)
        return value, grad

    def grad_f_s(self, eta, theta_star, backend: Backend = EXACT, key: tuple = ()) -> np.ndarray:
        return self.f_s_and_grad(eta, theta_star, backend, key)[1]

    # -- diagnostics -----------------------------------------------------------
    def stationarity(self, theta) -> float:
        """|<b|A psi>| / ||A psi||; equals 1 when A psi is parallel to b."""
        psi = self.prep.psi_state(theta)
        a_psi = self.est.A.matvec(psi.amps)
        return float(abs(np.vdot(self.est.b.amps, a_psi)) / np.linalg.norm(a_psi))


class StageFailed(RuntimeError):
    def __init__(self, message: str, partial: StageResult):
        super().__init__(message)
        self.partial = partial


def optimize(value_and_grad: Callable[[np.ndarray, int], tuple[float, np.ndarray]],
             x0: np.ndarray, config: AdamConfig, reference: float | None = None) -> StageResult:
    """Run ADAM for ``config.iterations`` steps; history includes the start."""
    result = StageResult(reference=reference)
    adam = Adam(config, x0.shape[0])
    params = np.array(x0, dtype=float)
    for t in range(config.iterations + 1):
        try:
            value, grad = value_and_grad(params, t)
        except EvaluationError as exc:
            raise StageFailed(f"iteration {t}: {exc}", result) from exc
        result.record(t, value, grad, params)
        if t < config.iterations:
            params = adam.step(params, grad)
    return result


def most_probable(dist: np.ndarray) -> int:
    return lowest_argmin(-dist)


def run_pipeline(problem: GroundStructure | AssembledSystem, config: RunConfig = RunConfig(),
                 progress: Callable[[str, int, float], None] | None = None) -> RunResult:
    sys = assemble(problem) if isinstance(problem, GroundStructure) else problem
    backend = config.backend
    vqa = TopologyVQA(sys, config.layers_psi, config.layers_phi)
    result = RunResult(mode=config.mode)

    if sys.m <= config.oracle_cap:
        table = brute_force(sys)
        result.oracle = table
        result.fu_star = -float(np.sum(table.U @ sys.F) / (1 << sys.m))

    def stage1(theta, t):
        value, grad = vqa.f_u_and_grad(theta, backend, (1, t))
        if progress:
            progress("stage1", t, value)
        return value, grad

    theta0 = np.zeros(vqa.prep.num_theta)
    try:
        result.stage1 = optimize(stage1, theta0, config.adam, result.fu_star)
    except StageFailed as exc:
        result.stage1 = exc.partial
        raise PipelineError(str(exc), "stage1", result) from exc
    theta_bar = result.stage1.best_params
    result.stage1.r_star = vqa.r_star(theta_bar, backend, (4,))

    g_exact = vqa.target_weights(theta_bar)
    if result.oracle is not None:
        result.fs_star = float(g_exact.min())

    def stage2(eta, t):
        value, grad = vqa.f_s_and_grad(eta, theta_bar, backend, (2, t))
        if progress:
            progress("stage2", t, value)
        return value, grad

    eta0 = np.zeros(vqa.prep.num_eta)
    try:
        result.stage2 = optimize(stage2, eta0, config.adam, result.fs_star)
    except StageFailed as exc:
        result.stage2 = exc.partial
        raise PipelineError(str(exc), "stage2", result) from exc
    eta_bar = result.stage2.best_params

    phi = vqa.prep.phi_state(eta_bar)
    if backend.sampled:
        counts = sample_counts(phi, backend.shots, derive_rng((backend.seed, 3)))
        dist = counts / backend.shots
    else:
        dist = phi.probabilities()
    result.distribution = dist
    best = most_probable(dist)
    result.selected = bitstring(best, sys.m)
    result.selected_probability = float(dist[best])

    diag = result.diagnostics
    diag["stationarity"] = vqa.stationarity(theta_bar)
    psi_bar = vqa.prep.psi_state(theta_bar)
    diag["psi_norm"] = psi_bar.norm()
    if result.oracle is not None:
        diag["oracle_best"] = result.oracle.best
        diag["matches_oracle"] = result.selected == result.oracle.best
        diag["oracle_r"] = result.oracle.r
        if result.oracle.psi is not None:
            ref = result.oracle.psi / np.linalg.norm(result.oracle.psi)
            diag["fidelity_to_oracle_psi"] = float(abs(np.vdot(ref, psi_bar.amps)) ** 2)
    return result


def with_overrides(config: RunConfig, **kw) -> RunConfig:
    adam_kw = {k: kw.pop(k) for k in ("learning_rate", "iterations") if k in kw}
    if adam_kw:
        kw["adam"] = replace(config.adam, **adam_kw)
    return replace(config, **kw)
