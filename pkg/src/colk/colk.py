"""Compositional online learning with kernels.

Each iteration tracks the inner expectation on the fast time scale, takes a
functional stochastic quasi-gradient step on the slow one, and compresses the
result with KOMP so the model order stays bounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DivergenceError, InputError
from .kernel import GaussianKernel, Kernel, KernelExpansion, diff_norm
from .komp import DEFAULT_W_MAX, komp_prune
from .objectives import CompositionalProblem, GradientAtoms


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.02
    beta: float = 0.01
    lam: float = 1e-6
    eps: float = 5 * 0.02**2
    kernel: Kernel = field(default_factory=lambda: GaussianKernel(0.06))
    eta: float = 0.1
    moment_P: int = 4
    w_max: float = DEFAULT_W_MAX
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.alpha * self.lam >= 1:
            raise ConfigError(f"alpha*lambda must be < 1, got {self.alpha * self.lam}")
        if not self.eps >= 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")
        if not self.eta >= 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if self.moment_P not in (2, 3, 4):
            raise ConfigError(f"moment_P must be 2, 3 or 4, got {self.moment_P}")
        if not self.w_max > 0:
            raise ConfigError(f"w_max must be > 0, got {self.w_max}")

    def with_(self, **changes) -> "LearnerConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TrackerState:
    """Auxiliary estimate ``g`` of the inner expectation plus the previous iterate."""

    g: np.ndarray
    prev_f: KernelExpansion
    initialized: bool = False

    @classmethod
    def initial(cls, m: int, kernel: Kernel, dim: int) -> "TrackerState":
        return cls(np.zeros(m), KernelExpansion.zero(kernel, dim), False)


@dataclass(frozen=True)
class StepCertificate:
    """What one compression did: ``||f_{t+1} - f~_{t+1}||_H`` and model orders."""

    projection_error: float
    order_before: int
    order_after: int
    alpha: float

    @property
    def projection_gap(self) -> float:
        return self.projection_error / self.alpha


def update_tracker(state: TrackerState, h_prev, h_cur, beta: float) -> np.ndarray:
    """Momentum tracking: ``g <- (1 - beta)(g - h_prev) + h_cur``.

    Evaluated as running average plus drift correction,
    ``(1 - beta) g + beta h_cur + (1 - beta)(h_cur - h_prev)``, so that with a
    frozen function the correction vanishes exactly.
    """
    h_prev = np.asarray(h_prev, dtype=float).reshape(-1)
    h_cur = np.asarray(h_cur, dtype=float).reshape(-1)
    if not (h_prev.shape == h_cur.shape == state.g.shape):
        raise InputError(f"tracker length mismatch: g{state.g.shape}, h_prev{h_prev.shape}, h_cur{h_cur.shape}")
    return (1.0 - beta) * state.g + beta * h_cur + (1.0 - beta) * (h_cur - h_prev)


def quasi_gradient_step(f_t: KernelExpansion, atoms: GradientAtoms, alpha: float, lam: float) -> KernelExpansion:
    """Unprojected step ``(1 - alpha*lam) f_t - alpha * sum_i c_i k(x_i, .)``.

    Existing weights are shrunk and one dictionary column is appended per atom.
    """
    if alpha * lam >= 1:
        raise ConfigError(f"alpha*lambda must be < 1 (got {alpha * lam}); the shrink factor would flip sign")
    if atoms.points.shape[1] != f_t.dim:
        raise InputError(f"atom dimension {atoms.points.shape[1]} != function dimension {f_t.dim}")
    points = np.vstack([f_t.points, atoms.points])
    weights = np.concatenate([(1.0 - alpha * lam) * f_t.weights, -alpha * atoms.coeffs])
    return KernelExpansion(f_t.kernel, points, weights)


TrackerRule = Callable[[TrackerState, np.ndarray, np.ndarray, float], np.ndarray]


def colk_iterate(
    f_t: KernelExpansion,
    tracker: TrackerState,
    sample,
    problem: CompositionalProblem,
    cfg: LearnerConfig,
    tracker_rule: Optional[TrackerRule] = None,
):
    """One COLK iteration.

    Returns ``(f_next, tracker_next, cert)``.  On the very first call the
    previous inner value is taken as zero.  ``tracker_rule`` swaps in another
    fast-time-scale update with the signature of :func:`update_tracker`.
    """
    rule = tracker_rule or update_tracker
    h_cur = problem.inner_h(f_t, sample)
    if tracker.initialized:
        h_prev = problem.inner_h_at(tracker.prev_f, sample)
    else:
        h_prev = np.zeros_like(tracker.g)
    g = rule(tracker, h_prev, h_cur, cfg.beta)

    atoms = problem.gradient_atoms(f_t, sample, g)
    if not (np.all(np.isfinite(atoms.coeffs)) and np.all(np.isfinite(g))):
        raise DivergenceError(f"non-finite gradient: tracker={g}, coefficients={atoms.coeffs}")
    f_tilde = quasi_gradient_step(f_t, atoms, cfg.alpha, cfg.lam)
    pruned = komp_prune(f_tilde, cfg.eps, cfg.w_max)
    f_next = pruned.function
    if not np.all(np.isfinite(f_next.weights)):
        raise DivergenceError(f"non-finite weights after compression: max|w~|={np.max(np.abs(f_tilde.weights))}")

    cert = StepCertificate(pruned.final_error, f_tilde.order, f_next.order, cfg.alpha)
    return f_next, TrackerState(g, f_t, True), cert


def projected_gradient_gap(f_t: KernelExpansion, f_tilde_next: KernelExpansion, f_next: KernelExpansion, alpha: float) -> float:
    """``||f~_{t+1} - f_{t+1}||_H / alpha``: distance between projected and raw quasi-gradients.

    ``f_t`` cancels from the difference of the two gradients and is accepted
    only to keep call sites explicit.
    """
    if not alpha > 0:
        raise InputError(f"alpha must be > 0, got {alpha}")
    return diff_norm(f_tilde_next, f_next) / alpha


class COLKLearner:
    """Stateful driver around :func:`colk_iterate`."""

    def __init__(self, problem: CompositionalProblem, cfg: LearnerConfig, dim: int, tracker_rule: Optional[TrackerRule] = None):
        self.problem = problem
        self.cfg = cfg
        self.tracker_rule = tracker_rule
        self.f = KernelExpansion.zero(cfg.kernel, dim)
        self.tracker = TrackerState.initial(problem.m, cfg.kernel, dim)
        self.t = 0

    def step(self, sample) -> StepCertificate:
        self.f, self.tracker, cert = colk_iterate(self.f, self.tracker, sample, self.problem, self.cfg, self.tracker_rule)
        self.t += 1
        return cert

    def predict(self, X) -> np.ndarray:
        return self.f.evaluate_many(X)

    @property
    def model_order(self) -> int:
        return self.f.order
