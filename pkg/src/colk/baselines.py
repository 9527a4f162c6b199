"""Comparator learners: POLK, averaging-tracker COLK, budgeted SGD and a fixed RBF network."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colk import LearnerConfig, StepCertificate, TrackerState, quasi_gradient_step, update_tracker
from .errors import DivergenceError, InputError
from .kernel import KernelExpansion, as_points, diff_norm
from .komp import komp_prune
from .objectives import CompositionalProblem, GradientAtoms, MomentRegression


def _square_loss_atom(f: KernelExpansion, x, y) -> GradientAtoms:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return GradientAtoms(x[None, :], np.array([2.0 * (f(x) - y)]))


def polk_iterate(f_t: KernelExpansion, sample, cfg: LearnerConfig):
    """Functional SGD on the square loss at ``(sample.x, sample.y)`` followed by KOMP.

    Returns ``(f_next, cert)``.
    """
    f_tilde = quasi_gradient_step(f_t, _square_loss_atom(f_t, sample.x, sample.y), cfg.alpha, cfg.lam)
    pruned = komp_prune(f_tilde, cfg.eps, cfg.w_max)
    if not np.all(np.isfinite(pruned.function.weights)):
        raise DivergenceError("non-finite weights in POLK step")
    return pruned.function, StepCertificate(pruned.final_error, f_tilde.order, pruned.function.order, cfg.alpha)


def scgd_tracker_update(g, h_cur, beta: float) -> np.ndarray:
    """Plain running average ``(1 - beta) g + beta h``."""
    return (1.0 - beta) * np.asarray(g, dtype=float) + beta * np.asarray(h_cur, dtype=float)


def averaging_rule(state: TrackerState, h_prev, h_cur, beta: float) -> np.ndarray:
    """:func:`scgd_tracker_update` with the tracker-rule signature expected by ``colk_iterate``."""
    return scgd_tracker_update(state.g, np.asarray(h_cur, dtype=float).reshape(-1), beta)


def budgeted_sgd_iterate(f_t: KernelExpansion, sample, cfg: LearnerConfig, max_order: int):
    """Functional SGD step, then drop smallest-contribution atoms down to ``max_order``.

    An atom's contribution is ``|w_j| * sqrt(k(d_j, d_j))``; survivors keep
    their weights (no refit).  Returns ``(f_next, cert)``.
    """
    if max_order < 1:
        raise InputError(f"max_order must be >= 1, got {max_order}")
    f_tilde = quasi_gradient_step(f_t, _square_loss_atom(f_t, sample.x, sample.y), cfg.alpha, cfg.lam)
    points, weights = f_tilde.points, f_tilde.weights
    excess = points.shape[0] - max_order
    if excess > 0:
        contrib = np.abs(weights) * np.sqrt(f_tilde.kernel.diag(points))
        drop = np.argsort(contrib, kind="stable")[:excess]
        keep = np.sort(np.setdiff1d(np.arange(points.shape[0]), drop))
        f_next = KernelExpansion(f_tilde.kernel, points[keep], weights[keep])
        err = diff_norm(f_tilde, f_next)
    else:
        f_next, err = f_tilde, 0.0
    if not np.all(np.isfinite(f_next.weights)):
        raise DivergenceError("non-finite weights in budgeted SGD step")
    return f_next, StepCertificate(err, f_tilde.order, f_next.order, cfg.alpha)


def uniform_centers(xs: np.ndarray, n_centers: int) -> np.ndarray:
    """Uniform grid over the bounding box of ``xs``.

    In one dimension this is ``n_centers`` evenly spaced points; in ``p > 1``
    dimensions a lattice with ``ceil(n_centers ** (1/p))`` points per axis.
    """
    xs = np.asarray(xs, dtype=float)
    lo, hi = xs.min(axis=0), xs.max(axis=0)
    p = xs.shape[1]
    if p == 1:
        return np.linspace(lo[0], hi[0], n_centers).reshape(-1, 1)
    k = int(np.ceil(n_centers ** (1.0 / p)))
    axes = [np.linspace(lo[i], hi[i], k) for i in range(p)]
    return np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)


@dataclass(frozen=True)
class RbfNetwork:
    """Fixed-basis model ``sum_i w_i exp(-||x - c_i||^2 / r^2)``."""

    centers: np.ndarray
    bandwidth: float
    weights: np.ndarray

    def __post_init__(self):
        c = as_points(self.centers)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != c.shape[0]:
            raise InputError(f"{w.shape[0]} weights for {c.shape[0]} centers")
        if not self.bandwidth > 0:
            raise InputError(f"RBF bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)

    @classmethod
    def on_data(cls, xs, n_centers: int = 50, bandwidth: float = 0.06) -> "RbfNetwork":
        c = uniform_centers(as_points(xs), n_centers)
        return cls(c, bandwidth, np.zeros(c.shape[0]))

    @property
    def order(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def features(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        diff = X[:, None, :] - self.centers[None, :, :]
        return np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / self.bandwidth**2)

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.features(x[None, :])[0] @ self.weights)

    def evaluate_many(self, X) -> np.ndarray:
        return self.features(X) @ self.weights


def rbf_sgd_iterate(net: RbfNetwork, sample, alpha: float, eta: float, tracker: TrackerState, beta: float = 0.01,
                    P: int = 4, lam: float = 0.0, problem: CompositionalProblem | None = None):
    """Quasi-gradient step of the moment-penalised loss in the fixed RBF feature basis.

    Uses the same momentum tracker and gradient atoms as COLK; atoms are
    projected onto the features instead of being appended.  ``problem``
    overrides the default ``MomentRegression(eta, P)``.  Returns
    ``(net_next, tracker_next)``.
    """
    if alpha < 0 or alpha * lam >= 1:
        raise InputError(f"need alpha >= 0 and alpha*lam < 1, got alpha={alpha}, lam={lam}")
    problem = problem or MomentRegression(eta, P)
    h_cur = problem.inner_h(net, sample)
    h_prev = problem.inner_h_at(tracker.prev_f, sample) if tracker.initialized else np.zeros_like(tracker.g)
    g = update_tracker(tracker, h_prev, h_cur, beta)
    atoms = problem.gradient_atoms(net, sample, g)
    grad = atoms.coeffs @ net.features(atoms.points)
    w = (1.0 - alpha * lam) * net.weights - alpha * grad
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
        raise DivergenceError("non-finite weights in RBF network step")
    return RbfNetwork(net.centers, net.bandwidth, w), TrackerState(g, net, True)
