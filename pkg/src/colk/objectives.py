"""Compositional problems: the inner/outer map pair a learner descends on.

A problem supplies the inner map ``h_xi(f(xi))`` that the tracker averages
and the atoms of the quasi-gradient ``<h'(f(xi)), l'(g)> k(xi, .)`` for a
given tracked value ``g``.  :class:`MomentRegression` is the risk-sensitive
regression instance: square loss plus central moments of the loss up to
order ``P``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernel import KernelExpansion, as_points


@dataclass(frozen=True)
class RegressionSample:
    """Two independent draws ``(x, y)`` and ``(x', y')`` from the data stream."""

    x: np.ndarray
    y: float
    x_prime: np.ndarray
    y_prime: float

    @classmethod
    def make(cls, x, y, x_prime, y_prime) -> "RegressionSample":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
        if x.shape != x_prime.shape or x.ndim != 1:
            raise InputError(f"sample points must share one dimension, got {x.shape} and {x_prime.shape}")
        return cls(x, float(y), x_prime, float(y_prime))


@dataclass(frozen=True)
class GradientAtoms:
    """Kernel atoms of a functional stochastic gradient.

    The gradient is ``sum_i coeffs[i] * k(points[i], .)``; a learner scales
    it by ``-alpha``.
    """

    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] != c.shape[0]:
            raise InputError(f"{c.shape[0]} coefficients for points of shape {pts.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.shape[0]


class CompositionalProblem(ABC):
    """Objective ``E_theta[ l_theta( E_xi[ h_xi(f(xi)) ] ) ]``.

    Subclasses define the inner map and the quasi-gradient atoms; ``m`` is
    the inner output dimension (length of the tracked vector ``g``).
    """

    m: int = 1

    @abstractmethod
    def inner_h(self, f: KernelExpansion, sample) -> np.ndarray:
        """Instantaneous inner map evaluated with function ``f``."""

    def inner_h_at(self, f_prev: KernelExpansion, sample) -> np.ndarray:
        """Inner map at a previous iterate (same sample); used by the momentum tracker."""
        return self.inner_h(f_prev, sample)

    @abstractmethod
    def gradient_atoms(self, f: KernelExpansion, sample, g: np.ndarray) -> GradientAtoms:
        ...

    @abstractmethod
    def loss_estimate(self, f: KernelExpansion, sample, g: np.ndarray) -> float:
        """Single-sample objective value with the inner expectation replaced by ``g``."""


def square_loss(f: KernelExpansion, x, y: float) -> float:
    return (f(x) - y) ** 2


def moment_dispersion_estimate(losses, P: int = 4) -> float:
    """Sum of the empirical central moments of orders ``2..P`` of ``losses``."""
    a = np.asarray(losses, dtype=float).reshape(-1)
    if a.size == 0:
        raise InputError("dispersion of an empty loss sample is undefined")
    _check_order(P)
    dev = a - a.mean()
    return float(sum(np.mean(dev**p) for p in range(2, P + 1)))


def smoothed_semivariance_pos(z, tau: float):
    """Softplus surrogate ``tau * log(1 + exp(z / tau))`` of ``max(z, 0)``."""
    if not tau > 0:
        raise InputError(f"smoothing temperature must be positive, got {tau!r}")
    out = tau * np.logaddexp(0.0, np.asarray(z, dtype=float) / tau)
    return float(out) if np.ndim(out) == 0 else out


def _check_order(P):
    if P not in (2, 3, 4):
        raise InputError(f"moment order P must be 2, 3 or 4, got {P!r}")


class MomentRegression(CompositionalProblem):
    """Square loss plus ``eta`` times central loss moments of orders 2..P.

    The tracker follows the expected loss (``m = 1``); with ``g`` frozen the
    instantaneous objective is

        (f(x) - y)^2 + eta * sum_p ((f(x) - y)^2 - g)^p

    whose quasi-gradient puts one atom at ``x`` and one at ``x'``.  ``tau``
    enables the softplus-projected (semi-deviation) variant of the moments.
    """

    m = 1

    def __init__(self, eta: float = 0.1, P: int = 4, tau: float | None = None):
        if not eta >= 0:
            raise InputError(f"dispersion weight eta must be >= 0, got {eta!r}")
        _check_order(P)
        if tau is not None and not tau > 0:
            raise InputError(f"tau must be positive, got {tau!r}")
        self.eta = float(eta)
        self.P = int(P)
        self.tau = tau

    def __repr__(self):
        return f"MomentRegression(eta={self.eta}, P={self.P}, tau={self.tau})"

    def inner_h(self, f, sample):
        return np.array([(f(sample.x_prime) - sample.y_prime) ** 2])

    def _deviation(self, z):
        if self.tau is None:
            return z, 1.0
        s = self.tau * np.logaddexp(0.0, z / self.tau)
        return s, 0.5 * (1.0 + np.tanh(0.5 * z / self.tau))

    def moment_weight(self, loss: float, g: float) -> float:
        """``sum_{p=2}^P m(p, g)`` with ``m(p, g) = p (loss - g)^(p-1)`` (chain factor included when smoothed)."""
        s, ds = self._deviation(np.float64(loss - g))
        with np.errstate(over="ignore", invalid="ignore"):
            return float(sum(p * s ** (p - 1) for p in range(2, self.P + 1)) * ds)

    def gradient_atoms(self, f, sample, g):
        r = f(sample.x) - sample.y
        r_prime = f(sample.x_prime) - sample.y_prime
        S = self.moment_weight(r * r, float(np.asarray(g).reshape(-1)[0]))
        coeffs = np.array([2.0 * r * (1.0 + self.eta * S), -2.0 * r_prime * self.eta * S])
        return GradientAtoms(np.vstack([sample.x, sample.x_prime]), coeffs)

    def loss_estimate(self, f, sample, g):
        loss = (f(sample.x) - sample.y) ** 2
        s, _ = self._deviation(loss - float(np.asarray(g).reshape(-1)[0]))
        return float(loss + self.eta * sum(s**p for p in range(2, self.P + 1)))

    def population_objective(self, f: KernelExpansion, X, y) -> float:
        """Plug-in objective on a data set: mean loss plus ``eta`` times dispersion."""
        losses = (f.evaluate_many(as_points(X, f.dim)) - np.asarray(y, dtype=float)) ** 2
        if self.tau is None:
            disp = moment_dispersion_estimate(losses, self.P)
        else:
            s = smoothed_semivariance_pos(losses - losses.mean(), self.tau)
            disp = float(sum(np.mean(s**p) for p in range(2, self.P + 1)))
        return float(losses.mean() + self.eta * disp)
