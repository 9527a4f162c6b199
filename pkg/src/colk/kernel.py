"""Kernels, Gram matrices and finite kernel expansions in an RKHS.

Points are stored row-wise: a dictionary of ``M`` model points in ``R^p`` is a
``(M, p)`` array.  A function ``f = sum_n w_n k(d_n, .)`` is a
:class:`KernelExpansion`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InputError

# Cholesky jitter escalation bounds, relative to the mean Gram diagonal.
JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GaussianKernel:
    """``k(u, v) = exp(-||u - v||^2 / (2 c^2))`` with bandwidth ``c``."""

    bandwidth: float

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InputError(f"Gaussian bandwidth must be positive, got {self.bandwidth!r}")

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        diff = A[:, None, :] - B[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        return np.exp(sq * (-0.5 / self.bandwidth**2))

    def diag(self, A: np.ndarray) -> np.ndarray:
        return np.ones(A.shape[0])

    @property
    def strictly_pd(self) -> bool:
        return True


@dataclass(frozen=True)
class PolynomialKernel:
    """``k(u, v) = (u.v + b)^deg``."""

    offset: float = 1.0
    degree: int = 2

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InputError(f"polynomial degree must be a positive integer, got {self.degree!r}")

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return (A @ B.T + self.offset) ** int(self.degree)

    def diag(self, A: np.ndarray) -> np.ndarray:
        return (np.einsum("ij,ij->i", A, A) + self.offset) ** int(self.degree)

    @property
    def strictly_pd(self) -> bool:
        return False


Kernel = Union[GaussianKernel, PolynomialKernel]


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a float ``(n, p)`` array.

    Scalars become a single 1-d point, 1-d arrays are read as one point when
    ``dim`` is ``None`` or equals their length, and as ``n`` scalar points when
    ``dim == 1``.
    """
    A = np.asarray(X, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        if dim == 1 and A.shape[0] != 1:
            A = A.reshape(-1, 1)
        else:
            A = A.reshape(1, -1)
    elif A.ndim != 2:
        raise InputError(f"points must be at most 2-d, got shape {A.shape}")
    if dim is not None and A.shape[1] != dim:
        raise InputError(f"dimension mismatch: expected p={dim}, got p={A.shape[1]}")
    return A


def _as_point(u, dim: int | None = None) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1:
        raise InputError(f"a point must be a vector, got shape {u.shape}")
    if dim is not None and u.shape[0] != dim:
        raise InputError(f"dimension mismatch: expected p={dim}, got p={u.shape[0]}")
    return u


def eval_kernel(k: Kernel, u, v) -> float:
    u = _as_point(u)
    v = _as_point(v, u.shape[0])
    return float(k.matrix(u[None, :], v[None, :])[0, 0])


def kernel_matrix(k: Kernel, D1, D2) -> np.ndarray:
    """Gram matrix with entries ``k(D1[i], D2[j])``."""
    A = np.asarray(D1, dtype=float)
    B = np.asarray(D2, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise InputError("dictionaries must be (M, p) arrays")
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: p={A.shape[1]} vs p={B.shape[1]}")
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    return k.matrix(A, B)


# -- linear algebra on Gram matrices -------------------------------------------


def _jittered_cholesky(K: np.ndarray):
    """Cholesky factor of ``K``, retried with escalating diagonal jitter, or ``None``."""
    M = K.shape[0]
    try:
        return cho_factor(K, lower=True, check_finite=False)
    except LinAlgError:
        pass
    scale = float(np.trace(K)) / M if M else 1.0
    if not scale > 0:
        scale = 1.0
    jitter = JITTER_START * scale
    eye = np.eye(M)
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        try:
            return cho_factor(K + jitter * eye, lower=True, check_finite=False)
        except LinAlgError:
            jitter *= 10.0
    return None


def psd_solve(K: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``K x = b`` for symmetric PSD ``K``.

    Plain Cholesky first; on failure the diagonal is jittered by
    ``1e-10 * trace(K)/M``, escalating x10 up to ``1e-6 * trace(K)/M``, and
    least squares is the last resort.
    """
    if K.shape[0] == 0:
        return np.zeros(b.shape)
    c = _jittered_cholesky(K)
    if c is None:
        return np.linalg.lstsq(K, b, rcond=None)[0]
    return cho_solve(c, b, check_finite=False)


def psd_inverse(K: np.ndarray) -> np.ndarray:
    """Inverse of ``K`` via the same factorization as :func:`psd_solve`."""
    M = K.shape[0]
    if M == 0:
        return np.zeros((0, 0))
    c = _jittered_cholesky(K)
    if c is None:
        return np.linalg.pinv(K, hermitian=True)
    inv = cho_solve(c, np.eye(M), check_finite=False)
    return 0.5 * (inv + inv.T)


def merge_duplicates(points: np.ndarray, weights: np.ndarray):
    """Sum the weights of bit-identical points.

    Returns ``(points, weights)`` with unique rows.  The represented function
    is unchanged; quadratic forms on the merged representation avoid the
    cancellation that exact duplicates otherwise cause.
    """
    if points.shape[0] < 2:
        return points, weights
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    if uniq.shape[0] == points.shape[0]:
        return points, weights
    merged = np.bincount(inverse.ravel(), weights=weights, minlength=uniq.shape[0])
    return uniq, merged


def quad_norm(k: Kernel, points: np.ndarray, weights: np.ndarray) -> float:
    """``||sum_n w_n k(d_n, .)||_H`` computed on the merged representation."""
    if points.shape[0] == 0:
        return 0.0
    points, weights = merge_duplicates(points, weights)
    q = float(weights @ (k.matrix(points, points) @ weights))
    return float(np.sqrt(q)) if q > 0 else 0.0


# -- kernel expansions ---------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    """RKHS element ``f(.) = sum_n weights[n] * kernel(points[n], .)``.

    Parameters
    ----------
    kernel : GaussianKernel or PolynomialKernel
    points : ndarray, shape (M, p)
        Dictionary of model points, one per row.
    weights : ndarray, shape (M,)
    """

    kernel: Kernel
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise InputError(f"points must be an (M, p) array, got shape {pts.shape}")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise InputError(f"{w.shape[0]} weights for {pts.shape[0]} dictionary points")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def zero(cls, kernel: Kernel, dim: int) -> "KernelExpansion":
        return cls(kernel, np.zeros((0, dim)), np.zeros(0))

    @property
    def order(self) -> int:
        """Model order: number of dictionary points."""
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __call__(self, u) -> float:
        return evaluate(self, u)

    def evaluate_many(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        if self.order == 0:
            return np.zeros(X.shape[0])
        return self.kernel.matrix(X, self.points) @ self.weights

    def with_weights(self, weights) -> "KernelExpansion":
        return KernelExpansion(self.kernel, self.points, weights)

    def __repr__(self):
        return f"KernelExpansion(order={self.order}, dim={self.dim}, kernel={self.kernel!r})"


def evaluate(f: KernelExpansion, u) -> float:
    u = _as_point(u, f.dim)
    if f.order == 0:
        return 0.0
    return float(f.kernel.matrix(u[None, :], f.points)[0] @ f.weights)


def _check_compatible(f: KernelExpansion, g: KernelExpansion):
    if f.kernel != g.kernel:
        raise InputError(f"kernel mismatch: {f.kernel!r} vs {g.kernel!r}")
    if f.dim != g.dim:
        raise InputError(f"dimension mismatch: p={f.dim} vs p={g.dim}")


def hilbert_inner(f: KernelExpansion, g: KernelExpansion) -> float:
    _check_compatible(f, g)
    if f.order == 0 or g.order == 0:
        return 0.0
    return float(f.weights @ (f.kernel.matrix(f.points, g.points) @ g.weights))


def hilbert_norm(f: KernelExpansion) -> float:
    return quad_norm(f.kernel, f.points, f.weights)


def diff_norm(f: KernelExpansion, g: KernelExpansion) -> float:
    """``||f - g||_H`` over the concatenated dictionary with weights ``(w_f, -w_g)``."""
    _check_compatible(f, g)
    points = np.vstack([f.points, g.points])
    weights = np.concatenate([f.weights, -g.weights])
    return quad_norm(f.kernel, points, weights)


def subspace_distance(k: Kernel, D, xi) -> float:
    """Distance from ``k(xi, .)`` to ``span{k(d, .) : d in D}``.

    The projection coefficients solve ``K_DD v = k_D(xi)``; the residual
    ``k(xi, .) - v^T k_D(.)`` is then measured directly.
    """
    xi = _as_point(xi)
    if np.size(D) == 0:
        D = np.zeros((0, xi.shape[0]))
    else:
        D = as_points(D, xi.shape[0])
    if D.shape[0] == 0:
        return float(np.sqrt(max(k.diag(xi[None, :])[0], 0.0)))
    v = psd_solve(k.matrix(D, D), k.matrix(D, xi[None, :])[:, 0])
    points = np.vstack([xi[None, :], D])
    return quad_norm(k, points, np.concatenate([[1.0], -v]))
