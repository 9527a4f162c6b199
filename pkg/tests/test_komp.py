import numpy as np
import pytest
from hypothesis import given, strategies as st

from colk.errors import InputError
from colk.kernel import GaussianKernel, KernelExpansion, PolynomialKernel, diff_norm, hilbert_norm
from colk.komp import komp_prune, refit_weights, removal_error

from conftest import random_expansion


def test_removal_error_keep_all_is_zero(rng):
    f = random_expansion(rng, 6)
    assert removal_error(f, range(6)) < 1e-8


def test_removal_error_duplicate_pair(gauss):
    f = KernelExpansion(gauss, [[0.1], [0.4], [0.1]], [0.5, 1.0, -2.0])
    assert removal_error(f, [0, 1]) < 1e-7
    assert removal_error(f, [1, 2]) < 1e-7


def test_removal_error_single_atom(gauss):
    assert removal_error(KernelExpansion(gauss, [[0.3]], [-1.7]), []) == pytest.approx(1.7)


def test_removal_error_rejects_bad_index(gauss):
    with pytest.raises(InputError):
        removal_error(KernelExpansion(gauss, [[0.3]], [1.0]), [1])


def test_refit_identity_projection(rng):
    f = random_expansion(rng, 5)
    np.testing.assert_allclose(refit_weights(f.kernel, f.points, f), f.weights, atol=1e-8)


def test_refit_merges_duplicates(gauss):
    f = KernelExpansion(gauss, [[0.2], [0.2]], [0.3, 1.1])
    assert refit_weights(gauss, [[0.2]], f) == pytest.approx([1.4])


def test_refit_matches_least_squares_oracle(rng):
    k = GaussianKernel(0.5)
    for _ in range(30):
        M = int(rng.integers(2, 7))
        f = random_expansion(rng, M, bandwidth=0.5)
        keep = np.sort(rng.choice(M, size=int(rng.integers(1, M)), replace=False))
        D = f.points[keep]
        w = refit_weights(k, D, f)
        # minimise ||f - w.k_D|| = ||L^T (e - S w)|| with the full Gram's Cholesky-free factor
        K = k.matrix(f.points, f.points)
        evals, evecs = np.linalg.eigh(K)
        R = (evecs * np.sqrt(np.clip(evals, 0, None))).T
        S = np.zeros((M, keep.size))
        S[keep, np.arange(keep.size)] = 1.0
        ref = np.linalg.lstsq(R @ S, R @ f.weights, rcond=None)[0]
        np.testing.assert_allclose(w, ref, atol=1e-8)
        rhs = k.matrix(D, f.points) @ f.weights
        assert np.linalg.norm(k.matrix(D, D) @ w - rhs) < 1e-8 * max(np.linalg.norm(rhs), 1.0)


def test_prune_everything_when_budget_exceeds_norm(rng):
    f = random_expansion(rng, 6)
    res = komp_prune(f, hilbert_norm(f) * 1.01)
    assert res.function.order == 0
    assert res.final_error == pytest.approx(hilbert_norm(f), rel=1e-12)


def test_prune_infinite_budget(rng):
    f = random_expansion(rng, 4)
    res = komp_prune(f, np.inf)
    assert res.function.order == 0 and sorted(res.removed_indices) == [0, 1, 2, 3]


def test_duplicates_merge_at_zero_budget(gauss):
    f = KernelExpansion(gauss, [[0.3], [0.3]], [0.25, 0.5])
    res = komp_prune(f, 0.0)
    assert res.function.order == 1
    assert res.function.weights[0] == 0.75
    assert res.final_error == 0.0
    assert res.removed_indices == (0,)


def test_zero_budget_distinct_atoms_keeps_all(rng):
    f = random_expansion(rng, 8)
    res = komp_prune(f, 0.0)
    assert res.function.order == 8 and res.final_error == 0.0


def test_empty_input(gauss):
    res = komp_prune(KernelExpansion.zero(gauss, 1), 0.1)
    assert res.function.order == 0 and res.final_error == 0.0


def test_negative_budget_rejected(rng):
    with pytest.raises(InputError):
        komp_prune(random_expansion(rng, 2), -1e-3)


def test_tie_break_lowest_index(gauss):
    # two far-apart atoms with equal weight magnitude: identical removal errors
    f = KernelExpansion(gauss, [[-0.9], [0.9]], [1.0, -1.0])
    res = komp_prune(f, 1.0)
    assert res.removed_indices[0] == 0


def test_weight_norm_safeguard(rng):
    k = GaussianKernel(1.0)
    pts = np.array([[0.0], [1e-3], [2e-3]])
    f = KernelExpansion(k, pts, [1e3, -2e3, 1e3])
    res = komp_prune(f, 1e-3, w_max=10.0)
    if res.removed_indices:
        assert np.linalg.norm(res.function.weights) <= 10.0 + 1e-12


def test_polynomial_kernel_removes_dependent_atoms():
    # degree-1 polynomial features span 2 dimensions, so 2 of the 4 atoms are redundant;
    # the jittered inverse scores them at ~1e-5, hence the small but non-tiny budget
    k = PolynomialKernel(1.0, 1)
    f = KernelExpansion(k, [[0.0], [1.0], [2.0], [3.0]], [1.0, -1.0, 0.5, 2.0])
    res = komp_prune(f, 1e-4)
    assert res.function.order == 2
    assert diff_norm(res.function, f) < 1e-7
    assert komp_prune(f, 1e-9).final_error <= 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(0, 1.5))
def test_budget_contract_and_bookkeeping(seed, frac):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(1, 9))
    f = KernelExpansion(GaussianKernel(rng.uniform(0.05, 1.0)), rng.uniform(-1, 1, (M, 2)), rng.normal(size=M))
    eps = frac * hilbert_norm(f)
    res = komp_prune(f, eps)
    assert diff_norm(res.function, f) <= eps + 1e-9
    assert res.final_error <= eps + 1e-9
    assert res.function.order + len(res.removed_indices) == M
    assert len(set(res.removed_indices)) == len(res.removed_indices)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_reprune_with_residual_budget_is_idempotent(seed, frac):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(2, 9))
    f = random_expansion(rng, M, bandwidth=0.4)
    eps = frac * hilbert_norm(f)
    first = komp_prune(f, eps)
    rest = np.sqrt(max(eps**2 - first.final_error**2, 0.0)) * (1 - 1e-9)
    assert komp_prune(first.function, rest).removed_indices == ()


def test_ill_conditioned_dictionary_respects_budget(rng):
    k = GaussianKernel(0.5)
    pts = np.sort(rng.uniform(-1, 1, (8, 1)), axis=0) * 1e-3
    f = KernelExpansion(k, pts, rng.normal(size=8))
    for eps in (0.0, 1e-8, 1e-4, 1e-2):
        assert diff_norm(komp_prune(f, eps).function, f) <= eps + 1e-9
