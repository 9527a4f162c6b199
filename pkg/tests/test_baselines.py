import numpy as np
import pytest
from hypothesis import given, strategies as st

from colk.baselines import (
    RbfNetwork,
    averaging_rule,
    budgeted_sgd_iterate,
    polk_iterate,
    rbf_sgd_iterate,
    scgd_tracker_update,
    uniform_centers,
)
from colk.colk import LearnerConfig, TrackerState, colk_iterate
from colk.errors import InputError
from colk.kernel import GaussianKernel, KernelExpansion
from colk.objectives import MomentRegression, RegressionSample

K = GaussianKernel(0.06)


def stream(rng, n, f=lambda x: 2 * x + 3 * np.sin(6 * x), noise=0.3):
    xs = rng.uniform(-1, 1, 2 * n)
    ys = 0.25 * (f(xs) + noise * rng.standard_normal(2 * n))
    return [RegressionSample.make(xs[2 * t], ys[2 * t], xs[2 * t + 1], ys[2 * t + 1]) for t in range(n)]


def test_polk_single_step():
    cfg = LearnerConfig(alpha=0.5, lam=0.0, eps=0.0, eta=0.0)
    f, cert = polk_iterate(KernelExpansion.zero(K, 1), RegressionSample.make(0.0, 1.0, 0.0, 1.0), cfg)
    assert f.points.tolist() == [[0.0]] and f.weights.tolist() == [1.0]
    assert cert.projection_error == 0.0


@pytest.mark.parametrize("eps", [0.0, 0.5 * 0.09 * 0.5**2, 0.09 * 0.5**2])
def test_polk_equals_colk_without_dispersion(rng, eps):
    cfg = LearnerConfig(alpha=0.5, eps=eps, eta=0.0)
    f_p = f_c = KernelExpansion.zero(K, 1)
    tr = TrackerState.initial(1, K, 1)
    prob = MomentRegression(eta=0.0)
    for s in stream(rng, 100):
        f_p, _ = polk_iterate(f_p, s, cfg)
        f_c, tr, _ = colk_iterate(f_c, tr, s, prob, cfg)
        assert f_p.order == f_c.order
        np.testing.assert_allclose(f_c.weights, f_p.weights, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(f_c.points, f_p.points)


def test_polk_with_huge_budget_stays_zero(rng):
    cfg = LearnerConfig(alpha=0.5, eps=1e6, eta=0.0)
    f = KernelExpansion.zero(K, 1)
    for s in stream(rng, 20):
        f, _ = polk_iterate(f, s, cfg)
        assert f.order == 0


def test_scgd_examples():
    assert scgd_tracker_update(0.3, 0.9, 1.0) == 0.9
    assert scgd_tracker_update(0.5, 0.7, 0.1) == pytest.approx(0.52)
    g, c = 5.0, 2.0
    for t in range(1, 50):
        g = scgd_tracker_update(g, c, 0.2)
        assert g - c == pytest.approx(3.0 * 0.8**t)


def test_averaging_rule_plugs_into_colk(rng):
    cfg = LearnerConfig()
    prob = MomentRegression()
    f, tr = KernelExpansion.zero(K, 1), TrackerState.initial(1, K, 1)
    for s in stream(rng, 30):
        g_before = tr.g[0]
        h = prob.inner_h(f, s)[0]
        f, tr, _ = colk_iterate(f, tr, s, prob, cfg, averaging_rule)
        assert tr.g[0] == pytest.approx((1 - cfg.beta) * g_before + cfg.beta * h, abs=1e-15)


def test_bsgd_unbounded_budget_matches_polk(rng):
    cfg = LearnerConfig(alpha=0.5, eps=0.0, eta=0.0)
    f_b = f_p = KernelExpansion.zero(K, 1)
    for s in stream(rng, 60):
        f_b, _ = budgeted_sgd_iterate(f_b, s, cfg, 10**9)
        f_p, _ = polk_iterate(f_p, s, cfg)
        np.testing.assert_array_equal(f_b.weights, f_p.weights)


@pytest.mark.parametrize("cap", [1, 3, 10])
def test_bsgd_cap(rng, cap):
    cfg = LearnerConfig(alpha=0.5, eta=0.0)
    f = KernelExpansion.zero(K, 1)
    for s in stream(rng, 80):
        f, cert = budgeted_sgd_iterate(f, s, cfg, cap)
        assert f.order <= cap
        assert cert.projection_error >= 0
    assert f.order == cap


def test_bsgd_drops_smallest_contribution():
    cfg = LearnerConfig(alpha=0.5, lam=0.0, eta=0.0)
    f = KernelExpansion(K, [[-0.5], [0.5]], [0.05, 2.0])
    out, cert = budgeted_sgd_iterate(f, RegressionSample.make(0.0, 1.0, 0.0, 1.0), cfg, 2)
    assert out.points.tolist() == [[0.5], [0.0]]
    assert cert.projection_error == pytest.approx(0.05)


def test_bsgd_rejects_zero_cap():
    with pytest.raises(InputError):
        budgeted_sgd_iterate(KernelExpansion.zero(K, 1), RegressionSample.make(0, 0, 0, 0), LearnerConfig(), 0)


def test_rbf_defaults_and_grid():
    net = RbfNetwork.on_data(np.linspace(-1, 1, 30)[:, None])
    assert net.order == 50 and net.bandwidth == 0.06
    np.testing.assert_allclose(net.centers[[0, -1], 0], [-1.0, 1.0])
    assert uniform_centers(np.array([[0.0, 0.0], [1.0, 2.0]]), 9).shape == (9, 2)


def test_rbf_zero_step_size_keeps_weights(rng):
    net = RbfNetwork.on_data(rng.uniform(-1, 1, (20, 1)))
    net = RbfNetwork(net.centers, net.bandwidth, rng.normal(size=net.order))
    out, _ = rbf_sgd_iterate(net, stream(rng, 1)[0], 0.0, 0.1, TrackerState(np.zeros(1), net, False))
    np.testing.assert_array_equal(out.weights, net.weights)


def test_rbf_first_step_least_squares(rng):
    net = RbfNetwork.on_data(rng.uniform(-1, 1, (20, 1)))
    alpha, x, y = 0.1, 0.37, 0.8
    s = RegressionSample.make(x, y, -0.2, 0.4)
    out, tr = rbf_sgd_iterate(net, s, alpha, 0.0, TrackerState(np.zeros(1), net, False))
    np.testing.assert_allclose(out.weights, alpha * 2 * y * net.features([[x]])[0], rtol=0, atol=1e-15)
    assert out.order == net.order and tr.initialized


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_rbf_linear_in_weights(seed, a, b):
    rng = np.random.default_rng(seed)
    c = np.linspace(-1, 1, 50)[:, None]
    w1, w2 = rng.normal(size=50), rng.normal(size=50)
    u = rng.uniform(-1, 1, (7, 1))
    lhs = RbfNetwork(c, 0.06, a * w1 + b * w2).evaluate_many(u)
    rhs = a * RbfNetwork(c, 0.06, w1).evaluate_many(u) + b * RbfNetwork(c, 0.06, w2).evaluate_many(u)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_rbf_validation():
    with pytest.raises(InputError):
        RbfNetwork(np.zeros((3, 1)), 0.06, np.zeros(2))
    with pytest.raises(InputError):
        RbfNetwork(np.zeros((3, 1)), 0.0, np.zeros(3))


def test_rbf_learns(rng):
    samples = stream(rng, 3000)
    net = RbfNetwork.on_data(np.array([[-1.0], [1.0]]))
    tr = TrackerState(np.zeros(1), net, False)
    for s in samples:
        net, tr = rbf_sgd_iterate(net, s, 0.02, 0.1, tr)
    u = np.linspace(-0.9, 0.9, 50)[:, None]
    truth = 0.25 * (2 * u[:, 0] + 3 * np.sin(6 * u[:, 0]))
    assert np.mean((net.evaluate_many(u) - truth) ** 2) < 0.05 * np.mean(truth**2)
