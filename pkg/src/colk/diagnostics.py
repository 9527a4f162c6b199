"""Executable checks of the method's verifiable mathematics.

Each check returns a :class:`CheckReport` with a PASS/FAIL verdict, the
worst-case magnitude it observed and the threshold it was held to.
:func:`run_diagnostics` runs the whole suite and writes one text and one CSV
file per check plus a ``diagnostics.csv`` roll-up.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colk import TrackerState, update_tracker
from .errors import InputError
from .kernel import GaussianKernel, KernelExpansion
from .komp import komp_prune
from .objectives import MomentRegression, RegressionSample


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    threshold: float
    details: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    columns: tuple = ()

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"{self.status} {self.name} worst={self.worst:.6g} threshold={self.threshold:.6g}"

    def text(self) -> str:
        out = [self.line()]
        out += [f"  {k}: {v}" for k, v in self.details.items()]
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.name}.txt").write_text(self.text(), encoding="utf-8")
        if self.columns:
            (out / f"{self.name}.csv").write_text(self.csv(), encoding="utf-8")


# -- gradient atoms ----------------------------------------------------------

def _frozen_surrogate(problem: MomentRegression, f: KernelExpansion, f0: KernelExpansion, sample, g: float) -> float:
    # the tracked inner value moves with f only through the x' draw
    shift = (f(sample.x_prime) - sample.y_prime) ** 2 - (f0(sample.x_prime) - sample.y_prime) ** 2
    return problem.loss_estimate(f, sample, np.array([g + shift]))


def check_gradient_atoms(problem: MomentRegression | None = None, n_trials: int = 100, fd_step: float = 1e-6,
                         seed: int = 0, kernel=None, tol: float = 1e-5) -> CheckReport:
    """Compare the quasi-gradient atoms with central differences of the frozen-``g`` surrogate.

    The parameters differentiated are the weights of a random expansion
    (order <= 5) plus zero-initialised coefficients of new atoms at ``x``,
    ``x'`` and a random point.  The relative error of a trial is
    ``max|fd - analytic| / max|analytic|``.
    """
    if not fd_step > 0:
        raise InputError(f"fd_step must be > 0, got {fd_step}")
    problem = problem or MomentRegression(0.1, 4)
    kernel = kernel or GaussianKernel(0.5)
    rng = np.random.default_rng(seed)
    rows, worst = [], 0.0
    for trial in range(n_trials):
        M = int(rng.integers(0, 6))
        pts = rng.uniform(-1, 1, (M, 1))
        f0 = KernelExpansion(kernel, pts, rng.normal(0, 0.5, M))
        sample = RegressionSample.make(rng.uniform(-1, 1), rng.normal(0, 0.5), rng.uniform(-1, 1), rng.normal(0, 0.5))
        g = float(rng.uniform(0, 1))
        params = np.vstack([pts, sample.x[None, :], sample.x_prime[None, :], rng.uniform(-1, 1, (1, 1))])
        w0 = np.concatenate([f0.weights, np.zeros(3)])

        atoms = problem.gradient_atoms(f0, sample, np.array([g]))
        analytic = atoms.coeffs @ kernel.matrix(atoms.points, params)
        fd = np.empty_like(w0)
        for i in range(w0.size):
            e = np.zeros_like(w0)
            e[i] = fd_step
            hi = _frozen_surrogate(problem, KernelExpansion(kernel, params, w0 + e), f0, sample, g)
            lo = _frozen_surrogate(problem, KernelExpansion(kernel, params, w0 - e), f0, sample, g)
            fd[i] = (hi - lo) / (2 * fd_step)
        scale = max(float(np.max(np.abs(analytic))), 1e-300)
        rel = float(np.max(np.abs(fd - analytic)) / scale)
        worst = max(worst, rel)
        rows.append((trial, M, g, rel))
    return CheckReport(
        "gradient_atoms", worst < tol, worst, tol,
        {"problem": repr(problem), "n_trials": n_trials, "fd_step": fd_step, "kernel": repr(kernel)},
        rows, ("trial", "order", "g", "rel_error"),
    )


# -- KOMP oracle -------------------------------------------------------------

def _oracle_gamma(K: np.ndarray, group: np.ndarray, n_groups: int, w: np.ndarray, keep: list) -> float:
    r = w.copy()
    if keep:
        v = np.linalg.lstsq(K[np.ix_(keep, keep)], K[keep] @ w, rcond=None)[0]
        r[keep] -= v
    merged = np.bincount(group, weights=r, minlength=n_groups)
    _, first = np.unique(group, return_index=True)
    q = float(merged @ K[np.ix_(first, first)] @ merged)
    return float(np.sqrt(max(q, 0.0)))


def check_komp_oracle(n_instances: int = 200, max_M: int = 8, seed: int = 0, eps: float | None = None,
                      tie_tol: float = 1e-10, budget_tol: float = 1e-9) -> CheckReport:
    """Replay every greedy KOMP step against exhaustive single-removal search.

    Instances draw a random Gaussian bandwidth, order ``1..max_M``, dimension
    1 or 2 and a budget up to 1.5 ``||f~||`` (or the fixed ``eps``); every
    fourth instance duplicates an atom.  A step agrees when the removed
    atom's exhaustive error is within ``tie_tol`` of the best; stopping
    agrees when every remaining removal exceeds the budget.
    """
    if not 1 <= max_M <= 8:
        raise InputError(f"max_M must lie in [1, 8], got {max_M}")
    rng = np.random.default_rng(seed)
    rows, worst_tie, worst_budget, mismatches = [], 0.0, -np.inf, 0
    for inst in range(n_instances):
        M = int(rng.integers(1, max_M + 1))
        kern = GaussianKernel(float(rng.uniform(0.1, 1.0)))
        P = rng.uniform(-1, 1, (M, int(rng.integers(1, 3))))
        if inst % 4 == 3 and M > 1:
            P[M - 1] = P[0]
        w = rng.normal(size=M)
        f = KernelExpansion(kern, P, w)
        K = kern.matrix(P, P)
        _, group = np.unique(P, axis=0, return_inverse=True)
        group = group.ravel()
        n_groups = int(group.max()) + 1
        norm = _oracle_gamma(K, group, n_groups, w, [])
        budget = float(rng.uniform(0, 1.5)) * norm if eps is None else eps
        res = komp_prune(f, budget)

        alive, ok, tie_gap = list(range(M)), True, 0.0
        for j in res.removed_indices:
            gammas = {c: _oracle_gamma(K, group, n_groups, w, [s for s in alive if s != c]) for c in alive}
            best = min(gammas.values())
            tie_gap = max(tie_gap, gammas[j] - best)
            if gammas[j] - best >= tie_tol or gammas[j] > budget + budget_tol:
                ok = False
            alive.remove(j)
        if alive:
            best_rest = min(_oracle_gamma(K, group, n_groups, w, [s for s in alive if s != c]) for c in alive)
            if best_rest <= budget - tie_tol:
                ok = False
        final = _oracle_gamma(K, group, n_groups, w, alive) if alive else norm
        over = max(res.final_error, final) - budget
        if over > budget_tol:
            ok = False
        worst_tie = max(worst_tie, tie_gap)
        worst_budget = max(worst_budget, over)
        mismatches += not ok
        rows.append((inst, M, budget, len(res.removed_indices), res.final_error, tie_gap, int(ok)))
    return CheckReport(
        "komp_oracle", mismatches == 0, worst_tie, tie_tol,
        {"n_instances": n_instances, "max_M": max_M, "mismatches": mismatches,
         "agreement": f"{100.0 * (n_instances - mismatches) / max(n_instances, 1):.1f}%",
         "worst_final_error_minus_eps": worst_budget},
        rows, ("instance", "order", "eps", "n_removed", "final_error", "tie_gap", "agree"),
    )


# -- Proposition 1 -----------------------------------------------------------

def check_prop1(run, eps: float | None = None, alpha: float | None = None) -> CheckReport:
    """Every recorded and per-iteration projection gap is at most ``eps/alpha + 1e-9/alpha``."""
    eps = run.eps if eps is None else eps
    alpha = run.alpha if alpha is None else alpha
    bound = (eps + 1e-9) / alpha
    gaps = np.concatenate([np.asarray(run.gaps, dtype=float), run.column("projection_gap")])
    worst = float(gaps.max()) if gaps.size else 0.0
    n_bad = int(np.sum(gaps > bound))
    rows = [(r[0], r[4]) for r in run.records]
    return CheckReport(
        "prop1", n_bad == 0, worst, bound,
        {"method": run.method, "eps": eps, "alpha": alpha, "n_iterations": len(run.gaps), "violations": n_bad},
        rows, ("iter", "projection_gap"),
    )


# -- tracking rate -----------------------------------------------------------

def check_tracking_rate(beta: float, n_chains: int = 1000, T: int = 500, seed: int = 0, h_mean: float = 1.0,
                        h_sd: float = 0.01, g0: float = 0.0, rel_tol: float = 0.10) -> CheckReport:
    """Fit the geometric decay of the momentum tracker's mean bias with the iterate frozen.

    With ``f_t = f_{t-1}`` both inner evaluations use the same draw, so each
    chain follows ``g <- (1 - beta) g + beta h``.  The bias ``mean(g_t) - E[h]``
    is fit as ``log|bias_t| ~ a + rate * t`` over the leading window where
    ``|bias_t|`` exceeds both five standard errors and ``1e3`` machine
    epsilons of ``max(|E h|, |g0|)``.
    """
    if not 0 < beta < 1:
        raise InputError(f"beta must lie in (0, 1), got {beta}")
    rng = np.random.default_rng(seed)
    state = TrackerState(np.full(n_chains, float(g0)), None, True)
    bias, se = [float(g0 - h_mean)], [0.0]
    for _ in range(T):
        h = h_mean + h_sd * rng.standard_normal(n_chains)
        state = TrackerState(update_tracker(state, h, h, beta), None, True)
        bias.append(float(state.g.mean() - h_mean))
        se.append(float(state.g.std(ddof=1) / np.sqrt(n_chains)) if n_chains > 1 else 0.0)
    bias, se = np.array(bias), np.array(se)
    floor = np.maximum(5.0 * se, 1e3 * np.finfo(float).eps * max(abs(h_mean), abs(g0)))
    above = np.abs(bias) > floor
    n_win = int(np.argmin(above)) if not above.all() else above.size
    target = float(np.log1p(-beta))
    rows = [(t, bias[t], se[t], int(t < n_win)) for t in range(bias.size)]
    if n_win < 2:
        return CheckReport(f"tracking_rate_beta{beta:g}", False, float("inf"), rel_tol,
                           {"beta": beta, "window": n_win, "reason": "bias below noise floor before two points"},
                           rows, ("t", "bias", "std_error", "in_window"))
    t = np.arange(n_win)
    rate = float(np.polyfit(t, np.log(np.abs(bias[:n_win])), 1)[0])
    rel = abs(rate - target) / abs(target)
    return CheckReport(
        f"tracking_rate_beta{beta:g}", rel <= rel_tol, rel, rel_tol,
        {"beta": beta, "fitted_rate": rate, "target_rate": target, "window": n_win, "n_chains": n_chains, "T": T,
         "truncation": "first t with |bias| <= max(5 SE, 1e3 eps_mach scale)"},
        rows, ("t", "bias", "std_error", "in_window"),
    )


# -- model order plateau -----------------------------------------------------

def check_model_order_plateau(run, tail_frac: float = 0.2, min_length: int = 1000) -> CheckReport:
    """No growth of the model order in the final ``tail_frac`` of the run.

    PASS iff the largest order in the tail does not exceed the largest order
    before it.  ``run`` is a :class:`~colk.harness.RunMetrics` (its
    per-iteration order trace is used) or a plain sequence of orders.
    """
    orders = np.asarray(getattr(run, "orders", run), dtype=int).reshape(-1)
    if orders.size < min_length:
        raise InputError(f"plateau check needs >= {min_length} points, got {orders.size}")
    cut = int(np.floor((1.0 - tail_frac) * orders.size))
    head, tail = int(orders[:cut].max()), int(orders[cut:].max())
    return CheckReport(
        "model_order_plateau", tail <= head, float(tail - head), 0.0,
        {"length": orders.size, "max_head": head, "max_tail": tail,
         "argmax": int(np.argmax(orders)) + 1, "final": int(orders[-1])},
        [(t + 1, int(o)) for t, o in enumerate(orders) if t % 100 == 99 or t == orders.size - 1],
        ("iter", "model_order"),
    )


def run_diagnostics(cfg=None, out_dir=None, seed: int = 0, verbose: bool = True) -> list:
    """Run the full suite: gradient atoms (eta = 0 and 0.1), KOMP oracle, tracking rate
    for beta in {0.01, 0.1, 0.5}, and Proposition-1 and plateau checks on one COLK run."""
    from .config import build_config
    from .harness import run_single

    cfg = cfg or build_config()
    reports = [
        check_gradient_atoms(MomentRegression(0.0, 4), seed=seed),
        check_gradient_atoms(MomentRegression(0.1, 4), seed=seed),
        check_komp_oracle(200, 8, seed=seed),
    ]
    reports[0].name, reports[1].name = "gradient_atoms_eta0", "gradient_atoms_eta0.1"
    reports += [check_tracking_rate(b, 1000, 500, seed=seed) for b in (0.01, 0.1, 0.5)]
    run = run_single(cfg, "colk" if cfg.method == "rbf" else cfg.method)
    reports += [check_prop1(run), check_model_order_plateau(run)]
    if out_dir is not None:
        out = Path(out_dir)
        for r in reports:
            r.write(out)
        rows = [(r.name, r.status, repr(r.worst), repr(r.threshold)) for r in reports]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("check", "status", "worst", "threshold"))
        w.writerows(rows)
        (out / "diagnostics.csv").write_text(buf.getvalue(), encoding="utf-8")
    if verbose:
        for r in reports:
            print(r.line())
    return reports
