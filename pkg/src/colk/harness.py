"""Experiment runner: single runs, replicate studies and metric CSVs."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import RbfNetwork, averaging_rule, budgeted_sgd_iterate, polk_iterate, rbf_sgd_iterate
from .colk import COLKLearner, TrackerState
from .config import COMPOSITIONAL, ConfigError, ExperimentConfig
from .data import Dataset, OutlierNoiseSpec, gen_regression_outliers, load_csv, minmax_scale, replicate_split
from .errors import DivergenceError
from .kernel import KernelExpansion
from .objectives import MomentRegression, RegressionSample

METRICS_HEADER = ("iter", "objective", "test_mse", "model_order", "projection_gap")
RUNS_HEADER = ("method", "replicate", "status", "final_test_mse", "final_model_order")
SUMMARY_HEADER = ("method", "n_ok", "n_failed", "mean", "std", "min", "q1", "median", "q3", "max")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


@dataclass
class RunMetrics:
    """Eval-point records plus per-iteration model order and projection gap traces.

    ``records`` rows follow :data:`METRICS_HEADER`; the ``projection_gap`` of a
    record is the largest gap over the iterations since the previous record,
    so the CSV certifies every iteration, not just the sampled ones.
    """

    method: str
    alpha: float
    eps: float
    records: list = field(default_factory=list)
    orders: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wall_time: float = 0.0

    @property
    def final_test_mse(self) -> float:
        return self.records[-1][2]

    @property
    def final_model_order(self) -> int:
        return self.records[-1][3]

    @property
    def final_objective(self) -> float:
        return self.records[-1][1]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[METRICS_HEADER.index(name)] for r in self.records])

    def to_csv(self) -> str:
        return _csv_text(METRICS_HEADER, self.records)

    def write_csv(self, path):
        _write(path, self.to_csv())


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """CSV file if ``data.path`` is set, else the synthetic outlier set; targets scaled by ``data.y_scale``."""
    d = cfg.data
    if d.path:
        ds = load_csv(d.path, d.x_cols, d.y_col, d.has_header)
    else:
        ds = gen_regression_outliers(d.n, OutlierNoiseSpec(d.sigma, d.contam_prob, d.contam_scale), (d.x_min, d.x_max), d.seed)
    xs = minmax_scale(ds.xs) if d.minmax else ds.xs
    return Dataset(xs, ds.ys * d.y_scale, ds.name)


def prepare_splits(cfg: ExperimentConfig, n_replicates: int):
    return replicate_split(load_dataset(cfg), cfg.data.test_frac, n_replicates, cfg.data.train_frac, cfg.data.seed)


class SampleStream:
    """Endless index stream over ``n`` items, reshuffled each epoch from a seeded generator."""

    def __init__(self, n: int, seed):
        self.n = n
        self.rng = np.random.default_rng(seed)
        self._perm = self.rng.permutation(n)
        self._pos = 0

    def next(self) -> int:
        if self._pos == self.n:
            self._perm = self.rng.permutation(self.n)
            self._pos = 0
        i = self._perm[self._pos]
        self._pos += 1
        return int(i)


class _Learner:
    """Uniform step/predict/order interface over the five methods."""

    def __init__(self, method: str, cfg: ExperimentConfig, train: Dataset):
        self.method = method
        self.params = cfg.method_params(method)
        self.lcfg = cfg.learner_config(method)
        self.problem = MomentRegression(self.lcfg.eta, self.lcfg.moment_P, self.params["tau"])
        dim = train.dim
        if method in ("colk", "colk-scgd-tracker"):
            rule = averaging_rule if method == "colk-scgd-tracker" else None
            self.colk = COLKLearner(self.problem, self.lcfg, dim, rule)
        elif method == "rbf":
            self.net = RbfNetwork.on_data(train.xs, self.params["n_centers"], self.params["bandwidth"])
            self.tracker = TrackerState(np.zeros(1), self.net, False)
        else:
            self.f = KernelExpansion.zero(self.lcfg.kernel, dim)

    @property
    def model(self):
        if self.method in ("colk", "colk-scgd-tracker"):
            return self.colk.f
        if self.method == "rbf":
            return self.net
        return self.f

    def step(self, sample) -> float:
        m = self.method
        if m in ("colk", "colk-scgd-tracker"):
            return self.colk.step(sample).projection_gap
        if m == "rbf":
            c = self.lcfg
            self.net, self.tracker = rbf_sgd_iterate(self.net, sample, c.alpha, c.eta, self.tracker, c.beta, c.moment_P,
                                                     c.lam, self.problem)
            return 0.0
        if m == "polk":
            self.f, cert = polk_iterate(self.f, sample, self.lcfg)
        else:
            self.f, cert = budgeted_sgd_iterate(self.f, sample, self.lcfg, self.params["max_order"])
        return cert.projection_gap


def run_single(cfg: ExperimentConfig, method: str | None = None, splits=None, replicate: int | None = None,
               out_path=None) -> RunMetrics:
    """Run one learner over the shuffled training stream and record metrics.

    Compositional methods draw two consecutive stream samples per iteration,
    the others one.  Records are taken at iteration 0, every ``eval_every``
    iterations, and at the last iteration.  ``splits`` is ``(test, trains)``;
    when omitted it is built from ``cfg``.
    """
    method = method or cfg.method
    cfg.validate()
    replicate = cfg.data.replicate if replicate is None else replicate
    if splits is None:
        splits = prepare_splits(cfg, replicate + 1)
    test, trains = splits
    train = trains[replicate]
    if train.dim != test.dim:
        raise ConfigError(f"train/test dimension mismatch: {train.dim} vs {test.dim}")

    learner = _Learner(method, cfg, train)
    evaluator = MomentRegression(cfg.eval_eta, cfg.eval_P)
    stream = SampleStream(len(train), np.random.SeedSequence([cfg.seed, replicate]))
    paired = method in COMPOSITIONAL
    lcfg = learner.lcfg
    metrics = RunMetrics(method, lcfg.alpha, lcfg.eps)
    orders = np.zeros(cfg.n_iters, dtype=int)
    gaps = np.zeros(cfg.n_iters)

    def record(t, gap):
        f = learner.model
        pred = f.evaluate_many(test.xs)
        if not np.all(np.isfinite(pred)):
            raise DivergenceError(f"{method}: non-finite predictions at iteration {t}")
        mse = float(np.mean((pred - test.ys) ** 2))
        metrics.records.append((t, evaluator.population_objective(f, test.xs, test.ys), mse, f.order, gap))

    start = time.perf_counter()
    record(0, 0.0)
    since = 0.0
    for t in range(1, cfg.n_iters + 1):
        i = stream.next()
        j = stream.next() if paired else i
        sample = RegressionSample(train.xs[i], float(train.ys[i]), train.xs[j], float(train.ys[j]))
        try:
            gap = learner.step(sample)
        except DivergenceError as exc:
            raise DivergenceError(f"{method}: diverged at iteration {t}: {exc}") from None
        gaps[t - 1] = gap
        orders[t - 1] = learner.model.order
        since = max(since, gap)
        if t % cfg.eval_every == 0 or t == cfg.n_iters:
            record(t, since)
            since = 0.0
    metrics.wall_time = time.perf_counter() - start
    metrics.orders, metrics.gaps = orders, gaps
    if out_path is not None:
        metrics.write_csv(out_path)
    return metrics


@dataclass
class ReplicateSummary:
    runs: list  # (method, replicate, status, final_test_mse, final_model_order)
    summary: list  # rows of SUMMARY_HEADER

    def runs_csv(self) -> str:
        return _csv_text(RUNS_HEADER, self.runs)

    def summary_csv(self) -> str:
        return _csv_text(SUMMARY_HEADER, self.summary)

    def stats(self, method: str) -> dict:
        for row in self.summary:
            if row[0] == method:
                return dict(zip(SUMMARY_HEADER, row))
        raise KeyError(method)

    def final_mse(self, method: str) -> np.ndarray:
        return np.array([r[3] for r in self.runs if r[0] == method and r[2] == "ok"])


def _summary_row(method, vals, n_failed):
    if vals.size == 0:
        nan = float("nan")
        return (method, 0, n_failed, nan, nan, nan, nan, nan, nan, nan)
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return (method, int(vals.size), n_failed, float(vals.mean()), std, float(vals.min()),
            float(q1), float(med), float(q3), float(vals.max()))


def run_replicates(cfg: ExperimentConfig, R: int | None = None, methods=None, out_dir=None) -> ReplicateSummary:
    """Run every method on ``R`` replicate training sets sharing one test set.

    A replicate that diverges is recorded with status ``diverged`` and
    excluded from the statistics.  Output (when ``out_dir`` is given):
    ``replicate_runs.csv``, ``replicate_summary.csv`` and per-run metrics
    under ``runs/``.  Std is the sample (n - 1) standard deviation.
    """
    R = cfg.n_replicates if R is None else R
    if R < 2:
        raise ConfigError(f"replicate study needs R >= 2, got {R}")
    methods = tuple(methods or cfg.methods)
    cfg.validate()
    for m in methods:
        cfg.learner_config(m)
    splits = prepare_splits(cfg, R)
    runs, summary = [], []
    for m in methods:
        vals, failed = [], 0
        for r in range(R):
            path = None if out_dir is None else Path(out_dir) / "runs" / f"{m}_r{r:02d}.csv"
            try:
                res = run_single(cfg, m, splits, r, path)
            except DivergenceError:
                runs.append((m, r, "diverged", float("nan"), 0))
                failed += 1
                continue
            runs.append((m, r, "ok", res.final_test_mse, res.final_model_order))
            vals.append(res.final_test_mse)
        summary.append(_summary_row(m, np.array(vals), failed))
    out = ReplicateSummary(runs, summary)
    if out_dir is not None:
        _write(Path(out_dir) / "replicate_runs.csv", out.runs_csv())
        _write(Path(out_dir) / "replicate_summary.csv", out.summary_csv())
    return out
