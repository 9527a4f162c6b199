"""Synthetic heavy-tailed regression data, replicate splits and CSV ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ColumnRangeError, DataError, InputError, MissingFileError, ParseError


@dataclass(frozen=True)
class Dataset:
    xs: np.ndarray  # (n, p)
    ys: np.ndarray  # (n,)
    name: str = "data"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.ndim != 2 or xs.shape[0] != ys.shape[0] or ys.shape[0] == 0:
            raise InputError(f"dataset needs matching non-empty xs/ys, got {xs.shape} and {ys.shape}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return self.ys.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def subset(self, idx, name=None) -> "Dataset":
        return Dataset(self.xs[idx], self.ys[idx], name or self.name)


@dataclass(frozen=True)
class OutlierNoiseSpec:
    """Gaussian scale mixture: ``N(0, sigma^2)`` w.p. ``1 - contam_prob``, else ``N(0, (contam_scale*sigma)^2)``."""

    sigma: float = 0.5
    contam_prob: float = 0.05
    contam_scale: float = 10.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InputError(f"sigma must be >= 0, got {self.sigma}")
        if not 0 <= self.contam_prob < 1:
            raise InputError(f"contam_prob must lie in [0, 1), got {self.contam_prob}")
        if not self.contam_scale > 1:
            raise InputError(f"contam_scale must be > 1, got {self.contam_scale}")


def target_curve(x):
    """Noiseless regression target ``2x + 3 sin(6x)``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * x + 3.0 * np.sin(6.0 * x)


def gen_regression_outliers(n: int, spec: OutlierNoiseSpec = OutlierNoiseSpec(), x_range=(-1.0, 1.0), seed: int = 0) -> Dataset:
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    lo, hi = map(float, x_range)
    if not lo < hi:
        raise InputError(f"x_range must be increasing, got {x_range}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)
    contaminated = rng.random(n) < spec.contam_prob
    scale = np.where(contaminated, spec.contam_scale * spec.sigma, spec.sigma)
    y = target_curve(x) + scale * rng.standard_normal(n)
    return Dataset(x.reshape(-1, 1), y, "regression_outliers")


def replicate_split(d: Dataset, test_frac: float = 0.2, n_replicates: int = 20, train_frac: float = 0.5, seed: int = 0):
    """Hold out one test set, then draw ``n_replicates`` training subsamples of the remainder.

    Returns ``(test, trains)``.
    """
    if not (0 < test_frac < 1 and 0 < train_frac <= 1):
        raise InputError(f"fractions must lie in (0, 1): test_frac={test_frac}, train_frac={train_frac}")
    if n_replicates < 1:
        raise InputError(f"n_replicates must be >= 1, got {n_replicates}")
    n = len(d)
    n_test = int(round(test_frac * n))
    n_rest = n - n_test
    n_train = int(round(train_frac * n_rest))
    if n_test < 1 or n_train < 1:
        raise InputError(f"split of {n} points leaves an empty set (test={n_test}, train={n_train})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx, rest_idx = np.sort(perm[:n_test]), perm[n_test:]
    trains = []
    for r in range(n_replicates):
        pick = np.sort(rng.choice(rest_idx, size=n_train, replace=False))
        trains.append(d.subset(pick, f"{d.name}/train{r}"))
    return d.subset(test_idx, f"{d.name}/test"), trains


def minmax_scale(xs: np.ndarray, lo=-1.0, hi=1.0, ref: np.ndarray | None = None) -> np.ndarray:
    """Affinely map each coordinate of ``ref`` (default ``xs``) onto ``[lo, hi]`` and apply to ``xs``."""
    ref = xs if ref is None else ref
    mn, mx = ref.min(axis=0), ref.max(axis=0)
    span = np.where(mx > mn, mx - mn, 1.0)
    return lo + (xs - mn) * (hi - lo) / span


def load_csv(path, x_cols=(0,), y_col: int = 1, has_header: bool = True, name: str | None = None) -> Dataset:
    """Read numeric feature/target columns from a comma-separated file.

    Blank lines are skipped.  Rows are numbered from 1 including the header.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("file not found", str(path))
    x_cols = tuple(int(c) for c in x_cols)
    xs, ys = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if has_header and rowno == 1:
                continue
            for c in (*x_cols, y_col):
                if not -len(row) <= c < len(row):
                    raise ColumnRangeError(f"column {c} out of range ({len(row)} fields)", f"{path}:row {rowno}")
            try:
                xs.append([float(row[c]) for c in x_cols])
                ys.append(float(row[y_col]))
            except ValueError:
                raise ParseError(f"non-numeric field in {row!r}", f"{path}:row {rowno}") from None
    if not ys:
        raise DataError("no data rows", str(path))
    return Dataset(np.array(xs), np.array(ys), name or path.stem)


def write_csv(d: Dataset, path, header=True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(["x", "y"] if d.dim == 1 else [f"x{i}" for i in range(d.dim)] + ["y"])
        for x, y in zip(d.xs, d.ys):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
