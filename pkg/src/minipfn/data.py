"""Dataset ingestion, splitting, statistics, and the synthetic multitask generator.

CSV contract: comma-separated, UTF-8, first row is the header, '.' decimal
point, empty cell = missing feature. The last `n_targets` columns are targets
and must be fully populated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    MalformedRowError,
    NonNumericCellError,
    TooFewColumnsError,
    ZeroVarianceTaskError,
)


@dataclass
class TabularDataset:
    feature_names: list
    target_names: list
    x: np.ndarray  # (N, D), NaN marks a missing feature value
    y: np.ndarray  # (N, T)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise DataError("x and y must be 2-D")
        n, d = self.x.shape
        t = self.y.shape[1]
        if n < 1 or d < 1 or t < 1:
            raise DataError("dataset must have at least one row, feature, and target")
        if self.y.shape[0] != n:
            raise DataError("x and y row counts differ")
        if len(self.feature_names) != d or len(self.target_names) != t:
            raise DataError("name lists must match the array shapes")
        names = list(self.feature_names) + list(self.target_names)
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        if not np.all(np.isfinite(self.y)):
            raise DataError("targets must be fully populated and finite")

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @property
    def n_targets(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray  # (D,)
    std: np.ndarray  # (D,), zero-variance columns pinned to 1


@dataclass(frozen=True)
class TargetStats:
    mean: np.ndarray  # (T,)
    std: np.ndarray  # (T,), all > 0

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "TargetStats":
        return TargetStats(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


@dataclass(frozen=True)
class SynthConfig:
    n: int = 2000
    d: int = 20
    strength_tasks: int = 4
    elongation_tasks: int = 1
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if self.strength_tasks < 1 or self.elongation_tasks < 0:
            raise ValueError("need at least one strength task")
        if self.strength_tasks + self.elongation_tasks < 2:
            raise ValueError("need at least two tasks in total")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "strength_tasks": self.strength_tasks,
            "elongation_tasks": self.elongation_tasks,
            "noise_std": self.noise_std,
            "seed": self.seed,
        }


def load_csv(path, n_targets: int) -> TabularDataset:
    """Parse a CSV into a dataset; the last n_targets columns are targets."""
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < n_targets + 1:
            raise TooFewColumnsError(
                f"{path}: {len(header)} columns cannot hold {n_targets} targets plus features"
            )
        d = len(header) - n_targets
        rows_x, rows_y = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRowError(line_no, f"expected {len(header)} cells, got {len(row)}")
            vals = []
            for col_idx, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    if col_idx >= d:
                        raise MalformedRowError(line_no, f"missing target {header[col_idx]!r}")
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(line_no, header[col_idx], cell) from None
            rows_x.append(vals[:d])
            rows_y.append(vals[d:])
    if not rows_x:
        raise DataError(f"{path}: no data rows")
    return TabularDataset(header[:d], header[d:], np.array(rows_x), np.array(rows_y))


def split(ds: TabularDataset, spec: SplitSpec):
    """Deterministic 70:30-style partition; floor for train, remainder test."""
    n = ds.n_rows
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_train = min(max(int(spec.train_fraction * n), 1), n - 1)
    perm = np.random.default_rng(spec.seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return train_idx, test_idx


def impute_and_stats(ds: TabularDataset, train_indices):
    """Mean-impute missing features and compute train-split statistics.

    All statistics come from the train rows only; test rows never leak into
    them. Returns (imputed dataset copy, FeatureStats, TargetStats).
    """
    train_indices = np.asarray(train_indices, dtype=np.intp)
    if train_indices.size == 0:
        raise DataError("train_indices must be nonempty")
    x = ds.x.copy()
    x_tr = x[train_indices]
    present = ~np.isnan(x_tr)
    counts = present.sum(axis=0)
    if np.any(counts == 0):
        bad = [ds.feature_names[i] for i in np.nonzero(counts == 0)[0]]
        raise DataError(f"feature(s) entirely missing on the train split: {bad}")
    col_mean = np.where(present, x_tr, 0.0).sum(axis=0) / counts
    nan_rows, nan_cols = np.nonzero(np.isnan(x))
    x[nan_rows, nan_cols] = col_mean[nan_cols]

    f_std = x[train_indices].std(axis=0)
    f_std = np.where(f_std > 0, f_std, 1.0)
    feat_stats = FeatureStats(mean=x[train_indices].mean(axis=0), std=f_std)

    y_tr = ds.y[train_indices]
    t_std = y_tr.std(axis=0)
    if np.any(t_std == 0):
        bad = [ds.target_names[i] for i in np.nonzero(t_std == 0)[0]]
        raise ZeroVarianceTaskError(f"constant target(s) on the train split: {bad}")
    target_stats = TargetStats(mean=y_tr.mean(axis=0), std=t_std)

    imputed = TabularDataset(list(ds.feature_names), list(ds.target_names), x, ds.y.copy())
    return imputed, feat_stats, target_stats


def standardize_features(x: np.ndarray, stats: FeatureStats) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - stats.mean) / stats.std


def gen_synthetic_steel(cfg: SynthConfig) -> TabularDataset:
    """Correlated multitask regression data with a strength/ductility shape.

    A smooth latent z = teacher(x) drives every task: strength tasks load
    positively on z at MPa-like scales, the elongation task loads negatively
    at a percent-like scale with more task noise, mirroring the strong
    positive strength-strength and negative strength-elongation rank
    correlations of real mill data.
    """
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((cfg.n, cfg.d))

    hidden = 32
    w1 = rng.standard_normal((cfg.d, hidden)) / np.sqrt(cfg.d)
    b1 = 0.5 * rng.standard_normal(hidden)
    w2 = rng.standard_normal(hidden) / np.sqrt(hidden)
    z = np.tanh(x @ w1 + b1) @ w2
    z = (z - z.mean()) / max(float(z.std()), 1e-12)

    t = cfg.strength_tasks + cfg.elongation_tasks
    y = np.empty((cfg.n, t), dtype=np.float64)
    names = []
    for i in range(cfg.strength_tasks):
        a = float(rng.uniform(30.0, 60.0))
        b = float(rng.uniform(350.0, 550.0))
        eps = cfg.noise_std * a * rng.standard_normal(cfg.n)
        y[:, i] = a * z + b + eps
        names.append(f"strength_{i + 1}")
    for j in range(cfg.elongation_tasks):
        a = float(rng.uniform(2.0, 4.0))
        b = float(rng.uniform(30.0, 40.0))
        # ductility opposes strength and is intrinsically noisier
        eps = 5.0 * cfg.noise_std * a * rng.standard_normal(cfg.n)
        y[:, cfg.strength_tasks + j] = -a * z + b + eps
        names.append(f"elongation_{j + 1}")

    feature_names = [f"f{i + 1}" for i in range(cfg.d)]
    return TabularDataset(feature_names, names, x, y)
