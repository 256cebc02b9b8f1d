"""Evaluation metrics: relative MAE, threshold accuracy, explained variance,
multitask gain, and Spearman rank correlation.

Conventions that matter and are easy to get wrong elsewhere:
- pam measures the relative error against the PREDICTED value, and the
  threshold boundary counts as correct.
- explained_variance uses population (1/N) variances; the ratio makes the
  divisor convention irrelevant, this is documented for clarity.
- mtl_gain is the mean per-task relative improvement over the baseline in
  percent, positive when the method's MAE is lower.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateColumnError,
    ZeroBaselineError,
    ZeroPredictedValueError,
    ZeroTargetVarianceError,
    ZeroTrueValueError,
)


def mae_pct(y, yhat) -> float:
    """Mean |relative error| against the true values, in percent."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size < 1 or y.size != yhat.size:
        raise ValueError("y and yhat must be nonempty and equally long")
    if np.any(y == 0):
        raise ZeroTrueValueError("mae_pct undefined when a true value is 0")
    return float(np.mean(np.abs((y - yhat) / y)) * 100.0)


def pam(y, yhat, eps: float) -> float:
    """Percent of predictions within relative error eps of the prediction.

    The denominator is the predicted value; |rel err| == eps counts correct.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size < 1 or y.size != yhat.size:
        raise ValueError("y and yhat must be nonempty and equally long")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if np.any(yhat == 0):
        raise ZeroPredictedValueError("pam undefined when a predicted value is 0")
    correct = np.abs((y - yhat) / yhat) <= eps
    return float(100.0 * np.count_nonzero(correct) / y.size)


def explained_variance(y, yhat) -> float:
    """1 - Var(y - yhat)/Var(y), population variances."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size < 2 or y.size != yhat.size:
        raise ValueError("need at least 2 samples")
    var_y = float(np.var(y))
    if var_y == 0.0:
        raise ZeroTargetVarianceError("explained variance undefined for constant targets")
    return float(1.0 - np.var(y - yhat) / var_y)


def mtl_gain(method_mae, baseline_mae) -> float:
    """Mean per-task relative MAE improvement over the baseline, in percent."""
    m = np.asarray(method_mae, dtype=np.float64).ravel()
    b = np.asarray(baseline_mae, dtype=np.float64).ravel()
    if m.size < 1 or m.size != b.size:
        raise ValueError("method and baseline must be nonempty and equally long")
    if np.any(b == 0):
        raise ZeroBaselineError("mtl_gain undefined for a zero baseline entry")
    return float(100.0 * np.mean((b - m) / b))


def _average_ranks(v: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the average of their rank run."""
    uniq, inv, counts = np.unique(v, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts[:-1])))
    mean_rank = starts + (counts + 1) / 2.0
    return mean_rank[inv]


def spearman_matrix(y) -> np.ndarray:
    """Pairwise Spearman rank correlations of the columns of y (N, T)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 3:
        raise ValueError("need an (N, T) matrix with N >= 3")
    n, t = y.shape
    ranks = np.empty_like(y)
    for j in range(t):
        if np.unique(y[:, j]).size < 2:
            raise DegenerateColumnError(f"column {j} is constant")
        ranks[:, j] = _average_ranks(y[:, j])
    r = ranks - ranks.mean(axis=0)
    cov = r.T @ r / n
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


@dataclass
class MetricsReport:
    """Per-task metric table plus the overall gain and rank-correlation matrix."""

    task_names: list
    mae_pct: list
    pam_5: list
    pam_2_5: list
    ev: list
    delta_m: float | None = None
    spearman: np.ndarray | None = None
    model: str = ""
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "per_task": [
                {
                    "task": name,
                    "mae_pct": self.mae_pct[i],
                    "pam5": self.pam_5[i],
                    "pam2_5": self.pam_2_5[i],
                    "ev": self.ev[i],
                }
                for i, name in enumerate(self.task_names)
            ],
            "delta_m": self.delta_m,
            "spearman": None if self.spearman is None else np.asarray(self.spearman).tolist(),
            **({"extras": self.extras} if self.extras else {}),
        }


def evaluate_predictions(y_true, y_pred, task_names, eps_pair=(0.05, 0.025), model="", seed=None) -> MetricsReport:
    """Full per-task metric suite for an (M, T) prediction matrix."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 2:
        raise ValueError("y_true and y_pred must be matching (M, T) matrices")
    cols = range(y_true.shape[1])
    return MetricsReport(
        task_names=list(task_names),
        mae_pct=[mae_pct(y_true[:, i], y_pred[:, i]) for i in cols],
        pam_5=[pam(y_true[:, i], y_pred[:, i], eps_pair[0]) for i in cols],
        pam_2_5=[pam(y_true[:, i], y_pred[:, i], eps_pair[1]) for i in cols],
        ev=[explained_variance(y_true[:, i], y_pred[:, i]) for i in cols],
        model=model,
        seed=seed,
    )
