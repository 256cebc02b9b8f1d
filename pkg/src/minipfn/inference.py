"""Per-task conditioned prediction: fit on labelled rows, predict in one pass.

Conditioning builds a Predictor (standardized context, bin support, inverse
transform) and never touches model parameters. Prediction runs the forward
pass, decodes the bin distribution to its expectation, and maps the result
back to original target units. The same standardization statistics and
support-construction rule are used here as during fine-tuning; no additional
preprocessing is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureStats, standardize_features
from .errors import FeatureDimensionMismatchError
from .model import ContextBatch, ModelConfig, forward
from .support import SupportSpec, build_support, decode_expectations, softmax_probs

DEFAULT_CONTEXT_CAP = 4096
DEFAULT_QUERY_CHUNK = 1024


@dataclass(frozen=True)
class Predictor:
    """Immutable conditioned state for one task."""

    params: dict
    config: ModelConfig
    support: SupportSpec
    task_mean: float
    task_std: float
    feat_stats: FeatureStats
    x_ctx_std: np.ndarray
    y_ctx_std: np.ndarray


def fit_context(
    params: dict,
    config: ModelConfig,
    x_train: np.ndarray,
    y_train_i: np.ndarray,
    feat_stats: FeatureStats,
    task_mean: float,
    task_std: float,
    *,
    context_cap: int = DEFAULT_CONTEXT_CAP,
    seed: int = 0,
) -> Predictor:
    """Condition on labelled rows; no gradient updates take place."""
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train_i = np.asarray(y_train_i, dtype=np.float64).ravel()
    if x_train.shape[0] < 2:
        raise ValueError("need at least 2 conditioning rows")
    if task_std <= 0:
        raise ValueError("task_std must be positive")

    if x_train.shape[0] > context_cap:
        keep = np.sort(np.random.default_rng(seed).choice(x_train.shape[0], context_cap, replace=False))
        x_train = x_train[keep]
        y_train_i = y_train_i[keep]

    x_std = standardize_features(x_train, feat_stats)
    y_std = (y_train_i - task_mean) / task_std
    support = build_support(y_std, config.k_bins)
    return Predictor(
        params=params,
        config=config,
        support=support,
        task_mean=float(task_mean),
        task_std=float(task_std),
        feat_stats=feat_stats,
        x_ctx_std=x_std,
        y_ctx_std=y_std,
    )


def predict(pred: Predictor, x_test: np.ndarray, *, query_chunk: int = DEFAULT_QUERY_CHUNK) -> np.ndarray:
    """Point predictions in original target units, one per test row.

    Query rows cannot see each other, so chunking the test set changes
    nothing; it only bounds memory.
    """
    x_test = np.asarray(x_test, dtype=np.float64)
    if x_test.ndim != 2 or x_test.shape[1] != pred.x_ctx_std.shape[1]:
        raise FeatureDimensionMismatchError(
            f"test rows have {x_test.shape[1] if x_test.ndim == 2 else '?'} features, "
            f"context has {pred.x_ctx_std.shape[1]}"
        )
    m = x_test.shape[0]
    if m == 0:
        return np.empty(0, dtype=np.float64)

    x_std = standardize_features(x_test, pred.feat_stats)
    out_std = np.empty(m, dtype=np.float64)
    for lo in range(0, m, query_chunk):
        hi = min(lo + query_chunk, m)
        batch = ContextBatch(pred.x_ctx_std, pred.y_ctx_std, x_std[lo:hi])
        logits = forward(pred.params, pred.config, batch)
        out_std[lo:hi] = decode_expectations(softmax_probs(logits), pred.support)
    return out_std * pred.task_std + pred.task_mean


def bin_distributions(pred: Predictor, x_test: np.ndarray, *, query_chunk: int = DEFAULT_QUERY_CHUNK) -> np.ndarray:
    """Full (M, K) bin distributions on the standardized support."""
    x_test = np.asarray(x_test, dtype=np.float64)
    x_std = standardize_features(x_test, pred.feat_stats)
    rows = []
    for lo in range(0, x_test.shape[0], query_chunk):
        batch = ContextBatch(pred.x_ctx_std, pred.y_ctx_std, x_std[lo : lo + query_chunk])
        rows.append(softmax_probs(forward(pred.params, pred.config, batch)))
    if not rows:
        return np.empty((0, pred.config.k_bins))
    return np.vstack(rows)


def predict_all_tasks(
    params_bundle,
    config: ModelConfig,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    feat_stats: FeatureStats,
    target_stats,
    *,
    context_cap: int = DEFAULT_CONTEXT_CAP,
    seed: int = 0,
    query_chunk: int = DEFAULT_QUERY_CHUNK,
) -> np.ndarray:
    """Sequentially fit/predict each task; returns (M, T) in original units.

    `params_bundle` is either a single parameter dict shared by every task or
    a list with one dict per task; the pipeline is identical either way.
    """
    y_train = np.asarray(y_train, dtype=np.float64)
    n_tasks = y_train.shape[1]
    if isinstance(params_bundle, dict):
        per_task = [params_bundle] * n_tasks
    else:
        per_task = list(params_bundle)
        if len(per_task) == 1:
            per_task = per_task * n_tasks
        if len(per_task) != n_tasks:
            raise ValueError(f"bundle holds {len(per_task)} parameter sets for {n_tasks} tasks")

    out = np.empty((np.asarray(x_test).shape[0], n_tasks), dtype=np.float64)
    for i in range(n_tasks):
        pred = fit_context(
            per_task[i],
            config,
            x_train,
            y_train[:, i],
            feat_stats,
            float(target_stats.mean[i]),
            float(target_stats.std[i]),
            context_cap=context_cap,
            seed=seed,
        )
        out[:, i] = predict(pred, x_test, query_chunk=query_chunk)
    return out
