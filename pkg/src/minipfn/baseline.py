"""Single-task MLP baseline: one independent network per target.

One hidden tanh layer of width 64 trained for a fixed 50-epoch budget with
the same optimizer machinery as the main model. Inputs and targets are
standardized with the train-split statistics; predictions are returned in
original units.
"""

from __future__ import annotations

import numpy as np

from .optim import OptState, optimizer_step

HIDDEN = 64
EPOCHS = 50
BATCH = 32
LR = 3e-3


def _mlp_init(d: int, rng: np.random.Generator) -> dict:
    return {
        "w1": rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(d, HIDDEN)),
        "b1": np.zeros(HIDDEN),
        "w2": rng.uniform(-1.0 / np.sqrt(HIDDEN), 1.0 / np.sqrt(HIDDEN), size=HIDDEN),
        "b2": np.zeros(1),
    }


def _mlp_forward(p: dict, x: np.ndarray):
    pre = x @ p["w1"] + p["b1"]
    h = np.tanh(pre)
    return h @ p["w2"] + p["b2"][0], h


def _mlp_grads(p: dict, x: np.ndarray, h: np.ndarray, resid: np.ndarray) -> dict:
    # loss = mean(resid^2), resid = pred - y
    n = x.shape[0]
    dout = 2.0 * resid / n
    dh = np.outer(dout, p["w2"]) * (1.0 - h * h)
    return {
        "w2": h.T @ dout,
        "b2": np.array([dout.sum()]),
        "w1": x.T @ dh,
        "b1": dh.sum(axis=0),
    }


def train_mlp_single(x_std: np.ndarray, y_std: np.ndarray, seed: int) -> dict:
    """Train one scalar-output MLP on standardized data; returns its params."""
    rng = np.random.default_rng([seed, 3])
    params = _mlp_init(x_std.shape[1], rng)
    state = OptState()
    n = x_std.shape[0]
    for _ in range(EPOCHS):
        order = rng.permutation(n)
        for lo in range(0, n, BATCH):
            idx = order[lo : lo + BATCH]
            pred, h = _mlp_forward(params, x_std[idx])
            grads = _mlp_grads(params, x_std[idx], h, pred - y_std[idx])
            optimizer_step(state, params, grads, LR)
    return params


def train_stl_mlp(x_train_std, y_train, x_test_std, target_stats, seed: int) -> np.ndarray:
    """Independent per-task MLPs; returns (M, T) test predictions in original units."""
    y_train = np.asarray(y_train, dtype=np.float64)
    n_tasks = y_train.shape[1]
    out = np.empty((x_test_std.shape[0], n_tasks), dtype=np.float64)
    for i in range(n_tasks):
        y_std = (y_train[:, i] - target_stats.mean[i]) / target_stats.std[i]
        params = train_mlp_single(x_train_std, y_std, seed + i)
        pred_std, _ = _mlp_forward(params, x_test_std)
        out[:, i] = pred_std * target_stats.std[i] + target_stats.mean[i]
    return out
