"""Fine-tuning strategies for the pre-trained in-context regressor.

Three gradient-based strategies share one loop:

- sft: the scalar training signal is one task's standardized target.
- mft: the signal is the row-wise mean of the standardized targets. Under a
  shared-latent model with equal Gaussian task noise, that mean is the unique
  minimizer of the per-row sum of squared errors, i.e. the best single scalar
  summary of the joint tasks.
- maft: same signal as mft, plus a small adapter that maps the decoded scalar
  prediction to per-task predictions; per-task mean-squared errors enter the
  loss with weight lambda and their gradients flow through the decoding
  expectation back into the transformer. The adapter exists only during
  fine-tuning and never participates in inference.

Every step samples a fresh row batch and re-splits it into context and query,
so the model never sees a query label in its own context.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .data import TargetStats
from .errors import ZeroVarianceTaskError
from .model import ContextBatch, ModelConfig, backward_from_cache, forward_with_cache
from .optim import OptState, optimizer_step
from .support import SupportSpec, build_support, encode_targets, softmax_probs

STRATEGY_KINDS = ("nft", "sft", "mft", "maft")


@dataclass(frozen=True)
class FineTuneStrategy:
    kind: str  # one of STRATEGY_KINDS
    task_index: int | None = None  # for sft: a single task, or None for all

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.task_index is not None and self.kind != "sft":
            raise ValueError("task_index only applies to sft")


@dataclass(frozen=True)
class FineTuneConfig:
    lr: float = 1e-5
    # rows per step, split into context and query; contexts much smaller than
    # the pre-training context range measurably degrade the conditioned model,
    # so the default keeps the split halves inside that range
    batch_rows: int = 64
    budget_seconds: float | None = 120.0
    max_steps: int = 500
    lam: float = 1.0
    adapter_hidden: int = 15
    context_fraction: float = 0.5
    seed: int = 0
    deterministic: bool = True  # True: exactly max_steps; False: wall-clock budget
    flip_anticorrelated: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.batch_rows < 2 or self.max_steps < 0:
            raise ValueError("invalid lr/batch_rows/max_steps")
        if not (0.0 < self.context_fraction < 1.0):
            raise ValueError("context_fraction must be in (0, 1)")
        if self.lam < 0 or self.adapter_hidden < 1:
            raise ValueError("invalid lambda/adapter_hidden")
        if not self.deterministic and self.budget_seconds is None:
            raise ValueError("budget mode needs budget_seconds")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch_rows": self.batch_rows,
            "budget_seconds": self.budget_seconds,
            "max_steps": self.max_steps,
            "lambda": self.lam,
            "adapter_hidden": self.adapter_hidden,
            "context_fraction": self.context_fraction,
            "seed": self.seed,
            "deterministic": self.deterministic,
            "flip_anticorrelated": self.flip_anticorrelated,
        }


@dataclass
class AdapterParams:
    """Shared 1 -> hidden tanh layer with one scalar head per task."""

    w1: np.ndarray  # (hidden,)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, T)
    b2: np.ndarray  # (T,)

    @property
    def n_tasks(self) -> int:
        return self.w2.shape[1]


@dataclass
class FineTuneBundle:
    """Result of running a strategy: one parameter set, or one per task."""

    strategy: FineTuneStrategy
    params_list: list
    task_indices: list | None  # parallel to params_list for sft, else None
    steps: list
    elapsed_seconds: float
    loss_curves: list
    supports: list | None = None  # SupportSpec of each run's training signal

    @property
    def n_checkpoints(self) -> int:
        return len(self.params_list)


# ---------------------------------------------------------------------------
# target-space helpers
# ---------------------------------------------------------------------------


def standardize_targets(y, stats: TargetStats) -> np.ndarray:
    """Column-wise (y - mean)/std using train-split statistics."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(stats.std <= 0):
        raise ZeroVarianceTaskError("target std must be positive for every task")
    return (y - stats.mean) / stats.std


def destandardize_targets(y_std, stats: TargetStats) -> np.ndarray:
    return np.asarray(y_std, dtype=np.float64) * stats.std + stats.mean


def average_targets(y_std) -> np.ndarray:
    """Row-wise arithmetic mean across tasks of standardized targets."""
    y_std = np.asarray(y_std, dtype=np.float64)
    if y_std.ndim != 2 or y_std.shape[1] < 1:
        raise ValueError("expected an (N, T) matrix with T >= 1")
    return y_std.mean(axis=1)


def sse(y, z: float) -> float:
    """Sum over tasks of squared deviation from the scalar z."""
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.sum((y - z) ** 2))


def task_loss(pred_i, y_i) -> float:
    """Mean squared error of one task's predictions."""
    pred_i = np.asarray(pred_i, dtype=np.float64).ravel()
    y_i = np.asarray(y_i, dtype=np.float64).ravel()
    if pred_i.size == 0:
        from .errors import EmptyBatchError

        raise EmptyBatchError("task_loss over an empty batch")
    if pred_i.size != y_i.size:
        raise ValueError("prediction/label length mismatch")
    return float(np.mean((pred_i - y_i) ** 2))


def total_loss(l_reg: float, task_losses, lam: float) -> float:
    """Regression loss plus lambda times the mean per-task loss."""
    task_losses = np.asarray(task_losses, dtype=np.float64).ravel()
    if task_losses.size < 1:
        raise ValueError("need at least one task loss")
    return float(l_reg + lam * task_losses.mean())


def flip_signs_for_averaging(y_std: np.ndarray) -> np.ndarray:
    """Optionally align anti-correlated tasks with task 0 before averaging."""
    y = np.asarray(y_std, dtype=np.float64)
    signs = np.ones(y.shape[1])
    ref = y[:, 0] - y[:, 0].mean()
    for j in range(1, y.shape[1]):
        c = float(np.dot(ref, y[:, j] - y[:, j].mean()))
        if c < 0:
            signs[j] = -1.0
    return y * signs


# ---------------------------------------------------------------------------
# adapter
# ---------------------------------------------------------------------------


def init_adapter(n_tasks: int, hidden: int, seed: int) -> AdapterParams:
    """Random tanh hidden layer, zero output heads (initial output is the bias)."""
    rng = np.random.default_rng([seed, 2])
    return AdapterParams(
        w1=rng.uniform(-1.0, 1.0, size=hidden),
        b1=np.zeros(hidden),
        w2=np.zeros((hidden, n_tasks)),
        b2=np.zeros(n_tasks),
    )


def adapter_forward(adapter: AdapterParams, ybar_hat) -> np.ndarray:
    """Map N scalar predictions to (N, T) per-task predictions."""
    ybar_hat = np.asarray(ybar_hat, dtype=np.float64).ravel()
    hidden = np.tanh(np.outer(ybar_hat, adapter.w1) + adapter.b1)
    return hidden @ adapter.w2 + adapter.b2


def adapter_backward(adapter: AdapterParams, ybar_hat, dpred):
    """Gradients of sum(<dpred, preds>) w.r.t. adapter params and the inputs."""
    ybar_hat = np.asarray(ybar_hat, dtype=np.float64).ravel()
    dpred = np.asarray(dpred, dtype=np.float64)
    pre = np.outer(ybar_hat, adapter.w1) + adapter.b1
    hidden = np.tanh(pre)
    grads = {
        "w2": hidden.T @ dpred,
        "b2": dpred.sum(axis=0),
    }
    dhidden = dpred @ adapter.w2.T
    dpre = dhidden * (1.0 - hidden * hidden)
    grads["w1"] = dpre.T @ ybar_hat
    grads["b1"] = dpre.sum(axis=0)
    dybar = dpre @ adapter.w1
    return grads, dybar


# ---------------------------------------------------------------------------
# the shared fine-tuning loop
# ---------------------------------------------------------------------------


def _signal_and_support(y_std: np.ndarray, strategy_kind: str, task_index: int | None, cfg, k_bins: int):
    if strategy_kind == "sft":
        y_sig = y_std[:, task_index].copy()
    else:
        y_for_avg = flip_signs_for_averaging(y_std) if cfg.flip_anticorrelated else y_std
        y_sig = average_targets(y_for_avg)
    # every scalar stream the core model consumes is zero-mean unit-variance;
    # averaging correlated tasks deflates the variance, so re-standardize the
    # signal itself exactly as inference standardizes each task's labels
    sd = float(y_sig.std())
    if sd == 0.0:
        from .errors import AllValuesEqualError

        raise AllValuesEqualError("fine-tuning signal is constant")
    y_sig = (y_sig - float(y_sig.mean())) / sd
    return y_sig, build_support(y_sig, k_bins)


def _finetune_loop(
    params: dict,
    model_config: ModelConfig,
    x_std: np.ndarray,
    y_sig: np.ndarray,
    support: SupportSpec,
    cfg: FineTuneConfig,
    y_tasks_std: np.ndarray | None = None,
    adapter: AdapterParams | None = None,
):
    """Runs the optimizer loop in place on `params` (and `adapter` if given)."""
    n = x_std.shape[0]
    batch_rows = min(cfg.batch_rows, n)
    n_ctx = min(max(int(batch_rows * cfg.context_fraction), 1), batch_rows - 1)
    rng = np.random.default_rng([cfg.seed, 1])
    state = OptState()
    centers = support.centers

    if adapter is not None:
        params = dict(params)
        params["adapter.w1"] = adapter.w1
        params["adapter.b1"] = adapter.b1
        params["adapter.w2"] = adapter.w2
        params["adapter.b2"] = adapter.b2

    losses: list[float] = []
    start = time.monotonic()
    step = 0
    while True:
        if cfg.deterministic:
            if step >= cfg.max_steps:
                break
        elif time.monotonic() - start > cfg.budget_seconds:
            break

        idx = rng.choice(n, size=batch_rows, replace=False)
        ctx_idx, q_idx = idx[:n_ctx], idx[n_ctx:]
        batch = ContextBatch(x_std[ctx_idx], y_sig[ctx_idx], x_std[q_idx])
        logits, cache = forward_with_cache(params, model_config, batch, want_cache=True)
        q = softmax_probs(logits)
        p_soft = encode_targets(y_sig[q_idx], support)
        n_q = logits.shape[0]
        l_reg = float(-np.sum(p_soft * np.log(np.maximum(q, 1e-300))) / n_q)
        dlogits = (q - p_soft) / n_q
        loss = l_reg

        if adapter is not None:
            ybar_hat = q @ centers
            preds = adapter_forward(adapter, ybar_hat)
            resid = preds - y_tasks_std[q_idx]
            t_losses = (resid * resid).mean(axis=0)
            loss = total_loss(l_reg, t_losses, cfg.lam)
            if cfg.lam != 0.0:
                n_tasks = resid.shape[1]
                dpred = (2.0 * cfg.lam / (n_q * n_tasks)) * resid
                a_grads, dybar = adapter_backward(adapter, ybar_hat, dpred)
                # through the decoding expectation: d ybar/d logit_k = q_k (c_k - ybar)
                dlogits = dlogits + dybar[:, None] * q * (centers[None, :] - ybar_hat[:, None])
            else:
                a_grads = {k: np.zeros_like(getattr(adapter, k)) for k in ("w1", "b1", "w2", "b2")}

        grads = backward_from_cache(params, model_config, batch, dlogits, cache)
        if adapter is not None:
            for k in ("w1", "b1", "w2", "b2"):
                grads[f"adapter.{k}"] = a_grads[k]
        optimizer_step(state, params, grads, cfg.lr)
        losses.append(loss)
        step += 1

    return losses, step, time.monotonic() - start


def _copy_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


def finetune_sft(params, model_config, x_std, y_std, task_index: int, cfg: FineTuneConfig):
    """Fine-tune on a single task's standardized target. Returns new params."""
    if not (0 <= task_index < y_std.shape[1]):
        raise ValueError(f"task_index {task_index} out of range")
    work = _copy_params(params)
    y_sig, support = _signal_and_support(y_std, "sft", task_index, cfg, model_config.k_bins)
    losses, steps, elapsed = _finetune_loop(work, model_config, x_std, y_sig, support, cfg)
    return work, losses, steps, elapsed


def finetune_mft(params, model_config, x_std, y_std, cfg: FineTuneConfig):
    """Fine-tune on the task-averaged standardized target. Returns new params."""
    work = _copy_params(params)
    y_sig, support = _signal_and_support(y_std, "mft", None, cfg, model_config.k_bins)
    losses, steps, elapsed = _finetune_loop(work, model_config, x_std, y_sig, support, cfg)
    return work, losses, steps, elapsed


def finetune_maft(params, model_config, x_std, y_std, cfg: FineTuneConfig):
    """Averaged-target fine-tuning with per-task adapter supervision.

    Returns (params, adapter, losses, steps, elapsed); the adapter is handed
    back for inspection but is not part of the inference parameters.
    """
    work = _copy_params(params)
    y_sig, support = _signal_and_support(y_std, "maft", None, cfg, model_config.k_bins)
    adapter = init_adapter(y_std.shape[1], cfg.adapter_hidden, cfg.seed)
    losses, steps, elapsed = _finetune_loop(
        work, model_config, x_std, y_sig, support, cfg, y_tasks_std=y_std, adapter=adapter
    )
    return work, adapter, losses, steps, elapsed


def run_strategy(
    params: dict,
    model_config: ModelConfig,
    x_std: np.ndarray,
    y_std: np.ndarray,
    strategy: FineTuneStrategy,
    cfg: FineTuneConfig,
) -> FineTuneBundle:
    """Dispatch a strategy; returns one parameter set, or one per task for sft."""
    t0 = time.monotonic()
    if strategy.kind == "nft" or (cfg.deterministic and cfg.max_steps == 0):
        n = 1 if strategy.kind != "sft" else (
            1 if strategy.task_index is not None else y_std.shape[1]
        )
        return FineTuneBundle(
            strategy=strategy,
            params_list=[_copy_params(params) for _ in range(n)],
            task_indices=None if strategy.kind != "sft" else (
                [strategy.task_index] if strategy.task_index is not None else list(range(y_std.shape[1]))
            ),
            steps=[0] * n,
            elapsed_seconds=time.monotonic() - t0,
            loss_curves=[[] for _ in range(n)],
        )

    if strategy.kind == "mft":
        work, losses, steps, elapsed = finetune_mft(params, model_config, x_std, y_std, cfg)
        _, support = _signal_and_support(y_std, "mft", None, cfg, model_config.k_bins)
        return FineTuneBundle(strategy, [work], None, [steps], elapsed, [losses], [support])

    if strategy.kind == "maft":
        work, _adapter, losses, steps, elapsed = finetune_maft(params, model_config, x_std, y_std, cfg)
        _, support = _signal_and_support(y_std, "maft", None, cfg, model_config.k_bins)
        return FineTuneBundle(strategy, [work], None, [steps], elapsed, [losses], [support])

    # sft: either one requested task or a checkpoint per task
    tasks = [strategy.task_index] if strategy.task_index is not None else list(range(y_std.shape[1]))
    params_list, steps_list, curves, supports = [], [], [], []
    for ti in tasks:
        work, losses, steps, _ = finetune_sft(params, model_config, x_std, y_std, ti, cfg)
        params_list.append(work)
        steps_list.append(steps)
        curves.append(losses)
        supports.append(_signal_and_support(y_std, "sft", ti, cfg, model_config.k_bins)[1])
    return FineTuneBundle(strategy, params_list, tasks, steps_list, time.monotonic() - t0, curves, supports)
