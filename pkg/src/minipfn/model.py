"""Two-way attention transformer for in-context tabular regression.

Rows are samples; tokens within a row are the feature cells plus one target
slot. Each block attends (a) among the tokens of a row, then (b) down each
token column across rows, where train rows see only train rows and query rows
see the train rows plus themselves. K-bin logits are read from each query
row's target-slot token.

No positional information is attached to rows or feature columns anywhere, so
invariance to train-row order and to feature-column order is exact (up to
floating-point drift), and the cross-row mask guarantees that query rows can
never influence each other or the train representations.

forward/backward are hand-written reverse-mode numpy. `backward` returns the
exact gradient of sum_over_queries(<dlogits, logits>) for arbitrary dlogits,
so any loss whose logit gradient is known plugs in directly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FeatureCountExceedsMaxError

Params = dict  # name -> np.ndarray

_LN_EPS = 1e-5
# ~200 MB of float64 transient per attention chunk in cache-free mode
_CHUNK_BUDGET = 25_000_000
_N_WORKERS = max(1, min(2, os.cpu_count() or 1))
_EXECUTOR = None


def _run_chunks(fn, total: int, chunk: int):
    """Apply fn(lo, hi) over [0, total) in chunks, threaded when it pays off.

    Each call writes to a disjoint output slice, so results are identical
    whatever the scheduling.
    """
    spans = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    if len(spans) == 1 or _N_WORKERS == 1:
        for lo, hi in spans:
            fn(lo, hi)
        return
    global _EXECUTOR
    if _EXECUTOR is None:
        _EXECUTOR = ThreadPoolExecutor(max_workers=_N_WORKERS)
    list(_EXECUTOR.map(lambda span: fn(*span), spans))


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    n_blocks: int = 3
    n_heads: int = 4
    ff_dim: int = 128
    k_bins: int = 32
    max_features: int = 64

    def __post_init__(self):
        for name in ("embed_dim", "n_blocks", "n_heads", "ff_dim", "k_bins", "max_features"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.embed_dim % self.n_heads != 0:
            raise ValueError("embed_dim must be divisible by n_heads")

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "n_blocks": self.n_blocks,
            "n_heads": self.n_heads,
            "ff_dim": self.ff_dim,
            "k_bins": self.k_bins,
            "max_features": self.max_features,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**{k: int(v) for k, v in d.items()})


@dataclass
class ContextBatch:
    """Standardized train rows with labels plus unlabeled query rows."""

    x_train: np.ndarray  # (N_tr, D)
    y_train: np.ndarray  # (N_tr,)
    x_query: np.ndarray  # (N_q, D)

    def __post_init__(self):
        self.x_train = np.asarray(self.x_train, dtype=np.float64)
        self.y_train = np.asarray(self.y_train, dtype=np.float64).ravel()
        self.x_query = np.asarray(self.x_query, dtype=np.float64)
        if self.x_train.ndim != 2 or self.x_query.ndim != 2:
            raise ValueError("x_train and x_query must be 2-D")
        if self.x_train.shape[0] < 1:
            raise ValueError("need at least one train row")
        if self.y_train.shape[0] != self.x_train.shape[0]:
            raise ValueError("y_train length must match x_train rows")
        if self.x_query.shape[1] != self.x_train.shape[1]:
            raise ValueError("x_query feature count must match x_train")
        for arr in (self.x_train, self.y_train, self.x_query):
            if not np.all(np.isfinite(arr)):
                raise ValueError("context batch contains non-finite values")

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def n_query(self) -> int:
        return self.x_query.shape[0]

    @property
    def n_features(self) -> int:
        return self.x_train.shape[1]


def param_shapes(config: ModelConfig) -> dict:
    """Expected array shape for every parameter name."""
    e, f, k = config.embed_dim, config.ff_dim, config.k_bins
    shapes = {
        "embed.feat_w": (e,),
        "embed.feat_b": (e,),
        "embed.tgt_w": (e,),
        "embed.tgt_b": (e,),
        "embed.query_tok": (e,),
    }
    for i in range(config.n_blocks):
        for stage in ("col", "row"):
            pre = f"block{i}.{stage}"
            shapes[f"{pre}.ln_g"] = (e,)
            shapes[f"{pre}.ln_b"] = (e,)
            for w in ("wq", "wk", "wv", "wo"):
                shapes[f"{pre}.{w}"] = (e, e)
            for b in ("bq", "bk", "bv", "bo"):
                shapes[f"{pre}.{b}"] = (e,)
        pre = f"block{i}.ff"
        shapes[f"{pre}.ln_g"] = (e,)
        shapes[f"{pre}.ln_b"] = (e,)
        shapes[f"{pre}.w1"] = (e, f)
        shapes[f"{pre}.b1"] = (f,)
        shapes[f"{pre}.w2"] = (f, e)
        shapes[f"{pre}.b2"] = (e,)
    shapes["out.ln_g"] = (e,)
    shapes["out.ln_b"] = (e,)
    shapes["out.w"] = (e, k)
    shapes["out.b"] = (k,)
    return shapes


def init_params(config: ModelConfig, seed: int) -> Params:
    """Deterministic initialization.

    Weight matrices and embedding vectors use a uniform fan-in rule
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero, layer norms at
    identity, and the output head at exactly zero so the initial bin
    distribution is uniform for any input.
    """
    rng = np.random.default_rng(seed)
    p: Params = {}

    def uniform(name, shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        p[name] = rng.uniform(-bound, bound, size=shape)

    def zeros(name, shape):
        p[name] = np.zeros(shape, dtype=np.float64)

    def ones(name, shape):
        p[name] = np.ones(shape, dtype=np.float64)

    e = config.embed_dim
    uniform("embed.feat_w", (e,), 1)
    zeros("embed.feat_b", (e,))
    uniform("embed.tgt_w", (e,), 1)
    zeros("embed.tgt_b", (e,))
    uniform("embed.query_tok", (e,), 1)

    for i in range(config.n_blocks):
        for stage in ("col", "row"):
            pre = f"block{i}.{stage}"
            ones(f"{pre}.ln_g", (e,))
            zeros(f"{pre}.ln_b", (e,))
            for w in ("wq", "wk", "wv", "wo"):
                uniform(f"{pre}.{w}", (e, e), e)
            for b in ("bq", "bk", "bv", "bo"):
                zeros(f"{pre}.{b}", (e,))
        pre = f"block{i}.ff"
        ones(f"{pre}.ln_g", (e,))
        zeros(f"{pre}.ln_b", (e,))
        uniform(f"{pre}.w1", (e, config.ff_dim), e)
        zeros(f"{pre}.b1", (config.ff_dim,))
        uniform(f"{pre}.w2", (config.ff_dim, e), config.ff_dim)
        zeros(f"{pre}.b2", (e,))

    ones("out.ln_g", (e,))
    zeros("out.ln_b", (e,))
    zeros("out.w", (e, config.k_bins))
    zeros("out.b", (config.k_bins,))
    return p


# ---------------------------------------------------------------------------
# primitives: each forward returns (out, cache); backward consumes the cache
# ---------------------------------------------------------------------------


def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def _layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _linear_fwd(x, w, b):
    return x @ w + b


def _linear_bwd(dy, x, w):
    dx = dy @ w.T
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x.reshape(-1, x.shape[-1]).T @ dy2
    db = dy2.sum(axis=0)
    return dx, dw, db


_GELU_C0 = math.sqrt(2.0 / math.pi)
_GELU_C1 = 0.044715


def _gelu_fwd(x):
    u = _GELU_C0 * (x + _GELU_C1 * x**3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def _gelu_bwd(dy, x, t):
    du = _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _softmax(scores):
    # mutates `scores` in place; callers always pass freshly computed arrays
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    return scores


def _softmax_bwd(a, da):
    return a * (da - np.sum(da * a, axis=-1, keepdims=True))


def _split_heads(x, n_heads):
    # (B, S, E) -> (B, H, S, E/H)
    b, s, e = x.shape
    return x.reshape(b, s, n_heads, e // n_heads).swapaxes(1, 2)


def _merge_heads(x):
    b, h, s, hd = x.shape
    return x.swapaxes(1, 2).reshape(b, s, h * hd)


# ---------------------------------------------------------------------------
# column attention: full attention among the tokens of each row
# ---------------------------------------------------------------------------


def _col_attn_fwd(h, p, pre, cfg, want_cache):
    xin, ln_cache = _layernorm_fwd(h, p[f"{pre}.ln_g"], p[f"{pre}.ln_b"])
    if want_cache:
        out, attn_cache = _col_attn_core(xin, p, pre, cfg, True)
        return out, (xin, ln_cache, attn_cache)
    rows = xin.shape[0]
    per_row = cfg.n_heads * xin.shape[1] ** 2
    chunk = max(1, min(rows, _CHUNK_BUDGET // (_N_WORKERS * max(per_row, 1))))
    out = np.empty_like(xin)

    def work(lo, hi):
        out[lo:hi], _ = _col_attn_core(xin[lo:hi], p, pre, cfg, False)

    _run_chunks(work, rows, chunk)
    return out, None


def _col_attn_core(xin, p, pre, cfg, want_cache):
    scale = 1.0 / math.sqrt(cfg.embed_dim // cfg.n_heads)
    q = _linear_fwd(xin, p[f"{pre}.wq"], p[f"{pre}.bq"])
    k = _linear_fwd(xin, p[f"{pre}.wk"], p[f"{pre}.bk"])
    v = _linear_fwd(xin, p[f"{pre}.wv"], p[f"{pre}.bv"])
    qh, kh, vh = (_split_heads(t, cfg.n_heads) for t in (q, k, v))
    a = _softmax((qh @ kh.swapaxes(-1, -2)) * scale)
    ctx = _merge_heads(a @ vh)
    out = _linear_fwd(ctx, p[f"{pre}.wo"], p[f"{pre}.bo"])
    if not want_cache:
        return out, None
    return out, (qh, kh, vh, a, ctx)


def _col_attn_bwd(dout, cache, p, pre, cfg, grads):
    xin, ln_cache, (qh, kh, vh, a, ctx) = cache
    scale = 1.0 / math.sqrt(cfg.embed_dim // cfg.n_heads)

    dctx, dwo, dbo = _linear_bwd(dout, ctx, p[f"{pre}.wo"])
    grads[f"{pre}.wo"] += dwo
    grads[f"{pre}.bo"] += dbo

    dctx_h = _split_heads(dctx, cfg.n_heads)
    da = dctx_h @ vh.swapaxes(-1, -2)
    dvh = a.swapaxes(-1, -2) @ dctx_h
    ds = _softmax_bwd(a, da) * scale
    dqh = ds @ kh
    dkh = ds.swapaxes(-1, -2) @ qh

    dxin = np.zeros_like(xin)
    for name, dth in (("q", dqh), ("k", dkh), ("v", dvh)):
        dt = _merge_heads(dth)
        dx, dw, db = _linear_bwd(dt, xin, p[f"{pre}.w{name}"])
        grads[f"{pre}.w{name}"] += dw
        grads[f"{pre}.b{name}"] += db
        dxin += dx

    dh, dg, db = _layernorm_bwd(dxin, ln_cache)
    grads[f"{pre}.ln_g"] += dg
    grads[f"{pre}.ln_b"] += db
    return dh


# ---------------------------------------------------------------------------
# row attention: per token column, across rows, with the train/query mask
# ---------------------------------------------------------------------------


def _row_attn_fwd(h, p, pre, cfg, n_train, want_cache):
    xin, ln_cache = _layernorm_fwd(h, p[f"{pre}.ln_g"], p[f"{pre}.ln_b"])
    x_t = xin.swapaxes(0, 1)  # (S, R, E): token columns become the batch axis
    n_rows = x_t.shape[1]
    n_q = n_rows - n_train
    if want_cache:
        out_t, attn_cache = _row_attn_core(x_t, p, pre, cfg, n_train, True)
        return out_t.swapaxes(0, 1), (xin, ln_cache, attn_cache)
    per_col = cfg.n_heads * (n_train * n_train + n_q * (n_train + 1))
    chunk = max(1, min(x_t.shape[0], _CHUNK_BUDGET // (_N_WORKERS * max(per_col, 1))))
    out_t = np.empty_like(x_t)

    def work(lo, hi):
        out_t[lo:hi], _ = _row_attn_core(x_t[lo:hi], p, pre, cfg, n_train, False)

    _run_chunks(work, x_t.shape[0], chunk)
    return out_t.swapaxes(0, 1), None


def _row_attn_core(x_t, p, pre, cfg, n_train, want_cache):
    scale = 1.0 / math.sqrt(cfg.embed_dim // cfg.n_heads)
    q = _linear_fwd(x_t, p[f"{pre}.wq"], p[f"{pre}.bq"])
    k = _linear_fwd(x_t, p[f"{pre}.wk"], p[f"{pre}.bk"])
    v = _linear_fwd(x_t, p[f"{pre}.wv"], p[f"{pre}.bv"])
    qh, kh, vh = (_split_heads(t, cfg.n_heads) for t in (q, k, v))  # (S,H,R,hd)

    q_tr, q_q = qh[:, :, :n_train], qh[:, :, n_train:]
    k_tr, k_q = kh[:, :, :n_train], kh[:, :, n_train:]
    v_tr, v_q = vh[:, :, :n_train], vh[:, :, n_train:]

    # train rows attend to the train rows only
    s_tt = q_tr @ k_tr.swapaxes(-1, -2)
    s_tt *= scale
    a_tt = _softmax(s_tt)
    ctx_tr = a_tt @ v_tr

    # each query row attends to the train rows plus itself (last column)
    n_q = q_q.shape[2]
    s_q = np.empty((x_t.shape[0], cfg.n_heads, n_q, n_train + 1), dtype=np.float64)
    np.matmul(q_q, k_tr.swapaxes(-1, -2), out=s_q[..., :n_train])
    np.sum(q_q * k_q, axis=-1, out=s_q[..., n_train])
    s_q *= scale
    a_q = _softmax(s_q)
    ctx_q = a_q[..., :n_train] @ v_tr + a_q[..., n_train:] * v_q

    ctx = _merge_heads(np.concatenate([ctx_tr, ctx_q], axis=2))
    out = _linear_fwd(ctx, p[f"{pre}.wo"], p[f"{pre}.bo"])
    if not want_cache:
        return out, None
    return out, (qh, kh, vh, a_tt, a_q, ctx)


def _row_attn_bwd(dout, cache, p, pre, cfg, n_train, grads):
    xin, ln_cache, (qh, kh, vh, a_tt, a_q, ctx) = cache
    scale = 1.0 / math.sqrt(cfg.embed_dim // cfg.n_heads)
    dout_t = dout.swapaxes(0, 1)

    dctx, dwo, dbo = _linear_bwd(dout_t, ctx, p[f"{pre}.wo"])
    grads[f"{pre}.wo"] += dwo
    grads[f"{pre}.bo"] += dbo
    dctx_h = _split_heads(dctx, cfg.n_heads)
    dctx_tr, dctx_q = dctx_h[:, :, :n_train], dctx_h[:, :, n_train:]

    q_tr, q_q = qh[:, :, :n_train], qh[:, :, n_train:]
    k_tr, k_q = kh[:, :, :n_train], kh[:, :, n_train:]
    v_tr, v_q = vh[:, :, :n_train], vh[:, :, n_train:]

    # query side: ctx_q = a_q[:Ntr] @ v_tr + a_q[Ntr] * v_q
    da_q = np.concatenate(
        [dctx_q @ v_tr.swapaxes(-1, -2), np.sum(dctx_q * v_q, axis=-1, keepdims=True)],
        axis=-1,
    )
    dv_tr = a_q[..., :n_train].swapaxes(-1, -2) @ dctx_q
    dv_q = a_q[..., n_train:] * dctx_q
    ds_q = _softmax_bwd(a_q, da_q) * scale
    ds_qt, ds_self = ds_q[..., :n_train], ds_q[..., n_train:]
    dq_q = ds_qt @ k_tr + ds_self * k_q
    dk_q = ds_self * q_q
    dk_tr = ds_qt.swapaxes(-1, -2) @ q_q

    # train side: ctx_tr = a_tt @ v_tr
    da_tt = dctx_tr @ v_tr.swapaxes(-1, -2)
    dv_tr += a_tt.swapaxes(-1, -2) @ dctx_tr
    ds_tt = _softmax_bwd(a_tt, da_tt) * scale
    dq_tr = ds_tt @ k_tr
    dk_tr += ds_tt.swapaxes(-1, -2) @ q_tr

    dqh = np.concatenate([dq_tr, dq_q], axis=2)
    dkh = np.concatenate([dk_tr, dk_q], axis=2)
    dvh = np.concatenate([dv_tr, dv_q], axis=2)

    x_t = xin.swapaxes(0, 1)
    dx_t = np.zeros_like(x_t)
    for name, dth in (("q", dqh), ("k", dkh), ("v", dvh)):
        dt = _merge_heads(dth)
        dx, dw, db = _linear_bwd(dt, x_t, p[f"{pre}.w{name}"])
        grads[f"{pre}.w{name}"] += dw
        grads[f"{pre}.b{name}"] += db
        dx_t += dx

    dh, dg, db = _layernorm_bwd(dx_t.swapaxes(0, 1), ln_cache)
    grads[f"{pre}.ln_g"] += dg
    grads[f"{pre}.ln_b"] += db
    return dh


# ---------------------------------------------------------------------------
# feed-forward
# ---------------------------------------------------------------------------


def _ff_fwd(h, p, pre, want_cache):
    xin, ln_cache = _layernorm_fwd(h, p[f"{pre}.ln_g"], p[f"{pre}.ln_b"])
    a1 = _linear_fwd(xin, p[f"{pre}.w1"], p[f"{pre}.b1"])
    g1, t = _gelu_fwd(a1)
    out = _linear_fwd(g1, p[f"{pre}.w2"], p[f"{pre}.b2"])
    if not want_cache:
        return out, None
    return out, (xin, ln_cache, a1, t, g1)


def _ff_bwd(dout, cache, p, pre, grads):
    xin, ln_cache, a1, t, g1 = cache
    dg1, dw2, db2 = _linear_bwd(dout, g1, p[f"{pre}.w2"])
    grads[f"{pre}.w2"] += dw2
    grads[f"{pre}.b2"] += db2
    da1 = _gelu_bwd(dg1, a1, t)
    dxin, dw1, db1 = _linear_bwd(da1, xin, p[f"{pre}.w1"])
    grads[f"{pre}.w1"] += dw1
    grads[f"{pre}.b1"] += db1
    dh, dg, db = _layernorm_bwd(dxin, ln_cache)
    grads[f"{pre}.ln_g"] += dg
    grads[f"{pre}.ln_b"] += db
    return dh


# ---------------------------------------------------------------------------
# full model
# ---------------------------------------------------------------------------


def _embed_tokens(params, batch):
    n_tr, n_q, d = batch.n_train, batch.n_query, batch.n_features
    x_all = np.concatenate([batch.x_train, batch.x_query], axis=0)
    tok = x_all[:, :, None] * params["embed.feat_w"] + params["embed.feat_b"]
    tgt = np.empty((n_tr + n_q, params["embed.tgt_w"].shape[0]), dtype=np.float64)
    tgt[:n_tr] = batch.y_train[:, None] * params["embed.tgt_w"] + params["embed.tgt_b"]
    tgt[n_tr:] = params["embed.query_tok"]
    h = np.concatenate([tok, tgt[:, None, :]], axis=1)  # (R, D+1, E)
    return h, x_all


def forward_with_cache(params: Params, config: ModelConfig, batch: ContextBatch, want_cache: bool = True):
    """Run the model; returns (logits, cache). cache is None when not requested."""
    if batch.n_features > config.max_features:
        raise FeatureCountExceedsMaxError(
            f"{batch.n_features} features exceed configured max {config.max_features}"
        )
    n_tr = batch.n_train
    h, x_all = _embed_tokens(params, batch)
    block_caches = []
    for i in range(config.n_blocks):
        ca_out, ca_cache = _col_attn_fwd(h, params, f"block{i}.col", config, want_cache)
        h = h + ca_out
        ra_out, ra_cache = _row_attn_fwd(h, params, f"block{i}.row", config, n_tr, want_cache)
        h = h + ra_out
        ff_out, ff_cache = _ff_fwd(h, params, f"block{i}.ff", want_cache)
        h = h + ff_out
        if want_cache:
            block_caches.append((ca_cache, ra_cache, ff_cache))

    g_in = h[n_tr:, -1, :]  # query rows, target slot
    g, out_ln_cache = _layernorm_fwd(g_in, params["out.ln_g"], params["out.ln_b"])
    logits = _linear_fwd(g, params["out.w"], params["out.b"])
    if not want_cache:
        return logits, None
    return logits, (x_all, block_caches, g, out_ln_cache, h.shape)


def forward(params: Params, config: ModelConfig, batch: ContextBatch) -> np.ndarray:
    """K-bin logits for every query row, shape (N_q, K)."""
    logits, _ = forward_with_cache(params, config, batch, want_cache=False)
    return logits


def backward_from_cache(
    params: Params, config: ModelConfig, batch: ContextBatch, dlogits: np.ndarray, cache
) -> Params:
    """Exact gradients of sum(<dlogits, logits>) w.r.t. every parameter."""
    x_all, block_caches, g, out_ln_cache, h_shape = cache
    n_tr = batch.n_train
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    dlogits = np.asarray(dlogits, dtype=np.float64)

    dg, dw, db = _linear_bwd(dlogits, g, params["out.w"])
    grads["out.w"] += dw
    grads["out.b"] += db
    dg_in, dlng, dlnb = _layernorm_bwd(dg, out_ln_cache)
    grads["out.ln_g"] += dlng
    grads["out.ln_b"] += dlnb

    dh = np.zeros(h_shape, dtype=np.float64)
    dh[n_tr:, -1, :] = dg_in

    for i in reversed(range(config.n_blocks)):
        ca_cache, ra_cache, ff_cache = block_caches[i]
        dh = dh + _ff_bwd(dh, ff_cache, params, f"block{i}.ff", grads)
        dh = dh + _row_attn_bwd(dh, ra_cache, params, f"block{i}.row", config, n_tr, grads)
        dh = dh + _col_attn_bwd(dh, ca_cache, params, f"block{i}.col", config, grads)

    # token embeddings: feature cells share one scalar embedder, the target
    # slot splits into the train-label embedder and the learned query token
    dtok = dh[:, :-1, :]
    grads["embed.feat_w"] += np.einsum("rd,rde->e", x_all, dtok)
    grads["embed.feat_b"] += dtok.sum(axis=(0, 1))
    dtgt = dh[:, -1, :]
    grads["embed.tgt_w"] += batch.y_train @ dtgt[:n_tr]
    grads["embed.tgt_b"] += dtgt[:n_tr].sum(axis=0)
    grads["embed.query_tok"] += dtgt[n_tr:].sum(axis=0)
    return grads


def backward(params: Params, config: ModelConfig, batch: ContextBatch, dlogits: np.ndarray) -> Params:
    """Gradient record shaped like the parameters (recomputes the forward)."""
    _, cache = forward_with_cache(params, config, batch, want_cache=True)
    return backward_from_cache(params, config, batch, dlogits, cache)
