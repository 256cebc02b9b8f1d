"""Discretized regression target representation ("support bar").

A continuous target is represented as a probability vector over K bins with
fixed centers. Targets encode as (at most) two-hot soft labels via linear
interpolation between the neighbouring centers; predictions decode as the
expectation over the centers. Training uses cross-entropy between the soft
label and the softmax of the model logits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AllValuesEqualError, NonFiniteTargetError, ZeroProbabilityError


@dataclass(frozen=True)
class SupportSpec:
    """K strictly increasing bin centers bracketed by K+1 borders."""

    centers: np.ndarray
    borders: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        borders = np.asarray(self.borders, dtype=np.float64)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "borders", borders)
        k = centers.shape[0]
        if k < 2:
            raise ValueError(f"support needs at least 2 bins, got {k}")
        if borders.shape[0] != k + 1:
            raise ValueError("borders must have exactly K+1 entries")
        if not np.all(np.diff(centers) > 0):
            raise ValueError("centers must be strictly increasing")
        if not (np.all(borders[:-1] < centers) and np.all(centers < borders[1:])):
            raise ValueError("each center must lie strictly inside its border pair")

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    def to_dict(self) -> dict:
        return {"centers": self.centers.tolist(), "borders": self.borders.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "SupportSpec":
        return SupportSpec(np.asarray(d["centers"]), np.asarray(d["borders"]))


def build_support(values, k: int) -> SupportSpec:
    """Build an equal-mass support over `values`.

    Borders are the k+1 quantile boundaries of the values, with the outermost
    borders pushed out by 1% of the value range; centers are border midpoints.
    If duplicate quantiles collapse bins (k too large for the number of
    distinct values), the support degrades to the effective bin count with a
    warning.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot build a support from no values")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteTargetError("support values must be finite")

    vmin, vmax = float(values.min()), float(values.max())
    if vmin == vmax:
        raise AllValuesEqualError("all target values are equal; no support can be built")

    ext = 0.01 * (vmax - vmin)
    borders = np.quantile(values, np.linspace(0.0, 1.0, k + 1))
    borders[0] = vmin - ext
    borders[-1] = vmax + ext

    uniq = np.unique(borders)
    if uniq.shape[0] != borders.shape[0]:
        effective = uniq.shape[0] - 1
        if effective < 2:
            uniq = np.array([vmin - ext, 0.5 * (vmin + vmax), vmax + ext])
            effective = 2
        warnings.warn(
            f"requested k={k} exceeds distinct quantiles; degraded to effective k={effective}",
            stacklevel=2,
        )
        borders = uniq

    centers = 0.5 * (borders[:-1] + borders[1:])
    return SupportSpec(centers=centers, borders=borders)


def encode_target(y: float, spec: SupportSpec) -> np.ndarray:
    """Soft-encode a scalar target over the support bins.

    Exactly-on-center targets are one-hot; targets between two centers split
    mass linearly; targets outside [c_1, c_K] clamp to the edge bin.
    """
    if not np.isfinite(y):
        raise NonFiniteTargetError(f"target {y!r} is not finite")
    c = spec.centers
    p = np.zeros(spec.k, dtype=np.float64)
    if y <= c[0]:
        p[0] = 1.0
        return p
    if y >= c[-1]:
        p[-1] = 1.0
        return p
    hi = int(np.searchsorted(c, y, side="left"))
    if c[hi] == y:
        p[hi] = 1.0
        return p
    lo = hi - 1
    w_hi = (y - c[lo]) / (c[hi] - c[lo])
    p[lo] = 1.0 - w_hi
    p[hi] = w_hi
    return p


def encode_targets(ys, spec: SupportSpec) -> np.ndarray:
    """Vectorized encode_target for a 1-D array of targets. Returns (N, K)."""
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if not np.all(np.isfinite(ys)):
        raise NonFiniteTargetError("targets must be finite")
    c = spec.centers
    n, k = ys.shape[0], spec.k
    p = np.zeros((n, k), dtype=np.float64)
    below = ys <= c[0]
    above = ys >= c[-1]
    p[below, 0] = 1.0
    p[above, -1] = 1.0
    mid = ~(below | above)
    if np.any(mid):
        ym = ys[mid]
        hi = np.searchsorted(c, ym, side="left")
        exact = c[hi] == ym
        rows = np.nonzero(mid)[0]
        p[rows[exact], hi[exact]] = 1.0
        rows_i, hi_i = rows[~exact], hi[~exact]
        lo_i = hi_i - 1
        w_hi = (ym[~exact] - c[lo_i]) / (c[hi_i] - c[lo_i])
        p[rows_i, lo_i] = 1.0 - w_hi
        p[rows_i, hi_i] = w_hi
    return p


def softmax_probs(logits) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteTargetError("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def reg_loss(p, q) -> float:
    """Cross-entropy -sum_k p_k log q_k between soft label p and prediction q."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    if np.any(q[mask] == 0.0):
        raise ZeroProbabilityError("prediction assigns zero probability to a target bin")
    return float(-np.sum(p[mask] * np.log(q[mask])))


def reg_loss_grad(p, logits) -> np.ndarray:
    """Gradient of reg_loss(p, softmax(logits)) with respect to the logits.

    Collapses analytically to softmax(logits) - p.
    """
    p = np.asarray(p, dtype=np.float64)
    return softmax_probs(logits) - p


def decode_expectation(q, spec: SupportSpec) -> float:
    """Expected value of the bin distribution over the support centers."""
    q = np.asarray(q, dtype=np.float64)
    return float(np.dot(q, spec.centers))


def decode_expectations(q, spec: SupportSpec) -> np.ndarray:
    """Row-wise decode for an (N, K) matrix of bin distributions."""
    q = np.asarray(q, dtype=np.float64)
    return q @ spec.centers
