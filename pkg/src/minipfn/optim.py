"""Adaptive-moment optimizer over named parameter dicts.

First/second moment exponential averages with bias correction (decay 0.9 and
0.999, epsilon 1e-8). Steps are rejected wholesale if any gradient entry is
non-finite, leaving parameters and state untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGradientError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class OptState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(state: OptState, params: dict, grads: dict, lr: float):
    """One Adam update, in place. Returns (state, params) for chaining."""
    for name in params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {name!r}; step rejected")

    state.step += 1
    t = state.step
    bc1 = 1.0 - BETA1**t
    bc2 = 1.0 - BETA2**t
    for name in sorted(params):
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + EPS)
    return state, params
