"""Versioned JSON checkpoints for model parameters.

Floats are serialized with Python's shortest round-trip representation, so a
save/load cycle reproduces every array bit for bit. Shape mismatches against
the embedded config are rejected on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import TargetStats
from .errors import CheckpointError
from .model import ModelConfig, param_shapes
from .support import SupportSpec

SCHEMA_VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict
    support_spec: SupportSpec | None = None
    target_stats: TargetStats | None = None
    meta: dict | None = None


def save_checkpoint(path, model_config: ModelConfig, params: dict, *, support_spec=None, target_stats=None, meta=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model_config": model_config.to_dict(),
        "support_spec": support_spec.to_dict() if support_spec is not None else None,
        "target_stats": target_stats.to_dict() if target_stats is not None else None,
        "meta": meta or {},
        "params": {name: params[name].tolist() for name in sorted(params)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"unrecognized checkpoint schema_version {doc.get('schema_version')!r} in {path}"
        )
    try:
        config = ModelConfig.from_dict(doc["model_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad model_config in {path}: {exc}") from exc

    expected = param_shapes(config)
    raw = doc.get("params")
    if not isinstance(raw, dict) or set(raw) != set(expected):
        missing = set(expected) - set(raw or {})
        extra = set(raw or {}) - set(expected)
        raise CheckpointError(f"parameter names mismatch in {path}: missing={missing} extra={extra}")
    params = {}
    for name, rows in raw.items():
        arr = np.asarray(rows, dtype=np.float64)
        if arr.shape != expected[name]:
            raise CheckpointError(f"{path}: {name} has shape {arr.shape}, expected {expected[name]}")
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"{path}: {name} contains non-finite values")
        params[name] = arr

    support = doc.get("support_spec")
    stats = doc.get("target_stats")
    return Checkpoint(
        model_config=config,
        params=params,
        support_spec=SupportSpec.from_dict(support) if support else None,
        target_stats=TargetStats.from_dict(stats) if stats else None,
        meta=doc.get("meta") or {},
    )
