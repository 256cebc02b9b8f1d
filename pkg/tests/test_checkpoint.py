import json

import numpy as np
import pytest

from minipfn.checkpoint import load_checkpoint, save_checkpoint
from minipfn.data import TargetStats
from minipfn.errors import CheckpointError
from minipfn.model import ContextBatch, ModelConfig, forward, init_params
from minipfn.support import build_support

MODEL = ModelConfig(embed_dim=16, n_blocks=1, n_heads=2, ff_dim=24, k_bins=8, max_features=8)


def test_round_trip_bitwise(tmp_path):
    params = init_params(MODEL, 3)
    rng = np.random.default_rng(0)
    params["out.w"] = rng.normal(size=params["out.w"].shape)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params)
    loaded = load_checkpoint(path)
    assert loaded.model_config == MODEL
    for name in params:
        np.testing.assert_array_equal(loaded.params[name], params[name])


def test_round_trip_preserves_forward_logits(tmp_path):
    params = init_params(MODEL, 5)
    rng = np.random.default_rng(1)
    params["out.w"] = 0.3 * rng.normal(size=params["out.w"].shape)
    batch = ContextBatch(rng.normal(size=(6, 3)), rng.normal(size=6), rng.normal(size=(2, 3)))
    before = forward(params, MODEL, batch)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params)
    after = forward(load_checkpoint(path).params, MODEL, batch)
    assert np.abs(after - before).max() <= 1e-9
    np.testing.assert_array_equal(after, before)


def test_optional_fields_round_trip(tmp_path):
    params = init_params(MODEL, 0)
    support = build_support(np.arange(10) * 1.0, k=4)
    stats = TargetStats(mean=np.array([1.0, 2.0]), std=np.array([0.5, 2.5]))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params, support_spec=support, target_stats=stats, meta={"strategy": "mft"})
    loaded = load_checkpoint(path)
    np.testing.assert_array_equal(loaded.support_spec.centers, support.centers)
    np.testing.assert_array_equal(loaded.target_stats.mean, stats.mean)
    assert loaded.meta["strategy"] == "mft"


def test_unknown_version_rejected(tmp_path):
    params = init_params(MODEL, 0)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params)
    doc = json.loads(path.read_text())
    doc["schema_version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_shape_mismatch_rejected(tmp_path):
    params = init_params(MODEL, 0)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params)
    doc = json.loads(path.read_text())
    doc["params"]["out.w"] = [[1.0, 2.0]]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_missing_param_rejected(tmp_path):
    params = init_params(MODEL, 0)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, MODEL, params)
    doc = json.loads(path.read_text())
    del doc["params"]["out.b"]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_unreadable_file(tmp_path):
    path = tmp_path / "nope.json"
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_text("{not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
