import os

import pytest

from minipfn.checkpoint import load_checkpoint, save_checkpoint
from minipfn.model import ModelConfig, init_params
from minipfn.prior import (
    DEFAULT_PRETRAIN_LR,
    DEFAULT_PRETRAIN_SEED,
    DEFAULT_PRETRAIN_STEPS,
    PriorConfig,
    pretrain,
)


@pytest.fixture(scope="session")
def default_pretrained():
    """The package-default pre-trained model, shared by the acceptance tests.

    Pre-training takes tens of minutes; set MINIPFN_ACCEPT_CKPT to a checkpoint
    produced with identical defaults to reuse one across sessions (development
    convenience; CI and release runs should leave it unset).
    """
    cached = os.environ.get("MINIPFN_ACCEPT_CKPT")
    if cached and os.path.isfile(cached):
        ckpt = load_checkpoint(cached)
        if ckpt.model_config == ModelConfig() and ckpt.meta.get("steps") == DEFAULT_PRETRAIN_STEPS:
            return ckpt.params, ckpt.model_config

    config = ModelConfig()
    params0 = init_params(config, DEFAULT_PRETRAIN_SEED)
    params, _ = pretrain(
        params0, config, PriorConfig(), DEFAULT_PRETRAIN_STEPS, DEFAULT_PRETRAIN_LR, DEFAULT_PRETRAIN_SEED
    )
    if cached:
        save_checkpoint(cached, config, params, meta={"kind": "pretrained", "steps": DEFAULT_PRETRAIN_STEPS})
    return params, config
