"""RunConfig: the JSON document that drives every CLI command.

Sections: model, prior, finetune, data, eval, seeds. Every section is
optional and falls back to package defaults, but unknown keys anywhere are
rejected so that typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

from .data import SplitSpec, SynthConfig
from .errors import ConfigError
from .finetune import FineTuneConfig
from .model import ModelConfig
from .prior import DEFAULT_PRETRAIN_LR, DEFAULT_PRETRAIN_SEED, DEFAULT_PRETRAIN_STEPS, PriorConfig

DEFAULT_SEEDS = [0, 1, 2, 3, 4]
BUDGET_GRID_SECONDS = [0, 15, 30, 60, 120]


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    model_checkpoint: str | None = None
    prior: PriorConfig = field(default_factory=PriorConfig)
    pretrain_steps: int = DEFAULT_PRETRAIN_STEPS
    pretrain_lr: float = DEFAULT_PRETRAIN_LR
    pretrain_seed: int = DEFAULT_PRETRAIN_SEED
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)
    data_path: str | None = None
    n_targets: int | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    eps_list: tuple = (0.05, 0.025)
    budget_sweep: bool = False
    context_cap: int = 4096
    query_chunk: int = 1024
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))


def _require_keys(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _build(cls, obj: dict, where: str, rename: dict | None = None):
    rename = rename or {}
    obj = {rename.get(k, k): v for k, v in obj.items()}
    allowed = {f.name for f in fields(cls)}
    _require_keys(obj, allowed, where)
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def parse_run_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")
    _require_keys(doc, {"model", "prior", "finetune", "data", "eval", "seeds"}, "run config")
    cfg = RunConfig()

    model_sec = dict(doc.get("model", {}))
    if not isinstance(model_sec, dict):
        raise ConfigError("'model' must be an object")
    checkpoint = model_sec.pop("checkpoint", None)
    if checkpoint is not None and not isinstance(checkpoint, str):
        raise ConfigError("model.checkpoint must be a path string")
    cfg.model = _build(ModelConfig, model_sec, "model section")
    cfg.model_checkpoint = checkpoint

    prior_sec = dict(doc.get("prior", {}))
    if not isinstance(prior_sec, dict):
        raise ConfigError("'prior' must be an object")
    cfg.pretrain_steps = _pos_int(prior_sec.pop("steps", cfg.pretrain_steps), "prior.steps", zero_ok=True)
    cfg.pretrain_lr = _pos_float(prior_sec.pop("lr", cfg.pretrain_lr), "prior.lr")
    cfg.pretrain_seed = _any_int(prior_sec.pop("seed", cfg.pretrain_seed), "prior.seed")
    for key in ("d_range", "n_range", "noise_std_range"):
        if key in prior_sec:
            prior_sec[key] = tuple(prior_sec[key])
    cfg.prior = _build(PriorConfig, prior_sec, "prior section")

    ft_sec = dict(doc.get("finetune", {}))
    if not isinstance(ft_sec, dict):
        raise ConfigError("'finetune' must be an object")
    cfg.finetune = _build(FineTuneConfig, ft_sec, "finetune section", rename={"lambda": "lam"})

    data_sec = dict(doc.get("data", {}))
    if not isinstance(data_sec, dict):
        raise ConfigError("'data' must be an object")
    _require_keys(data_sec, {"path", "n_targets", "synth", "split"}, "data section")
    cfg.data_path = data_sec.get("path")
    if cfg.data_path is not None and not isinstance(cfg.data_path, str):
        raise ConfigError("data.path must be a string")
    if "n_targets" in data_sec:
        cfg.n_targets = _pos_int(data_sec["n_targets"], "data.n_targets")
    if cfg.data_path is not None and cfg.n_targets is None:
        raise ConfigError("data.path requires data.n_targets")
    if "synth" in data_sec:
        if not isinstance(data_sec["synth"], dict):
            raise ConfigError("data.synth must be an object")
        cfg.synth = _build(SynthConfig, data_sec["synth"], "data.synth section")
    if "split" in data_sec:
        if not isinstance(data_sec["split"], dict):
            raise ConfigError("data.split must be an object")
        cfg.split = _build(SplitSpec, data_sec["split"], "data.split section")

    eval_sec = dict(doc.get("eval", {}))
    if not isinstance(eval_sec, dict):
        raise ConfigError("'eval' must be an object")
    _require_keys(eval_sec, {"eps_list", "budget_sweep", "context_cap", "query_chunk"}, "eval section")
    if "eps_list" in eval_sec:
        eps = eval_sec["eps_list"]
        if not (isinstance(eps, list) and len(eps) == 2 and all(isinstance(e, (int, float)) and e > 0 for e in eps)):
            raise ConfigError("eval.eps_list must be two positive numbers")
        cfg.eps_list = (float(eps[0]), float(eps[1]))
    if "budget_sweep" in eval_sec:
        if not isinstance(eval_sec["budget_sweep"], bool):
            raise ConfigError("eval.budget_sweep must be a boolean")
        cfg.budget_sweep = eval_sec["budget_sweep"]
    if "context_cap" in eval_sec:
        cfg.context_cap = _pos_int(eval_sec["context_cap"], "eval.context_cap")
    if "query_chunk" in eval_sec:
        cfg.query_chunk = _pos_int(eval_sec["query_chunk"], "eval.query_chunk")

    seeds = doc.get("seeds", list(DEFAULT_SEEDS))
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)):
        raise ConfigError("'seeds' must be a nonempty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("'seeds' must not repeat")
    cfg.seeds = list(seeds)
    return cfg


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_run_config(doc)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Per-seed view used by the benchmark: split and fine-tuning reseeded."""
    out = replace(cfg)
    out.split = SplitSpec(cfg.split.train_fraction, seed)
    out.finetune = replace(cfg.finetune, seed=seed)
    return out


def _pos_int(v, where, zero_ok=False):
    if not isinstance(v, int) or isinstance(v, bool) or v < (0 if zero_ok else 1):
        raise ConfigError(f"{where} must be a {'non-negative' if zero_ok else 'positive'} integer")
    return v


def _any_int(v, where):
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{where} must be an integer")
    return v


def _pos_float(v, where):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
        raise ConfigError(f"{where} must be a positive number")
    return float(v)
