"""Command-line benchmark harness.

Subcommands: pretrain | finetune | eval | benchmark | report. All are driven
by one JSON run config; see README for the schema. Exit codes: 0 ok,
2 config error, 3 divergence, 4 data/checkpoint error, 5 missing results.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .baseline import train_stl_mlp
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    TabularDataset,
    gen_synthetic_steel,
    impute_and_stats,
    load_csv,
    split,
    standardize_features,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DivergenceError,
    MiniPfnError,
    NoResultsError,
)
from .finetune import STRATEGY_KINDS, FineTuneStrategy, run_strategy, standardize_targets
from .inference import predict_all_tasks
from .metrics import evaluate_predictions, mtl_gain, spearman_matrix
from .model import init_params
from .prior import pretrain
from .report import render_report, write_matrix_csv
from .runconfig import BUDGET_GRID_SECONDS, RunConfig, load_run_config, with_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_DATA = 4
EXIT_NO_RESULTS = 5

RESULTS_HEADER = ["model", "seed", "task", "mae_pct", "pam5", "pam2_5", "ev"]
SUMMARY_HEADER = ["model", "seed", "delta_m"]
GAIN_HEADER = ["budget_s", "strategy", "delta_m"]
BENCH_MODELS = ["stl", "nft", "sft", "mft", "maft"]


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


@dataclass
class PreparedData:
    train_idx: np.ndarray
    test_idx: np.ndarray
    feat_stats: object
    target_stats: object
    x_train: np.ndarray  # imputed, original units
    x_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray
    x_train_std: np.ndarray
    x_test_std: np.ndarray
    y_train_std: np.ndarray
    task_names: list


def load_dataset(cfg: RunConfig) -> TabularDataset:
    if cfg.data_path is not None:
        return load_csv(cfg.data_path, cfg.n_targets)
    return gen_synthetic_steel(cfg.synth)


def prepare_data(ds: TabularDataset, split_spec) -> PreparedData:
    train_idx, test_idx = split(ds, split_spec)
    imputed, feat_stats, target_stats = impute_and_stats(ds, train_idx)
    x_train, x_test = imputed.x[train_idx], imputed.x[test_idx]
    y_train, y_test = imputed.y[train_idx], imputed.y[test_idx]
    return PreparedData(
        train_idx=train_idx,
        test_idx=test_idx,
        feat_stats=feat_stats,
        target_stats=target_stats,
        x_train=x_train,
        x_test=x_test,
        y_train=y_train,
        y_test=y_test,
        x_train_std=standardize_features(x_train, feat_stats),
        x_test_std=standardize_features(x_test, feat_stats),
        y_train_std=standardize_targets(y_train, target_stats),
        task_names=list(imputed.target_names),
    )


def obtain_base_model(cfg: RunConfig, out_dir: str | None = None):
    """Load the configured checkpoint, or pre-train from scratch."""
    if cfg.model_checkpoint is not None:
        ckpt = load_checkpoint(cfg.model_checkpoint)
        return ckpt.params, ckpt.model_config, None
    params0 = init_params(cfg.model, cfg.pretrain_seed)
    params, curve = pretrain(
        params0, cfg.model, cfg.prior, cfg.pretrain_steps, cfg.pretrain_lr, cfg.pretrain_seed
    )
    if out_dir is not None:
        save_checkpoint(
            os.path.join(out_dir, "pretrained.json"),
            cfg.model,
            params,
            meta={"kind": "pretrained", "steps": cfg.pretrain_steps, "seed": cfg.pretrain_seed},
        )
        _write_loss_curve(os.path.join(out_dir, "pretrain_loss.csv"), curve)
    return params, cfg.model, curve


def _write_loss_curve(path, curve):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss"])
        for i, loss in enumerate(curve):
            w.writerow([i, repr(float(loss))])


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


def _predict_for_bundle(bundle_params, model_cfg, prep: PreparedData, cfg: RunConfig, seed: int):
    return predict_all_tasks(
        bundle_params,
        model_cfg,
        prep.x_train,
        prep.y_train,
        prep.x_test,
        prep.feat_stats,
        prep.target_stats,
        context_cap=cfg.context_cap,
        seed=seed,
        query_chunk=cfg.query_chunk,
    )


# ---------------------------------------------------------------------------
# subcommands (raise on failure; `main` maps exceptions to exit codes)
# ---------------------------------------------------------------------------


def cmd_pretrain(config_path, out_dir) -> int:
    cfg = load_run_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    params0 = init_params(cfg.model, cfg.pretrain_seed)
    try:
        params, curve = pretrain(
            params0, cfg.model, cfg.prior, cfg.pretrain_steps, cfg.pretrain_lr, cfg.pretrain_seed
        )
    except DivergenceError as exc:
        _write_loss_curve(os.path.join(out_dir, "pretrain_loss.csv"), exc.loss_curve)
        raise
    save_checkpoint(
        os.path.join(out_dir, "pretrained.json"),
        cfg.model,
        params,
        meta={"kind": "pretrained", "steps": cfg.pretrain_steps, "seed": cfg.pretrain_seed},
    )
    _write_loss_curve(os.path.join(out_dir, "pretrain_loss.csv"), curve)
    return EXIT_OK


def cmd_finetune(config_path, checkpoint_path, strategy_flag, out_dir, seed=None, deterministic=None) -> int:
    if strategy_flag not in STRATEGY_KINDS:
        raise ConfigError(f"unknown strategy {strategy_flag!r}; expected one of {STRATEGY_KINDS}")
    cfg = load_run_config(config_path)
    if seed is not None:
        cfg.finetune = replace(cfg.finetune, seed=seed)
    if deterministic is not None:
        cfg.finetune = replace(cfg.finetune, deterministic=deterministic)
    os.makedirs(out_dir, exist_ok=True)

    ckpt = load_checkpoint(checkpoint_path)
    ds = load_dataset(cfg)
    prep = prepare_data(ds, cfg.split)
    if ds.n_features > ckpt.model_config.max_features:
        raise DataError(
            f"dataset has {ds.n_features} features; checkpoint allows {ckpt.model_config.max_features}"
        )

    bundle = run_strategy(
        ckpt.params, ckpt.model_config, prep.x_train_std, prep.y_train_std,
        FineTuneStrategy(strategy_flag), cfg.finetune,
    )

    written = []
    for i, params in enumerate(bundle.params_list):
        if strategy_flag == "sft":
            task_i = bundle.task_indices[i]
            path = os.path.join(out_dir, f"finetuned_sft.task{task_i}.json")
            meta = {"kind": "finetuned", "strategy": "sft", "task_index": task_i}
        else:
            path = os.path.join(out_dir, f"finetuned_{strategy_flag}.json")
            meta = {"kind": "finetuned", "strategy": strategy_flag}
        meta.update({"steps": bundle.steps[i], "seed": cfg.finetune.seed})
        support = bundle.supports[i] if bundle.supports else None
        save_checkpoint(path, ckpt.model_config, params, support_spec=support,
                        target_stats=prep.target_stats, meta=meta)
        written.append(path)

    run_meta = {
        "strategy": strategy_flag,
        "steps": bundle.steps,
        "elapsed_seconds": bundle.elapsed_seconds,
        "final_loss": [curve[-1] if curve else None for curve in bundle.loss_curves],
        "seed": cfg.finetune.seed,
        "deterministic": cfg.finetune.deterministic,
        "checkpoints": written,
    }
    with open(os.path.join(out_dir, f"finetune_meta_{strategy_flag}.json"), "w", encoding="utf-8") as fh:
        json.dump(run_meta, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _bundle_from_checkpoints(paths, n_tasks):
    ckpts = [load_checkpoint(p) for p in paths]
    config = ckpts[0].model_config
    for c in ckpts[1:]:
        if c.model_config != config:
            raise CheckpointError("checkpoints disagree on the model config")
    if len(ckpts) == 1:
        return ckpts[0].params, config, ckpts[0].meta
    if len(ckpts) != n_tasks:
        raise DataError(f"got {len(ckpts)} checkpoints for {n_tasks} tasks; expected 1 or {n_tasks}")
    indexed = []
    for i, c in enumerate(ckpts):
        ti = c.meta.get("task_index", i)
        indexed.append((ti, c.params))
    indexed.sort(key=lambda pair: pair[0])
    return [p for _, p in indexed], config, ckpts[0].meta


def cmd_eval(config_path, checkpoint_paths, out_dir, predict_fn=None, seed=None) -> int:
    cfg = load_run_config(config_path)
    if seed is not None:
        cfg.seeds = [seed]
    os.makedirs(out_dir, exist_ok=True)
    ds = load_dataset(cfg)
    bundle_params, model_cfg, meta = _bundle_from_checkpoints(checkpoint_paths, ds.n_targets)
    if ds.n_features > model_cfg.max_features:
        raise DataError(f"dataset has {ds.n_features} features; model allows {model_cfg.max_features}")
    model_name = meta.get("strategy", meta.get("kind", "model"))

    spear = spearman_matrix(ds.y)
    write_matrix_csv(os.path.join(out_dir, "spearman.csv"), ds.target_names, spear)

    detail_rows = []
    per_seed_mae = []
    for seed in cfg.seeds:
        prep = prepare_data(ds, replace(cfg.split, seed=seed))
        if predict_fn is not None:
            y_pred = predict_fn(bundle_params, model_cfg, prep)
        else:
            y_pred = _predict_for_bundle(bundle_params, model_cfg, prep, cfg, seed)
        rep = evaluate_predictions(prep.y_test, y_pred, prep.task_names, cfg.eps_list, model_name, seed)
        rep.spearman = spear
        with open(os.path.join(out_dir, f"report_{model_name}_seed{seed}.json"), "w", encoding="utf-8") as fh:
            json.dump(rep.to_json_dict(), fh, indent=2)
            fh.write("\n")
        for i, task in enumerate(prep.task_names):
            detail_rows.append(
                [model_name, seed, task, _fmt(rep.mae_pct[i]), _fmt(rep.pam_5[i]), _fmt(rep.pam_2_5[i]), _fmt(rep.ev[i])]
            )
        per_seed_mae.append([rep.mae_pct, rep.pam_5, rep.pam_2_5, rep.ev])

    task_names = ds.target_names
    stacked = np.asarray(per_seed_mae)  # (S, 4, T)
    for i, task in enumerate(task_names):
        mean = stacked[:, :, i].mean(axis=0)
        detail_rows.append([model_name, "mean", task] + [_fmt(v) for v in mean])
    _write_csv(os.path.join(out_dir, "results.csv"), RESULTS_HEADER, detail_rows)
    return EXIT_OK


def cmd_benchmark(config_path, out_dir, seed=None, deterministic=None) -> int:
    cfg = load_run_config(config_path)
    if seed is not None:
        cfg.seeds = [seed]
    if deterministic is not None:
        cfg.finetune = replace(cfg.finetune, deterministic=deterministic)
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "reports"), exist_ok=True)
    ds = load_dataset(cfg)

    spear = spearman_matrix(ds.y)
    write_matrix_csv(os.path.join(out_dir, "spearman.csv"), ds.target_names, spear)

    t_base = time.monotonic()
    base_params, model_cfg, _ = obtain_base_model(cfg, out_dir)
    base_elapsed = time.monotonic() - t_base
    if ds.n_features > model_cfg.max_features:
        raise DataError(f"dataset has {ds.n_features} features; model allows {model_cfg.max_features}")

    detail = {m: {} for m in BENCH_MODELS}  # model -> seed -> MetricsReport
    summary_rows = []
    sweep_acc: dict = {}
    run_meta = {"base_model_seconds": base_elapsed, "seeds": {}, "failures": []}

    completed_seeds = []
    for seed in cfg.seeds:
        try:
            scfg = with_seed(cfg, seed)
            prep = prepare_data(ds, scfg.split)
            seed_meta = {}

            preds = {}
            t0 = time.monotonic()
            preds["stl"] = train_stl_mlp(prep.x_train_std, prep.y_train, prep.x_test_std, prep.target_stats, seed)
            seed_meta["stl"] = {"seconds": time.monotonic() - t0}

            for kind in ("nft", "sft", "mft", "maft"):
                bundle = run_strategy(
                    base_params, model_cfg, prep.x_train_std, prep.y_train_std,
                    FineTuneStrategy(kind), scfg.finetune,
                )
                plist = bundle.params_list if len(bundle.params_list) > 1 else bundle.params_list[0]
                t0 = time.monotonic()
                preds[kind] = _predict_for_bundle(plist, model_cfg, prep, cfg, seed)
                seed_meta[kind] = {
                    "finetune_seconds": bundle.elapsed_seconds,
                    "steps": bundle.steps,
                    "checkpoints": bundle.n_checkpoints,
                    "eval_seconds": time.monotonic() - t0,
                }

            stl_mae = None
            for model in BENCH_MODELS:
                rep = evaluate_predictions(prep.y_test, preds[model], prep.task_names, cfg.eps_list, model, seed)
                if model == "stl":
                    stl_mae = rep.mae_pct
                rep.delta_m = mtl_gain(rep.mae_pct, stl_mae)
                rep.spearman = spear
                detail[model][seed] = rep
                summary_rows.append([model, seed, _fmt(rep.delta_m)])
                path = os.path.join(out_dir, "reports", f"{model}_seed{seed}.json")
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(rep.to_json_dict(), fh, indent=2)
                    fh.write("\n")

            if cfg.budget_sweep:
                for budget in BUDGET_GRID_SECONDS:
                    for kind in ("sft", "mft", "maft"):
                        if cfg.finetune.deterministic:
                            steps_b = round(cfg.finetune.max_steps * budget / max(BUDGET_GRID_SECONDS))
                            ft = replace(scfg.finetune, max_steps=steps_b)
                        else:
                            ft = replace(scfg.finetune, budget_seconds=float(budget))
                        bundle = run_strategy(
                            base_params, model_cfg, prep.x_train_std, prep.y_train_std,
                            FineTuneStrategy(kind), ft,
                        )
                        plist = bundle.params_list if len(bundle.params_list) > 1 else bundle.params_list[0]
                        y_pred = _predict_for_bundle(plist, model_cfg, prep, cfg, seed)
                        rep = evaluate_predictions(prep.y_test, y_pred, prep.task_names, cfg.eps_list, kind, seed)
                        sweep_acc.setdefault((budget, kind), []).append(mtl_gain(rep.mae_pct, stl_mae))

            run_meta["seeds"][str(seed)] = seed_meta
            completed_seeds.append(seed)
        except MiniPfnError as exc:
            run_meta["failures"].append({"seed": seed, "error": str(exc)})
            print(f"seed {seed} failed: {exc}", file=sys.stderr)

    if not completed_seeds:
        _write_json(os.path.join(out_dir, "run_meta.json"), run_meta)
        raise DataError("no seed completed; see run_meta.json failures")

    detail_rows = []
    for model in BENCH_MODELS:
        for seed in completed_seeds:
            rep = detail[model][seed]
            for i, task in enumerate(rep.task_names):
                detail_rows.append(
                    [model, seed, task, _fmt(rep.mae_pct[i]), _fmt(rep.pam_5[i]), _fmt(rep.pam_2_5[i]), _fmt(rep.ev[i])]
                )
    for model in BENCH_MODELS:
        reps = [detail[model][s] for s in completed_seeds]
        for i, task in enumerate(reps[0].task_names):
            detail_rows.append(
                [
                    model, "mean", task,
                    _fmt(np.mean([r.mae_pct[i] for r in reps])),
                    _fmt(np.mean([r.pam_5[i] for r in reps])),
                    _fmt(np.mean([r.pam_2_5[i] for r in reps])),
                    _fmt(np.mean([r.ev[i] for r in reps])),
                ]
            )
        summary_rows.append([model, "mean", _fmt(np.mean([r.delta_m for r in reps]))])

    _write_csv(os.path.join(out_dir, "results.csv"), RESULTS_HEADER, detail_rows)
    _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER, summary_rows)
    if sweep_acc:
        gain_rows = [
            [budget, kind, _fmt(np.mean(vals))]
            for (budget, kind), vals in sorted(sweep_acc.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        ]
        _write_csv(os.path.join(out_dir, "gain_curve.csv"), GAIN_HEADER, gain_rows)
    _write_json(os.path.join(out_dir, "run_meta.json"), run_meta)
    return EXIT_OK


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def cmd_report(results_dir) -> int:
    written = render_report(results_dir)
    for path in written:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minipfn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="pre-train on the synthetic prior")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint under a strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--strategy", required=True, choices=list(STRATEGY_KINDS))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--deterministic", action="store_true", default=None)

    p = sub.add_parser("eval", help="evaluate checkpoint(s) on a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", action="append", required=True,
                   help="repeat for per-task checkpoints")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="evaluate this seed only")

    p = sub.add_parser("benchmark", help="full multi-seed benchmark with baseline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="run this seed only")
    p.add_argument("--deterministic", action="store_true", default=None)

    p = sub.add_parser("report", help="render tables and figures from benchmark outputs")
    p.add_argument("--out", required=True, help="benchmark output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pretrain":
            return cmd_pretrain(args.config, args.out)
        if args.command == "finetune":
            return cmd_finetune(args.config, args.checkpoint, args.strategy, args.out,
                                seed=args.seed, deterministic=args.deterministic)
        if args.command == "eval":
            return cmd_eval(args.config, args.checkpoint, args.out, seed=args.seed)
        if args.command == "benchmark":
            return cmd_benchmark(args.config, args.out, seed=args.seed,
                                 deterministic=args.deterministic)
        if args.command == "report":
            return cmd_report(args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except NoResultsError as exc:
        print(f"no results: {exc}", file=sys.stderr)
        return EXIT_NO_RESULTS
    except (DataError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MiniPfnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
