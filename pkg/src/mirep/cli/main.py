"""Command-line entry point: synth, train, eval, ablate, explain, export."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, NumericAbort, ProtocolError
from ..evaluation import (ResultRow, aggregate, csp_lda_baseline,
                          plan_scenario1, plan_scenario2, run_ablation,
                          run_protocol, run_split, variant_by_name,
                          write_results_csv, write_results_json)
from ..explain import (export_embeddings, lrp_epsilon, topographic_relevance,
                       write_psd_csv, write_topomap_csv)
from ..model import load_checkpoint, save_checkpoint
from ..signal import generate_cohort, read_trialset, write_trialset
from ..training import fit, write_history_csv
from ..evaluation.runner import build_components
from .config import (cohort_spec_from, encoder_config_from, resolve_config,
                     train_config_from, weights_from, write_resolved_config)


def _out_dir(config: dict) -> Path:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_val_split(trials, seed: int):
    """Per-subject class-stratified 7:1 carve when no protocol is in play."""
    rng = np.random.default_rng([seed, 7])
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, t in enumerate(trials):
        buckets.setdefault((t.subject_id, t.label), []).append(i)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for key in sorted(buckets):
        idx = buckets[key]
        order = rng.permutation(len(idx))
        n_val = max(1, len(idx) // 8)
        chosen = [idx[j] for j in order]
        val_idx.extend(chosen[:n_val])
        train_idx.extend(chosen[n_val:])
    return ([trials[i] for i in sorted(train_idx)],
            [trials[i] for i in sorted(val_idx)])


def cmd_synth(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    trials = generate_cohort(cohort_spec_from(config))
    path = out / "cohort.trialset"
    write_trialset(path, trials)
    write_resolved_config(out, config)
    print(f"wrote {len(trials)} trials to {path}")
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    trials = read_trialset(args.trialset)
    encoder_config = encoder_config_from(config, trials)
    train_config = train_config_from(config)
    variant = variant_by_name(config["variant"])
    model, estimators = build_components(
        encoder_config, train_config, variant,
        base_seed=config["seed"], run_index=0)
    train_trials, val_trials = _train_val_split(trials, config["seed"])
    result = fit(model, estimators, train_trials, val_trials,
                 train_config, weights_from(config))
    save_checkpoint(out / "checkpoint.ckpt", model,
                    seed=config["seed"], epoch=result.best_epoch)
    write_history_csv(out / "history.csv", result.history)
    write_resolved_config(out, config)
    print(f"best epoch {result.best_epoch}: "
          f"val_acc {result.best_val_acc:.4f}, val_loss {result.best_val_loss:.4f}")
    return 0


def _plans(trials, config: dict):
    scenario = config["protocol"]["scenario"]
    if scenario == 1:
        return plan_scenario1(trials, seed=config["seed"],
                              n_folds=config["protocol"]["n_folds"])
    if scenario == 2:
        return plan_scenario2(trials, seed=config["seed"])
    raise ConfigurationError(f"scenario must be 1 or 2, got {scenario!r}")


def _csp_rows(trials, plans, scenario: str) -> list[ResultRow]:
    plan_list = plans if isinstance(plans, list) else [plans]
    rows = []
    for plan in plan_list:
        for run in plan.runs:
            fit_idx = np.concatenate([run.train_idx, run.val_idx])
            fit_trials = [trials[i] for i in fit_idx]
            by_subject: dict[int, list] = {}
            for i in run.test_idx:
                by_subject.setdefault(trials[i].subject_id, []).append(trials[i])
            fold = run.tag if scenario == "I" else 0
            for subject in sorted(by_subject):
                acc = csp_lda_baseline(fit_trials, by_subject[subject])
                rows.append(ResultRow(
                    scenario=scenario, backbone="csp", variant="baseline",
                    subject_id=subject, fold=fold, accuracy=acc))
    return rows


def cmd_eval(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    trials = read_trialset(args.trialset)
    plans = _plans(trials, config)
    scenario = "I" if config["protocol"]["scenario"] == 1 else "II"
    if config["baseline"] == "csp":
        table = aggregate(_csp_rows(trials, plans, scenario))
    elif config["baseline"] is None:
        table = run_protocol(
            trials, plans, encoder_config_from(config, trials),
            train_config_from(config), weights_from(config),
            config["variant"], base_seed=config["seed"])
    else:
        raise ConfigurationError(f"unknown baseline {config['baseline']!r}")
    write_results_csv(out / "results.csv", table)
    write_results_json(out / "results.json", table)
    write_resolved_config(out, config)
    print(f"scenario {scenario} mean accuracy "
          f"{table.mean():.4f} +- {table.std():.4f} over "
          f"{len(table.per_subject())} subjects")
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    trials = read_trialset(args.trialset)
    plans = _plans(trials, config)
    tables = run_ablation(
        trials, plans, encoder_config_from(config, trials),
        train_config_from(config), weights_from(config),
        base_seed=config["seed"])
    rows = [r for name in sorted(tables) for r in tables[name].rows]
    combined = aggregate(rows)
    write_results_csv(out / "ablation.csv", combined)
    write_results_json(out / "ablation.json", combined)
    write_resolved_config(out, config)
    for name in sorted(tables):
        print(f"variant {name}: mean accuracy {tables[name].mean():.4f}")
    return 0


def cmd_explain(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    model, _ = load_checkpoint(args.checkpoint)
    trials = read_trialset(args.trialset)
    maps = [lrp_epsilon(model, t, t.label) for t in trials]
    write_topomap_csv(out / "topomap.csv", topographic_relevance(maps))
    export_embeddings(out / "embeddings.csv", model, trials)
    write_psd_csv(out / "psd.csv", trials)
    write_resolved_config(out, config)
    print(f"wrote topomap.csv, embeddings.csv, psd.csv to {out}")
    return 0


def cmd_export(args) -> int:
    config = resolve_config(args)
    out = _out_dir(config)
    model, _ = load_checkpoint(args.checkpoint)
    trials = read_trialset(args.trialset)
    export_embeddings(out / "embeddings.csv", model, trials)
    write_resolved_config(out, config)
    print(f"wrote embeddings for {len(trials)} trials to {out / 'embeddings.csv'}")
    return 0


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--backbone", choices=["deepconvnet", "eegnet"])
    parser.add_argument("--scenario", type=int, choices=[1, 2])
    parser.add_argument("--variant", choices=["pooled", "I", "II", "III", "IV"])
    parser.add_argument("--weights", help="loss weights a,b,c")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirep",
        description="Subject-invariant representation learning for "
                    "multi-channel time-series classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort trialset")
    _common_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on a trialset")
    p.add_argument("trialset")
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run a protocol and write result tables")
    p.add_argument("trialset")
    _common_flags(p)
    p.add_argument("--baseline", choices=["csp"],
                   help="evaluate a reference pipeline instead of the model")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run every ablation variant on one protocol")
    p.add_argument("trialset")
    _common_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("explain", help="relevance, topography, and PSD exports")
    p.add_argument("checkpoint")
    p.add_argument("trialset")
    _common_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("export", help="dump per-trial features for projection")
    p.add_argument("checkpoint")
    p.add_argument("trialset")
    _common_flags(p)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 3
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
