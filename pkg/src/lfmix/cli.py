"""Command-line driver: synth, make-lt, analyze, train, eval, verify, sweep.

Every command validates its JSON config up front (unknown keys are
rejected), derives all randomness from a single seed, and echoes the fully
resolved config into whatever artifact it writes, so one integer plus one
config file reproduces a run byte-for-byte.

Exit codes: 0 ok, 2 config error, 3 data error, 4 verification failure.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import (DataError, LongTailSpec, SyntheticSpec, build_longtail_counts,
                   generate_synthetic, subset_longtail)
from .fileio import read_catalog, read_embeddings, write_catalog, write_embeddings
from .metrics import evaluate, shot_split
from .model import TrainedHead, load_head, save_head
from .sampling import (build_sampling_model, effective_class_distribution,
                       effective_imbalance_factor)
from .training import ARMS, LOSSES, StageConfig, TrainConfig, TrainingDiverged, train
from . import verify as verify_mod

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config PATH is required for this command")
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _resolve(config: dict, schema: dict, where: str = "config") -> dict:
    """Fill defaults and reject unknown keys. Schema values are
    (caster, default); ``required`` as the default marks mandatory keys."""
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    resolved = {}
    for key, (caster, default) in schema.items():
        if key in config:
            try:
                resolved[key] = caster(config[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {where}.{key}: {exc}")
        elif default is REQUIRED:
            raise ConfigError(f"missing required {where} key: {key}")
        else:
            resolved[key] = default
    return resolved


REQUIRED = object()


def _pairs(value):
    return [[int(a), int(b)] for a, b in value]


def _choice(options):
    def cast(value):
        if value not in options:
            raise ValueError(f"must be one of {options}")
        return value
    return cast


_STAGE_SCHEMA = {
    "epochs": (int, REQUIRED),
    "lr0": (float, REQUIRED),
    "lr_min": (float, REQUIRED),
    "alpha": (float, 1.0),
    "tau": (float, 0.05),
}

_TRAIN_SCHEMA = {
    "train": (str, REQUIRED),
    "val": (str, REQUIRED),
    "catalog": (str, REQUIRED),
    "stage1": (dict, {"epochs": 50, "lr0": 1e-6, "lr_min": 1e-9}),
    "stage2": (dict, {"epochs": 10, "lr0": 1e-2, "lr_min": 1e-5}),
    "batch_size": (int, 32),
    "loss": (_choice(LOSSES), "ce"),
    "arm": (_choice(ARMS), "lfm"),
    "seed": (int, 0),
    "logit_scale": (float, 30.0),
    "beta_a": (float, 0.5),
    "beta_b": (float, 0.5),
    "remix_kappa": (float, 3.0),
    "remix_tau": (float, 0.5),
    "uniform_first": (bool, False),
    "many_above": (int, 100),
    "few_below": (int, 20),
}


def _train_config(resolved: dict) -> TrainConfig:
    stage1 = _resolve(resolved["stage1"], _STAGE_SCHEMA, "stage1")
    stage2 = _resolve(resolved["stage2"], _STAGE_SCHEMA, "stage2")
    resolved["stage1"], resolved["stage2"] = stage1, stage2
    return TrainConfig(
        stage1=StageConfig(**stage1),
        stage2=StageConfig(**stage2),
        batch_size=resolved["batch_size"],
        loss=resolved["loss"],
        arm=resolved["arm"],
        seed=resolved["seed"],
        logit_scale=resolved["logit_scale"],
        beta_a=resolved["beta_a"],
        beta_b=resolved["beta_b"],
        remix_kappa=resolved["remix_kappa"],
        remix_tau=resolved["remix_tau"],
        uniform_first=resolved["uniform_first"],
    )


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out DIR is required for this command")
    out = Path(args.out)
    if out.exists():
        if not args.force and any(out.iterdir()):
            raise ConfigError(f"output dir {out} is not empty (use --force)")
    else:
        out.mkdir(parents=True)
    return out


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    schema = {
        "num_classes": (int, REQUIRED),
        "dim": (int, REQUIRED),
        "pair_groups": (_pairs, []),
        "intra_noise": (float, 0.3),
        "seed": (int, 0),
        "train_per_class": (int, 200),
        "val_per_class": (int, 50),
        "pair_cosine": (float, 0.85),
    }
    resolved = _resolve(_load_config(args.config), schema)
    if args.seed is not None:
        resolved["seed"] = args.seed
    out = _out_dir(args)
    spec = SyntheticSpec(
        num_classes=resolved["num_classes"],
        dim=resolved["dim"],
        pair_groups=tuple(tuple(p) for p in resolved["pair_groups"]),
        intra_noise=resolved["intra_noise"],
        seed=resolved["seed"],
        train_per_class=resolved["train_per_class"],
        val_per_class=resolved["val_per_class"],
        pair_cosine=resolved["pair_cosine"],
    )
    train_set, val_set, catalog = generate_synthetic(spec)
    write_embeddings(out / "train.lfme", train_set)
    write_embeddings(out / "val.lfme", val_set)
    write_catalog(out / "catalog.json", catalog)
    _dump_json(out / "manifest.json", {"command": "synth", "config": resolved})
    print(f"wrote {len(train_set)} train rows, {len(val_set)} val rows to {out}")
    return EXIT_OK


def cmd_make_lt(args) -> int:
    schema = {
        "embeddings": (str, REQUIRED),
        "catalog": (str, REQUIRED),
        "n_max": (int, REQUIRED),
        "gamma": (float, REQUIRED),
        "seed": (int, 0),
    }
    resolved = _resolve(_load_config(args.config), schema)
    if args.seed is not None:
        resolved["seed"] = args.seed
    out = _out_dir(args)
    data = read_embeddings(resolved["embeddings"], split_tag="train")
    catalog = read_catalog(resolved["catalog"])
    spec = LongTailSpec(n_max=resolved["n_max"], gamma=resolved["gamma"],
                        num_classes=catalog.num_classes)
    counts = build_longtail_counts(spec)
    subset, catalog = subset_longtail(data, catalog, counts, resolved["seed"])
    write_embeddings(out / "train_lt.lfme", subset)
    write_catalog(out / "catalog_lt.json", catalog)
    _dump_json(out / "manifest.json", {
        "command": "make-lt",
        "config": resolved,
        "counts": [int(c) for c in counts],
        "total": int(counts.sum()),
    })
    print(f"wrote {len(subset)} rows ({counts.sum()} = sum of counts) to {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    schema = {
        "catalog": (str, REQUIRED),
        "tau": (float, 0.05),
        "csv_matrix": (bool, False),
    }
    resolved = _resolve(_load_config(args.config), schema)
    catalog = read_catalog(resolved["catalog"])
    model = build_sampling_model(catalog, resolved["tau"])
    p_y = effective_class_distribution(model)
    counts = catalog.counts.astype(float)
    payload = {
        "config": resolved,
        "gamma": float(counts.max() / counts.min()),
        "gamma_prime": effective_imbalance_factor(model),
        "p_first": model.p_first.tolist(),
        "p_cond": model.p_cond.tolist(),
        "p_y": p_y.tolist(),
    }
    text = json.dumps(payload, sort_keys=True)
    if args.out is not None:
        out = _out_dir(args)
        _dump_json(out / "analysis.json", payload)
        if resolved["csv_matrix"]:
            with open(out / "p_cond.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["first\\second"] + list(catalog.names))
                for name, row in zip(catalog.names, model.p_cond):
                    writer.writerow([name] + [f"{v:.8f}" for v in row])
        print(f"gamma={payload['gamma']:.2f} gamma_prime={payload['gamma_prime']:.2f} -> {out}")
    else:
        print(text)
    return EXIT_OK


def cmd_train(args) -> int:
    resolved = _resolve(_load_config(args.config), _TRAIN_SCHEMA)
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.arm is not None:
        if args.arm not in ARMS:
            raise ConfigError(f"--arm must be one of {ARMS}")
        resolved["arm"] = args.arm
    out = _out_dir(args)
    config = _train_config(resolved)
    train_set = read_embeddings(resolved["train"], split_tag="train")
    val_set = read_embeddings(resolved["val"], split_tag="val")
    catalog = read_catalog(resolved["catalog"])
    head = train(train_set, val_set, catalog, config)
    split = shot_split(catalog.counts, resolved["many_above"], resolved["few_below"])
    report = evaluate(head, val_set, catalog, split)
    save_head(out / "head.json", head, config=resolved)
    metrics = {"config": resolved, "arm": resolved["arm"], **report.to_dict()}
    _dump_json(out / "metrics.json", metrics)
    print(f"arm={resolved['arm']} loss={resolved['loss']} "
          f"all={metrics['all']} few={metrics['few']} -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    schema = {
        "data": (str, REQUIRED),
        "catalog": (str, REQUIRED),
        "head": (str, None),
        "logit_scale": (float, 30.0),
        "many_above": (int, 100),
        "few_below": (int, 20),
        "csv_confusion": (bool, False),
    }
    resolved = _resolve(_load_config(args.config), schema)
    catalog = read_catalog(resolved["catalog"])
    data = read_embeddings(resolved["data"], split_tag="val")
    if resolved["head"] is not None:
        head = load_head(resolved["head"])
    else:
        head = TrainedHead(dim=catalog.dim, logit_scale=resolved["logit_scale"])
    split = shot_split(catalog.counts, resolved["many_above"], resolved["few_below"])
    report = evaluate(head, data, catalog, split)
    payload = {"config": resolved, **report.to_dict()}
    if args.out is not None:
        out = _out_dir(args)
        _dump_json(out / "metrics.json", payload)
        if resolved["csv_confusion"]:
            with open(out / "confusion.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["true\\pred"] + list(catalog.names))
                for name, row in zip(catalog.names, report.confusion):
                    writer.writerow([name] + [int(v) for v in row])
        print(f"all={payload['all']} few={payload['few']} -> {out}")
    else:
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    results = verify_mod.run_all(seed=seed)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if failed:
        print(f"{len(failed)} of {len(results)} verification suites failed")
        return EXIT_VERIFY
    print(f"all {len(results)} verification suites passed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    schema = dict(_TRAIN_SCHEMA)
    schema.update({
        "alphas": (lambda v: [float(x) for x in v], [1.0]),
        "taus": (lambda v: [float(x) for x in v], [0.05]),
        "seeds": (lambda v: [int(x) for x in v], [0]),
    })
    resolved = _resolve(_load_config(args.config), schema)
    if args.arm is not None:
        if args.arm not in ARMS:
            raise ConfigError(f"--arm must be one of {ARMS}")
        resolved["arm"] = args.arm
    out = _out_dir(args)
    base = _train_config(resolved)
    train_set = read_embeddings(resolved["train"], split_tag="train")
    val_set = read_embeddings(resolved["val"], split_tag="val")
    catalog = read_catalog(resolved["catalog"])
    split = shot_split(catalog.counts, resolved["many_above"], resolved["few_below"])

    rows = []
    for alpha in resolved["alphas"]:
        for tau in resolved["taus"]:
            for seed in resolved["seeds"]:
                config = replace(
                    base,
                    stage1=replace(base.stage1, alpha=alpha, tau=tau),
                    stage2=replace(base.stage2, alpha=alpha, tau=tau),
                    seed=seed,
                )
                head = train(train_set, val_set, catalog, config)
                report = evaluate(head, val_set, catalog, split).to_dict()
                rows.append({
                    "alpha": alpha, "tau": tau, "seed": seed,
                    "arm": config.arm, "loss": config.loss,
                    "many": report["many"], "med": report["med"],
                    "few": report["few"], "all": report["all"],
                })
                print(f"alpha={alpha} tau={tau} seed={seed}: "
                      f"few={report['few']} all={report['all']}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    _dump_json(out / "manifest.json", {"command": "sweep", "config": resolved})
    print(f"wrote {len(rows)} sweep rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfmix",
        description="Text-guided local feature mixup over precomputed embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "synth": (cmd_synth, "generate the synthetic embedding benchmark"),
        "make-lt": (cmd_make_lt, "subset a balanced embedding file into a long-tailed one"),
        "analyze": (cmd_analyze, "pair-sampling distributions and effective imbalance"),
        "train": (cmd_train, "run two-stage training for one arm"),
        "eval": (cmd_eval, "evaluate a head (or zero-shot) on a split"),
        "verify": (cmd_verify, "run the oracle/statistical verification suites"),
        "sweep": (cmd_sweep, "grid over alpha/tau/seeds, CSV output"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--arm", type=str, default=None,
                       help="override the training arm (train/sweep)")
        p.add_argument("--force", action="store_true",
                       help="allow writing into a non-empty output directory")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, TrainingDiverged, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
