"""Command-line front end wiring the pipeline end to end.

One JSON experiment config describes the data source, training
hyperparameters and the scenario list; subcommands train the ensemble,
evaluate it over the scenarios, cluster the resulting metric trio,
materialize perturbed datasets and export reconstruction traces.  Every
command is deterministic given its config and seeds, and all outputs go
through write-then-rename so a failed run leaves no partial files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_experiment_config
from .drift import inject, make_drift_spec
from .ensemble import EnsembleModel, load_model, predict, save_model, train_ensemble
from .errors import (ConfigError, DimensionError, IngestionError, NumericError,
                     PersistenceError, TrainingError)
from .evaluation import (ScenarioResult, evaluate_clusters, export_metrics_csv,
                         export_trace_csv, read_metrics_csv, summarize)
from .fileio import write_text
from .network import NetworkSpec
from .pipeline import (CycleDataset, fit_scaler, load_raw_dataset,
                       select_condition, split_healthy, to_features, unflatten,
                       write_dataset)
from .synthetic import SyntheticConfig, generate_synthetic

# one exit code per failure class; argparse shares the config code
EXIT_CODES = {
    "ok": 0,
    "config": 2,
    "data": 3,
    "numeric": 4,
}

MODEL_FILE = "model.json"
REPORT_FILE = "training_report.json"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.txt"
CLUSTER_FILE = "cluster_report.json"


# ---------------------------------------------------------------------------
# shared plumbing

def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = dataclasses.replace(
            config, seed=seed,
            train=dataclasses.replace(config.train, seed=seed))
    out = getattr(args, "out", None)
    if out:
        config = dataclasses.replace(config, out_dir=out)
    return config


def _load_data(config: ExperimentConfig, seed: int,
               degradation: float = 0.0) -> CycleDataset:
    data = config.data
    if data.kind == "directory":
        return load_raw_dataset(data.path, data.manifest)
    return generate_synthetic(data.synthetic, seed, degradation)


def _data_descriptor(config: ExperimentConfig) -> dict:
    data = config.data
    if data.kind == "directory":
        return {"kind": "directory", "path": data.path, "manifest": data.manifest}
    s = data.synthetic
    return {"kind": "synthetic", "sensors": s.sensors, "cycles": s.cycles,
            "noise_std": s.noise_std, "drift_offset": s.drift_offset,
            "amp_gain": s.amp_gain, "n_affected": s.n_affected}


def _stored_split(model: EnsembleModel, model_path: str, dataset: CycleDataset):
    """Train/test cycle indices persisted by cmd_train, bounds-checked."""
    split = model.metadata.get("split")
    if model.scaler is None or not isinstance(split, dict):
        raise PersistenceError(
            f"{model_path} lacks the scaler or split indices; train it with "
            f"the train command first")
    train_idx = np.asarray(split.get("train", []), dtype=np.int64)
    test_idx = np.asarray(split.get("test", []), dtype=np.int64)
    top = max(train_idx.max(initial=-1), test_idx.max(initial=-1))
    if top >= dataset.n_cycles:
        raise IngestionError(
            f"model split references cycle {top} but the dataset has only "
            f"{dataset.n_cycles} cycles; data and model are out of step")
    return train_idx, test_idx


# ---------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    config = _apply_overrides(load_experiment_config(args.config), args)
    dataset = _load_data(config, config.seed)
    split = split_healthy(dataset, config.split_ratio, config.seed)
    train_raw = dataset.subset(split.train)
    scaler = fit_scaler(train_raw)
    features = to_features(train_raw, scaler)
    net = NetworkSpec((features.shape[1], *config.hidden, features.shape[1]),
                      config.activation)
    model = train_ensemble(features, net, config.train, jobs=args.jobs)
    model.scaler = scaler
    model.metadata["split"] = {"train": split.train.tolist(),
                               "test": split.test.tolist()}
    model.metadata["data"] = _data_descriptor(config)

    model_path = os.path.join(config.out_dir, MODEL_FILE)
    save_model(model, model_path)
    report = {
        "data": _data_descriptor(config),
        "n_train": int(split.train.size),
        "n_test": int(split.test.size),
        "input_dim": int(features.shape[1]),
        "layer_widths": list(net.layer_widths),
        "m": config.train.m,
        "epochs": config.train.epochs,
        "lambda": config.train.lam,
        "seed": config.seed,
        "final_losses": [trace[-1] for trace in model.metadata["loss_traces"]],
        "anchor_digest": model.anchors.digest(),
        "degenerate_sensors": scaler.degenerate,
    }
    write_text(os.path.join(config.out_dir, REPORT_FILE),
               json.dumps(report, indent=2) + "\n")
    print(f"trained {config.train.m} members on {split.train.size} cycles "
          f"(D={features.shape[1]}) -> {model_path}")
    return 0


def _evaluate_scenarios(config: ExperimentConfig, model: EnsembleModel,
                        dataset: CycleDataset, train_idx, test_idx):
    """All scenario results in config order; empty scenarios become skips."""
    train_raw = dataset.subset(train_idx)
    test_raw = dataset.subset(test_idx)
    results: list[ScenarioResult] = []
    skipped: list[str] = []

    def run(label: str, subset: CycleDataset):
        if subset.n_cycles == 0:
            skipped.append(label)
            return
        results.append(summarize(predict(model, to_features(subset, model.scaler)),
                                 label))

    run("healthy", test_raw)
    for value in config.scenarios.real_drift:
        if config.data.kind == "directory":
            run(f"cooler_{value:g}", select_condition(dataset, value))
        else:
            # same generator seed: cycle i is the same cycle, only degraded
            drifted = generate_synthetic(config.data.synthetic,
                                         model.train_config.seed, value)
            run(f"drift_{value:g}", drifted.subset(test_idx))
    for sweep in config.scenarios.drifts:
        for level in sweep.levels:
            spec = make_drift_spec(train_raw, sweep.sensor, sweep.kind, level,
                                   sweep.seed)
            run(f"{sweep.kind}_{level * 100:g}", inject(test_raw, spec))
    return results, skipped


def _format_summary(results: list[ScenarioResult], skipped: list[str]) -> str:
    lines = [f"{'scenario':<14} {'cycles':>6}  {'recon_loss':>12} "
             f"{'epistemic':>12} {'aleatoric':>12}   (means)"]
    for r in results:
        s = r.stats()
        lines.append(f"{r.label:<14} {r.n_cycles:>6}  "
                     f"{s['recon_loss']['mean']:>12.6g} "
                     f"{s['epistemic']['mean']:>12.6g} "
                     f"{s['aleatoric']['mean']:>12.6g}")
    for label in skipped:
        lines.append(f"{label:<14} skipped: no cycles matched")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    config = _apply_overrides(load_experiment_config(args.config), args)
    model_path = args.model or os.path.join(config.out_dir, MODEL_FILE)
    model = load_model(model_path)
    dataset = _load_data(config, model.train_config.seed)
    train_idx, test_idx = _stored_split(model, model_path, dataset)

    results, skipped = _evaluate_scenarios(config, model, dataset,
                                           train_idx, test_idx)
    if not results:
        raise IngestionError("every scenario was empty; nothing to evaluate")
    metrics_path = os.path.join(config.out_dir, METRICS_FILE)
    export_metrics_csv(results, metrics_path)
    summary = _format_summary(results, skipped)
    write_text(os.path.join(config.out_dir, SUMMARY_FILE), summary)
    print(summary, end="")
    print(f"wrote {metrics_path}")
    return 0


def _scenario_family(label: str) -> str:
    """Collapse scenario labels to the four families the clustering targets."""
    head = label.split("_", 1)[0]
    return "real" if head in ("cooler", "drift") else head


def cmd_cluster(args) -> int:
    out_dir = args.out
    if args.metrics:
        metrics_path = args.metrics
        out_dir = out_dir or os.path.dirname(os.path.abspath(metrics_path))
    elif args.config:
        config = _apply_overrides(load_experiment_config(args.config), args)
        metrics_path = os.path.join(config.out_dir, METRICS_FILE)
        out_dir = config.out_dir
    else:
        raise ConfigError("cluster needs --metrics or --config")
    labels, trio = read_metrics_csv(metrics_path)
    families = [_scenario_family(label) for label in labels]
    report = evaluate_clusters(trio, families, args.k, args.seed or 0)

    sizes = np.bincount(report.assignments, minlength=report.k)
    composition = []
    fam_arr = np.asarray(families)
    for c in range(report.k):
        members = fam_arr[report.assignments == c]
        counts = {fam: int((members == fam).sum()) for fam in sorted(set(members))}
        composition.append(counts)
    doc = {
        "k": report.k,
        "n_points": int(trio.shape[0]),
        "purity": report.purity,
        "inertia": report.inertia,
        "cluster_sizes": sizes.tolist(),
        "composition": composition,
        "families": sorted(set(families)),
        "centroids_log_standardized": report.centroids.tolist(),
    }
    report_path = os.path.join(out_dir, CLUSTER_FILE)
    write_text(report_path, json.dumps(doc, indent=2) + "\n")
    print(f"k={report.k} purity={report.purity:.4f} -> {report_path}")
    return 0


def cmd_trace(args) -> int:
    config = _apply_overrides(load_experiment_config(args.config), args)
    model_path = args.model or os.path.join(config.out_dir, MODEL_FILE)
    model = load_model(model_path)
    dataset = _load_data(config, model.train_config.seed)
    train_idx, test_idx = _stored_split(model, model_path, dataset)
    test_raw = dataset.subset(test_idx)

    wants_drift = [args.sensor is not None, args.kind is not None,
                   args.level is not None]
    if any(wants_drift):
        if not all(wants_drift):
            raise ConfigError(
                "drift injection needs --sensor, --kind and --level together")
        spec = make_drift_spec(dataset.subset(train_idx), args.sensor,
                               args.kind, args.level, args.drift_seed)
        test_raw = inject(test_raw, spec)

    if not 0 <= args.cycle < test_raw.n_cycles:
        raise ConfigError(f"cycle index {args.cycle} is out of range: the test "
                          f"split has {test_raw.n_cycles} cycles")
    features = to_features(test_raw, model.scaler)
    record = predict(model, features[args.cycle:args.cycle + 1])[0]
    actual = unflatten(features[args.cycle], len(model.scaler.names))
    out_path = os.path.join(config.out_dir, f"trace_{args.cycle}.csv")
    export_trace_csv(args.cycle, actual, record, model.scaler.names, out_path)
    print(f"wrote {out_path}")
    return 0


def cmd_inject(args) -> int:
    config = _apply_overrides(load_experiment_config(args.config), args)
    dataset = _load_data(config, config.seed)
    split = split_healthy(dataset, config.split_ratio, config.seed)
    spec = make_drift_spec(dataset.subset(split.train), args.sensor, args.kind,
                           args.level, args.drift_seed)
    write_dataset(inject(dataset, spec), args.dest)
    print(f"wrote {dataset.n_cycles} cycles with {spec.kind} level {spec.level:g} "
          f"on {spec.sensor} to {args.dest}")
    return 0


def cmd_generate_synthetic(args) -> int:
    synth = SyntheticConfig(sensors=args.sensors, cycles=args.cycles,
                            noise_std=args.noise_std,
                            drift_offset=args.drift_offset,
                            amp_gain=args.amp_gain, n_affected=args.n_affected)
    dataset = generate_synthetic(synth, args.seed or 0, args.degradation)
    write_dataset(dataset, args.dest)
    print(f"wrote {dataset.n_cycles} cycles x {len(dataset.sensors)} sensors "
          f"to {args.dest}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser, config_required: bool = True):
    p.add_argument("--config", required=config_required, metavar="PATH",
                   help="experiment config file (JSON)")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="override the config seed")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="override the output directory")


def _add_drift_flags(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--sensor", required=required, metavar="NAME",
                   help="sensor to perturb")
    p.add_argument("--kind", required=required, choices=("noise", "offset"),
                   help="perturbation kind")
    p.add_argument("--level", required=required, type=float, metavar="FRAC",
                   help="perturbation level as a fraction of the sensor mean")
    p.add_argument("--drift-seed", type=int, default=0, metavar="N",
                   help="seed for the noise draw")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftae",
        description="Anchored-ensemble autoencoder pipeline for separating "
                    "process degradation from sensor faults.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an anchored ensemble")
    _add_common(p)
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="threads for member training (result is identical)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score every configured scenario")
    _add_common(p)
    p.add_argument("--model", default=None, metavar="PATH",
                   help="model file (default: <out_dir>/model.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster", help="k-means over an evaluation metrics CSV")
    _add_common(p, config_required=False)
    p.add_argument("--metrics", default=None, metavar="PATH",
                   help="metrics CSV (default: <out_dir>/metrics.csv)")
    p.add_argument("--k", type=int, default=4, help="number of clusters")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("trace", help="export one test cycle's reconstruction")
    _add_common(p)
    p.add_argument("--model", default=None, metavar="PATH",
                   help="model file (default: <out_dir>/model.json)")
    p.add_argument("--cycle", type=int, required=True, metavar="N",
                   help="index into the test split")
    _add_drift_flags(p, required=False)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("inject", help="materialize a perturbed copy of the dataset")
    _add_common(p)
    _add_drift_flags(p, required=True)
    p.add_argument("--dest", required=True, metavar="DIR",
                   help="directory for the perturbed dataset")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("generate-synthetic", help="write a synthetic dataset")
    p.add_argument("--sensors", type=int, default=6)
    p.add_argument("--cycles", type=int, default=400)
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--drift-offset", type=float, default=4.0)
    p.add_argument("--amp-gain", type=float, default=0.5)
    p.add_argument("--n-affected", type=int, default=None)
    p.add_argument("--degradation", type=float, default=0.0,
                   help="real-drift level baked into the data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dest", required=True, metavar="DIR",
                   help="directory for the dataset")
    p.set_defaults(func=cmd_generate_synthetic)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse prints its own diagnostics
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except (IngestionError, PersistenceError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES["data"]
    except (NumericError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES["numeric"]


if __name__ == "__main__":
    sys.exit(main())
