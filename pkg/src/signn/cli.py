"""``signn`` command line: generate data, train, run ablations, analyse runs.

Exit codes: 0 success, 2 usage or configuration, 3 data, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .analytics import export_embeddings, spike_vs_degree, write_spike_degree_csv
from .errors import ConfigError, DataError, NumericError, RangeError, StateError
from .graph import (EdgeStreamFormat, SbmConfig, generate_burst, generate_sbm, load_edge_stream,
                    write_edge_stream, write_labels)
from .model import STRATEGIES, SignnModel
from .neuron import write_trace_csv
from .training import (TrainConfig, expand_arms, metrics_dict, run_ablation, sample_for_epoch, train)
from .tensor import Surrogate

log = logging.getLogger("signn")

EDGES, LABELS, META = "edges.txt", "labels.txt", "meta.json"
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _kv_pairs(tokens) -> dict:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key:
            raise UsageError(f"expected key=value, got {tok!r}")
        out[key.replace("-", "_")] = val
    return out


def _typed(raw: dict, types: dict) -> dict:
    out = {}
    for key, val in raw.items():
        if key not in types:
            raise UsageError(f"unknown parameter {key!r}; expected one of {sorted(types)}")
        try:
            out[key] = types[key](val)
        except ValueError:
            raise UsageError(f"{key}: cannot parse {val!r}") from None
    return out


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# gen

SBM_KEYS = {"n": int, "k": int, "p_in": float, "p_out": float, "drift": float, "T": int, "seed": int}
BURST_KEYS = {"n": int, "k": int, "p_in": float, "p_out": float, "T": int, "burst_step": int, "factor": float,
              "seed": int}


def cmd_gen(args):
    if bool(args.sbm is not None) == bool(args.burst is not None):
        raise UsageError("give exactly one of --sbm or --burst")
    if args.sbm is not None:
        p = _typed(_kv_pairs(args.sbm), SBM_KEYS)
        cfg = SbmConfig(n=p.get("n", 300), T=p.get("T", 10), k_communities=p.get("k", 3),
                        p_in=p.get("p_in", 0.1), p_out=p.get("p_out", 0.01),
                        drift_fraction=p.get("drift", 0.0), seed=p.get("seed", 0))
        g = generate_sbm(cfg)
        meta = dict(generator="sbm", **asdict(cfg))
    else:
        p = _typed(_kv_pairs(args.burst), BURST_KEYS)
        if "k" in p:
            p["k_communities"] = p.pop("k")
        g = generate_burst(**p)
        meta = dict(generator="burst", **p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_stream(g, out / EDGES)
    write_labels(g, out / LABELS)
    meta.update(num_nodes=g.num_nodes, num_steps=g.num_steps, num_classes=g.num_classes)
    (out / META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {g.num_nodes} nodes x {g.num_steps} steps to {out}")


def load_dataset(data_dir):
    data = Path(data_dir)
    edges = data / EDGES if data.is_dir() else data
    if not edges.exists():
        raise DataError(f"no edge stream at {edges}")
    labels = edges.parent / LABELS
    return load_edge_stream(edges, EdgeStreamFormat(labels_path=labels if labels.exists() else None))


# train / ablate configuration

TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}


def _flag_overrides(args) -> dict:
    flags = dict(train_ratio=args.ratio, intervals=args.intervals, neuron=args.neuron,
                 strategy=args.strategy, epochs=args.epochs, seed=args.seed, learning_rate=args.lr,
                 optimizer=args.optimizer, d=args.d, d_in=args.d_in, fanouts=args.fanouts,
                 holdout=args.holdout, momentum=args.momentum)
    if args.no_ta:
        flags["ta_enabled"] = False
    return {k: v for k, v in flags.items() if v is not None}


def build_config(args) -> TrainConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    values = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - TRAIN_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        values.update(loaded)
    values.update(_flag_overrides(args))
    if "fanouts" in values and "K" not in values:
        values["K"] = len(values["fanouts"])
    if "K" in values and "fanouts" not in values:
        values["fanouts"] = (TrainConfig.fanouts[0],) * int(values["K"])
    return TrainConfig(**values)


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(args):
    cfg = build_config(args)
    g = load_dataset(args.data)
    result = train(g, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = metrics_dict(result)
    _dump_json(metrics, out / "metrics.json")
    result.model.save(out / "model.ckpt")
    write_trace_csv(result.final.final_traces[0], out / "spikes.csv", steps=result.model.plan.indices[0])
    print(f"macro_f1={metrics['macro_f1']:.4f} micro_f1={metrics['micro_f1']:.4f} "
          f"({metrics['seconds']:.1f}s) -> {out}")


def cmd_ablate(args):
    base = build_config(args)
    families = [a.strip() for a in args.arms.split(",") if a.strip()]
    arms = expand_arms(families)
    g = load_dataset(args.data)
    workers = args.workers or int(os.environ.get("SIGNN_THREADS", "1") or 1)
    table = run_ablation(g, base, arms, seeds=args.seeds, workers=workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["arm", "seed", "macro_f1", "micro_f1"])
        for arm, seed, mac, mic in table.rows:
            w.writerow([arm, seed, f"{mac:.17g}", f"{mic:.17g}"])
    summary = table.summary()
    with open(out / "ablation_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["arm", "runs", "macro_mean", "macro_std", "micro_mean", "micro_std"])
        for row in summary:
            w.writerow([row["arm"], row["runs"], *(f"{row[k]:.17g}" for k in
                                                   ("macro_mean", "macro_std", "micro_mean", "micro_std"))])
    for row in summary:
        print(f"{row['arm']:>10}  micro {row['micro_mean']:.4f} +- {row['micro_std']:.4f}  "
              f"macro {row['macro_mean']:.4f} +- {row['macro_std']:.4f}")


def cmd_analyze(args):
    run = Path(args.run)
    ckpt = run / "model.ckpt"
    if not ckpt.exists():
        raise StateError(f"no checkpoint at {ckpt}; run `signn train --out {run}` first")
    metrics_path = run / "metrics.json"
    if not metrics_path.exists():
        raise StateError(f"no metrics.json in {run}")
    cfg = TrainConfig(**json.loads(metrics_path.read_text(encoding="utf-8"))["config"])
    model = SignnModel.load(ckpt)
    g = load_dataset(args.data)
    if g.num_nodes != model.config["num_nodes"] or g.num_steps != model.config["num_steps"]:
        raise DataError(f"dataset ({g.num_nodes} nodes, {g.num_steps} steps) does not match the checkpoint "
                        f"({model.config['num_nodes']} nodes, {model.config['num_steps']} steps)")
    # the same neighbour draw as the run's final evaluation
    final = model.forward(sample_for_epoch(g, model, cfg, cfg.epochs), Surrogate(cfg.surrogate_width))
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    report = spike_vs_degree(final.final_traces[0], g)
    write_spike_degree_csv(report, out / "spike_vs_degree.csv")
    _dump_json(report.as_dict(), out / "analysis.json")
    export_embeddings(final.z.data, final.final_spikes[0], g.labels, out / "embeddings.csv",
                      out / "embedding_spikes.csv")
    corr = "null" if report.correlation is None else f"{report.correlation:.4f}"
    print(f"spike/degree correlation {corr}; wrote analysis to {out}")


# parser

def _add_train_flags(p):
    p.add_argument("--data", required=True, help="dataset directory (edges.txt, labels.txt) or edge file")
    p.add_argument("--config", help="JSON file of training settings; flags override it")
    p.add_argument("--ratio", type=float, help="training fraction of nodes")
    p.add_argument("--intervals", type=_int_list, help="granularity intervals, e.g. 1,2,3")
    p.add_argument("--neuron", choices=("blif", "lif"))
    p.add_argument("--no-ta", action="store_true", help="disable spike gating")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--momentum", type=float)
    p.add_argument("--d", type=int, help="hidden width")
    p.add_argument("--d-in", type=int, help="width of the learned node embedding table")
    p.add_argument("--fanouts", type=_int_list, help="neighbour fanout per layer, e.g. 10,10")
    p.add_argument("--holdout", type=float, help="fraction of train nodes held out for validation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dynamic graph")
    p.add_argument("--sbm", nargs="*", metavar="KEY=VALUE",
                   help="drifting block model: n k p-in p-out drift T seed")
    p.add_argument("--burst", nargs="*", metavar="KEY=VALUE",
                   help="burst graph: n k p-in p-out T burst-step factor seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train and evaluate one model")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="train every arm of one or more ablation families")
    _add_train_flags(p)
    p.add_argument("--arms", default="ta", help="comma-separated families: ta, granularity, strategy")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--workers", type=int, help="parallel runs (default $SIGNN_THREADS or 1)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("analyze", help="spike/degree analysis and embedding export for a run")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad usage
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"signn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RangeError, StateError, OSError) as exc:
        print(f"signn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"signn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
