"""Command-line front end for reproducible runs.

Subcommands: train, sweep, inspect, gen-synth, check-grad. Every run
directory receives the fully resolved config, JSON-lines metrics, CSV
summaries and rendered PNG figures next to them. Exit codes: 0 success,
1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import figures
from .autodiff import FdReport, Tape, fd_check
from . import autodiff as ad
from .classifier import (
    TrainSettings,
    TrainingDiverged,
    batch_logits,
    evaluate,
    init_classifier_params,
    train,
)
from .config import (
    SWEEP_AXES,
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    from_dict,
    load_config,
    save_config,
    synth_from_dict,
    synth_to_dict,
    to_dict,
)
from .graph import build_dhg, graph_stats, inject_noise
from .ingest import (
    BilingualDictionary,
    EmbeddingTable,
    LabeledCorpus,
    ParseError,
    Vocabulary,
    load_corpus,
    load_dictionary,
    load_embeddings,
)
from .model import (
    MODEL_KINDS,
    ModelParams,
    attention_report,
    build_layout,
    build_source_features,
    forward,
    init_model_params,
)
from .optim import load_params, save_params
from .synth import SynthConfig, generate, write_task

SPLIT_ORDER = ("train", "valid", "test")


@dataclass
class DataBundle:
    vocabulary: Vocabulary
    tables: dict[str, EmbeddingTable]
    dictionaries: list[BilingualDictionary]
    corpora: dict[str, LabeledCorpus]


def _noise_seed(run_seed: int) -> int:
    return int(np.random.SeedSequence([run_seed, 104729]).generate_state(1)[0])


def _subsample_seed(run_seed: int) -> int:
    return int(np.random.SeedSequence([run_seed, 7919]).generate_state(1)[0])


def subsample_corpus(corpus: LabeledCorpus, fraction: float, seed: int) -> LabeledCorpus:
    """Deterministic per-seed subset keeping document order."""
    if fraction >= 1.0:
        return corpus
    n = len(corpus.documents)
    k = max(1, int(round(fraction * n)))
    rng = np.random.default_rng(_subsample_seed(seed))
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return LabeledCorpus(
        documents=tuple(corpus.documents[i] for i in idx),
        num_classes=corpus.num_classes,
        split=corpus.split,
        skipped_empty=corpus.skipped_empty,
    )


def _split_sort_key(split: str):
    try:
        return (0, SPLIT_ORDER.index(split))
    except ValueError:
        return (1, split)


def materialize_data(config: ExperimentConfig, run_dir: Path) -> DataBundle:
    """Produce tables, dictionaries and corpora for a run.

    Synthetic data is written to `run_dir/data` and read back through
    the parsers, so the generated path exercises the same ingestion as
    file-based runs.
    """
    if config.synth is not None:
        task = generate(config.synth, config.data_seed)
        paths = write_task(task, run_dir / "data")
        tables = {
            lang: load_embeddings(paths[f"embeddings.{lang}"], lang)
            for lang in config.source_languages
        }
        dictionaries = [
            load_dictionary(paths[f"dictionary.{d.src}-{d.dst}"], d.src, d.dst)
            for d in task.dictionaries
        ]
        vocabulary = Vocabulary()
        corpora = {}
        for split in sorted(task.corpora, key=_split_sort_key):
            corpora[split] = load_corpus(
                paths[f"corpus.{split}"], vocabulary, config.target_language, split
            )
        return DataBundle(vocabulary, tables, dictionaries, corpora)

    tables = {
        lang: load_embeddings(path, lang) for lang, path in sorted(config.embeddings.items())
    }
    dictionaries = [
        load_dictionary(path, src, dst) for src, dst, path in config.dictionaries
    ]
    vocabulary = Vocabulary()
    corpora = {}
    for split in sorted(config.corpora, key=_split_sort_key):
        corpora[split] = load_corpus(
            config.corpora[split], vocabulary, config.target_language, split
        )
    return DataBundle(vocabulary, tables, dictionaries, corpora)


def build_run_graph(config: ExperimentConfig, data: DataBundle, seed: int):
    """Graph for one training seed, with per-seed noise when configured."""
    dictionaries = data.dictionaries
    if config.noise_rate > 0.0:
        dictionaries = inject_noise(dictionaries, config.noise_rate, _noise_seed(seed))
    return build_dhg(
        data.vocabulary.copy(),
        config.target_language,
        dictionaries,
        common_word_limit=config.common_word_limit,
    )


def run_single(
    config: ExperimentConfig,
    data: DataBundle,
    settings: TrainSettings,
    seed: int,
):
    """One (config, seed) training run; returns (result, final metrics rows)."""
    graph = build_run_graph(config, data, seed)
    corpora = dict(data.corpora)
    corpora["train"] = subsample_corpus(corpora["train"], config.train_fraction, seed)
    result = train(settings, graph, data.tables, corpora, seed)
    rows = []
    for split in sorted(corpora, key=_split_sort_key):
        acc, f1, loss = evaluate(result.state, corpora[split])
        rows.append(
            {"seed": seed, "split": split, "accuracy": acc, "macro_f1": f1, "loss": loss}
        )
    return result, rows


def _mean_rows(rows: list[dict], group_key: str) -> list[dict]:
    means = []
    for group in dict.fromkeys(r[group_key] for r in rows):
        members = [r for r in rows if r[group_key] == group]
        row = {"seed": "mean", group_key: group}
        for metric in ("accuracy", "macro_f1", "loss"):
            row[metric] = float(np.mean([m[metric] for m in members]))
        means.append(row)
    return means


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key, value in out.items():
                if isinstance(value, float):
                    out[key] = repr(value)
            writer.writerow(out)


@dataclass
class TrainOutputs:
    run_dir: Path
    summary_rows: list[dict]
    records_by_seed: dict[int, list[dict]]


def run_training(config: ExperimentConfig) -> TrainOutputs:
    config.validate()
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, run_dir / "config.json")
    data = materialize_data(config, run_dir)
    settings = config.train_settings()

    per_seed_rows: list[dict] = []
    records_by_seed: dict[int, list[dict]] = {}
    for seed in config.seeds:
        result, rows = run_single(config, data, settings, seed)
        per_seed_rows.extend(rows)
        records_by_seed[seed] = result.records
        seed_dir = run_dir / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        with open(seed_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
            for record in result.records:
                fh.write(json.dumps({"seed": seed, **record}, sort_keys=True) + "\n")
        save_params(seed_dir / "checkpoint.bin", result.state.all_arrays())
        meta = {
            "seed": seed,
            "kind": settings.kind,
            "model": dict(config.model),
            "num_classes": result.state.num_classes,
            "best_epoch": result.state.best_epoch,
            "best_val_macro_f1": result.state.best_val_f1,
        }
        with open(seed_dir / "model.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    summary = per_seed_rows + _mean_rows(per_seed_rows, "split")
    _write_csv(
        run_dir / "summary.csv",
        ["seed", "split", "accuracy", "macro_f1", "loss"],
        summary,
    )
    figures.training_curves(records_by_seed, run_dir / "training_curves.png")
    figures.summary_figure(summary, run_dir / "summary.png")
    return TrainOutputs(run_dir=run_dir, summary_rows=summary, records_by_seed=records_by_seed)


def _axis_values(axis: str, raw_values: list[str], config: ExperimentConfig) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not raw_values:
        raise ConfigError("sweep values list must be non-empty")
    if axis in ("train_size", "noise_rate"):
        try:
            values = [float(v) for v in raw_values]
        except ValueError as exc:
            raise ConfigError(f"axis {axis} needs numeric values: {exc}") from exc
        for v in values:
            if axis == "train_size" and not 0.0 < v <= 1.0:
                raise ConfigError("train_size values must be in (0, 1]")
            if axis == "noise_rate" and not 0.0 <= v <= 1.0:
                raise ConfigError("noise_rate values must be in [0, 1]")
        return values
    values = [str(v) for v in raw_values]
    if axis == "gnn_kind":
        for v in values:
            if v not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {v!r}")
    if axis == "source_language":
        for v in values:
            if v not in config.source_languages:
                raise ConfigError(f"{v!r} is not a configured source language")
    return values


def _restrict_to_source(data: DataBundle, target: str, language: str) -> DataBundle:
    keep = {target, language}
    dictionaries = [d for d in data.dictionaries if {d.src, d.dst} == keep]
    if not dictionaries:
        raise ConfigError(f"no dictionaries connect {language!r} with the target")
    tables = {lang: t for lang, t in data.tables.items() if lang == language}
    return DataBundle(data.vocabulary, tables, dictionaries, data.corpora)


@dataclass
class SweepOutputs:
    run_dir: Path
    rows: list[dict]


def run_sweep(config: ExperimentConfig, axis: str, raw_values: list[str]) -> SweepOutputs:
    config.validate()
    values = _axis_values(axis, raw_values, config)
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, run_dir / "config.json")
    with open(run_dir / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump({"axis": axis, "values": values}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    data = materialize_data(config, run_dir)
    eval_split = "test" if "test" in data.corpora else "valid"

    rows: list[dict] = []
    for value in values:
        cfg = from_dict(to_dict(config))
        run_data = data
        if axis == "train_size":
            cfg.train_fraction = float(value)
        elif axis == "noise_rate":
            cfg.noise_rate = float(value)
        elif axis == "gnn_kind":
            cfg.model = {**cfg.model, "kind": value}
        elif axis == "source_language":
            run_data = _restrict_to_source(data, config.target_language, value)
        settings = cfg.train_settings()
        for seed in cfg.seeds:
            result, split_rows = run_single(cfg, run_data, settings, seed)
            final = next(r for r in split_rows if r["split"] == eval_split)
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "seed": seed,
                    "split": eval_split,
                    "accuracy": final["accuracy"],
                    "macro_f1": final["macro_f1"],
                    "loss": final["loss"],
                }
            )
    means = []
    for value in values:
        members = [r for r in rows if r["value"] == value]
        means.append(
            {
                "axis": axis,
                "value": value,
                "seed": "mean",
                "split": eval_split,
                "accuracy": float(np.mean([m["accuracy"] for m in members])),
                "macro_f1": float(np.mean([m["macro_f1"] for m in members])),
                "loss": float(np.mean([m["loss"] for m in members])),
            }
        )
    all_rows = rows + means
    _write_csv(
        run_dir / "sweep.csv",
        ["axis", "value", "seed", "split", "accuracy", "macro_f1", "loss"],
        all_rows,
    )
    figures.sweep_figure(all_rows, axis, run_dir / "sweep.png")
    return SweepOutputs(run_dir=run_dir, rows=all_rows)


def run_inspect(run_dir: str | Path, seed: int | None = None, top_k: int = 5) -> dict:
    run_dir = Path(run_dir)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"{config_path} not found; is this a run directory?")
    config = load_config(config_path)
    if seed is None:
        seed = config.seeds[0]
    elif seed not in config.seeds:
        raise ConfigError(f"seed {seed} is not part of this run (seeds: {list(config.seeds)})")
    checkpoint = run_dir / f"seed_{seed}" / "checkpoint.bin"
    if not checkpoint.exists():
        raise FileNotFoundError(f"{checkpoint} not found; train this run first")

    data = materialize_data(config, run_dir)
    graph = build_run_graph(config, data, seed)
    arrays = load_params(checkpoint)
    model_arrays = {n: a for n, a in arrays.items() if not n.startswith("classifier.")}
    hyper = config.hyper_params()
    layout = build_layout(graph, hyper.self_pair_participates)
    kind = config.model["kind"]
    bypass = config.training.get("bypass_gnn", False) or kind == "no-dhgnet"
    model = ModelParams(
        kind=kind,
        hyper=hyper,
        pair_keys=layout.pair_keys if kind != "no-dhgnet" else (),
        source_langs=layout.source_langs if kind != "no-dhgnet" else (),
        arrays=model_arrays,
    )
    stats = graph_stats(graph)
    report: dict = {
        "run_dir": str(run_dir),
        "seed": seed,
        "kind": kind,
        "graph": {
            "num_nodes": graph.num_nodes,
            "num_edges": graph.num_edges,
            "node_counts": stats.node_counts,
            "edge_counts": stats.edge_counts,
            "coverage": stats.coverage,
        },
    }
    meta_path = run_dir / f"seed_{seed}" / "model.json"
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            report["training"] = json.load(fh)
    if kind == "dhgnet" and not bypass:
        source_feats = build_source_features(graph, data.tables)
        records = attention_report(model, layout, source_feats, graph, top_k=top_k)
        pair_rows = [r for r in records if r["kind"] == "pair"]
        pair_means: dict[str, list[float]] = {}
        for r in pair_rows:
            pair_means.setdefault(r["pair"], []).append(r["alpha"])
        report["attention"] = {
            "neighbors": [r for r in records if r["kind"] == "neighbor"],
            "pairs": pair_rows,
            "pair_summary": {
                name: float(np.mean(vals)) for name, vals in sorted(pair_means.items())
            },
        }
    return report


def _fd_loss_settings(config: ExperimentConfig):
    settings = config.train_settings()
    if settings.kind == "no-dhgnet":
        raise ConfigError("gradient checking needs a graph model, not the bypass")
    return settings


def run_check_grad(
    config: ExperimentConfig,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    num_samples: int = 150,
    seed: int = 0,
    batch_docs: int = 8,
) -> FdReport:
    """Finite-difference gate over the full pipeline loss."""
    config.validate()
    settings = _fd_loss_settings(config)
    work_dir = Path(config.output_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    data = materialize_data(config, work_dir)
    graph = build_run_graph(config, data, seed)
    layout = build_layout(graph, settings.hyper.self_pair_participates)
    source_feats = build_source_features(graph, data.tables)
    dims = {lang: feats.shape[1] for lang, feats in source_feats.items()}
    ss = np.random.SeedSequence(seed)
    emb_rng, net_rng, clf_rng = (np.random.default_rng(c) for c in ss.spawn(3))
    model = init_model_params(settings.kind, settings.hyper, layout, dims, emb_rng, net_rng)
    num_classes = data.corpora["train"].num_classes
    classifier = init_classifier_params(
        settings.hyper.embed_dim, settings.classifier_hidden, num_classes, clf_rng
    )
    row_of = {int(node): i for i, node in enumerate(layout.target_ids)}
    docs = data.corpora["train"].documents[:batch_docs]
    doc_rows = [np.array([row_of[t] for t in d.tokens], dtype=np.int64) for d in docs]
    labels = np.array([d.label for d in docs], dtype=np.int64)
    all_params = {**model.arrays, **classifier}

    def loss_fn(tape: Tape, vars_: dict) -> ad.Var:
        clf = {name: vars_[name] for name in classifier}
        emb, _ = forward(tape, vars_, model, layout, source_feats)
        logits = batch_logits(tape, emb, clf, doc_rows)
        return ad.nll_loss(ad.log_softmax(logits), labels)

    return fd_check(
        loss_fn,
        all_params,
        step=step,
        tolerance=tolerance,
        num_samples=num_samples,
        seed=seed,
    )


def _tiny_grad_config() -> ExperimentConfig:
    synth = SynthConfig(
        words_per_language={"xt": 12, "xa": 12, "xb": 12},
        docs_per_split={"train": 12, "valid": 6, "test": 6},
        doc_length=(2, 4),
    )
    raw = to_dict(ExperimentConfig(synth=synth, output_dir="runs/check-grad"))
    raw["model"].update({"embed_dim": 8, "heads": 2, "head_dim": 4})
    return from_dict(raw)


class _Parser(argparse.ArgumentParser):
    """Argument errors are usage errors: exit 1, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_config_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON experiment config; defaults when omitted")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field by dotted path, e.g. model.heads=4",
    )
    sub.add_argument("--output-dir", help="run directory (overrides config)")
    sub.add_argument("--seeds", help="comma-separated training seeds (overrides config)")
    sub.add_argument("--kind", choices=MODEL_KINDS, help="model kind (overrides config)")
    sub.add_argument("--epochs", type=int, help="training epochs (overrides config)")
    sub.add_argument("--noise-rate", type=float, help="dictionary noise rate (overrides config)")
    sub.add_argument(
        "--train-fraction", type=float, help="training subsample fraction (overrides config)"
    )


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        raw = to_dict(load_config(args.config))
    else:
        raw = to_dict(ExperimentConfig())
    raw = apply_overrides(raw, args.set)
    if args.output_dir is not None:
        raw["output_dir"] = args.output_dir
    if args.seeds is not None:
        try:
            raw["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --seeds value: {exc}") from exc
    if args.kind is not None:
        raw["model"]["kind"] = args.kind
    if args.epochs is not None:
        raw["training"]["epochs"] = args.epochs
    if getattr(args, "noise_rate", None) is not None:
        raw["noise_rate"] = args.noise_rate
    if getattr(args, "train_fraction", None) is not None:
        raw["train_fraction"] = args.train_fraction
    return from_dict(raw)


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    outputs = run_training(config)
    for row in outputs.summary_rows:
        if row["seed"] == "mean":
            print(
                f"{row['split']}: accuracy={row['accuracy']:.4f} "
                f"macro_f1={row['macro_f1']:.4f} loss={row['loss']:.4f}"
            )
    print(f"run directory: {outputs.run_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    values = [v for v in args.values.split(",") if v.strip()]
    outputs = run_sweep(config, args.axis, values)
    for row in outputs.rows:
        if row["seed"] == "mean":
            print(
                f"{args.axis}={row['value']}: accuracy={row['accuracy']:.4f} "
                f"macro_f1={row['macro_f1']:.4f}"
            )
    print(f"sweep directory: {outputs.run_dir}")
    return 0


def _cmd_inspect(args) -> int:
    report = run_inspect(args.run_dir, seed=args.seed, top_k=args.top_k)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _synth_overrides(raw: dict, overrides: list[str]) -> dict:
    known = set(synth_to_dict(SynthConfig()))
    result = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        if key not in known:
            raise ConfigError(f"unknown synth field {key!r}")
        try:
            result[key] = json.loads(text)
        except json.JSONDecodeError:
            result[key] = text
    return result


def _cmd_gen_synth(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "synth" in raw:
            raw = raw["synth"]
        if raw is None:
            raise ConfigError("config has no synth section to generate from")
    else:
        raw = synth_to_dict(SynthConfig())
    synth = synth_from_dict(_synth_overrides(raw, args.set))
    try:
        synth.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    task = generate(synth, args.seed)
    paths = write_task(task, args.out)
    print(json.dumps(paths, indent=2, sort_keys=True))
    return 0


def _cmd_check_grad(args) -> int:
    if args.config:
        config = load_config(args.config)
        raw = apply_overrides(to_dict(config), args.set)
        config = from_dict(raw)
    else:
        config = _tiny_grad_config()
    if args.output_dir:
        config.output_dir = args.output_dir
    report = run_check_grad(
        config,
        step=args.step,
        tolerance=args.tolerance,
        num_samples=args.samples,
        seed=args.seed,
    )
    status = "PASS" if report.passed else "FAIL"
    print(
        f"{status}: max_rel_err={report.max_rel_err:.3e} over {report.num_checked} "
        f"coordinates (tolerance {report.tolerance:.1e})"
    )
    for failure in report.failures[:10]:
        print(
            f"  {failure.tensor}{list(failure.index)}: analytic={failure.analytic:.6e} "
            f"numeric={failure.numeric:.6e} rel_err={failure.rel_err:.3e}"
        )
    return 0 if report.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lexigraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="train one model per seed and summarise")
    _add_config_arguments(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="sweep one experimental axis")
    _add_config_arguments(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated values for the swept axis"
    )
    p_sweep.set_defaults(func=_cmd_sweep)

    p_inspect = sub.add_parser("inspect", help="report graph stats and attention for a run")
    p_inspect.add_argument("run_dir")
    p_inspect.add_argument("--seed", type=int, default=None)
    p_inspect.add_argument("--top-k", type=int, default=5)
    p_inspect.set_defaults(func=_cmd_inspect)

    p_gen = sub.add_parser("gen-synth", help="generate a synthetic task to files")
    p_gen.add_argument("--config", help="experiment config or bare synth JSON")
    p_gen.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a synth field, e.g. p_err=0.2",
    )
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen_synth)

    p_grad = sub.add_parser("check-grad", help="finite-difference gate on the full model")
    p_grad.add_argument("--config", help="experiment config; small synthetic default")
    p_grad.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field by dotted path",
    )
    p_grad.add_argument("--output-dir", help="working directory for generated data")
    p_grad.add_argument("--step", type=float, default=1e-5)
    p_grad.add_argument("--tolerance", type=float, default=1e-4)
    p_grad.add_argument("--samples", type=int, default=150)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=_cmd_check_grad)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ParseError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
