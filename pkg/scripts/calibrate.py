"""Calibration runs behind the frozen acceptance manifest.

Measures the clean and noisy accuracy gaps between the graph model and
the embedding-only baseline at two training sizes, the word-level
attention probe on a noisy graph, the linear-probe ceiling, and the
size/timing of the gradient-gate graph. Prints a JSON blob whose
numbers seed tests/fixtures/synth_manifest.json.
"""

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lexigraph.cli import build_run_graph, materialize_data, run_check_grad, run_single
from lexigraph.config import from_dict, to_dict
from lexigraph.model import ModelParams, attention_report, build_layout, build_source_features
from lexigraph.synth import generate, oracle_bound

ACCEPT_SYNTH = {
    "target_language": "xt",
    "source_languages": ["xa", "xb"],
    "num_concepts": 16,
    "num_classes": 4,
    "concept_dim": 16,
    "words_per_language": {"xt": 240, "xa": 96, "xb": 96},
    "noise_sigma": 0.05,
    "docs_per_split": {"train": 500, "valid": 100, "test": 200},
    "doc_length": [3, 6],
    "affinity": None,
    "p_dict": 0.7,
    "p_err": 0.0,
    "rotation_seeds": None,
}

ACCEPT_MODEL = {
    "kind": "dhgnet",
    "embed_dim": 16,
    "heads": 2,
    "head_dim": 8,
    "num_layers": 2,
}

ACCEPT_TRAINING = {
    "epochs": 30,
    "batch_size": 32,
    "learning_rate": 3e-3,
    "classifier_hidden": 32,
    "contrastive_steps": 150,
    "contrastive_lr": 3e-3,
}

GRAD_SYNTH = {
    "target_language": "xt",
    "source_languages": ["xa", "xb"],
    "num_concepts": 4,
    "num_classes": 2,
    "concept_dim": 8,
    "words_per_language": {"xt": 12, "xa": 8, "xb": 8},
    "noise_sigma": 0.05,
    "docs_per_split": {"train": 12, "valid": 6, "test": 6},
    "doc_length": [2, 4],
    "affinity": None,
    "p_dict": 0.6,
    "p_err": 0.0,
    "rotation_seeds": None,
}


def base_raw(work_dir, seeds):
    raw = to_dict(from_dict({}))
    raw["synth"] = dict(ACCEPT_SYNTH)
    raw["model"].update(ACCEPT_MODEL)
    raw["training"].update(ACCEPT_TRAINING)
    raw["seeds"] = list(seeds)
    raw["output_dir"] = str(work_dir)
    return raw


def mean_test_acc(config, data, seeds):
    accs = []
    settings = config.train_settings()
    for seed in seeds:
        _, rows = run_single(config, data, settings, seed)
        accs.append(next(r["accuracy"] for r in rows if r["split"] == "test"))
    return float(np.mean(accs)), accs


def word_index(lang, word):
    return int(word[len(lang) + 1 :])


def attention_probe(config, data, seed, num_concepts):
    settings = config.train_settings()
    result, _ = run_single(config, data, settings, seed)
    graph = build_run_graph(config, data, seed)
    hyper = config.hyper_params()
    layout = build_layout(graph, hyper.self_pair_participates)
    model_arrays = {
        n: a for n, a in result.state.all_arrays().items() if not n.startswith("classifier.")
    }
    model = ModelParams(
        kind="dhgnet",
        hyper=hyper,
        pair_keys=layout.pair_keys,
        source_langs=layout.source_langs,
        arrays=model_arrays,
    )
    feats = build_source_features(graph, data.tables)
    records = attention_report(model, layout, feats, graph, top_k=1)
    top = [r for r in records if r["kind"] == "neighbor"]
    correct = 0
    for r in top:
        src_lang = r["pair"].split("->")[0]
        same = (
            word_index(src_lang, r["neighbor"]) % num_concepts
            == word_index("xt", r["word"]) % num_concepts
        )
        correct += int(same)
    return correct / len(top), len(top)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", default="1,2,3,4,5")
    ap.add_argument("--skip-large", action="store_true")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    out = {}
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        raw = base_raw(work / "base", seeds)
        config = from_dict(raw)
        data = materialize_data(config, work / "base")

        task = generate(config.synth, config.data_seed)
        out["oracle_bound"] = oracle_bound(task.oracle, task.corpora)

        t0 = time.time()
        for label, fraction in (("small", 0.1),) + (() if args.skip_large else (("large", 1.0),)):
            for kind in ("dhgnet", "no-dhgnet"):
                cfg = from_dict(raw)
                cfg.train_fraction = fraction
                cfg.model = {**cfg.model, "kind": kind}
                t1 = time.time()
                mean, accs = mean_test_acc(cfg, data, seeds)
                out[f"acc.{label}.{kind}"] = mean
                out[f"accs.{label}.{kind}"] = accs
                print(
                    f"{label:5s} {kind:9s} mean={mean:.4f} "
                    f"accs={[round(a, 3) for a in accs]} ({time.time() - t1:.1f}s)",
                    flush=True,
                )
        if not args.skip_large:
            out["gap.small"] = out["acc.small.dhgnet"] - out["acc.small.no-dhgnet"]
            out["gap.large"] = out["acc.large.dhgnet"] - out["acc.large.no-dhgnet"]
            print(f"gap small={out['gap.small']:.4f} large={out['gap.large']:.4f}")

        cfg = from_dict(raw)
        cfg.train_fraction = 0.1
        cfg.noise_rate = 0.5
        mean, accs = mean_test_acc(cfg, data, seeds)
        out["acc.small.dhgnet.noisy"] = mean
        out["accs.small.dhgnet.noisy"] = accs
        print(
            f"noisy dhgnet@small mean={mean:.4f} accs={[round(a, 3) for a in accs]}",
            flush=True,
        )
        if "acc.small.dhgnet" in out:
            out["degradation"] = out["acc.small.dhgnet"] - mean
            print(f"degradation={out['degradation']:.4f}")

        probes = []
        for seed in seeds[:3]:
            cfg = from_dict(raw)
            cfg.noise_rate = 0.5
            frac, n = attention_probe(cfg, data, seed, config.synth.num_concepts)
            probes.append(frac)
            print(f"probe seed={seed} correct_top1={frac:.4f} over {n} pairs", flush=True)
        out["probe.values"] = probes
        out["probe.min"] = min(probes)

        grad_raw = to_dict(from_dict({}))
        grad_raw["synth"] = dict(GRAD_SYNTH)
        grad_raw["model"].update({"embed_dim": 8, "heads": 2, "head_dim": 4, "num_layers": 2})
        grad_raw["output_dir"] = str(work / "grad")
        grad_cfg = from_dict(grad_raw)
        gdata = materialize_data(grad_cfg, work / "grad")
        graph = build_run_graph(grad_cfg, gdata, 0)
        out["grad.num_nodes"] = graph.num_nodes
        t1 = time.time()
        report = run_check_grad(grad_cfg, num_samples=150)
        out["grad.seconds"] = time.time() - t1
        out["grad.max_rel_err"] = report.max_rel_err
        print(
            f"grad graph nodes={graph.num_nodes} max_rel_err={report.max_rel_err:.3e} "
            f"time={out['grad.seconds']:.1f}s"
        )
        print(f"total {time.time() - t0:.1f}s")

    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
