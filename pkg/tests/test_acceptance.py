"""Acceptance gate: one test per shipped guarantee.

Run `pytest tests/test_acceptance.py -v` to get one pass or fail line
per criterion. Every threshold is pinned here or frozen in
tests/fixtures/synth_manifest.json; the manifest also records the
measurements the margins were calibrated from.
"""

import dataclasses
import io
import json
import time
from pathlib import Path

import numpy as np
import pytest

from lexigraph.autodiff import Tape
from lexigraph.classifier import (
    TrainingState,
    accuracy_and_macro_f1,
    evaluate,
    train,
)
from lexigraph.cli import (
    build_run_graph,
    materialize_data,
    run_check_grad,
    run_single,
    run_sweep,
    run_training,
)
from lexigraph.config import from_dict
from lexigraph.graph import DictionaryGraph, _compress, build_dhg
from lexigraph.ingest import (
    BilingualDictionary,
    ParseError,
    Vocabulary,
    parse_corpus,
    parse_dictionary,
    parse_embeddings,
    write_corpus_rows,
    write_dictionary,
    write_embeddings,
)
from lexigraph.model import (
    HyperParams,
    ModelParams,
    build_layout,
    build_source_features,
    forward,
    init_model_params,
    lift_params,
    word_level_aggregate,
)
from lexigraph.optim import load_params

MANIFEST = json.loads(
    (Path(__file__).parent / "fixtures" / "synth_manifest.json").read_text(encoding="utf-8")
)


def experiment_raw(**tweaks):
    raw = json.loads(json.dumps(MANIFEST["experiment"]))
    raw.update(tweaks)
    return raw


def mean_test_accuracy(config, data):
    settings = config.train_settings()
    accs = []
    for seed in config.seeds:
        _, rows = run_single(config, data, settings, seed)
        accs.append(next(r["accuracy"] for r in rows if r["split"] == "test"))
    return float(np.mean(accs))


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    work = tmp_path_factory.mktemp("bench")
    config = from_dict(experiment_raw(output_dir=str(work)))
    data = materialize_data(config, work)
    return data


@pytest.fixture(scope="module")
def transfer(bench):
    cells = {}
    for label, fraction in MANIFEST["fractions"].items():
        for kind in ("dhgnet", "no-dhgnet"):
            config = from_dict(experiment_raw())
            config.train_fraction = fraction
            config.model = {**config.model, "kind": kind}
            cells[(label, kind, "clean")] = mean_test_accuracy(config, bench)
    for kind in ("dhgnet", "no-dhgnet"):
        config = from_dict(experiment_raw())
        config.train_fraction = MANIFEST["fractions"]["small"]
        config.noise_rate = MANIFEST["noise_rate"]
        config.model = {**config.model, "kind": kind}
        cells[("small", kind, "noisy")] = mean_test_accuracy(config, bench)
    return cells


def test_criterion_1_gradient_oracle(tmp_path):
    gate = MANIFEST["grad_gate"]
    raw = json.loads(json.dumps(gate["experiment"]))
    raw["output_dir"] = str(tmp_path)
    config = from_dict(raw)
    assert config.model["num_layers"] == 2
    assert config.model["heads"] >= 2
    assert len(config.source_languages) >= 2

    data = materialize_data(config, tmp_path)
    graph = build_run_graph(config, data, 0)
    assert graph.num_nodes <= gate["max_nodes"]

    started = time.monotonic()
    report = run_check_grad(
        config,
        step=gate["step"],
        tolerance=gate["tolerance"],
        num_samples=gate["num_samples"],
    )
    elapsed = time.monotonic() - started
    assert report.max_rel_err < 1e-4
    assert elapsed < 60.0
    print(
        f"criterion 1: max_rel_err={report.max_rel_err:.3e} on {graph.num_nodes} nodes "
        f"in {elapsed:.1f}s"
    )


def random_dhg(rng):
    num_sources = 2 + int(rng.integers(2))
    langs = [f"s{i}" for i in range(num_sources)]
    vocab = Vocabulary()
    targets = [f"t{i}" for i in range(int(rng.integers(3, 9)))]
    for w in targets:
        vocab.add("t", w)
    dicts = []
    for lang in langs:
        words = [f"{lang}w{j}" for j in range(int(rng.integers(2, 7)))]
        into_target = {}
        for w in words:
            hits = [t for t in targets if rng.random() < 0.4]
            if hits:
                into_target[w] = tuple(hits)
        if into_target:
            dicts.append(BilingualDictionary(src=lang, dst="t", entries=into_target))
            if rng.random() < 0.7:
                back = {}
                for s, ts in into_target.items():
                    for t in ts:
                        back.setdefault(t, []).append(s)
                dicts.append(
                    BilingualDictionary(
                        src="t", dst=lang, entries={h: tuple(v) for h, v in back.items()}
                    )
                )
    return build_dhg(vocab, "t", dicts)


def test_criterion_2_attention_normalization():
    rng = np.random.default_rng(20)
    checked = 0
    for _ in range(100):
        graph = random_dhg(rng)
        while graph.num_edges == 0:
            graph = random_dhg(rng)
        participates = bool(rng.integers(2))
        hyper = HyperParams(
            embed_dim=4, heads=2, head_dim=2, num_layers=2,
            self_pair_participates=participates,
        )
        layout = build_layout(graph, participates)
        dims = {lang: int(rng.integers(2, 5)) for lang in layout.source_langs}
        feats = {
            lang: rng.normal(size=(len(graph.vocabulary.ids_of_language(lang)), dim))
            for lang, dim in dims.items()
        }
        model = init_model_params(
            "dhgnet", hyper, layout, dims,
            np.random.default_rng(rng.integers(1 << 31)),
            np.random.default_rng(rng.integers(1 << 31)),
        )
        tape = Tape()
        _, trace = forward(
            tape, lift_params(tape, model.arrays), model, layout, feats,
            collect_attention=True,
        )
        for (_, _, p), alpha in trace.word.items():
            sums = np.zeros(layout.num_nodes)
            np.add.at(sums, layout.pair_dst[p], alpha)
            np.testing.assert_allclose(sums[layout.pair_active[p]], 1.0, atol=1e-12)
        for _, alpha in trace.language.items():
            sums = np.zeros(layout.num_nodes)
            np.add.at(sums, layout.part_nodes, alpha)
            np.testing.assert_allclose(sums, 1.0, atol=1e-12)
        checked += 1
    assert checked == 100
    print("criterion 2: word and language attention sums = 1 +/- 1e-12 on 100 random graphs")


def test_criterion_3_structural_equivalences(tmp_path):
    # (a) a graph without dictionary edges ignores the source tables
    vocab = Vocabulary()
    vocab.add("t", "w1")
    vocab.add("t", "w2")
    vocab.add("s", "x")
    edges = {("s", "t"): _compress([], [], 3)}
    graph = DictionaryGraph(
        vocabulary=vocab, target="t", pairs=(("s", "t"),), edges=edges, num_seed_words=2
    )
    hyper = HyperParams(embed_dim=4, heads=2, head_dim=2, num_layers=2)
    layout = build_layout(graph, hyper.self_pair_participates)
    seqs = np.random.SeedSequence(3).spawn(2)
    model = init_model_params(
        "dhgnet", hyper, layout, {"s": 3},
        np.random.default_rng(seqs[0]), np.random.default_rng(seqs[1]),
    )
    outs = []
    for fill in (0.0, 123.0):
        tape = Tape()
        out, _ = forward(
            tape, lift_params(tape, model.arrays), model, layout, {"s": np.full((1, 3), fill)}
        )
        outs.append(out.value)
    np.testing.assert_array_equal(outs[0], outs[1])

    # (b) one language pair with copied parameters matches the shared-GAT path
    vocab = Vocabulary()
    vocab.add("t", "w1")
    vocab.add("t", "w2")
    single = build_dhg(
        vocab, "t",
        [BilingualDictionary(src="s", dst="t", entries={"a": ("w1", "w2"), "b": ("w1",)})],
    )
    layout = build_layout(single)
    assert len(layout.pair_keys) == 1
    rng = np.random.default_rng(7)
    tape = Tape()
    feats = tape.leaf(rng.normal(size=(single.num_nodes, 4)))
    W = tape.leaf(rng.normal(size=(2, 4)))
    a = tape.leaf(rng.normal(size=(4, 1)))
    out_pair, _ = word_level_aggregate(
        tape, feats, W, a, layout.pair_src[0], layout.pair_dst[0], layout.num_nodes
    )
    out_gat, _ = word_level_aggregate(
        tape, feats, W, a, layout.union_src, layout.union_dst, layout.num_nodes
    )

    def dense_gat(x, W_, a_, src, dst, n, slope=0.2):
        dk = W_.shape[0]
        h = x @ W_.T
        score = h[src] @ a_[:dk, 0] + h[dst] @ a_[dk:, 0]
        score = np.where(score > 0, score, slope * score)
        alpha = np.zeros(len(src))
        for node in np.unique(dst):
            mask = dst == node
            e = np.exp(score[mask] - score[mask].max())
            alpha[mask] = e / e.sum()
        agg = np.zeros((n, dk))
        np.add.at(agg, dst, alpha[:, None] * h[src])
        inner = np.sqrt(2.0 / np.pi) * (agg + 0.044715 * agg**3)
        return 0.5 * agg * (1.0 + np.tanh(inner))

    reference = dense_gat(
        feats.value, W.value, a.value, layout.union_src, layout.union_dst, layout.num_nodes
    )
    with_neighbors = np.unique(layout.union_dst)
    np.testing.assert_allclose(
        out_pair.value[with_neighbors], out_gat.value[with_neighbors], atol=1e-10
    )
    np.testing.assert_allclose(
        out_pair.value[with_neighbors], reference[with_neighbors], atol=1e-10
    )

    # (c) the control model and the bypassed graph model coincide bitwise
    gate = MANIFEST["grad_gate"]
    raw = json.loads(json.dumps(gate["experiment"]))
    raw["output_dir"] = str(tmp_path)
    raw["training"]["epochs"] = 5
    config = from_dict(raw)
    data = materialize_data(config, tmp_path)
    graph = build_run_graph(config, data, 0)

    base = config.train_settings()
    control = dataclasses.replace(base, kind="no-dhgnet")
    bypassed = dataclasses.replace(base, kind="dhgnet", bypass_gnn=True)
    run_a = train(control, graph, data.tables, data.corpora, 1)
    run_b = train(bypassed, graph, data.tables, data.corpora, 1)
    assert run_a.records == run_b.records
    np.testing.assert_array_equal(
        run_a.state.model.arrays["target_embeddings"],
        run_b.state.model.arrays["target_embeddings"],
    )
    for name, array in run_a.state.classifier.items():
        np.testing.assert_array_equal(array, run_b.state.classifier[name])
    np.testing.assert_array_equal(
        run_a.state.compute_embeddings(), run_b.state.compute_embeddings()
    )
    print("criterion 3: no-edge isolation, single-pair GAT equality, bypass bitwise match")


def test_criterion_4_directional_transfer(transfer):
    margins = MANIFEST["margins"]
    small_gap = transfer[("small", "dhgnet", "clean")] - transfer[("small", "no-dhgnet", "clean")]
    large_gap = transfer[("large", "dhgnet", "clean")] - transfer[("large", "no-dhgnet", "clean")]
    assert transfer[("small", "dhgnet", "clean")] > transfer[("small", "no-dhgnet", "clean")]
    assert small_gap >= margins["min_gap_small"]
    assert small_gap >= large_gap + margins["min_gap_advantage"]
    print(
        f"criterion 4: gap@50={small_gap:.3f} gap@500={large_gap:.3f} "
        f"(margins {margins['min_gap_small']}, +{margins['min_gap_advantage']})"
    )


def test_criterion_5_noise_robustness(transfer):
    margins = MANIFEST["margins"]
    clean = transfer[("small", "dhgnet", "clean")]
    noisy = transfer[("small", "dhgnet", "noisy")]
    control = transfer[("small", "no-dhgnet", "noisy")]
    assert noisy >= control + margins["min_noise_advantage"]
    assert clean - noisy <= margins["max_noise_degradation"]
    print(
        f"criterion 5: noisy={noisy:.3f} >= control={control:.3f}, "
        f"degradation={clean - noisy:.3f} <= {margins['max_noise_degradation']}"
    )


def test_criterion_6_ablation_harness(tmp_path):
    raw = experiment_raw(output_dir=str(tmp_path), seeds=[1], train_fraction=0.25)
    raw["training"]["epochs"] = 8
    config = from_dict(raw)
    outputs = run_sweep(config, "gnn_kind", ["dhgnet", "gcn", "gat", "rgcn"])
    assert sorted({r["value"] for r in outputs.rows}) == sorted(["dhgnet", "gcn", "gat", "rgcn"])
    assert len(outputs.rows) == 4 * 1 + 4
    lines = (tmp_path / "sweep.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 1 + 4 + 4
    assert (tmp_path / "sweep.png").exists()
    for row in outputs.rows:
        assert np.isfinite(row["accuracy"])
        assert np.isfinite(row["macro_f1"])
    print("criterion 6: gnn_kind sweep completed all four models with a full table")


def confusion_metrics(labels, preds, num_classes):
    matrix = [[0] * num_classes for _ in range(num_classes)]
    for y, p in zip(labels, preds):
        matrix[y][p] += 1
    correct = sum(matrix[c][c] for c in range(num_classes))
    accuracy = correct / len(labels)
    f1_total = 0.0
    for c in range(num_classes):
        tp = matrix[c][c]
        fp = sum(matrix[r][c] for r in range(num_classes)) - tp
        fn = sum(matrix[c][r] for r in range(num_classes)) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1_total += 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, f1_total / num_classes


def test_criterion_7_metrics_correctness():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        num_classes = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        labels = rng.integers(0, num_classes, size=n)
        preds = rng.integers(0, num_classes, size=n)
        acc, f1 = accuracy_and_macro_f1(labels, preds, num_classes)
        ref_acc, ref_f1 = confusion_metrics(labels.tolist(), preds.tolist(), num_classes)
        assert acc == ref_acc
        assert abs(f1 - ref_f1) <= 1e-12
    labels = np.array([0, 1] * 10)
    preds = np.zeros(20, dtype=np.int64)
    acc, f1 = accuracy_and_macro_f1(labels, preds, 2)
    assert acc == 0.5
    assert abs(f1 - 1.0 / 3.0) <= 1e-12
    print("criterion 7: evaluate matches the confusion oracle on 1000 random sets")


def tiny_run_raw(out_dir):
    raw = experiment_raw(output_dir=str(out_dir), seeds=[1])
    raw["synth"]["words_per_language"] = {"xt": 24, "xa": 24, "xb": 24}
    raw["synth"]["docs_per_split"] = {"train": 30, "valid": 12, "test": 12}
    raw["training"]["epochs"] = 3
    raw["training"]["contrastive_steps"] = 20
    return raw


def test_criterion_8_determinism_and_persistence(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    first = run_training(from_dict(tiny_run_raw(out_a)))
    run_training(from_dict(tiny_run_raw(out_b)))
    for name in ("summary.csv", "seed_1/metrics.jsonl"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    config = from_dict(tiny_run_raw(out_a))
    data = materialize_data(config, out_a)
    graph = build_run_graph(config, data, 1)
    settings = config.train_settings()
    layout = build_layout(graph, settings.hyper.self_pair_participates)
    arrays = load_params(out_a / "seed_1" / "checkpoint.bin")
    state = TrainingState(
        settings=settings,
        seed=1,
        model=ModelParams(
            kind=settings.kind,
            hyper=settings.hyper,
            pair_keys=layout.pair_keys,
            source_langs=layout.source_langs,
            arrays={n: a for n, a in arrays.items() if not n.startswith("classifier.")},
        ),
        classifier={n: a for n, a in arrays.items() if n.startswith("classifier.")},
        layout=layout,
        source_feats=build_source_features(graph, data.tables),
        target_row_of={int(node): i for i, node in enumerate(layout.target_ids)},
        num_classes=max(c.num_classes for c in data.corpora.values()),
    )
    acc, f1, loss = evaluate(state, data.corpora["valid"])
    reported = next(
        r for r in first.summary_rows if r["seed"] == 1 and r["split"] == "valid"
    )
    assert acc == reported["accuracy"]
    assert f1 == reported["macro_f1"]
    assert loss == reported["loss"]
    print("criterion 8: reruns byte-identical; checkpoint reload reproduces metrics bitwise")


def test_criterion_9_parser_conformance():
    table = parse_embeddings(io.StringIO("2 3\ncat 1.0 0.0 0.5\ndog 0.0 1.0 0.5\n"), "en")
    assert table.dim == 3 and len(table) == 2
    headerless = parse_embeddings(io.StringIO("cat 1.0 0.0\ndog 0.5 2.0\n"), "en")
    assert headerless.dim == 2
    with pytest.raises(ParseError) as err:
        parse_embeddings(io.StringIO("cat 1.0 0.0\ndog 1.0\n"), "en")
    assert err.value.line == 2
    with pytest.raises(ParseError):
        parse_embeddings(io.StringIO("cat 1.0 nan\n"), "en")
    with pytest.raises(ParseError):
        parse_embeddings(io.StringIO(""), "en")

    d = parse_dictionary(io.StringIO("ร้าน\tshop,store\n"), "th", "en")
    assert d.entries["ร้าน"] == ("shop", "store")
    assert parse_dictionary(io.StringIO(""), "en", "fr").entries == {}
    deduped = parse_dictionary(io.StringIO("dog\tcat,cat\n"), "en", "fr")
    assert deduped.entries["dog"] == ("cat",)
    assert deduped.duplicate_translations == 1
    with pytest.raises(ParseError) as err:
        parse_dictionary(io.StringIO("no tab here\n"), "en", "fr")
    assert err.value.line == 1

    vocab = Vocabulary()
    corpus = parse_corpus(io.StringIO("1\tgood food here\n0\tfood again\n"), vocab, "en", "train")
    assert len(corpus.documents) == 2
    assert corpus.documents[0].tokens[1] == corpus.documents[1].tokens[0]
    with pytest.raises(ParseError) as err:
        parse_corpus(io.StringIO("x\thello\n"), Vocabulary(), "en", "train")
    assert err.value.line == 1
    skipped = parse_corpus(io.StringIO("1\tok doc\n0\t   \n"), Vocabulary(), "en", "train")
    assert skipped.skipped_empty == 1

    first = io.StringIO()
    write_embeddings(table, first)
    reparsed = parse_embeddings(io.StringIO(first.getvalue()), "en")
    second = io.StringIO()
    write_embeddings(reparsed, second)
    assert first.getvalue() == second.getvalue()

    first = io.StringIO()
    write_dictionary(d, first)
    reparsed = parse_dictionary(io.StringIO(first.getvalue()), "th", "en")
    second = io.StringIO()
    write_dictionary(reparsed, second)
    assert first.getvalue() == second.getvalue()

    rows = [(doc.label, " ".join(vocab.word_of(t) for t in doc.tokens)) for doc in corpus.documents]
    first = io.StringIO()
    write_corpus_rows(rows, first)
    revocab = Vocabulary()
    recorpus = parse_corpus(io.StringIO(first.getvalue()), revocab, "en", "train")
    second = io.StringIO()
    write_corpus_rows(
        [
            (doc.label, " ".join(revocab.word_of(t) for t in doc.tokens))
            for doc in recorpus.documents
        ],
        second,
    )
    assert first.getvalue() == second.getvalue()
    print("criterion 9: golden formats, every error case, and byte-stable round-trips")
