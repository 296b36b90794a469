"""Document classification on top of the graph network.

A document's feature is the mean of its token embeddings; the head is a
single GELU hidden layer followed by softmax. Training runs the whole
graph forward on every step so the loss gradient reaches the classifier,
the attention stack, the per-language input transforms and the trainable
target embeddings alike. The epoch with the best validation macro-F1 is
snapshotted and restored when training ends.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Var
from .graph import DictionaryGraph
from .ingest import EmbeddingTable, LabeledCorpus
from .model import (
    GraphLayout,
    HyperParams,
    ModelParams,
    _glorot,
    build_layout,
    build_source_features,
    cross_lingual_transform,
    forward,
    init_model_params,
    lift_params,
)
from .optim import Adam

log = logging.getLogger(__name__)

Array = np.ndarray


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite. Parameters keep their last
    good values so a checkpoint can still be written."""


@dataclass
class TrainSettings:
    kind: str = "dhgnet"
    hyper: HyperParams = field(default_factory=HyperParams)
    batch_size: int = 32
    learning_rate: float = 1e-3
    epochs: int = 30
    classifier_hidden: int = 32
    dropout: float = 0.0
    bypass_gnn: bool = False
    contrastive_steps: int = 0
    contrastive_margin: float = 0.5
    contrastive_negatives: int = 5
    contrastive_lr: float = 1e-3

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def init_classifier_params(
    embed_dim: int, hidden: int, num_classes: int, rng: np.random.Generator
) -> dict[str, Array]:
    return {
        "classifier.hidden.W": _glorot(rng, hidden, embed_dim),
        "classifier.hidden.b": np.zeros((1, hidden)),
        "classifier.out.W": _glorot(rng, num_classes, hidden),
        "classifier.out.b": np.zeros((1, num_classes)),
    }


def _doc_rows(corpus: LabeledCorpus, row_of: dict[int, int]) -> tuple[list[Array], Array]:
    rows = [np.array([row_of[t] for t in doc.tokens], dtype=np.int64) for doc in corpus.documents]
    labels = np.array([doc.label for doc in corpus.documents], dtype=np.int64)
    return rows, labels


def batch_logits(
    tape: Tape,
    embeddings: Var,
    classifier: dict[str, Var],
    docs_rows: list[Array],
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Var:
    """Mean-pool each document's token rows and apply the head."""
    token_rows = np.concatenate(docs_rows)
    segments = np.repeat(np.arange(len(docs_rows)), [len(r) for r in docs_rows])
    inv_len = np.repeat(1.0 / np.array([len(r) for r in docs_rows]), [len(r) for r in docs_rows])
    tokens = ad.row_select(embeddings, token_rows)
    pooled = ad.segment_weighted_sum(
        tokens, tape.constant(inv_len[:, None]), segments, len(docs_rows)
    )
    if dropout > 0.0:
        assert rng is not None
        pooled = ad.dropout(pooled, dropout, rng)
    hidden = ad.gelu(
        ad.add(ad.matmul(pooled, ad.transpose(classifier["classifier.hidden.W"])), classifier["classifier.hidden.b"])
    )
    if dropout > 0.0:
        assert rng is not None
        hidden = ad.dropout(hidden, dropout, rng)
    return ad.add(
        ad.matmul(hidden, ad.transpose(classifier["classifier.out.W"])), classifier["classifier.out.b"]
    )


def predict_probs(embeddings: Array, classifier: dict[str, Array], token_rows) -> Array:
    """Class probability vector for one document."""
    token_rows = np.asarray(token_rows, dtype=np.int64)
    if token_rows.size == 0:
        raise ValueError("cannot classify an empty document")
    tape = Tape()
    emb = tape.constant(embeddings)
    clf = {name: tape.constant(a) for name, a in classifier.items()}
    logits = batch_logits(tape, emb, clf, [token_rows])
    return np.exp(ad.log_softmax(logits).value[0])


def accuracy_and_macro_f1(y_true, y_pred, num_classes: int) -> tuple[float, float]:
    """Accuracy and macro-averaged F1 with the 0/0 := 0 convention."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("labels and predictions must be equal-length 1-D arrays")
    if y_true.size == 0:
        raise ValueError("cannot score an empty prediction set")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(num_classes), where=denom > 0)
    return float(tp.sum() / y_true.size), float(f1.mean())


@dataclass
class TrainingState:
    settings: TrainSettings
    seed: int
    model: ModelParams
    classifier: dict[str, Array]
    layout: GraphLayout
    source_feats: dict[str, Array]
    target_row_of: dict[int, int]
    num_classes: int
    epoch: int = 0
    best_epoch: int = -1
    best_val_f1: float = -1.0

    @property
    def bypass(self) -> bool:
        return self.settings.bypass_gnn or self.settings.kind == "no-dhgnet"

    def all_arrays(self) -> dict[str, Array]:
        return {**self.model.arrays, **self.classifier}

    def compute_embeddings(self) -> Array:
        """Target-node features under the current parameters."""
        if self.bypass:
            return self.model.arrays["target_embeddings"].copy()
        tape = Tape()
        params = lift_params(tape, self.model.arrays)
        out, _ = forward(tape, params, self.model, self.layout, self.source_feats)
        return out.value


@dataclass
class TrainResult:
    state: TrainingState
    records: list[dict]


def _split_metrics(
    state: TrainingState, docs_rows: list[Array], labels: Array
) -> tuple[float, float, float]:
    tape = Tape()
    clf = {name: tape.constant(a) for name, a in state.classifier.items()}
    if state.bypass:
        emb = tape.constant(state.model.arrays["target_embeddings"])
    else:
        params = lift_params(tape, state.model.arrays)
        emb, _ = forward(tape, params, state.model, state.layout, state.source_feats)
    logits = batch_logits(tape, emb, clf, docs_rows)
    log_probs = ad.log_softmax(logits)
    loss = ad.nll_loss(log_probs, labels).value[0, 0]
    preds = np.argmax(log_probs.value, axis=1)
    acc, f1 = accuracy_and_macro_f1(labels, preds, state.num_classes)
    return acc, f1, float(loss)


def evaluate(state: TrainingState, corpus: LabeledCorpus) -> tuple[float, float, float]:
    """Accuracy, macro-F1 and mean loss of the current parameters on a split."""
    docs_rows, labels = _doc_rows(corpus, state.target_row_of)
    return _split_metrics(state, docs_rows, labels)


def contrastive_align(
    model: ModelParams,
    layout: GraphLayout,
    source_feats: dict[str, Array],
    margin: float,
    negatives: int,
    steps: int,
    lr: float,
    rng: np.random.Generator,
) -> list[float]:
    """Pull translation pairs together before task training.

    Minimises the mean hinge max(0, margin - cos(E(s), E(t)) + cos(E(s), E(n)))
    over all translation edges with `negatives` uniformly sampled
    corruption nodes per edge. Only the target embeddings and the
    per-language input transforms are updated.
    """
    n = layout.num_nodes
    if negatives >= n:
        raise ValueError(f"negatives ({negatives}) must be below the node count ({n})")
    if negatives < 1:
        raise ValueError("need at least one negative per edge")
    if not layout.pair_src or not any(len(s) for s in layout.pair_src):
        log.warning("no translation edges, skipping contrastive alignment")
        return []
    srcs = np.concatenate(layout.pair_src)
    dsts = np.concatenate(layout.pair_dst)
    m = len(srcs)
    trainable = {
        name: a
        for name, a in model.arrays.items()
        if name == "target_embeddings" or name.startswith("source_transform.")
    }
    opt = Adam(trainable, lr=lr)
    losses: list[float] = []
    src_rep = np.repeat(srcs, negatives)
    dst_rep = np.repeat(dsts, negatives)
    pos_rep = np.repeat(np.arange(m), negatives)
    for _ in range(steps):
        neg = rng.integers(0, n, size=m * negatives)
        bad = (neg == src_rep) | (neg == dst_rep)
        attempts = 0
        while bad.any():
            attempts += 1
            if attempts > 1000:
                raise RuntimeError("could not sample corruption nodes distinct from their edges")
            neg[bad] = rng.integers(0, n, size=int(bad.sum()))
            bad = (neg == src_rep) | (neg == dst_rep)
        tape = Tape()
        params = lift_params(tape, trainable)
        feats = cross_lingual_transform(tape, params, layout, source_feats)
        pos = ad.rowwise_cosine(ad.row_select(feats, srcs), ad.row_select(feats, dsts))
        neg_cos = ad.rowwise_cosine(ad.row_select(feats, src_rep), ad.row_select(feats, neg))
        gap = ad.add(ad.scale(ad.row_select(pos, pos_rep), -1.0), neg_cos)
        hinge = ad.leaky_relu(ad.add(tape.constant([[margin]]), gap), 0.0)
        loss = ad.scale(ad.sum_all(hinge), 1.0 / (m * negatives))
        grads = tape.backward(loss)
        opt.step({var.name: g for var, g in grads.items() if var.name})
        losses.append(float(loss.value[0, 0]))
    return losses


def train(
    settings: TrainSettings,
    graph: DictionaryGraph,
    tables: dict[str, EmbeddingTable],
    corpora: dict[str, LabeledCorpus],
    seed: int,
) -> TrainResult:
    """Full training run for one seed.

    Expects "train" and "valid" corpora; records per-epoch metrics for
    both, snapshots the best validation macro-F1 epoch and restores it
    before returning. A non-finite loss raises TrainingDiverged with the
    parameters still at their last finite values.
    """
    for required in ("train", "valid"):
        if required not in corpora:
            raise ValueError(f"missing {required!r} corpus")
    ss = np.random.SeedSequence(seed)
    emb_rng, net_rng, clf_rng, shuffle_rng, contrast_rng, dropout_rng = (
        np.random.default_rng(c) for c in ss.spawn(6)
    )
    settings_kind = settings.kind
    layout = build_layout(graph, settings.hyper.self_pair_participates)
    bypass = settings.bypass_gnn or settings_kind == "no-dhgnet"
    source_feats = {} if settings_kind == "no-dhgnet" else build_source_features(graph, tables)
    source_dims = {lang: feats.shape[1] for lang, feats in source_feats.items()}
    model = init_model_params(
        settings_kind, settings.hyper, layout, source_dims, emb_rng, net_rng
    )
    num_classes = max(c.num_classes for c in corpora.values())
    if num_classes < 2:
        raise ValueError("need at least two classes to train a classifier")
    classifier = init_classifier_params(
        settings.hyper.embed_dim, settings.classifier_hidden, num_classes, clf_rng
    )
    target_row_of = {int(node): i for i, node in enumerate(layout.target_ids)}
    state = TrainingState(
        settings=settings,
        seed=seed,
        model=model,
        classifier=classifier,
        layout=layout,
        source_feats=source_feats,
        target_row_of=target_row_of,
        num_classes=num_classes,
    )

    if settings.contrastive_steps > 0 and not bypass:
        contrastive_align(
            model,
            layout,
            source_feats,
            settings.contrastive_margin,
            settings.contrastive_negatives,
            settings.contrastive_steps,
            settings.contrastive_lr,
            contrast_rng,
        )

    split_rows = {name: _doc_rows(corpus, target_row_of) for name, corpus in corpora.items()}
    train_rows, train_labels = split_rows["train"]
    trainable = state.all_arrays()
    opt = Adam(trainable, lr=settings.learning_rate)
    records: list[dict] = []
    best_snapshot = {name: a.copy() for name, a in trainable.items()}

    for epoch in range(1, settings.epochs + 1):
        order = shuffle_rng.permutation(len(train_rows))
        for start in range(0, len(order), settings.batch_size):
            batch = order[start : start + settings.batch_size]
            try:
                tape = Tape()
                params = lift_params(tape, model.arrays)
                clf_vars = {name: tape.leaf(a, name) for name, a in classifier.items()}
                if bypass:
                    emb = params["target_embeddings"]
                else:
                    emb, _ = forward(tape, params, model, layout, source_feats)
                logits = batch_logits(
                    tape,
                    emb,
                    clf_vars,
                    [train_rows[i] for i in batch],
                    settings.dropout,
                    dropout_rng,
                )
                loss = ad.nll_loss(ad.log_softmax(logits), train_labels[batch])
                if not np.isfinite(loss.value[0, 0]):
                    raise FloatingPointError("non-finite training loss")
                grads = tape.backward(loss)
            except FloatingPointError as exc:
                raise TrainingDiverged(
                    f"epoch {epoch}: {exc}; parameters keep their last finite values"
                ) from exc
            opt.step({var.name: g for var, g in grads.items() if var.name})
        state.epoch = epoch
        for split in ("train", "valid"):
            rows, labels = split_rows[split]
            acc, f1, loss_val = _split_metrics(state, rows, labels)
            records.append(
                {"epoch": epoch, "split": split, "accuracy": acc, "macro_f1": f1, "loss": loss_val}
            )
            if split == "valid" and f1 > state.best_val_f1:
                state.best_val_f1 = f1
                state.best_epoch = epoch
                best_snapshot = {name: a.copy() for name, a in trainable.items()}

    for name, array in trainable.items():
        array[...] = best_snapshot[name]
    return TrainResult(state=state, records=records)


def build_training_inputs(
    graph: DictionaryGraph,
    tables: dict[str, EmbeddingTable],
    hyper: HyperParams,
) -> tuple[GraphLayout, dict[str, Array]]:
    """Layout plus frozen source features, shared by training and inspection."""
    layout = build_layout(graph, hyper.self_pair_participates)
    return layout, build_source_features(graph, tables)
