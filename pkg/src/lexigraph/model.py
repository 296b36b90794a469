"""Graph attention over the dictionary graph.

The network turns every node into a d-dimensional feature: target-language
nodes read their trainable embedding row, source-language nodes are mapped
through a per-language linear transform of their frozen pretrained vector.
Each layer normalises its input, runs K independent heads and adds the
concatenated head outputs back onto the layer input (a residual on the
un-normalised features). A head works in two stages:

* word level: for each ordered language pair, attention over a node's
  in-neighbours under that pair, with pair-specific projection W and
  score vector a; scores are LeakyReLU(a . [W h_s, W h_t]), softmaxed
  over the in-neighbourhood, and the weighted sum passes through GELU.
* language level: the per-pair results for a node compete in a second
  softmax together with a self feature W2 h_t. The self feature always
  provides the attention key; by default it also participates as a
  candidate, which keeps nodes without dictionary neighbours total
  (their output degenerates to GELU(W2 h_t)). Setting
  ``self_pair_participates`` to False restricts candidates to actual
  dictionary pairs, with the self feature used only where a node has no
  pair at all.

Three reference aggregators share the same scaffolding (input norms,
residual, output norm, the same per-language input transform) and differ
only in how neighbours are combined: plain symmetric-normalised
convolution ("gcn"), single-relation attention over all in-neighbours
("gat"), and per-pair mean aggregation with a self weight ("rgcn").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Var
from .graph import DictionaryGraph, PairKey
from .ingest import EmbeddingTable

Array = np.ndarray

MODEL_KINDS = ("dhgnet", "gcn", "gat", "rgcn", "no-dhgnet")


@dataclass(frozen=True)
class HyperParams:
    """Architecture settings. embed_dim must equal heads * head_dim."""

    embed_dim: int = 16
    heads: int = 2
    head_dim: int = 8
    num_layers: int = 2
    leaky_slope: float = 0.2
    layer_norm_eps: float = 1e-5
    self_pair_participates: bool = True

    def __post_init__(self) -> None:
        if self.embed_dim != self.heads * self.head_dim:
            raise ValueError(
                f"embed_dim ({self.embed_dim}) must equal heads * head_dim "
                f"({self.heads} * {self.head_dim})"
            )
        if self.num_layers < 1:
            raise ValueError("num_layers must be at least 1")
        if not 0 < self.leaky_slope < 1:
            raise ValueError("leaky_slope must be in (0, 1)")
        if self.layer_norm_eps <= 0:
            raise ValueError("layer_norm_eps must be positive")


@dataclass
class GraphLayout:
    """Static index arrays derived once from a graph for fast forwards."""

    num_nodes: int
    target: str
    source_langs: tuple[str, ...]
    target_ids: Array
    lang_ids: dict[str, Array]
    pos_of_node: Array
    pair_keys: tuple[PairKey, ...]
    pair_src: list[Array]
    pair_dst: list[Array]
    pair_active: list[Array]
    self_nodes: Array
    part_nodes: Array
    part_pair: Array
    union_src: Array
    union_dst: Array
    gcn_src: Array
    gcn_dst: Array
    gcn_coef: Array
    rgcn_coef: list[Array]

    @property
    def num_targets(self) -> int:
        return len(self.target_ids)


def build_layout(graph: DictionaryGraph, self_pair_participates: bool = True) -> GraphLayout:
    n = graph.num_nodes
    target = graph.target
    source_langs = tuple(sorted(l for l in graph.languages() if l != target))
    lang_ids = {lang: graph.nodes_of(lang) for lang in (target, *source_langs)}
    pos_of_node = np.empty(n, dtype=np.int64)
    offset = 0
    for lang in (target, *source_langs):
        ids = lang_ids[lang]
        pos_of_node[ids] = offset + np.arange(len(ids))
        offset += len(ids)
    if offset != n:
        raise ValueError("graph nodes are not fully partitioned by language")

    pair_keys = graph.pairs
    pair_src = [graph.edges[p].src for p in pair_keys]
    pair_dst = [graph.edges[p].dst for p in pair_keys]
    pair_active = [np.unique(d) for d in pair_dst]

    active_count = np.zeros(n, dtype=np.int64)
    for act in pair_active:
        active_count[act] += 1
    if self_pair_participates:
        self_nodes = np.arange(n, dtype=np.int64)
    else:
        self_nodes = np.flatnonzero(active_count == 0).astype(np.int64)
    part_nodes = np.concatenate([*pair_active, self_nodes]) if pair_active else self_nodes.copy()
    part_pair = np.concatenate(
        [np.full(len(a), i, dtype=np.int64) for i, a in enumerate(pair_active)]
        + [np.full(len(self_nodes), -1, dtype=np.int64)]
    )
    covered = np.zeros(n, dtype=bool)
    covered[part_nodes] = True
    if not covered.all():
        raise AssertionError("every node needs at least one language-level participant")

    if pair_src:
        union_src = np.concatenate(pair_src)
        union_dst = np.concatenate(pair_dst)
        order = np.lexsort((union_src, union_dst))
        union_src, union_dst = union_src[order], union_dst[order]
    else:
        union_src = np.zeros(0, dtype=np.int64)
        union_dst = np.zeros(0, dtype=np.int64)

    in_deg = np.bincount(union_dst, minlength=n)
    deg_tilde = in_deg + 1.0
    loops = np.arange(n, dtype=np.int64)
    gcn_src = np.concatenate([union_src, loops])
    gcn_dst = np.concatenate([union_dst, loops])
    gcn_coef = (1.0 / np.sqrt(deg_tilde[gcn_src] * deg_tilde[gcn_dst]))[:, None]

    safe_deg = np.maximum(in_deg, 1)
    rgcn_coef = [(1.0 / safe_deg[d])[:, None] for d in pair_dst]

    return GraphLayout(
        num_nodes=n,
        target=target,
        source_langs=source_langs,
        target_ids=lang_ids[target],
        lang_ids=lang_ids,
        pos_of_node=pos_of_node,
        pair_keys=pair_keys,
        pair_src=pair_src,
        pair_dst=pair_dst,
        pair_active=pair_active,
        self_nodes=self_nodes,
        part_nodes=part_nodes,
        part_pair=part_pair,
        union_src=union_src,
        union_dst=union_dst,
        gcn_src=gcn_src,
        gcn_dst=gcn_dst,
        gcn_coef=gcn_coef,
        rgcn_coef=rgcn_coef,
    )


def build_source_features(
    graph: DictionaryGraph, tables: dict[str, EmbeddingTable]
) -> dict[str, Array]:
    """Frozen input matrices per source language, aligned with node order.

    Every source node must have a row in its language's table; a missing
    word is a build error rather than a silent zero vector.
    """
    feats: dict[str, Array] = {}
    for lang in graph.languages():
        if lang == graph.target:
            continue
        table = tables.get(lang)
        if table is None:
            raise ValueError(f"no embedding table supplied for source language {lang!r}")
        ids = graph.nodes_of(lang)
        rows = np.empty((len(ids), table.dim))
        for i, node in enumerate(ids):
            word = graph.vocabulary.word_of(node)
            vec = table.rows.get(word)
            if vec is None:
                raise ValueError(f"source word {word!r} ({lang}) has no embedding row")
            rows[i] = vec
        feats[lang] = rows
    return feats


@dataclass
class ModelParams:
    """Named parameter tensors plus the metadata to interpret them."""

    kind: str
    hyper: HyperParams
    pair_keys: tuple[PairKey, ...]
    source_langs: tuple[str, ...]
    arrays: dict[str, Array]

    def copy_arrays(self) -> dict[str, Array]:
        return {name: a.copy() for name, a in self.arrays.items()}


def _glorot(rng: np.random.Generator, out_dim: int, in_dim: int) -> Array:
    limit = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


def init_model_params(
    kind: str,
    hyper: HyperParams,
    layout: GraphLayout,
    source_dims: dict[str, int],
    embedding_rng: np.random.Generator,
    network_rng: np.random.Generator,
) -> ModelParams:
    """Create freshly initialised parameters for one model kind.

    Weight matrices are Glorot-uniform; target embeddings are drawn from
    N(0, 1/embed_dim); norm gains start at one, biases at zero. The
    embedding table and the network weights consume independent
    generators so that ablations share their embedding initialisation.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")
    d = hyper.embed_dim
    arrays: dict[str, Array] = {}
    arrays["target_embeddings"] = embedding_rng.normal(
        0.0, 1.0 / math.sqrt(d), size=(layout.num_targets, d)
    )
    if kind == "no-dhgnet":
        return ModelParams(kind, hyper, (), (), arrays)

    for lang in layout.source_langs:
        if lang not in source_dims:
            raise ValueError(f"missing input dimension for source language {lang!r}")
        arrays[f"source_transform.{lang}"] = _glorot(network_rng, d, source_dims[lang])

    dk = hyper.head_dim
    for l in range(hyper.num_layers):
        arrays[f"layer{l}.input_norm.gain"] = np.ones((1, d))
        arrays[f"layer{l}.input_norm.bias"] = np.zeros((1, d))
        if kind == "dhgnet":
            for k in range(hyper.heads):
                for p in range(len(layout.pair_keys)):
                    arrays[f"layer{l}.head{k}.pair{p}.W"] = _glorot(network_rng, dk, d)
                    arrays[f"layer{l}.head{k}.pair{p}.a"] = _glorot(network_rng, 2 * dk, 1)
                arrays[f"layer{l}.head{k}.combine.W1"] = _glorot(network_rng, dk, dk)
                arrays[f"layer{l}.head{k}.combine.W2"] = _glorot(network_rng, dk, d)
                arrays[f"layer{l}.head{k}.combine.a1"] = _glorot(network_rng, 2 * dk, 1)
        elif kind == "gat":
            for k in range(hyper.heads):
                arrays[f"layer{l}.head{k}.W"] = _glorot(network_rng, dk, d)
                arrays[f"layer{l}.head{k}.a"] = _glorot(network_rng, 2 * dk, 1)
        elif kind == "gcn":
            arrays[f"layer{l}.W"] = _glorot(network_rng, d, d)
        elif kind == "rgcn":
            arrays[f"layer{l}.self.W"] = _glorot(network_rng, d, d)
            for p in range(len(layout.pair_keys)):
                arrays[f"layer{l}.pair{p}.W"] = _glorot(network_rng, d, d)
    arrays["output_norm.gain"] = np.ones((1, d))
    arrays["output_norm.bias"] = np.zeros((1, d))
    return ModelParams(kind, hyper, layout.pair_keys, layout.source_langs, arrays)


def lift_params(tape: Tape, arrays: dict[str, Array]) -> dict[str, Var]:
    return {name: tape.leaf(a, name) for name, a in arrays.items()}


def cross_lingual_transform(
    tape: Tape,
    params: dict[str, Var],
    layout: GraphLayout,
    source_feats: dict[str, Array],
) -> Var:
    """Layer-0 features for every node, in node-id order.

    Target nodes read their trainable embedding row unchanged; source
    nodes are projected into the shared space by their language's
    transform applied to the frozen pretrained vector.
    """
    blocks = [params["target_embeddings"]]
    for lang in layout.source_langs:
        frozen = tape.constant(source_feats[lang], f"input.{lang}")
        blocks.append(ad.matmul(frozen, ad.transpose(params[f"source_transform.{lang}"])))
    stacked = ad.concat_rows(*blocks) if len(blocks) > 1 else blocks[0]
    return ad.row_select(stacked, layout.pos_of_node)


def word_level_aggregate(
    tape: Tape,
    feats: Var,
    W: Var,
    a: Var,
    src: Array,
    dst: Array,
    num_nodes: int,
    slope: float = 0.2,
) -> tuple[Var, Var]:
    """Attention over in-neighbours along one language pair.

    Returns the dense (num_nodes, head_dim) output, zero for nodes with
    no in-edge under this pair, plus the per-edge attention weights.
    """
    dk = W.shape[0]
    h = ad.matmul(feats, ad.transpose(W))
    h_src = ad.row_select(h, src)
    h_dst = ad.row_select(h, dst)
    a_src = ad.row_select(a, np.arange(dk))
    a_dst = ad.row_select(a, np.arange(dk, 2 * dk))
    score = ad.leaky_relu(ad.add(ad.matmul(h_src, a_src), ad.matmul(h_dst, a_dst)), slope)
    alpha = ad.masked_segment_softmax(score, dst, num_nodes)
    out = ad.gelu(ad.segment_weighted_sum(h_src, alpha, dst, num_nodes))
    return out, alpha


def language_level_aggregate(
    tape: Tape,
    pair_feats: list[Var],
    feats: Var,
    W1: Var,
    W2: Var,
    a1: Var,
    layout: GraphLayout,
    slope: float = 0.2,
) -> tuple[Var, Var]:
    """Second-stage attention combining per-pair results with a self feature.

    The candidate for pair r is W1 applied to the word-level output; the
    self candidate is W2 applied to the node's current feature, which
    also serves as the attention key for every candidate of that node.
    """
    dk = W2.shape[0]
    o_self = ad.matmul(feats, ad.transpose(W2))
    blocks = [
        ad.row_select(ad.matmul(pair_feats[p], ad.transpose(W1)), layout.pair_active[p])
        for p in range(len(layout.pair_keys))
    ]
    blocks.append(ad.row_select(o_self, layout.self_nodes))
    candidates = ad.concat_rows(*blocks)
    keys = ad.row_select(o_self, layout.part_nodes)
    a_own = ad.row_select(a1, np.arange(dk))
    a_key = ad.row_select(a1, np.arange(dk, 2 * dk))
    score = ad.leaky_relu(ad.add(ad.matmul(candidates, a_own), ad.matmul(keys, a_key)), slope)
    alpha = ad.masked_segment_softmax(score, layout.part_nodes, layout.num_nodes)
    out = ad.gelu(ad.segment_weighted_sum(candidates, alpha, layout.part_nodes, layout.num_nodes))
    return out, alpha


@dataclass
class AttentionTrace:
    """Attention weights captured during one forward pass.

    word[(layer, head, pair_index)] holds per-edge weights aligned with
    the layout's edge arrays; language[(layer, head)] holds per-candidate
    weights aligned with (part_nodes, part_pair).
    """

    word: dict[tuple[int, int, int], Array] = field(default_factory=dict)
    language: dict[tuple[int, int], Array] = field(default_factory=dict)


def _affine_norm(tape: Tape, x: Var, params: dict[str, Var], prefix: str, eps: float) -> Var:
    normed = ad.layer_norm(x, eps)
    return ad.add(ad.mul(normed, params[f"{prefix}.gain"]), params[f"{prefix}.bias"])


def forward(
    tape: Tape,
    params: dict[str, Var],
    model: ModelParams,
    layout: GraphLayout,
    source_feats: dict[str, Array],
    collect_attention: bool = False,
) -> tuple[Var, AttentionTrace | None]:
    """Run the full network and return target-node features (and weights).

    Output rows follow ``layout.target_ids`` order. All model kinds share
    the input transform, per-layer input norm, residual and output norm;
    only the neighbourhood aggregation differs.
    """
    hp = model.hyper
    kind = model.kind
    if kind == "no-dhgnet":
        raise ValueError("the bypass model has no graph forward; read the embedding table directly")
    trace = AttentionTrace() if collect_attention else None
    n = layout.num_nodes
    x = cross_lingual_transform(tape, params, layout, source_feats)
    for l in range(hp.num_layers):
        z = _affine_norm(tape, x, params, f"layer{l}.input_norm", hp.layer_norm_eps)
        if kind == "dhgnet":
            head_outs = []
            for k in range(hp.heads):
                pair_feats = []
                for p in range(len(layout.pair_keys)):
                    feat, alpha = word_level_aggregate(
                        tape,
                        z,
                        params[f"layer{l}.head{k}.pair{p}.W"],
                        params[f"layer{l}.head{k}.pair{p}.a"],
                        layout.pair_src[p],
                        layout.pair_dst[p],
                        n,
                        hp.leaky_slope,
                    )
                    pair_feats.append(feat)
                    if trace is not None:
                        trace.word[(l, k, p)] = alpha.value[:, 0]
                out, lang_alpha = language_level_aggregate(
                    tape,
                    pair_feats,
                    z,
                    params[f"layer{l}.head{k}.combine.W1"],
                    params[f"layer{l}.head{k}.combine.W2"],
                    params[f"layer{l}.head{k}.combine.a1"],
                    layout,
                    hp.leaky_slope,
                )
                head_outs.append(out)
                if trace is not None:
                    trace.language[(l, k)] = lang_alpha.value[:, 0]
            agg = ad.concat_cols(*head_outs)
        elif kind == "gat":
            head_outs = []
            for k in range(hp.heads):
                out, alpha = word_level_aggregate(
                    tape,
                    z,
                    params[f"layer{l}.head{k}.W"],
                    params[f"layer{l}.head{k}.a"],
                    layout.union_src,
                    layout.union_dst,
                    n,
                    hp.leaky_slope,
                )
                head_outs.append(out)
                if trace is not None:
                    trace.word[(l, k, -1)] = alpha.value[:, 0]
            agg = ad.concat_cols(*head_outs)
        elif kind == "gcn":
            h = ad.matmul(z, ad.transpose(params[f"layer{l}.W"]))
            vals = ad.row_select(h, layout.gcn_src)
            coef = tape.constant(layout.gcn_coef)
            agg = ad.gelu(ad.segment_weighted_sum(vals, coef, layout.gcn_dst, n))
        elif kind == "rgcn":
            total = ad.matmul(z, ad.transpose(params[f"layer{l}.self.W"]))
            for p in range(len(layout.pair_keys)):
                h = ad.matmul(z, ad.transpose(params[f"layer{l}.pair{p}.W"]))
                vals = ad.row_select(h, layout.pair_src[p])
                coef = tape.constant(layout.rgcn_coef[p])
                total = ad.add(total, ad.segment_weighted_sum(vals, coef, layout.pair_dst[p], n))
            agg = ad.gelu(total)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
        x = ad.add(agg, x)
    x = _affine_norm(tape, x, params, "output_norm", hp.layer_norm_eps)
    return ad.row_select(x, layout.target_ids), trace


def attention_report(
    model: ModelParams,
    layout: GraphLayout,
    source_feats: dict[str, Array],
    graph: DictionaryGraph,
    top_k: int = 5,
) -> list[dict]:
    """Head-averaged last-layer attention, summarised per target word.

    Emits one ``neighbor`` record per retained in-neighbour (top_k per
    word and pair, strongest first) and one ``pair`` record per
    language-level candidate, ``self`` included when it participates.
    """
    if model.kind not in ("dhgnet",):
        raise ValueError(f"attention reports need word and pair weights, not available for {model.kind!r}")
    tape = Tape()
    params = lift_params(tape, model.arrays)
    _, trace = forward(tape, params, model, layout, source_feats, collect_attention=True)
    assert trace is not None
    hp = model.hyper
    last = hp.num_layers - 1
    vocab = graph.vocabulary
    records: list[dict] = []

    target_set = set(int(i) for i in layout.target_ids)
    for p, (src_lang, dst_lang) in enumerate(layout.pair_keys):
        if dst_lang != layout.target:
            continue
        pair_name = f"{src_lang}->{dst_lang}"
        mean_alpha = np.mean([trace.word[(last, k, p)] for k in range(hp.heads)], axis=0)
        by_word: dict[int, list[tuple[float, int]]] = {}
        for s, t, a in zip(layout.pair_src[p], layout.pair_dst[p], mean_alpha):
            by_word.setdefault(int(t), []).append((float(a), int(s)))
        for t in sorted(by_word):
            ranked = sorted(by_word[t], key=lambda x: (-x[0], x[1]))[:top_k]
            for alpha, s in ranked:
                records.append(
                    {
                        "kind": "neighbor",
                        "word": vocab.word_of(t),
                        "pair": pair_name,
                        "neighbor": vocab.word_of(s),
                        "alpha": alpha,
                    }
                )

    lang_alpha = np.mean([trace.language[(last, k)] for k in range(hp.heads)], axis=0)
    by_node: dict[int, list[tuple[str, float]]] = {}
    for node, pair_idx, a in zip(layout.part_nodes, layout.part_pair, lang_alpha):
        node = int(node)
        if node not in target_set:
            continue
        if pair_idx < 0:
            name = "self"
        else:
            sl, dl = layout.pair_keys[pair_idx]
            name = f"{sl}->{dl}"
        by_node.setdefault(node, []).append((name, float(a)))
    for node in sorted(by_node):
        for name, alpha in sorted(by_node[node], key=lambda x: (-x[1], x[0])):
            records.append(
                {
                    "kind": "pair",
                    "word": vocab.word_of(node),
                    "pair": name,
                    "alpha": alpha,
                }
            )
    return records
