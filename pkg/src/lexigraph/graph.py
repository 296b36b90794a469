"""The multilingual dictionary graph and operations on it.

Nodes are (language, word) vocabulary entries; a directed edge (s, t)
exists under the ordered language pair (src_lang, dst_lang) whenever t
is listed as a translation of s in a dictionary for that pair. The same
surface form in two languages is two different nodes. Aggregation only
ever runs over pairs that involve the target language, so dictionaries
between two source languages are skipped at build time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil
from typing import Iterable, TextIO

import numpy as np

from .ingest import BilingualDictionary, LanguageId, Vocabulary

log = logging.getLogger(__name__)

PairKey = tuple[LanguageId, LanguageId]


@dataclass
class PairEdges:
    """Edges of one ordered language pair in compressed in-adjacency form.

    `src` and `dst` are parallel arrays sorted by (dst, src);
    `indptr[t]:indptr[t+1]` slices the in-neighbours of node t.
    """

    src: np.ndarray
    dst: np.ndarray
    indptr: np.ndarray

    def __len__(self) -> int:
        return len(self.src)

    def in_neighbors(self, node: int) -> np.ndarray:
        return self.src[self.indptr[node] : self.indptr[node + 1]]


@dataclass
class BilingualSubgraph:
    """Zero-copy view of a single language pair's edges."""

    pair: PairKey
    edges: PairEdges
    num_nodes: int

    def in_neighbors(self, node: int) -> np.ndarray:
        return self.edges.in_neighbors(node)


@dataclass
class DictionaryGraph:
    vocabulary: Vocabulary
    target: LanguageId
    pairs: tuple[PairKey, ...]
    edges: dict[PairKey, PairEdges]
    num_seed_words: int

    @property
    def num_nodes(self) -> int:
        return len(self.vocabulary)

    @property
    def num_edges(self) -> int:
        return sum(len(e) for e in self.edges.values())

    def nodes_of(self, language: LanguageId) -> np.ndarray:
        return np.array(self.vocabulary.ids_of_language(language), dtype=np.int64)

    def languages(self) -> list[LanguageId]:
        return self.vocabulary.languages()

    def subgraph(self, pair: PairKey) -> BilingualSubgraph:
        if pair not in self.edges:
            raise KeyError(f"no edges registered for language pair {pair}")
        return BilingualSubgraph(pair=pair, edges=self.edges[pair], num_nodes=self.num_nodes)


def _compress(src: list[int], dst: list[int], num_nodes: int) -> PairEdges:
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    order = np.lexsort((src_a, dst_a))
    src_a, dst_a = src_a[order], dst_a[order]
    counts = np.bincount(dst_a, minlength=num_nodes)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return PairEdges(src=src_a, dst=dst_a, indptr=indptr)


def build_dhg(
    corpus_vocabulary: Vocabulary,
    target: LanguageId,
    dictionaries: Iterable[BilingualDictionary],
    common_word_limit: int = 0,
    languages: set[LanguageId] | None = None,
) -> DictionaryGraph:
    """Assemble the dictionary graph around a target-language corpus.

    The target node set is the corpus vocabulary plus up to
    `common_word_limit` extra target words drawn from the dictionaries,
    most frequent first (ties broken lexicographically). Source nodes
    are the words one dictionary hop away from that set; source words
    with no surviving edge are dropped. Node ids extend the corpus
    vocabulary deterministically and do not depend on dictionary order.
    """
    dictionaries = list(dictionaries)
    for node in range(len(corpus_vocabulary)):
        lang = corpus_vocabulary.language_of(node)
        if lang != target:
            raise ValueError(f"corpus vocabulary contains non-target language {lang!r}")
    if languages is not None:
        if target not in languages:
            raise ValueError(f"target language {target!r} missing from language set {sorted(languages)}")
        for d in dictionaries:
            for lang in (d.src, d.dst):
                if lang not in languages:
                    raise ValueError(
                        f"dictionary language {lang!r} is not in the run's language set {sorted(languages)}"
                    )

    usable: list[BilingualDictionary] = []
    directions: dict[LanguageId, set[str]] = {}
    for d in dictionaries:
        if target not in (d.src, d.dst):
            log.warning("skipping %s->%s dictionary: neither side is the target language", d.src, d.dst)
            continue
        usable.append(d)
        other = d.dst if d.src == target else d.src
        directions.setdefault(other, set()).add("out" if d.src == target else "in")
    for lang, dirs in sorted(directions.items()):
        if len(dirs) < 2:
            log.warning("only one translation direction present for source language %s", lang)

    # Frequency of each candidate target word across dictionary entries.
    target_freq: dict[str, int] = {}
    for d in usable:
        if d.src == target:
            for head in d.entries:
                target_freq[head] = target_freq.get(head, 0) + 1
        else:
            for translations in d.entries.values():
                for word in translations:
                    target_freq[word] = target_freq.get(word, 0) + 1

    vocab = corpus_vocabulary.copy()
    num_seed = len(vocab)
    candidates = sorted(
        (w for w in target_freq if (target, w) not in vocab),
        key=lambda w: (-target_freq[w], w),
    )
    for word in candidates[: max(common_word_limit, 0)]:
        vocab.add(target, word)

    target_words = {vocab.word_of(i) for i in range(len(vocab))}

    # One dictionary hop from the target set, collected per source language.
    reachable: dict[LanguageId, set[str]] = {}
    for d in usable:
        if d.src == target:
            for head, translations in d.entries.items():
                if head in target_words:
                    reachable.setdefault(d.dst, set()).update(translations)
        else:
            for head, translations in d.entries.items():
                if any(t in target_words for t in translations):
                    reachable.setdefault(d.src, set()).add(head)
    for lang in sorted(reachable):
        for word in sorted(reachable[lang]):
            vocab.add(lang, word)

    pair_sets: dict[PairKey, set[tuple[int, int]]] = {}
    for d in usable:
        bucket = pair_sets.setdefault((d.src, d.dst), set())
        for head, translations in d.entries.items():
            s = vocab.get(d.src, head)
            if s is None:
                continue
            for t in translations:
                t_id = vocab.get(d.dst, t)
                if t_id is not None:
                    bucket.add((s, t_id))

    n = len(vocab)
    edges = {
        pair: _compress([s for s, _ in pair_set], [t for _, t in pair_set], n)
        for pair, pair_set in pair_sets.items()
    }
    return DictionaryGraph(
        vocabulary=vocab,
        target=target,
        pairs=tuple(sorted(edges)),
        edges=edges,
        num_seed_words=num_seed,
    )


def inject_noise(
    dictionaries: list[BilingualDictionary],
    rate: float,
    seed: int,
) -> list[BilingualDictionary]:
    """Add ceil(rate * pair_count) wrong translation pairs per dictionary.

    Head words are drawn uniformly from the dictionary's existing head
    words; wrong translations uniformly from the destination language's
    vocabulary across all supplied dictionaries, excluding the head's
    existing translations. Existing pairs are never removed or
    duplicated. The originals are left untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"noise rate must be in [0, 1], got {rate}")
    rng = np.random.default_rng(seed)

    lang_words: dict[LanguageId, set[str]] = {}
    for d in dictionaries:
        lang_words.setdefault(d.src, set()).update(d.entries)
        bucket = lang_words.setdefault(d.dst, set())
        for translations in d.entries.values():
            bucket.update(translations)
    pools = {lang: sorted(words) for lang, words in lang_words.items()}

    noisy: list[BilingualDictionary] = []
    for d in dictionaries:
        wanted = ceil(rate * d.pair_count)
        entries = {head: list(ts) for head, ts in d.entries.items()}
        heads = sorted(entries)
        pool = pools[d.dst]
        added = 0
        attempts = 0
        limit = max(1000, 200 * max(wanted, 1))
        while added < wanted:
            attempts += 1
            if attempts > limit:
                raise RuntimeError(
                    f"could not place {wanted} noise pairs in {d.src}->{d.dst} dictionary"
                )
            head = heads[rng.integers(len(heads))]
            translation = pool[rng.integers(len(pool))]
            if translation in entries[head]:
                continue
            entries[head].append(translation)
            added += 1
        noisy.append(
            BilingualDictionary(
                src=d.src,
                dst=d.dst,
                entries={head: tuple(ts) for head, ts in entries.items()},
            )
        )
    return noisy


@dataclass
class GraphStats:
    edge_counts: dict[str, int]
    node_counts: dict[str, int]
    coverage: float

    def as_dict(self) -> dict:
        return {
            "edge_counts": dict(self.edge_counts),
            "node_counts": dict(self.node_counts),
            "coverage": self.coverage,
        }


def graph_stats(graph: DictionaryGraph) -> GraphStats:
    """Edge counts per pair, node counts per language, and the fraction of
    corpus words with at least one dictionary in-neighbour."""
    edge_counts = {f"{src}->{dst}": len(graph.edges[(src, dst)]) for src, dst in graph.pairs}
    node_counts: dict[str, int] = {}
    for lang in graph.languages():
        node_counts[lang] = len(graph.vocabulary.ids_of_language(lang))
    covered = 0
    for node in range(graph.num_seed_words):
        if any(len(e.in_neighbors(node)) for e in graph.edges.values()):
            covered += 1
    coverage = covered / graph.num_seed_words if graph.num_seed_words else 0.0
    return GraphStats(edge_counts=edge_counts, node_counts=node_counts, coverage=coverage)


def write_nodes(graph: DictionaryGraph, stream: TextIO) -> None:
    for node in range(graph.num_nodes):
        lang, word = graph.vocabulary.entry(node)
        stream.write(f"{node}\t{lang}\t{word}\n")


def write_edges(graph: DictionaryGraph, stream: TextIO) -> None:
    vocab = graph.vocabulary
    for pair in graph.pairs:
        e = graph.edges[pair]
        for s, t in zip(e.src, e.dst):
            stream.write(
                f"{vocab.language_of(s)} {vocab.word_of(s)}\t{vocab.language_of(t)} {vocab.word_of(t)}\n"
            )
