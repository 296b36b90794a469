"""Synthetic multilingual classification tasks with a known concept space.

Every word in every language is a view of one of a small set of latent
concept vectors: the language's view is a fixed orthogonal rotation of
the concept plus isotropic noise. Documents sample words through
class-conditional concept mixtures, dictionaries link words that share a
concept, and an oracle record keeps the hidden concept assignments so a
ceiling accuracy can be computed independently of any model. The target
language never gets an embedding table; its vectors live only in the
oracle record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.linear_model import LogisticRegression

from .ingest import (
    BilingualDictionary,
    Document,
    EmbeddingTable,
    LabeledCorpus,
    Vocabulary,
    write_corpus_rows,
    write_dictionary,
    write_embeddings,
)

Array = np.ndarray


def haar_rotation(dim: int, seed: int) -> Array:
    """Orthogonal matrix drawn uniformly, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def block_affinity(num_classes: int, num_concepts: int, own_mass: float = 0.8) -> Array:
    """Each class leans on its own concept block, with mass spread elsewhere."""
    blocks = np.array_split(np.arange(num_concepts), num_classes)
    rows = np.zeros((num_classes, num_concepts))
    for c, block in enumerate(blocks):
        rest = num_concepts - len(block)
        if rest:
            rows[c, :] = (1.0 - own_mass) / rest
        rows[c, block] = own_mass / len(block)
    return rows


def _default_words() -> dict[str, int]:
    return {"xt": 120, "xa": 140, "xb": 140}


def _default_splits() -> dict[str, int]:
    return {"train": 500, "valid": 120, "test": 200}


@dataclass
class SynthConfig:
    """Generator settings; `affinity` rows must sum to one when given."""

    target_language: str = "xt"
    source_languages: tuple[str, ...] = ("xa", "xb")
    num_concepts: int = 12
    num_classes: int = 3
    concept_dim: int = 16
    words_per_language: dict[str, int] = field(default_factory=_default_words)
    rotation_seeds: dict[str, int] | None = None
    noise_sigma: float = 0.05
    docs_per_split: dict[str, int] = field(default_factory=_default_splits)
    doc_length: tuple[int, int] = (4, 9)
    affinity: list[list[float]] | None = None
    p_dict: float = 0.9
    p_err: float = 0.0

    def languages(self) -> tuple[str, ...]:
        return (self.target_language, *self.source_languages)

    def resolved_rotation_seeds(self) -> dict[str, int]:
        if self.rotation_seeds is not None:
            return dict(self.rotation_seeds)
        return {lang: i + 1 for i, lang in enumerate(self.languages())}

    def affinity_matrix(self) -> Array:
        if self.affinity is None:
            return block_affinity(self.num_classes, self.num_concepts)
        rows = np.asarray(self.affinity, dtype=np.float64)
        if rows.shape != (self.num_classes, self.num_concepts):
            raise ValueError(
                f"affinity must be {self.num_classes}x{self.num_concepts}, got {rows.shape}"
            )
        if np.any(rows < 0):
            raise ValueError("affinity entries must be non-negative")
        if not np.allclose(rows.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("affinity rows must sum to one")
        return rows

    def validate(self) -> None:
        langs = self.languages()
        if len(set(langs)) != len(langs):
            raise ValueError("languages must be distinct")
        if not self.source_languages:
            raise ValueError("need at least one source language")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.num_concepts < self.num_classes:
            raise ValueError("need at least one concept per class")
        if self.concept_dim < 1:
            raise ValueError("concept_dim must be positive")
        if set(self.words_per_language) != set(langs):
            raise ValueError("words_per_language must cover exactly the configured languages")
        for lang, count in self.words_per_language.items():
            if count < self.num_concepts:
                raise ValueError(
                    f"language {lang!r} has {count} words for {self.num_concepts} concepts"
                )
        seeds = self.resolved_rotation_seeds()
        if set(seeds) != set(langs):
            raise ValueError("rotation_seeds must cover exactly the configured languages")
        if not 0.0 <= self.p_dict <= 1.0:
            raise ValueError("p_dict must be in [0, 1]")
        if not 0.0 <= self.p_err < 1.0:
            raise ValueError("p_err must be in [0, 1)")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")
        lo, hi = self.doc_length
        if not 1 <= lo <= hi:
            raise ValueError("doc_length must satisfy 1 <= low <= high")
        if not self.docs_per_split:
            raise ValueError("need at least one split")
        for split, count in self.docs_per_split.items():
            if count < self.num_classes:
                raise ValueError(
                    f"split {split!r} needs at least {self.num_classes} documents to cover every class"
                )
        self.affinity_matrix()


@dataclass
class SynthTask:
    """One generated task: corpora, source tables, dictionaries, hidden truth."""

    config: SynthConfig
    seed: int
    vocabulary: Vocabulary
    corpora: dict[str, LabeledCorpus]
    tables: dict[str, EmbeddingTable]
    dictionaries: list[BilingualDictionary]
    oracle: dict


def generate(config: SynthConfig, seed: int) -> SynthTask:
    """Build a full task deterministically from (config, seed)."""
    config.validate()
    target = config.target_language
    langs = config.languages()
    affinity = config.affinity_matrix()
    rot_seeds = config.resolved_rotation_seeds()
    ss = np.random.SeedSequence(seed)
    concept_rng, noise_rng, doc_rng, dict_rng = (np.random.default_rng(c) for c in ss.spawn(4))

    concepts = concept_rng.normal(size=(config.num_concepts, config.concept_dim))
    rotations = {lang: haar_rotation(config.concept_dim, rot_seeds[lang]) for lang in langs}

    words: dict[str, list[str]] = {}
    concept_of: dict[str, Array] = {}
    vectors: dict[str, Array] = {}
    for lang in langs:
        n = config.words_per_language[lang]
        words[lang] = [f"{lang}w{i:03d}" for i in range(n)]
        concept_of[lang] = np.arange(n) % config.num_concepts
        clean = concepts[concept_of[lang]] @ rotations[lang].T
        noise = noise_rng.normal(size=clean.shape)
        vectors[lang] = clean + config.noise_sigma * noise

    vocabulary = Vocabulary()
    for word in words[target]:
        vocabulary.add(target, word)
    words_by_concept = [
        np.flatnonzero(concept_of[target] == k) for k in range(config.num_concepts)
    ]

    corpora: dict[str, LabeledCorpus] = {}
    lo, hi = config.doc_length
    for split in sorted(config.docs_per_split):
        docs = []
        for j in range(config.docs_per_split[split]):
            label = j % config.num_classes
            length = int(doc_rng.integers(lo, hi + 1))
            drawn = doc_rng.choice(config.num_concepts, size=length, p=affinity[label])
            tokens = tuple(
                int(words_by_concept[k][doc_rng.integers(len(words_by_concept[k]))])
                for k in drawn
            )
            docs.append(Document(tokens=tokens, label=label))
        corpora[split] = LabeledCorpus(
            documents=tuple(docs), num_classes=config.num_classes, split=split, skipped_empty=0
        )

    tables = {
        lang: EmbeddingTable(
            language=lang,
            dim=config.concept_dim,
            rows={w: vectors[lang][i].copy() for i, w in enumerate(words[lang])},
        )
        for lang in config.source_languages
    }

    dictionaries: list[BilingualDictionary] = []
    for lang in config.source_languages:
        to_source: dict[str, list[str]] = {}
        to_target: dict[str, list[str]] = {}
        linked: set[tuple[int, int]] = set()
        for k in range(config.num_concepts):
            t_ids = np.flatnonzero(concept_of[target] == k)
            s_ids = np.flatnonzero(concept_of[lang] == k)
            for ti in t_ids:
                for si in s_ids:
                    if dict_rng.random() < config.p_dict:
                        linked.add((int(ti), int(si)))
                        to_source.setdefault(words[target][ti], []).append(words[lang][si])
                        to_target.setdefault(words[lang][si], []).append(words[target][ti])
        if config.p_err > 0.0 and linked:
            wanted = round(len(linked) * config.p_err / (1.0 - config.p_err))
            n_t = len(words[target])
            n_s = len(words[lang])
            added = 0
            attempts = 0
            while added < wanted:
                attempts += 1
                if attempts > 1000 * max(wanted, 1):
                    raise RuntimeError("could not place the requested number of wrong pairs")
                ti = int(dict_rng.integers(n_t))
                si = int(dict_rng.integers(n_s))
                if concept_of[target][ti] == concept_of[lang][si] or (ti, si) in linked:
                    continue
                linked.add((ti, si))
                to_source.setdefault(words[target][ti], []).append(words[lang][si])
                to_target.setdefault(words[lang][si], []).append(words[target][ti])
                added += 1
        dictionaries.append(
            BilingualDictionary(
                src=target, dst=lang, entries={h: tuple(t) for h, t in to_source.items()}
            )
        )
        dictionaries.append(
            BilingualDictionary(
                src=lang, dst=target, entries={h: tuple(t) for h, t in to_target.items()}
            )
        )

    oracle = {
        "target_language": target,
        "num_classes": config.num_classes,
        "num_concepts": config.num_concepts,
        "concept_dim": config.concept_dim,
        "concepts": concepts.tolist(),
        "words": list(words[target]),
        "token_concepts": concept_of[target].tolist(),
        "target_vectors": vectors[target].tolist(),
    }
    return SynthTask(
        config=config,
        seed=seed,
        vocabulary=vocabulary,
        corpora=corpora,
        tables=tables,
        dictionaries=dictionaries,
        oracle=oracle,
    )


def oracle_bound(oracle: dict, corpora: dict[str, LabeledCorpus]) -> float:
    """Test accuracy of a linear probe on hidden concept-space document means.

    The probe never sees word surface forms or the learned model; it is
    the learnability ceiling used to sanity-check generated tasks.
    """
    for split in ("train", "test"):
        if split not in corpora:
            raise ValueError(f"oracle bound needs a {split!r} corpus")
    concepts = np.asarray(oracle["concepts"])
    token_concepts = np.asarray(oracle["token_concepts"])

    def design(corpus: LabeledCorpus) -> tuple[Array, Array]:
        X = np.stack(
            [concepts[token_concepts[list(d.tokens)]].mean(axis=0) for d in corpus.documents]
        )
        y = np.array([d.label for d in corpus.documents])
        return X, y

    X_train, y_train = design(corpora["train"])
    X_test, y_test = design(corpora["test"])
    probe = LogisticRegression(max_iter=2000)
    probe.fit(X_train, y_train)
    return float(probe.score(X_test, y_test))


def write_task(task: SynthTask, out_dir: str | Path) -> dict[str, str]:
    """Write the task in the exact file formats the parsers consume.

    Returns a manifest of role -> path; the oracle JSON is reference
    output only and is never fed back into the pipeline.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, str] = {}
    for lang, table in task.tables.items():
        p = out / f"{lang}.vec"
        with open(p, "w", encoding="utf-8") as fh:
            write_embeddings(table, fh)
        paths[f"embeddings.{lang}"] = str(p)
    for d in task.dictionaries:
        p = out / f"dict.{d.src}-{d.dst}.tsv"
        with open(p, "w", encoding="utf-8") as fh:
            write_dictionary(d, fh)
        paths[f"dictionary.{d.src}-{d.dst}"] = str(p)
    for split, corpus in task.corpora.items():
        p = out / f"{split}.tsv"
        rows = (
            (doc.label, " ".join(task.vocabulary.word_of(t) for t in doc.tokens))
            for doc in corpus.documents
        )
        with open(p, "w", encoding="utf-8") as fh:
            write_corpus_rows(rows, fh)
        paths[f"corpus.{split}"] = str(p)
    p = out / "oracle.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(task.oracle, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["oracle"] = str(p)
    return paths
