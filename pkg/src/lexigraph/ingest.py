"""Parsers and writers for embeddings, bilingual dictionaries and corpora.

All three formats are line-oriented UTF-8 text:

* embedding tables: an optional ``count dim`` header, then one
  ``word v1 v2 ... vd`` record per line, whitespace separated;
* dictionaries: ``headword<TAB>translation1,translation2,...``;
* labelled corpora: ``label<TAB>document text``, integer labels.

Parsers take any iterable of lines (an open file, an io.StringIO, a
list). Malformed rows raise ParseError with the 1-based line number.
Writers emit a canonical form whose bytes are stable under
parse -> write -> parse -> write.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

log = logging.getLogger(__name__)

LanguageId = str

_INT_RE = re.compile(r"^[+-]?\d+$")


class ParseError(ValueError):
    """Malformed input, carrying the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(eq=False)
class EmbeddingTable:
    """Frozen word vectors for one language."""

    language: LanguageId
    dim: int
    rows: dict[str, np.ndarray]
    duplicates_dropped: int = 0

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class BilingualDictionary:
    """Word translations for one ordered language pair."""

    src: LanguageId
    dst: LanguageId
    entries: dict[str, tuple[str, ...]]
    duplicate_translations: int = 0
    empty_entries_dropped: int = 0

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError(f"dictionary languages must differ, both are {self.src!r}")

    @property
    def pair_count(self) -> int:
        return sum(len(t) for t in self.entries.values())

    def translations(self, word: str) -> tuple[str, ...]:
        return self.entries.get(word, ())


@dataclass(frozen=True)
class Document:
    tokens: tuple[int, ...]
    label: int


@dataclass
class LabeledCorpus:
    documents: list[Document]
    num_classes: int
    split: str
    skipped_empty: int = 0

    def __len__(self) -> int:
        return len(self.documents)


class Vocabulary:
    """Dense integer ids for (language, word) pairs.

    The same surface form in two languages is two distinct entries. Ids
    are assigned in insertion order and never reused.
    """

    def __init__(self) -> None:
        self._entries: list[tuple[LanguageId, str]] = []
        self._index: dict[tuple[LanguageId, str], int] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, language: LanguageId, word: str) -> int:
        key = (language, word)
        existing = self._index.get(key)
        if existing is not None:
            return existing
        node = len(self._entries)
        self._entries.append(key)
        self._index[key] = node
        return node

    def get(self, language: LanguageId, word: str) -> int | None:
        return self._index.get((language, word))

    def __contains__(self, key: tuple[LanguageId, str]) -> bool:
        return key in self._index

    def entry(self, node: int) -> tuple[LanguageId, str]:
        return self._entries[node]

    def language_of(self, node: int) -> LanguageId:
        return self._entries[node][0]

    def word_of(self, node: int) -> str:
        return self._entries[node][1]

    def ids_of_language(self, language: LanguageId) -> list[int]:
        return [i for i, (lang, _) in enumerate(self._entries) if lang == language]

    def languages(self) -> list[LanguageId]:
        seen: dict[LanguageId, None] = {}
        for lang, _ in self._entries:
            seen.setdefault(lang)
        return list(seen)

    def copy(self) -> "Vocabulary":
        out = Vocabulary()
        out._entries = list(self._entries)
        out._index = dict(self._index)
        return out


def tokenize(text: str) -> list[str]:
    """Whitespace tokenisation with lowercasing of cased scripts."""
    return [tok.lower() for tok in text.split()]


def _numbered(lines: Iterable[str]):
    for number, raw in enumerate(lines, start=1):
        stripped = raw.rstrip("\n")
        if stripped.strip():
            yield number, stripped


def parse_embeddings(lines: Iterable[str], language: LanguageId) -> EmbeddingTable:
    """Parse a word-vector table, tolerating a ``count dim`` header line.

    The first data row fixes the dimensionality when no header is
    present. Width mismatches and non-finite values fail with the line
    number; duplicate words keep the first row and are counted.
    """
    rows: dict[str, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    declared: tuple[int, int] | None = None
    first = True
    for number, line in _numbered(lines):
        parts = line.split()
        if first:
            first = False
            if len(parts) == 2 and _INT_RE.match(parts[0]) and _INT_RE.match(parts[1]):
                declared = (int(parts[0]), int(parts[1]))
                dim = declared[1]
                if dim < 1:
                    raise ParseError(f"declared dimension must be positive, got {dim}", number)
                continue
        if len(parts) < 2:
            raise ParseError("expected a word followed by at least one value", number)
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise ParseError(f"expected {dim} values, found {len(values)}", number)
        try:
            vec = np.array([float(v) for v in values])
        except ValueError as exc:
            raise ParseError(str(exc), number) from None
        if not np.isfinite(vec).all():
            raise ParseError("non-finite embedding value", number)
        if word in rows:
            duplicates += 1
            continue
        rows[word] = vec
    if not rows:
        raise ParseError("embedding input contains no vectors")
    if declared is not None and declared[0] != len(rows) + duplicates:
        log.warning(
            "embedding header declared %d rows, found %d", declared[0], len(rows) + duplicates
        )
    if duplicates:
        log.warning("dropped %d duplicate embedding rows for %s", duplicates, language)
    assert dim is not None
    return EmbeddingTable(language=language, dim=dim, rows=rows, duplicates_dropped=duplicates)


def parse_dictionary(lines: Iterable[str], src: LanguageId, dst: LanguageId) -> BilingualDictionary:
    """Parse tab-separated dictionary rows.

    Each comma-separated field is one translation, kept verbatim after
    trimming surrounding whitespace. Duplicate translations of a head
    word are dropped (first occurrence wins) and counted; rows whose
    translation list ends up empty are dropped with a warning count.
    Repeated head words merge their translation lists.
    """
    entries: dict[str, list[str]] = {}
    duplicate_translations = 0
    empty_dropped = 0
    for number, line in _numbered(lines):
        if "\t" not in line:
            raise ParseError("expected 'headword<TAB>translations'", number)
        head, rest = line.split("\t", 1)
        head = head.strip()
        if not head:
            raise ParseError("empty head word", number)
        fields = [f.strip() for f in rest.split(",")]
        fields = [f for f in fields if f]
        if not fields:
            empty_dropped += 1
            continue
        bucket = entries.setdefault(head, [])
        for f in fields:
            if f in bucket:
                duplicate_translations += 1
            else:
                bucket.append(f)
    if empty_dropped:
        log.warning("dropped %d dictionary rows with no translations (%s->%s)", empty_dropped, src, dst)
    return BilingualDictionary(
        src=src,
        dst=dst,
        entries={head: tuple(ts) for head, ts in entries.items()},
        duplicate_translations=duplicate_translations,
        empty_entries_dropped=empty_dropped,
    )


def parse_corpus(
    lines: Iterable[str],
    vocabulary: Vocabulary,
    language: LanguageId,
    split: str,
) -> LabeledCorpus:
    """Parse labelled documents, growing `vocabulary` with unseen tokens.

    Labels are non-negative integers; the class count is the largest
    label seen plus one. Documents that tokenise to nothing are skipped
    with a warning count.
    """
    documents: list[Document] = []
    max_label = -1
    skipped = 0
    for number, line in _numbered(lines):
        if "\t" not in line:
            raise ParseError("expected 'label<TAB>text'", number)
        label_text, text = line.split("\t", 1)
        label_text = label_text.strip()
        if not _INT_RE.match(label_text):
            raise ParseError(f"label must be an integer, got {label_text!r}", number)
        label = int(label_text)
        if label < 0:
            raise ParseError(f"label must be non-negative, got {label}", number)
        tokens = tokenize(text)
        if not tokens:
            skipped += 1
            continue
        ids = tuple(vocabulary.add(language, tok) for tok in tokens)
        documents.append(Document(tokens=ids, label=label))
        max_label = max(max_label, label)
    if skipped:
        log.warning("skipped %d empty documents in %s split", skipped, split)
    return LabeledCorpus(
        documents=documents,
        num_classes=max_label + 1,
        split=split,
        skipped_empty=skipped,
    )


def write_embeddings(table: EmbeddingTable, stream: TextIO) -> None:
    stream.write(f"{len(table.rows)} {table.dim}\n")
    for word, vec in table.rows.items():
        stream.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def write_dictionary(dictionary: BilingualDictionary, stream: TextIO) -> None:
    for head, translations in dictionary.entries.items():
        stream.write(f"{head}\t{','.join(translations)}\n")


def write_corpus_rows(rows: Iterable[tuple[int, str]], stream: TextIO) -> None:
    for label, text in rows:
        stream.write(f"{label}\t{text}\n")


def load_embeddings(path: str | Path, language: LanguageId) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        return parse_embeddings(fh, language)


def load_dictionary(path: str | Path, src: LanguageId, dst: LanguageId) -> BilingualDictionary:
    with open(path, encoding="utf-8") as fh:
        return parse_dictionary(fh, src, dst)


def load_corpus(
    path: str | Path, vocabulary: Vocabulary, language: LanguageId, split: str
) -> LabeledCorpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, vocabulary, language, split)
