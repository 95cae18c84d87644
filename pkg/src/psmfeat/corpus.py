"""Corpus ingestion, tokenization, vocabulary and binary document-term matrices."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FAKE, REAL = 1, 0

DEFAULT_MIN_DF = 5
DEFAULT_MAX_DF_RATIO = 0.95
DEFAULT_MAX_FEATURES = 2000

_SPLIT = re.compile(r"[\W_]+")


class CorpusError(ValueError):
    """Raised for malformed corpus input or impossible corpus operations."""


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    content: str
    label: int
    source: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise CorpusError(f"document {self.id!r}: label must be 0 or 1, got {self.label!r}")

    @property
    def text(self) -> str:
        if self.content:
            return f"{self.title} {self.content}"
        return self.title


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=np.int8)

    def label_counts(self) -> dict[int, int]:
        counts = Counter(d.label for d in self.documents)
        return {REAL: counts.get(REAL, 0), FAKE: counts.get(FAKE, 0)}


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop short and purely numeric tokens."""
    return [
        tok
        for tok in _SPLIT.split(text.lower())
        if len(tok) >= 2 and not tok.isnumeric()
    ]


def load_stopwords() -> frozenset[str]:
    raw = resources.files("psmfeat").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#")
    )


STOPWORDS = load_stopwords()


# ---------------------------------------------------------------- ingestion


def parse_label(value) -> int:
    if isinstance(value, bool):
        raise CorpusError(f"unknown label value {value!r}")
    if isinstance(value, str):
        key = value.strip().lower()
        if key == "fake":
            return FAKE
        if key == "real":
            return REAL
    elif isinstance(value, int) and value in (0, 1):
        return int(value)
    raise CorpusError(f"unknown label value {value!r}")


def ingest_jsonl(path: str | Path) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"no such file: {path}")
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("id", "title", "label") if k not in rec]
            if missing:
                raise CorpusError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
            try:
                label = parse_label(rec["label"])
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            doc_id = str(rec["id"])
            if doc_id in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate id {doc_id!r} (first seen on line {seen[doc_id]})"
                )
            seen[doc_id] = lineno
            docs.append(
                Document(
                    id=doc_id,
                    title=str(rec.get("title") or ""),
                    content=str(rec.get("content") or ""),
                    label=label,
                    source=str(rec.get("source") or ""),
                )
            )
    sources = {d.source for d in docs}
    return Corpus(tuple(docs), source=sources.pop() if len(sources) == 1 else "mixed")


def ingest_fakenewsnet_csv(path: str | Path, label: int, source: str) -> Corpus:
    """Read one FakeNewsNet CSV (id, news_url, title, tweet_ids); titles become the text."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"no such file: {path}")
    label = parse_label(label)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("id", "title"):
            if col not in header:
                raise CorpusError(f"{path}: missing required column {col!r}")
        docs = [
            Document(id=row["id"], title=row["title"] or "", content="", label=label, source=source)
            for row in reader
            if row.get("id")
        ]
    return Corpus(tuple(docs), source=source)


def concat(corpora: Sequence[Corpus], source: str | None = None) -> Corpus:
    docs = tuple(d for c in corpora for d in c.documents)
    if source is None:
        tags = {c.source for c in corpora}
        source = tags.pop() if len(tags) == 1 else "mixed"
    return Corpus(docs, source=source)


def write_jsonl(corpus: Corpus, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.documents:
            rec = {
                "id": d.id,
                "title": d.title,
                "content": d.content,
                "label": "fake" if d.label == FAKE else "real",
                "source": d.source,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------- balancing


def balance(corpus: Corpus, seed: int) -> Corpus:
    """Downsample the majority label to the minority count, keeping original order."""
    labels = corpus.labels
    pos = np.flatnonzero(labels == FAKE)
    neg = np.flatnonzero(labels == REAL)
    if len(pos) == 0 or len(neg) == 0:
        raise CorpusError("cannot balance a corpus with an empty label class")
    if len(pos) == len(neg):
        return corpus
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority, size=len(minority), replace=False)
    keep = np.sort(np.concatenate([minority, kept]))
    return Corpus(tuple(corpus.documents[i] for i in keep), source=corpus.source)


# ---------------------------------------------------------------- vocabulary


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "doc_freq", tuple(int(x) for x in self.doc_freq))
        if len(self.terms) != len(self.doc_freq):
            raise CorpusError("terms and doc_freq lengths differ")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def restrict(self, feature_ids: Iterable[int]) -> "Vocabulary":
        ids = sorted(set(int(i) for i in feature_ids))
        return Vocabulary(tuple(self.terms[i] for i in ids), tuple(self.doc_freq[i] for i in ids))


def _doc_tokens(doc: Document) -> set[str]:
    return set(tokenize(doc.text))


def build_vocabulary(
    corpus: Corpus,
    min_df: int = DEFAULT_MIN_DF,
    max_df_ratio: float = DEFAULT_MAX_DF_RATIO,
    max_features: int | None = DEFAULT_MAX_FEATURES,
    remove_stopwords: bool = True,
) -> Vocabulary:
    if len(corpus) == 0:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    if not 0 < max_df_ratio <= 1:
        raise CorpusError(f"max_df_ratio must be in (0, 1], got {max_df_ratio}")
    df: Counter[str] = Counter()
    for doc in corpus.documents:
        df.update(_doc_tokens(doc))
    ceiling = max_df_ratio * len(corpus)
    items = [
        (tok, n)
        for tok, n in df.items()
        if n >= min_df and n <= ceiling and not (remove_stopwords and tok in STOPWORDS)
    ]
    items.sort(key=lambda kv: (-kv[1], kv[0]))
    if max_features is not None:
        items = items[:max_features]
    if not items:
        raise CorpusError("vocabulary is empty after filtering")
    return Vocabulary(tuple(t for t, _ in items), tuple(n for _, n in items))


# ---------------------------------------------------------------- matrices


@dataclass(frozen=True)
class BinaryTermMatrix:
    """Documents x terms presence matrix, stored column-compressed."""

    matrix: sp.csc_matrix
    labels: np.ndarray
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...] = ()

    def __post_init__(self):
        m = sp.csc_matrix(self.matrix, dtype=np.float64)
        m.sort_indices()
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int8))
        if m.shape[0] != len(self.labels):
            raise CorpusError("row count does not match label count")
        if m.shape[1] != len(self.vocabulary):
            raise CorpusError("column count does not match vocabulary size")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def n_docs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        m = self.matrix.tocsr()
        m.sort_indices()
        return m

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.n_docs, dtype=np.int8)
        start, stop = self.matrix.indptr[j], self.matrix.indptr[j + 1]
        col[self.matrix.indices[start:stop]] = 1
        return col

    def column_sums(self) -> np.ndarray:
        return np.diff(self.matrix.indptr).astype(np.int64)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(np.int8)

    def select(self, feature_ids: Iterable[int]) -> "BinaryTermMatrix":
        ids = sorted(set(int(i) for i in feature_ids))
        vocab = Vocabulary(
            tuple(self.vocabulary.terms[i] for i in ids),
            tuple(self.vocabulary.doc_freq[i] for i in ids),
        )
        return BinaryTermMatrix(self.matrix[:, ids], self.labels, vocab, self.doc_ids)

    def take_rows(self, rows: Sequence[int]) -> "BinaryTermMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        ids = tuple(self.doc_ids[i] for i in rows) if self.doc_ids else ()
        return BinaryTermMatrix(self.csr[rows].tocsc(), self.labels[rows], self.vocabulary, ids)

    def degenerate_columns(self) -> list[int]:
        sums = self.column_sums()
        return [int(j) for j in np.flatnonzero((sums == 0) | (sums == self.n_docs))]


def vectorize(corpus: Corpus, vocab: Vocabulary) -> BinaryTermMatrix:
    rows: list[int] = []
    cols: list[int] = []
    for i, doc in enumerate(corpus.documents):
        hits = sorted(vocab.index[t] for t in _doc_tokens(doc) if t in vocab.index)
        rows.extend([i] * len(hits))
        cols.extend(hits)
    data = np.ones(len(rows), dtype=np.float64)
    m = sp.csc_matrix((data, (rows, cols)), shape=(len(corpus), len(vocab)))
    return BinaryTermMatrix(
        m, corpus.labels, vocab, tuple(d.id for d in corpus.documents)
    )
