"""Feature rankings by matched chi-square (PSM) and by document frequency."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import BinaryTermMatrix
from .matching import LITERAL, MODES, greedy_match, pair_statistic
from .parallel import run_ordered, shared
from .propensity import PropensityTable

PSM = "psm"
DF = "df"
METHODS = (PSM, DF)
_CHUNK = 64


@dataclass(frozen=True)
class RankEntry:
    feature_id: int
    token: str
    score: float


@dataclass(frozen=True)
class FeatureRanking:
    entries: tuple[RankEntry, ...]
    method: str
    fingerprint: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def tokens(self) -> list[str]:
        return [e.token for e in self.entries]

    @property
    def feature_ids(self) -> list[int]:
        return [e.feature_id for e in self.entries]

    def top(self, k: int) -> list[RankEntry]:
        return list(self.entries[:k])


def _sorted_ranking(ids, tokens, scores, method, fingerprint) -> FeatureRanking:
    entries = [RankEntry(int(j), t, float(s)) for j, t, s in zip(ids, tokens, scores)]
    entries.sort(key=lambda e: (-e.score, e.token))
    return FeatureRanking(tuple(entries), method, fingerprint)


def rank_df(matrix: BinaryTermMatrix, fingerprint: str = "") -> FeatureRanking:
    sums = matrix.column_sums()
    return _sorted_ranking(range(matrix.n_features), matrix.vocabulary.terms, sums, DF, fingerprint)


def _score_chunk(features):
    st = shared()
    cols = st["columns"]
    scores = st["scores"]
    out = []
    for j in features:
        if j in st["skipped"]:
            out.append(0.0)
            continue
        mask = np.zeros(cols.shape[0], dtype=bool)
        mask[cols.indices[cols.indptr[j] : cols.indptr[j + 1]]] = True
        pairs = greedy_match(scores[:, j], mask, st["caliper"], feature=j)
        out.append(pair_statistic(pairs, st["labels"], st["mode"]).chi_square if len(pairs) else 0.0)
    return out


def psm_scores(
    matrix: BinaryTermMatrix,
    table: PropensityTable,
    mode: str = LITERAL,
    caliper: float | None = None,
    workers: int | None = 1,
) -> np.ndarray:
    """Matched chi-square per feature, in feature-id order."""
    if mode not in MODES:
        raise ValueError(f"unknown statistic mode {mode!r}")
    if table.scores.shape != matrix.shape:
        raise ValueError(
            f"propensity table shape {table.scores.shape} does not match matrix {matrix.shape}"
        )
    V = matrix.n_features
    chunks = [list(range(s, min(s + _CHUNK, V))) for s in range(0, V, _CHUNK)]
    state = {
        "columns": matrix.matrix,
        "scores": table.scores,
        "skipped": set(table.skipped),
        "labels": matrix.labels,
        "mode": mode,
        "caliper": caliper,
    }
    results = run_ordered(_score_chunk, chunks, state, workers=workers)
    return np.array([s for chunk in results for s in chunk], dtype=np.float64)


def rank_psm(
    matrix: BinaryTermMatrix,
    table: PropensityTable,
    mode: str = LITERAL,
    caliper: float | None = None,
    workers: int | None = 1,
    fingerprint: str = "",
) -> FeatureRanking:
    scores = psm_scores(matrix, table, mode, caliper, workers)
    return _sorted_ranking(range(matrix.n_features), matrix.vocabulary.terms, scores, PSM, fingerprint)


def select_top(ranking: FeatureRanking, percent: float) -> list[int]:
    """Feature ids of the first ceil(percent/100 * V) entries (at least one), in rank order."""
    if not len(ranking):
        raise ValueError("ranking is empty")
    if not (0 < percent <= 100):
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    k = max(1, math.ceil(round(percent * len(ranking) / 100.0, 9)))
    return ranking.feature_ids[:k]


def write_ranking_csv(ranking: FeatureRanking, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "token", "feature_id", "score", "method"])
        for r, e in enumerate(ranking.entries, start=1):
            w.writerow([r, e.token, e.feature_id, repr(e.score), ranking.method])


def read_ranking_csv(path: str | Path) -> FeatureRanking:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty ranking")
    methods = {r["method"] for r in rows}
    if len(methods) != 1:
        raise ValueError(f"{path}: mixed methods {sorted(methods)}")
    rows.sort(key=lambda r: int(r["rank"]))
    entries = tuple(RankEntry(int(r["feature_id"]), r["token"], float(r["score"])) for r in rows)
    return FeatureRanking(entries, methods.pop())
