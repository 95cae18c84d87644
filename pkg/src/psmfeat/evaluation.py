"""Metrics and the cross-dataset feature-percentage sweep."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .config import RunConfig
from .corpus import BinaryTermMatrix, Corpus, balance, build_vocabulary, vectorize
from .learners import FOREST, LOGISTIC, SVM, ForestParams, TrainConfig, score
from .learners import train_forest, train_linear_svm, train_logreg
from .parallel import run_ordered, shared
from .propensity import estimate_all
from .ranking import DF, PSM, FeatureRanking, rank_df, rank_psm, select_top

log = logging.getLogger(__name__)


class SweepError(RuntimeError):
    pass


# ---------------------------------------------------------------- metrics


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties counted half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both classes present")
    ranks = rankdata(s)  # average ranks resolve ties as half-wins
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(y)} labels")
    if len(y) == 0:
        raise ValueError("accuracy of an empty vector is undefined")
    return float(np.mean(p == y))


def precision_at_k(ranking: FeatureRanking, truth: Iterable, k: int) -> float:
    """Share of the top-k entries that belong to ``truth`` (tokens or feature ids)."""
    if not 1 <= k <= len(ranking):
        raise ValueError(f"k must be in [1, {len(ranking)}], got {k}")
    truth = set(truth)
    hits = sum(1 for e in ranking.entries[:k] if e.token in truth or e.feature_id in truth)
    return hits / k


# ---------------------------------------------------------------- cross evaluation


def fit_classifier(X, y, classifier: str, cfg: TrainConfig, forest_params: ForestParams | None = None):
    if classifier == LOGISTIC:
        return train_logreg(X, y, cfg)
    if classifier == SVM:
        return train_linear_svm(X, y, cfg)
    if classifier == FOREST:
        return train_forest(X, y, forest_params or ForestParams(), seed=cfg.seed)
    raise ValueError(f"unknown classifier {classifier!r}")


def _threshold(classifier: str) -> float:
    return 0.0 if classifier == SVM else 0.5


def cross_eval(
    train: BinaryTermMatrix,
    test: Corpus | BinaryTermMatrix,
    features: Iterable[int],
    classifier: str = LOGISTIC,
    cfg: TrainConfig | None = None,
    forest_params: ForestParams | None = None,
) -> tuple[float, float]:
    """Train on ``train`` restricted to ``features``, score ``test``; returns (auroc, accuracy).

    A test corpus is vectorized with the training vocabulary, so tokens unseen
    in training simply drop out.
    """
    cfg = cfg or TrainConfig()
    feats = sorted(set(int(f) for f in features))
    if not feats:
        raise ValueError("feature set is empty")
    if isinstance(test, Corpus):
        Xte = vectorize(test, train.vocabulary.restrict(feats))
    else:
        if test.vocabulary.terms != train.vocabulary.terms:
            raise ValueError("test matrix must use the training vocabulary")
        Xte = test.select(feats)
    Xtr = train.select(feats)
    model = fit_classifier(Xtr.matrix, Xtr.labels, classifier, cfg, forest_params)
    s = score(model, Xte.matrix)
    preds = (np.asarray(s) > _threshold(classifier)).astype(np.int8)
    return auroc(s, Xte.labels), accuracy(preds, Xte.labels)


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepPoint:
    method: str
    percent: float
    classifier: str
    n_features: int
    auroc: float
    accuracy: float


@dataclass(frozen=True)
class SweepReport:
    points: tuple[SweepPoint, ...]
    summary: dict[str, float]
    provenance: dict = field(default_factory=dict)
    top_features: dict[str, list[str]] = field(default_factory=dict)

    @property
    def winner(self) -> str:
        # ties go to the first method listed
        best = max(self.summary.values())
        return next(m for m, v in self.summary.items() if v == best)

    def curve(self, method: str) -> list[tuple[float, float]]:
        return [(p.percent, p.auroc) for p in self.points if p.method == method]

    def to_dict(self) -> dict:
        return {
            "points": [
                {
                    "method": p.method,
                    "percent": p.percent,
                    "classifier": p.classifier,
                    "n_features": p.n_features,
                    "auroc": p.auroc,
                    "accuracy": p.accuracy,
                }
                for p in self.points
            ],
            "summary": dict(self.summary),
            "winner": self.winner,
            "provenance": self.provenance,
            "top_features": self.top_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        points = tuple(
            SweepPoint(p["method"], p["percent"], p["classifier"], p["n_features"], p["auroc"], p["accuracy"])
            for p in d["points"]
        )
        return cls(points, dict(d["summary"]), d.get("provenance", {}), d.get("top_features", {}))


def normalized_area(percents: Sequence[float], values: Sequence[float]) -> float:
    """Trapezoidal area under (percent/100, value), divided by the covered span."""
    x = np.asarray(percents, dtype=np.float64) / 100.0
    v = np.asarray(values, dtype=np.float64)
    if len(x) == 1:
        return float(v[0])
    area = float(np.sum((x[1:] - x[:-1]) * (v[1:] + v[:-1]) / 2.0))
    return area / float(x[-1] - x[0])


def _format_percent(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def write_sweep_csv(report: SweepReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "percent", "classifier", "auroc", "accuracy"])
        for p in report.points:
            w.writerow([p.method, _format_percent(p.percent), p.classifier, repr(p.auroc), repr(p.accuracy)])


def write_report_json(report: SweepReport, path: str | Path) -> None:
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_report_json(path: str | Path) -> SweepReport:
    return SweepReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Prepared:
    train: BinaryTermMatrix
    test: BinaryTermMatrix


def prepare(train_corpus: Corpus, test_corpus: Corpus, config: RunConfig) -> Prepared:
    """Balance both corpora, build the vocabulary on train, vectorize both with it."""
    if config.balance:
        train_corpus = balance(train_corpus, config.seed)
        test_corpus = balance(test_corpus, config.seed + 1)
    vocab = build_vocabulary(
        train_corpus,
        min_df=config.min_df,
        max_df_ratio=config.max_df_ratio,
        max_features=config.max_features,
        remove_stopwords=config.remove_stopwords,
    )
    return Prepared(vectorize(train_corpus, vocab), vectorize(test_corpus, vocab))


def rank_features(
    matrix: BinaryTermMatrix,
    method: str,
    config: RunConfig,
    workers: int | None = 1,
    cache_dir: str | Path | None = None,
) -> FeatureRanking:
    fp = config.fingerprint()
    if method == DF:
        return rank_df(matrix, fingerprint=fp)
    if method == PSM:
        table = estimate_all(
            matrix,
            config.estimator,
            config.train_config(),
            config.forest_params(),
            workers=workers,
            cache_dir=cache_dir,
        )
        return rank_psm(matrix, table, config.stat_mode, config.caliper, workers=workers, fingerprint=fp)
    raise ValueError(f"unknown method {method!r}")


def _eval_point(task):
    method, percent = task
    st = shared()
    feats = select_top(st["rankings"][method], percent)
    try:
        auc, acc = cross_eval(
            st["train"], st["test"], feats, st["classifier"], st["cfg"], st["forest_params"]
        )
    except Exception as exc:
        raise SweepError(f"method={method} percent={percent}: {exc}") from exc
    return SweepPoint(method, percent, st["classifier"], len(feats), auc, acc)


def sweep(
    train_corpus: Corpus,
    test_corpus: Corpus,
    config: RunConfig | None = None,
    methods: Sequence[str] | None = None,
    grid: Sequence[float] | None = None,
    classifier: str | None = None,
    workers: int | None = 1,
    cache_dir: str | Path | None = None,
) -> SweepReport:
    config = (config or RunConfig()).merged(
        methods=tuple(methods) if methods is not None else None,
        grid=tuple(grid) if grid is not None else None,
        classifier=classifier,
    )
    prepared = prepare(train_corpus, test_corpus, config)
    log.info(
        "sweep %s -> %s: %d x %d train, %d test docs",
        train_corpus.source, test_corpus.source, prepared.train.n_docs,
        prepared.train.n_features, prepared.test.n_docs,
    )
    rankings = {}
    for m in config.methods:
        try:
            rankings[m] = rank_features(prepared.train, m, config, workers=workers, cache_dir=cache_dir)
        except Exception as exc:
            raise SweepError(f"method={m}: ranking failed: {exc}") from exc
    tasks = [(m, float(p)) for m in config.methods for p in config.grid]
    state = {
        "rankings": rankings,
        "train": prepared.train,
        "test": prepared.test,
        "classifier": config.classifier,
        "cfg": config.train_config(),
        "forest_params": config.forest_params(),
    }
    points = tuple(run_ordered(_eval_point, tasks, state, workers=workers))
    summary = {}
    for m in config.methods:
        curve = [(p.percent, p.auroc) for p in points if p.method == m]
        summary[m] = normalized_area([c[0] for c in curve], [c[1] for c in curve])
    provenance = {
        "train_source": train_corpus.source,
        "test_source": test_corpus.source,
        "train_docs": prepared.train.n_docs,
        "test_docs": prepared.test.n_docs,
        "n_features": prepared.train.n_features,
        "config_fingerprint": config.fingerprint(),
        "seed": config.seed,
        "config": config.to_dict(),
    }
    top = {m: r.tokens[:10] for m, r in rankings.items()}
    return SweepReport(points, summary, provenance, top)
