"""Per-feature propensity scores: P(feature present | all other features).

Logistic propensity models are fitted in fixed-size blocks of features that
share one design matrix; a feature's own weight is pinned at zero inside its
model, which is the same as dropping its column. The per-column arithmetic does
not depend on the block, so single-feature and table results agree.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .corpus import BinaryTermMatrix
from .learners import FOREST, LOGISTIC, ForestParams, TrainConfig, TrainingError
from .learners.forest import forest_proba, train_forest
from .learners.linear import fit_logistic_block, smoothness_bound, with_bias_column
from .parallel import run_ordered, shared

log = logging.getLogger(__name__)

ESTIMATORS = (LOGISTIC, FOREST)
BLOCK_SIZE = 32
_EPS = 2.0**-50
_MAGIC = b"PSMTABLE1\n"


class PropensityError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropensityTable:
    scores: np.ndarray  # docs x features; NaN in skipped columns
    estimator: str
    skipped: dict[int, str] = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.scores.shape[1]

    def column(self, j: int) -> np.ndarray:
        if j in self.skipped:
            raise KeyError(f"feature {j} was skipped: {self.skipped[j]}")
        return self.scores[:, j]


def _check_estimator(estimator: str) -> None:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


def _block_logistic(Xa, targets, features, cfg, step):
    d1 = Xa.shape[1]
    mask = np.ones((d1, len(features)))
    mask[features, np.arange(len(features))] = 0.0
    W, _ = fit_logistic_block(Xa, targets, cfg, weight_mask=mask, step=step)
    return np.clip(expit(Xa @ W), _EPS, 1.0 - _EPS)


def _forest_scores(X, target, feature, params, seed):
    forest = train_forest(X, target, params, seed=_feature_seed(seed, feature), exclude=(feature,))
    return forest_proba(forest, X)


def _feature_seed(seed: int, feature: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(feature)]).generate_state(1)[0])


def _prepare_state(matrix: BinaryTermMatrix, estimator: str, cfg: TrainConfig, params: ForestParams):
    state = {"estimator": estimator, "cfg": cfg, "params": params, "n_features": matrix.n_features}
    if estimator == LOGISTIC:
        Xa = with_bias_column(matrix.csr)
        lam = cfg.resolved_lambda(matrix.n_docs)
        state["Xa"] = Xa
        state["step"] = min(cfg.learning_rate, 1.0 / (smoothness_bound(Xa) + lam))
    else:
        state["X"] = matrix.dense().astype(bool)
    state["columns"] = matrix.matrix
    return state


def _target(columns, j: int) -> np.ndarray:
    t = np.zeros(columns.shape[0])
    t[columns.indices[columns.indptr[j] : columns.indptr[j + 1]]] = 1.0
    return t


def _degenerate_reason(t: np.ndarray) -> str | None:
    s = t.sum()
    if s == 0:
        return "feature absent from every document"
    if s == len(t):
        return "feature present in every document"
    return None


def _run_block(features):
    """Worker: score one block of features; returns (scores or None per feature, reasons)."""
    st = shared()
    columns = st["columns"]
    out: list = [None] * len(features)
    reasons: list = [None] * len(features)
    targets = {j: _target(columns, j) for j in features}
    live = []
    for pos, j in enumerate(features):
        reason = _degenerate_reason(targets[j])
        if reason:
            reasons[pos] = reason
        else:
            live.append(pos)
    if st["n_features"] == 1:
        for pos in live:
            out[pos] = np.full(columns.shape[0], targets[features[pos]].mean())
        return out, reasons
    if st["estimator"] == LOGISTIC:
        try:
            feats = [features[p] for p in live]
            if feats:
                Y = np.column_stack([targets[j] for j in feats])
                S = _block_logistic(st["Xa"], Y, feats, st["cfg"], st["step"])
                for c, pos in enumerate(live):
                    out[pos] = S[:, c].copy()
        except TrainingError:
            # isolate the failing feature(s)
            for pos in live:
                j = features[pos]
                try:
                    S = _block_logistic(st["Xa"], targets[j][:, None], [j], st["cfg"], st["step"])
                    out[pos] = S[:, 0].copy()
                except TrainingError as exc:
                    reasons[pos] = f"training failed: {exc}"
    else:
        for pos in live:
            j = features[pos]
            try:
                out[pos] = _forest_scores(st["X"], targets[j], j, st["params"], st["cfg"].seed)
            except (TrainingError, ValueError) as exc:
                reasons[pos] = f"training failed: {exc}"
    return out, reasons


def estimate_feature(
    matrix: BinaryTermMatrix,
    feature: int,
    estimator: str = LOGISTIC,
    cfg: TrainConfig | None = None,
    forest_params: ForestParams | None = None,
) -> np.ndarray:
    """Propensity of ``feature`` for every document, from a model on the other columns."""
    _check_estimator(estimator)
    cfg = cfg or TrainConfig()
    params = forest_params or ForestParams()
    if not 0 <= feature < matrix.n_features:
        raise IndexError(f"feature {feature} out of range")
    state = _prepare_state(matrix, estimator, cfg, params)
    (scores,), (reason,) = run_ordered(_run_block, [[feature]], state, workers=1)[0]
    if scores is None:
        raise PropensityError(f"feature {feature} ({matrix.vocabulary.terms[feature]!r}): {reason}")
    return scores


def cache_key(
    matrix: BinaryTermMatrix, estimator: str, cfg: TrainConfig, forest_params: ForestParams
) -> str:
    h = hashlib.sha256()
    m = matrix.matrix
    h.update(json.dumps([list(m.shape), estimator, cfg.to_dict(), forest_params.to_dict()],
                        sort_keys=True).encode())
    h.update(np.ascontiguousarray(m.indptr, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(m.indices, dtype=np.int64).tobytes())
    return h.hexdigest()


def estimate_all(
    matrix: BinaryTermMatrix,
    estimator: str = LOGISTIC,
    cfg: TrainConfig | None = None,
    forest_params: ForestParams | None = None,
    workers: int | None = 1,
    cache_dir: str | Path | None = None,
) -> PropensityTable:
    _check_estimator(estimator)
    cfg = cfg or TrainConfig()
    params = forest_params or ForestParams()
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"propensity-{cache_key(matrix, estimator, cfg, params)}.bin"
        if cache_path.is_file():
            log.info("propensity cache hit %s", cache_path)
            return load_table(cache_path)

    V = matrix.n_features
    blocks = [list(range(s, min(s + BLOCK_SIZE, V))) for s in range(0, V, BLOCK_SIZE)]
    log.info("estimating %d propensity models (%s, %d blocks)", V, estimator, len(blocks))
    state = _prepare_state(matrix, estimator, cfg, params)
    results = run_ordered(_run_block, blocks, state, workers=workers)

    scores = np.full((matrix.n_docs, V), np.nan)
    skipped: dict[int, str] = {}
    for block, (cols, reasons) in zip(blocks, results):
        for j, col, reason in zip(block, cols, reasons):
            if col is None:
                skipped[j] = reason
            else:
                scores[:, j] = col
    if len(skipped) == V:
        raise PropensityError("every feature was skipped; first reason: " + skipped[0])
    for j, reason in skipped.items():
        log.warning("skipping feature %d (%s): %s", j, matrix.vocabulary.terms[j], reason)
    table = PropensityTable(scores, estimator, skipped)
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_table(table, cache_path)
    return table


def save_table(table: PropensityTable, path: str | Path) -> None:
    header = {
        "estimator": table.estimator,
        "shape": list(table.scores.shape),
        "skipped": {str(k): v for k, v in sorted(table.skipped.items())},
    }
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(table.scores, dtype="<f8").tobytes())


def load_table(path: str | Path) -> PropensityTable:
    with Path(path).open("rb") as fh:
        if fh.readline() != _MAGIC:
            raise PropensityError(f"{path}: not a propensity table")
        header = json.loads(fh.readline().decode("utf-8"))
        rows, cols = header["shape"]
        scores = np.frombuffer(fh.read(), dtype="<f8").reshape(rows, cols).astype(np.float64)
    skipped = {int(k): v for k, v in header["skipped"].items()}
    return PropensityTable(scores, header["estimator"], skipped)
