"""Greedy one-to-one propensity matching and the paired chi-square statistic."""

from __future__ import annotations

import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LITERAL = "literal"
MCNEMAR = "mcnemar"
MODES = (LITERAL, MCNEMAR)


@dataclass(frozen=True)
class MatchedPairs:
    treated: np.ndarray
    control: np.ndarray
    gaps: np.ndarray
    feature: int = -1
    caliper: float | None = None
    reason: str = ""

    def __len__(self) -> int:
        return len(self.treated)

    @property
    def pairs(self) -> list[tuple[int, int, float]]:
        return [(int(t), int(c), float(g)) for t, c, g in zip(self.treated, self.control, self.gaps)]


@dataclass(frozen=True)
class PairStatistic:
    tn: int
    cp: int
    chi_square: float
    mode: str


def chi_square(tn: int, cp: int) -> float:
    """(tn - cp)^2 / (tn + cp), zero when both counts are zero."""
    total = tn + cp
    if total == 0:
        return 0.0
    return (tn - cp) ** 2 / total


class _Alive:
    """Unmatched positions in a sorted array, with path-compressed skip pointers."""

    def __init__(self, n: int):
        self.n = n
        self.nxt = list(range(n + 1))
        self.prv = list(range(n + 1))  # prv[p + 1] tracks position p; prv[0] is the -1 sentinel

    def next_alive(self, p: int) -> int:
        nxt = self.nxt
        root = p
        while nxt[root] != root:
            root = nxt[root]
        while nxt[p] != root:
            nxt[p], p = root, nxt[p]
        return root

    def prev_alive(self, p: int) -> int:
        prv = self.prv
        q = p + 1
        root = q
        while prv[root] != root:
            root = prv[root]
        while prv[q] != root:
            prv[q], q = root, prv[q]
        return root - 1

    def remove(self, p: int) -> None:
        self.nxt[p] = p + 1
        self.prv[p + 1] = p


def greedy_match(
    scores,
    treatment_mask,
    caliper: float | None = None,
    feature: int = -1,
) -> MatchedPairs:
    """Match treated documents, highest score first, to their nearest unmatched control.

    Ties in treatment order and in control distance go to the lower document
    index. With a caliper, a treated document whose best gap exceeds it stays
    unmatched.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(treatment_mask).astype(bool)
    if s.shape != t.shape:
        raise ValueError("scores and treatment mask differ in length")
    treated = np.flatnonzero(t)
    controls = np.flatnonzero(~t)
    if len(treated) == 0 or len(controls) == 0:
        side = "treatment" if len(treated) == 0 else "control"
        empty = np.zeros(0, dtype=np.int64)
        return MatchedPairs(empty, empty, np.zeros(0), feature, caliper, f"empty {side} group")
    if not np.all(np.isfinite(s)):
        raise ValueError("propensity scores must be finite")

    order = treated[np.lexsort((treated, -s[treated]))]
    sorted_ctrl = controls[np.lexsort((controls, s[controls]))]
    cs = s[sorted_ctrl].tolist()
    cidx = sorted_ctrl.tolist()
    n_ctrl = len(cs)
    alive = _Alive(n_ctrl)

    out_t: list[int] = []
    out_c: list[int] = []
    out_g: list[float] = []
    remaining = n_ctrl
    for i in order.tolist():
        if remaining == 0:
            break
        v = float(s[i])
        p = bisect_left(cs, v)
        best_gap = best_doc = best_pos = None

        def consider(pos):
            nonlocal best_gap, best_doc, best_pos
            gap = abs(cs[pos] - v)
            doc = cidx[pos]
            if best_gap is None or gap < best_gap or (gap == best_gap and doc < best_doc):
                best_gap, best_doc, best_pos = gap, doc, pos
            return gap

        # upward: first alive of each score group (lowest index) while the gap stays minimal
        r = alive.next_alive(p)
        if r < n_ctrl:
            g = consider(r)
            while True:
                r = alive.next_alive(bisect_right(cs, cs[r]))
                if r >= n_ctrl or abs(cs[r] - v) != g:
                    break
                consider(r)
        # downward: nearest lower score group, then its lowest-index alive member
        l = alive.prev_alive(p - 1)
        if l >= 0:
            first = alive.next_alive(bisect_left(cs, cs[l]))
            g = consider(first)
            while True:
                l = alive.prev_alive(bisect_left(cs, cs[first]) - 1)
                if l < 0 or abs(cs[l] - v) != g:
                    break
                first = alive.next_alive(bisect_left(cs, cs[l]))
                consider(first)

        if caliper is not None and best_gap > caliper:
            continue
        alive.remove(best_pos)
        remaining -= 1
        out_t.append(i)
        out_c.append(best_doc)
        out_g.append(best_gap)

    return MatchedPairs(
        np.array(out_t, dtype=np.int64),
        np.array(out_c, dtype=np.int64),
        np.array(out_g, dtype=np.float64),
        feature,
        caliper,
    )


def pair_statistic(pairs: MatchedPairs, labels, mode: str = LITERAL) -> PairStatistic:
    """Treatment-negative vs control-positive counts and their chi-square.

    ``literal`` counts pairs whose treated document is real (TN) and pairs
    whose control document is fake (CP); ``mcnemar`` counts the two kinds of
    discordant pair.
    """
    if mode not in MODES:
        raise ValueError(f"unknown statistic mode {mode!r}; expected one of {MODES}")
    labels = np.asarray(labels)
    tl = labels[pairs.treated]
    cl = labels[pairs.control]
    if mode == LITERAL:
        tn = int(np.sum(tl == 0))
        cp = int(np.sum(cl == 1))
    else:
        tn = int(np.sum((tl == 0) & (cl == 1)))
        cp = int(np.sum((tl == 1) & (cl == 0)))
    return PairStatistic(tn, cp, chi_square(tn, cp), mode)


def write_pairs_csv(
    matched: Iterable[MatchedPairs],
    path: str | Path,
    terms: Sequence[str] | None = None,
    doc_ids: Sequence[str] | None = None,
) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "treatment_id", "control_id", "gap"])
        for mp_ in matched:
            name = terms[mp_.feature] if terms is not None else mp_.feature
            for t, c, g in mp_.pairs:
                w.writerow([
                    name,
                    doc_ids[t] if doc_ids else t,
                    doc_ids[c] if doc_ids else c,
                    repr(g),
                ])
