"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary) and then
asserts, so a red criterion shows up both in the line and in pytest's result.
"""

import itertools
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, matrix_from_dense
from psmfeat.cli import main
from psmfeat.config import RunConfig
from psmfeat.corpus import concat, ingest_fakenewsnet_csv
from psmfeat.evaluation import (
    auroc,
    cross_eval,
    precision_at_k,
    prepare,
    rank_features,
    read_report_json,
    sweep,
    write_report_json,
)
from psmfeat.learners import (
    ForestParams,
    TrainConfig,
    dump_model,
    load_model,
    logistic_objective,
    train_forest,
    train_linear_svm,
    train_logreg,
)
from psmfeat.matching import MatchedPairs, greedy_match, pair_statistic
from psmfeat.parallel import default_workers
from psmfeat.propensity import estimate_all, load_table, save_table
from psmfeat.ranking import read_ranking_csv, select_top, write_ranking_csv
from psmfeat.synth import SynthConfig, generate, write_outputs
from test_matching import naive_match


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1


def test_criterion_1_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    h = 1e-6
    for _ in range(10):
        X = (rng.random((20, 10)) < 0.4).astype(float)
        y = rng.integers(0, 2, 20)
        lam = 1.0 / 20
        for _ in range(10):
            w = rng.normal(0, 1, 10)
            b = float(rng.normal())
            _, gw, gb = logistic_objective(w, b, X, y, lam)
            analytic = np.append(gw, gb)
            theta = np.append(w, b)
            numeric = np.empty(11)
            for k in range(11):
                up, dn = theta.copy(), theta.copy()
                up[k] += h
                dn[k] -= h
                numeric[k] = (
                    logistic_objective(up[:10], up[10], X, y, lam)[0]
                    - logistic_objective(dn[:10], dn[10], X, y, lam)[0]
                ) / (2 * h)
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    record(1, worst < 1e-4 and elapsed < 10, f"max relative error {worst:.2e} over 100 points, {elapsed:.2f}s")


# ---------------------------------------------------------------- 2


def brute_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_criterion_2_auroc_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, n)
        y[rng.choice(n, 2, replace=False)] = [0, 1]
        s = rng.random(n) if i % 2 else np.round(rng.random(n), 1)
        worst = max(worst, abs(auroc(s, y) - brute_auroc(s, y)))
    elapsed = time.perf_counter() - t0
    record(2, worst <= 1e-12 and elapsed < 5, f"max deviation {worst:.1e} on 100 instances, {elapsed:.2f}s")


# ---------------------------------------------------------------- 3


def test_criterion_3_matching_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    mismatches = invariant_failures = 0
    for i in range(200):
        n = int(rng.integers(1, 31))
        s = rng.random(n) if i % 2 else rng.integers(0, 6, n) / 5  # half with heavy ties
        mask = rng.random(n) < rng.uniform(0.2, 0.8)
        mp = greedy_match(s, mask)
        if mp.pairs != naive_match(s, mask):
            mismatches += 1
        used = list(mp.treated) + list(mp.control)
        if len(used) != len(set(used)) or len(mp) != min(mask.sum(), n - mask.sum()):
            invariant_failures += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and invariant_failures == 0 and elapsed < 5
    record(3, ok, f"{mismatches} oracle mismatches, {invariant_failures} invariant failures in 200 instances, {elapsed:.2f}s")


# ---------------------------------------------------------------- 4


def test_criterion_4_statistic_recomputation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    bad = 0
    for _ in range(100):
        k = int(rng.integers(0, 25))
        tl = rng.integers(0, 2, k)
        cl = rng.integers(0, 2, k)
        labels = np.concatenate([tl, cl])
        pairs = MatchedPairs(np.arange(k), np.arange(k, 2 * k), np.zeros(k))
        expected = {
            "literal": (sum(1 for t in tl if t == 0), sum(1 for c in cl if c == 1)),
            "mcnemar": (sum(1 for t, c in zip(tl, cl) if (t, c) == (0, 1)),
                        sum(1 for t, c in zip(tl, cl) if (t, c) == (1, 0))),
        }
        for mode, (tn, cp) in expected.items():
            chi = (tn - cp) ** 2 / (tn + cp) if tn + cp else 0.0
            got = pair_statistic(pairs, labels, mode)
            if (got.tn, got.cp, got.chi_square) != (tn, cp, chi):
                bad += 1
    pairs = MatchedPairs(np.arange(6), np.arange(6, 12), np.zeros(6))
    five_one = pair_statistic(pairs, np.array([0] * 5 + [1] + [0] * 5 + [1]), "literal")
    arith = abs(five_one.chi_square - 16 / 6)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and (five_one.tn, five_one.cp) == (5, 1) and arith <= 1e-12 and elapsed < 2
    record(4, ok, f"{bad} mismatches in 200 mode-instances, chi2(5,1) error {arith:.1e}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 5


def test_criterion_5_synthetic_causal_recovery():
    t0 = time.perf_counter()
    workers = default_workers()
    p_psm, p_df, a_psm, a_df = [], [], [], []
    for seed in range(10):
        train, test, truth = generate(SynthConfig(seed=seed))
        cfg = RunConfig(seed=seed)
        prep = prepare(train, test, cfg)
        rankings = {m: rank_features(prep.train, m, cfg, workers=workers) for m in ("psm", "df")}
        p_psm.append(precision_at_k(rankings["psm"], truth, 20))
        p_df.append(precision_at_k(rankings["df"], truth, 20))
        for m, sink in (("psm", a_psm), ("df", a_df)):
            auc, _ = cross_eval(prep.train, prep.test, select_top(rankings[m], 5), "logistic", cfg.train_config())
            sink.append(auc)
    elapsed = time.perf_counter() - t0
    wins_p = sum(a > b for a, b in zip(p_psm, p_df))
    wins_a = sum(a > b for a, b in zip(a_psm, a_df))
    ok = wins_p >= 8 and wins_a >= 8 and elapsed < 900
    record(
        5,
        ok,
        f"p@20 psm>df on {wins_p}/10 (median {np.median(p_psm):.2f} vs {np.median(p_df):.2f}); "
        f"top-5% auroc psm>df on {wins_a}/10 (median {np.median(a_psm):.3f} vs {np.median(a_df):.3f}); {elapsed:.0f}s",
    )


# ---------------------------------------------------------------- 6

POLITICAL = {
    "trump", "donald", "obama", "barack", "clinton", "hillary", "biden", "sanders", "bernie",
    "pence", "mccain", "romney", "senator", "president", "republican", "republicans",
    "democrat", "democrats", "gop", "congress", "governor",
}


def fakenewsnet_dir():
    candidates = [os.environ.get("PSMFEAT_FAKENEWSNET"), Path(__file__).parent.parent / "data" / "fakenewsnet"]
    needed = [f"{s}_{l}.csv" for s in ("politifact", "gossipcop") for l in ("fake", "real")]
    for c in candidates:
        if c and all((Path(c) / n).is_file() for n in needed):
            return Path(c)
    return None


def test_criterion_6_fakenewsnet_direction():
    root = fakenewsnet_dir()
    if root is None:
        ACCEPTANCE_LINES.append("[SKIP] criterion 6: FakeNewsNet CSVs not found (set PSMFEAT_FAKENEWSNET)")
        pytest.skip("FakeNewsNet CSVs not present")
    t0 = time.perf_counter()

    def load(name):
        return concat(
            [ingest_fakenewsnet_csv(root / f"{name}_fake.csv", 1, name),
             ingest_fakenewsnet_csv(root / f"{name}_real.csv", 0, name)],
            source=name,
        )

    pf, gc = load("politifact"), load("gossipcop")
    cfg = RunConfig()
    workers = default_workers()
    forward = sweep(pf, gc, cfg, workers=workers)
    pf_minutes = (time.perf_counter() - t0) / 60
    backward = sweep(gc, pf, cfg, workers=workers)
    df_top = forward.top_features["df"][:5]
    psm_top = forward.top_features["psm"][:5]
    n_df = sum(t in POLITICAL for t in df_top)
    n_psm = sum(t in POLITICAL for t in psm_top)
    ok = (
        forward.summary["psm"] > forward.summary["df"]
        and backward.summary["psm"] > backward.summary["df"]
        and n_df >= 2
        and n_psm <= 1
        and pf_minutes < 10
    )
    record(
        6,
        ok,
        f"PF->GC psm {forward.summary['psm']:.3f} vs df {forward.summary['df']:.3f}; "
        f"GC->PF psm {backward.summary['psm']:.3f} vs df {backward.summary['df']:.3f}; "
        f"political tokens in top-5 df {n_df} {df_top}, psm {n_psm} {psm_top}; PF pipeline {pf_minutes:.1f} min",
    )


# ---------------------------------------------------------------- 7


def test_criterion_7_sweep_determinism(tmp_path, capsys):
    cfg = SynthConfig(n_docs=400, n_causal_fake=8, n_causal_real=8, n_confounder=8, n_noise=40, seed=7)
    write_outputs(tmp_path, *generate(cfg))
    outputs = []
    n_workers = max(2, default_workers())
    for run, workers in enumerate((1, 1, n_workers)):
        code = main([
            "sweep", str(tmp_path / "train.jsonl"), str(tmp_path / "test.jsonl"),
            "--workers", str(workers), "--grid", "1,5,10,50,100",
            "--out-csv", str(tmp_path / f"s{run}.csv"), "--out-json", str(tmp_path / f"s{run}.json"),
        ])
        assert code == 0
        outputs.append(((tmp_path / f"s{run}.csv").read_bytes(), (tmp_path / f"s{run}.json").read_bytes()))
    capsys.readouterr()
    same_runs = outputs[0] == outputs[1]
    same_workers = outputs[0] == outputs[2]
    record(7, same_runs and same_workers,
           f"repeat run identical: {same_runs}; --workers 1 vs {n_workers} identical: {same_workers}")


# ---------------------------------------------------------------- 8


def rewrite_identical(tmp_path, name, write, read, obj):
    a, b = tmp_path / f"{name}.1", tmp_path / f"{name}.2"
    write(obj, a)
    write(read(a), b)
    return a.read_bytes() == b.read_bytes()


def test_criterion_8_serialization_roundtrip(tmp_path):
    rng = np.random.default_rng(108)
    X = (rng.random((60, 8)) < 0.3).astype(int)
    y = rng.integers(0, 2, 60)
    y[:2] = [0, 1]
    X[0], X[1] = 1, 0
    m = matrix_from_dense(X, y)
    cfg = TrainConfig(max_epochs=100)
    rep = sweep_small()
    artifacts = {
        "logistic model": (dump_model, load_model, train_logreg(X, y, cfg)),
        "svm model": (dump_model, load_model, train_linear_svm(X, y, cfg)),
        "forest model": (dump_model, load_model, train_forest(X, y, ForestParams(n_trees=5, max_depth=4), seed=1)),
        "ranking csv": (write_ranking_csv, read_ranking_csv, rank_features(m, "psm", RunConfig(max_epochs=100))),
        "propensity table": (save_table, load_table, estimate_all(m, cfg=cfg)),
        "sweep report": (write_report_json, read_report_json, rep),
    }
    failed = [name for name, (w, r, obj) in artifacts.items() if not rewrite_identical(tmp_path, name.replace(" ", "_"), w, r, obj)]
    record(8, not failed, f"{len(artifacts) - len(failed)}/{len(artifacts)} artifacts byte-identical" + (f", failed: {failed}" if failed else ""))


def sweep_small():
    train, test, _ = generate(SynthConfig(n_docs=200, n_causal_fake=5, n_causal_real=5, n_confounder=5, n_noise=10, seed=8))
    return sweep(train, test, RunConfig(max_epochs=100, grid=(10, 100)))
