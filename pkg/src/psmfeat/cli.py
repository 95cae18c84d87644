"""psmfeat command line: ingest, rank, train, evaluate, sweep, synth, report.

Exit codes: 0 success, 1 runtime or pipeline failure, 2 usage or config error.
Machine-readable outputs go to files, summaries to stdout, logs to stderr
(level from the LOG_LEVEL environment variable: error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .corpus import (
    FAKE,
    REAL,
    Corpus,
    CorpusError,
    balance,
    build_vocabulary,
    concat,
    ingest_fakenewsnet_csv,
    ingest_jsonl,
    vectorize,
    write_jsonl,
)
from .evaluation import (
    cross_eval,
    fit_classifier,
    rank_features,
    sweep,
    write_report_json,
    write_sweep_csv,
)
from .learners import CLASSIFIERS, dump_model, model_to_dict, score
from .matching import MODES, greedy_match, write_pairs_csv
from .parallel import default_workers
from .propensity import ESTIMATORS, estimate_all
from .ranking import METHODS, read_ranking_csv, select_top, write_ranking_csv
from .synth import SynthConfig, SynthConfigError, generate, load_config as load_synth_config
from .synth import write_outputs

log = logging.getLogger("psmfeat")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = _LEVELS.get(os.environ.get("LOG_LEVEL", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _percent(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= 100:
        raise argparse.ArgumentTypeError(f"percent must be in (0, 100], got {text}")
    return v


def _grid(text: str) -> tuple[float, ...]:
    return tuple(_percent(t) for t in text.split(",") if t.strip())


def _methods(text: str) -> tuple[str, ...]:
    ms = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [m for m in ms if m not in METHODS]
    if bad or not ms:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {METHODS}, got {text!r}")
    return ms


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel workers (default: CPU count)")


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=ESTIMATORS + ("logreg",), help="logreg is an alias of logistic")
    p.add_argument("--stat", dest="stat_mode", choices=MODES)
    p.add_argument("--caliper", type=float)
    p.add_argument("--min-df", type=int)
    p.add_argument("--max-features", type=int)
    p.add_argument("--cache-dir", help="directory for cached propensity tables")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    for key in ("seed", "estimator", "stat_mode", "caliper", "min_df", "max_features", "classifier"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if overrides.get("estimator") == "logreg":
        overrides["estimator"] = "logistic"
    if getattr(args, "grid", None) is not None:
        overrides["grid"] = args.grid
    if getattr(args, "methods", None) is not None:
        overrides["methods"] = args.methods
    return cfg.merged(**overrides)


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    if w is not None and w < 1:
        raise UsageError("--workers must be >= 1")
    return default_workers() if w is None else w


def _load_corpus(path: str) -> Corpus:
    return ingest_jsonl(path)


def _infer_label(path: str) -> int:
    name = Path(path).name.lower()
    if "fake" in name and "real" not in name:
        return FAKE
    if "real" in name and "fake" not in name:
        return REAL
    raise CorpusError(f"cannot infer label from file name {path!r}; pass --label")


def _print_counts(corpus: Corpus) -> None:
    c = corpus.label_counts()
    print(f"documents: {len(corpus)} (fake: {c[FAKE]}, real: {c[REAL]})")


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    corpora = []
    for path in args.inputs:
        if args.format == "jsonl":
            corpora.append(ingest_jsonl(path))
        else:
            label = _infer_label(path) if args.label is None else (FAKE if args.label == "fake" else REAL)
            corpora.append(ingest_fakenewsnet_csv(path, label, args.source or Path(path).stem.split("_")[0]))
    corpus = concat(corpora, source=args.source)
    write_jsonl(corpus, args.output)
    _print_counts(corpus)
    return 0


def _prepared_matrix(args, cfg: RunConfig):
    corpus = _load_corpus(args.corpus)
    if cfg.balance:
        corpus = balance(corpus, cfg.seed)
    vocab = build_vocabulary(corpus, cfg.min_df, cfg.max_df_ratio, cfg.max_features, cfg.remove_stopwords)
    return vectorize(corpus, vocab)


def cmd_rank(args) -> int:
    cfg = _run_config(args)
    workers = _workers(args)
    matrix = _prepared_matrix(args, cfg)
    ranking = rank_features(matrix, args.method, cfg, workers=workers, cache_dir=args.cache_dir)
    write_ranking_csv(ranking, args.output)
    if args.pairs_dump and args.method == "psm":
        table = estimate_all(matrix, cfg.estimator, cfg.train_config(), cfg.forest_params(),
                             workers=workers, cache_dir=args.cache_dir)
        matched = (
            greedy_match(table.scores[:, j], matrix.column(j).astype(bool), cfg.caliper, feature=j)
            for j in range(matrix.n_features)
            if j not in table.skipped
        )
        write_pairs_csv(matched, args.pairs_dump, matrix.vocabulary.terms, matrix.doc_ids)
    print(f"{args.method} ranking over {matrix.n_features} features, {matrix.n_docs} documents")
    for r, e in enumerate(ranking.top(args.top), start=1):
        print(f"{r:>3}  {e.token:<24} {e.score:.4f}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    matrix = _prepared_matrix(args, cfg)
    ranking = read_ranking_csv(args.ranking) if args.ranking else rank_features(
        matrix, args.method, cfg, workers=_workers(args), cache_dir=args.cache_dir
    )
    index = matrix.vocabulary.index
    ids = []
    for fid in select_top(ranking, args.percent):
        token = next(e.token for e in ranking.entries if e.feature_id == fid)
        if token not in index:
            raise CorpusError(f"ranked token {token!r} is not in this corpus' vocabulary")
        ids.append(index[token])
    sub = matrix.select(ids)
    model = fit_classifier(sub.matrix, sub.labels, cfg.classifier, cfg.train_config(), cfg.forest_params())
    bundle = {"features": list(sub.vocabulary.terms), "model": model_to_dict(model)}
    Path(args.output).write_text(json.dumps(bundle, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"trained {cfg.classifier} on {len(ids)} features, {sub.n_docs} documents")
    return 0


def cmd_evaluate(args) -> int:
    from .corpus import Vocabulary
    from .evaluation import accuracy, auroc
    from .learners import model_from_dict

    bundle = json.loads(Path(args.model).read_text(encoding="utf-8"))
    model = model_from_dict(bundle["model"])
    vocab = Vocabulary(tuple(bundle["features"]), tuple(0 for _ in bundle["features"]))
    corpus = _load_corpus(args.corpus)
    X = vectorize(corpus, vocab)
    s = score(model, X.matrix)
    thr = 0.0 if bundle["model"]["kind"] == "svm" else 0.5
    print(f"auroc: {auroc(s, X.labels):.4f}")
    print(f"accuracy: {accuracy((s > thr).astype(int), X.labels):.4f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    workers = _workers(args)
    train = _load_corpus(args.train)
    test = _load_corpus(args.test)
    report = sweep(train, test, cfg, workers=workers, cache_dir=args.cache_dir)
    write_sweep_csv(report, args.out_csv)
    write_report_json(report, args.out_json)
    for m, v in report.summary.items():
        print(f"{m}: {v:.4f}")
    print(f"winner: {report.winner}")
    return 0


def cmd_synth(args) -> int:
    try:
        scfg = load_synth_config(args.config) if args.config else SynthConfig()
        overrides = {k: v for k, v in (("seed", args.seed), ("n_docs", args.n_docs)) if v is not None}
        if overrides:
            scfg = SynthConfig.from_dict({**scfg.to_dict(), **overrides})
    except SynthConfigError as exc:
        raise UsageError(str(exc)) from None
    train, test, truth = generate(scfg)
    write_outputs(args.output, train, test, truth)
    print(f"wrote {len(train)} train / {len(test)} test documents and {len(truth)} causal tokens to {args.output}")
    return 0


def cmd_report(args) -> int:
    rankings = [read_ranking_csv(p) for p in args.rankings]
    heads = [r.method for r in rankings]
    print("  ".join(f"{h:<20}" for h in heads).rstrip())
    for i in range(args.top):
        cells = [r.entries[i].token if i < len(r) else "" for r in rankings]
        print("  ".join(f"{c:<20}" for c in cells).rstrip())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psmfeat", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize input files into a JSON-lines corpus")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--format", choices=("jsonl", "fakenewsnet-csv"), default="jsonl")
    p.add_argument("--label", choices=("fake", "real"), help="label for CSV rows (default: from file name)")
    p.add_argument("--source", help="dataset tag, e.g. politifact")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank", help="rank features by PSM chi-square or document frequency")
    p.add_argument("corpus")
    p.add_argument("--method", choices=METHODS, default="psm")
    _add_selection(p)
    _add_common(p)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--pairs-dump", help="write matched pairs CSV for audit")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("train", help="train a classifier on the top-p%% features")
    p.add_argument("corpus")
    p.add_argument("--method", choices=METHODS, default="psm")
    p.add_argument("--ranking", help="existing ranking CSV (skips ranking)")
    p.add_argument("--percent", type=_percent, default=5.0)
    p.add_argument("--classifier", choices=CLASSIFIERS)
    _add_selection(p)
    _add_common(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a corpus with a trained model bundle")
    p.add_argument("model")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="cross-dataset feature-percentage sweep")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--methods", type=_methods)
    p.add_argument("--classifier", choices=CLASSIFIERS)
    p.add_argument("--grid", type=_grid, help="comma-separated percents, e.g. 1,2,5,10")
    _add_selection(p)
    _add_common(p)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic confounded train/test pair")
    p.add_argument("--config", help="synth config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-docs", type=int)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="print top tokens of one or more ranking CSVs side by side")
    p.add_argument("rankings", nargs="+")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"psmfeat {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every pipeline failure maps to exit 1
        log.debug("failure", exc_info=True)
        print(f"psmfeat {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
