import json

import numpy as np
import pytest

from psmfeat.config import RunConfig
from psmfeat.evaluation import prepare, rank_features
from psmfeat.synth import (
    SynthConfig,
    SynthConfigError,
    generate,
    load_config,
    read_truth,
    vocabulary_partition,
    write_outputs,
)


@pytest.fixture(scope="module")
def default_split():
    return generate(SynthConfig())


def test_sizes_and_balance(default_split):
    train, test, truth = default_split
    assert len(train) == len(test) == 2000
    for split in (train, test):
        n_fake = int(split.labels.sum())
        assert abs(n_fake / 2000 - 0.5) <= 0.05
    assert len(truth) == 40


def test_tokens_survive_tokenizer(default_split):
    from psmfeat.corpus import tokenize

    part = vocabulary_partition(SynthConfig())
    words = [w for ws in part.values() for w in ws]
    assert all(tokenize(w) == [w] for w in words)
    assert len(set(words)) == len(words)


def test_causal_frequency_within_three_standard_errors(default_split):
    train, _, _ = default_split
    fake_docs = [set(d.content.split()) for d in train if d.label == 1]
    n = len(fake_docs)
    p = 0.30
    se = np.sqrt(p * (1 - p) / n)
    for w in vocabulary_partition(SynthConfig())["causal_fake"]:
        freq = sum(w in d for d in fake_docs) / n
        assert abs(freq - p) <= 3 * se, (w, freq)


def test_deterministic(tmp_path):
    cfg = SynthConfig(n_docs=200, seed=5)
    for name in ("a", "b"):
        write_outputs(tmp_path / name, *generate(cfg))
    for f in ("train.jsonl", "test.jsonl", "truth.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert read_truth(tmp_path / "a" / "truth.txt") == generate(cfg)[2]
    other = generate(SynthConfig(n_docs=200, seed=6))[0]
    assert other.documents != generate(cfg)[0].documents


def point_biserial(present, labels):
    if present.std() == 0:
        return 0.0
    return float(np.corrcoef(present, labels)[0, 1])


def test_confounders_correlate_with_label_more_than_noise(default_split):
    train, _, _ = default_split
    y = train.labels.astype(float)
    part = vocabulary_partition(SynthConfig())
    docs = [set(d.content.split()) for d in train]

    def corr(w):
        return point_biserial(np.array([w in d for d in docs], dtype=float), y)

    conf = [corr(w) for w in part["confounder"]]
    noise = [abs(corr(w)) for w in part["noise"]]
    assert min(conf) > 0
    assert min(conf) > max(noise)


def test_independent_confounders_score_low():
    ratios = []
    for seed in range(10):
        cfg = SynthConfig(n_docs=600, n_noise=20, rho_train=0.5, seed=seed)
        train, test, truth = generate(cfg)
        run = RunConfig(seed=seed)
        r = rank_features(prepare(train, test, run).train, "psm", run)
        score = {e.token: e.score for e in r.entries}
        conf = np.mean([score[w] for w in vocabulary_partition(cfg)["confounder"]])
        causal = np.mean([score[w] for w in truth])
        ratios.append(conf / causal)
    assert max(ratios) < 0.25, ratios


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p_noise": 1.5},
        {"rho_train": -0.1},
        {"p_causal_hi": 0.05, "p_causal_lo": 0.3},
        {"n_noise": -1},
        {"n_docs": 0},
        {"n_causal_fake": 0, "n_causal_real": 0, "n_confounder": 0, "n_noise": 0},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(SynthConfigError):
        SynthConfig(**kwargs)


def test_config_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"n_docs": 50, "seed": 3}))
    assert load_config(p) == SynthConfig(n_docs=50, seed=3)
    p.write_text(json.dumps({"n_docz": 50}))
    with pytest.raises(SynthConfigError, match="n_docz"):
        load_config(p)
    assert SynthConfig.from_dict(SynthConfig().to_dict()) == SynthConfig()
