"""Synthetic corpora with a planted latent confounder and known causal words.

Each document draws a label, then a latent topic ``Z`` whose association with
the label is ``rho`` (fake documents have ``Z=1`` with probability ``rho``,
real documents with ``1 - rho``). Causal words depend on the label only,
confounder words on ``Z`` only, noise words on neither. Changing ``rho``
between the train and test splits shifts the confounder's usefulness while the
causal words keep theirs.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .corpus import FAKE, REAL, Corpus, Document, write_jsonl


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_docs: int = 2000
    n_causal_fake: int = 20
    n_causal_real: int = 20
    n_confounder: int = 20
    n_noise: int = 200
    p_causal_hi: float = 0.30
    p_causal_lo: float = 0.05
    p_conf_hi: float = 0.40
    p_conf_lo: float = 0.05
    rho_train: float = 0.9
    rho_test: float = 0.1
    p_noise: float = 0.10
    seed: int = 0

    def __post_init__(self):
        probs = ("p_causal_hi", "p_causal_lo", "p_conf_hi", "p_conf_lo", "rho_train", "rho_test", "p_noise")
        for name in probs:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthConfigError(f"{name} must lie in [0, 1], got {v}")
        if not self.p_causal_hi > self.p_causal_lo:
            raise SynthConfigError("p_causal_hi must exceed p_causal_lo")
        if not self.p_conf_hi > self.p_conf_lo:
            raise SynthConfigError("p_conf_hi must exceed p_conf_lo")
        sizes = ("n_causal_fake", "n_causal_real", "n_confounder", "n_noise")
        for name in sizes:
            if getattr(self, name) < 0:
                raise SynthConfigError(f"{name} must be >= 0")
        if sum(getattr(self, n) for n in sizes) < 1:
            raise SynthConfigError("vocabulary partition must hold at least one word")
        if self.n_docs < 1:
            raise SynthConfigError("n_docs must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SynthConfigError(f"unknown synth config key(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise SynthConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)


def _letters(i: int, width: int = 3) -> str:
    out = []
    for _ in range(width):
        i, r = divmod(i, 26)
        out.append(string.ascii_lowercase[r])
    return "".join(reversed(out))


def vocabulary_partition(cfg: SynthConfig) -> dict[str, list[str]]:
    return {
        "causal_fake": [f"fakecue{_letters(i)}" for i in range(cfg.n_causal_fake)],
        "causal_real": [f"realcue{_letters(i)}" for i in range(cfg.n_causal_real)],
        "confounder": [f"topic{_letters(i)}" for i in range(cfg.n_confounder)],
        "noise": [f"filler{_letters(i)}" for i in range(cfg.n_noise)],
    }


def _split(cfg: SynthConfig, rho: float, name: str, seed_seq) -> Corpus:
    rng = np.random.default_rng(seed_seq)
    part = vocabulary_partition(cfg)
    words = part["causal_fake"] + part["causal_real"] + part["confounder"] + part["noise"]
    n = cfg.n_docs
    fake = rng.random(n) < 0.5
    z = np.where(fake, rng.random(n) < rho, rng.random(n) < 1.0 - rho)

    hi, lo = cfg.p_causal_hi, cfg.p_causal_lo
    p_cf = np.where(fake, hi, lo)[:, None]
    p_cr = np.where(fake, lo, hi)[:, None]
    p_z = np.where(z, cfg.p_conf_hi, cfg.p_conf_lo)[:, None]
    probs = np.hstack([
        np.repeat(p_cf, cfg.n_causal_fake, axis=1),
        np.repeat(p_cr, cfg.n_causal_real, axis=1),
        np.repeat(p_z, cfg.n_confounder, axis=1),
        np.full((n, cfg.n_noise), cfg.p_noise),
    ])
    present = rng.random(probs.shape) < probs
    docs = []
    for i in range(n):
        text = " ".join(words[j] for j in np.flatnonzero(present[i]))
        docs.append(
            Document(
                id=f"{name}-{i:05d}",
                title="",
                content=text,
                label=FAKE if fake[i] else REAL,
                source=f"synth-{name}",
            )
        )
    return Corpus(tuple(docs), source=f"synth-{name}")


def generate(cfg: SynthConfig) -> tuple[Corpus, Corpus, frozenset[str]]:
    """Return ``(train, test, truth)``; truth is the set of causal tokens."""
    train_seq, test_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    train = _split(cfg, cfg.rho_train, "train", train_seq)
    test = _split(cfg, cfg.rho_test, "test", test_seq)
    part = vocabulary_partition(cfg)
    return train, test, frozenset(part["causal_fake"] + part["causal_real"])


def write_outputs(outdir: str | Path, train: Corpus, test: Corpus, truth) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(train, out / "train.jsonl")
    write_jsonl(test, out / "test.jsonl")
    (out / "truth.txt").write_text("".join(f"{t}\n" for t in sorted(truth)), encoding="utf-8")


def read_truth(path: str | Path) -> frozenset[str]:
    return frozenset(l.strip() for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip())


def load_config(path: str | Path) -> SynthConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SynthConfigError(f"cannot read synth config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise SynthConfigError("synth config must be a JSON object")
    return SynthConfig.from_dict(data)
