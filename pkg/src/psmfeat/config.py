"""Run configuration shared by the CLI and the sweep harness."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .learners import CLASSIFIERS, ForestParams, TrainConfig
from .matching import MODES
from .propensity import ESTIMATORS
from .ranking import METHODS

DEFAULT_GRID = (1, 2, 3, 5, 8, 10, 15, 20, 30, 40, 50, 65, 80, 100)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    # corpus
    balance: bool = True
    min_df: int = 5
    max_df_ratio: float = 0.95
    max_features: int | None = 2000
    remove_stopwords: bool = True
    # linear learners and propensity fits
    learning_rate: float = 1.0
    max_epochs: int = 300
    l2_lambda: float | None = None
    tolerance: float = 1e-4
    # forests
    n_trees: int = 100
    max_depth: int = 10
    forest_max_features: int | None = None
    # selection
    estimator: str = "logistic"
    stat_mode: str = "literal"
    caliper: float | None = None
    # evaluation
    classifier: str = "logistic"
    methods: tuple[str, ...] = ("psm", "df")
    grid: tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "grid", tuple(self.grid))
        self.validate()

    def validate(self) -> None:
        try:
            self.train_config()
            self.forest_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if not 0 < self.max_df_ratio <= 1:
            raise ConfigError("max_df_ratio must be in (0, 1]")
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError("max_features must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.stat_mode not in MODES:
            raise ConfigError(f"stat_mode must be one of {MODES}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}")
        if self.caliper is not None and not self.caliper >= 0:
            raise ConfigError("caliper must be >= 0")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if not self.grid:
            raise ConfigError("grid must be non-empty")
        for p in self.grid:
            if not (isinstance(p, (int, float)) and 0 < p <= 100):
                raise ConfigError(f"grid values must be in (0, 100], got {p!r}")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid values must be strictly increasing")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            l2_lambda=self.l2_lambda,
            tolerance=self.tolerance,
            seed=self.seed,
        )

    def forest_params(self) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.forest_max_features)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["grid"] = list(self.grid)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def merged(self, **overrides) -> "RunConfig":
        """Copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(changes) - {f.name for f in fields(self)})
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(f"invalid config value: {exc}") from None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid config value: {exc}") from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from None
    return RunConfig.from_dict(data)
