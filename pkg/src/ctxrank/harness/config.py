"""Run configuration: one JSON document plus dotted ``key=value`` overrides."""

import dataclasses
import json
from dataclasses import asdict, dataclass, field, fields

from ..data import SyntheticSpec
from ..errors import ConfigError, RankingError
from ..losses import LossSpec
from ..model import ModelConfig


@dataclass
class DataConfig:
    train: str | None = None
    valid: str | None = None
    test: str | None = None
    synthetic: SyntheticSpec | None = None
    n_valid: int = 100
    n_test: int = 100


@dataclass
class OptimConfig:
    lr: float = 1e-3
    epochs: int = 20
    decay_factor: float = 0.1
    decay_at_epochs: list = field(default_factory=list)
    batch_size: int = 16


@dataclass
class RerankConfig:
    folds: int = 5


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossSpec = field(default_factory=LossSpec)
    optim: OptimConfig = field(default_factory=OptimConfig)
    rerank: RerankConfig = field(default_factory=RerankConfig)
    seed: int = 0
    precision: str = "f64"
    slate_length: int = 30
    cutoffs: list = field(default_factory=lambda: [5, 10, 30, 60])

    def validate(self):
        if self.precision not in ("f32", "f64"):
            raise ConfigError(f"precision must be f32 or f64, got {self.precision!r}")
        if self.slate_length < 1:
            raise ConfigError("slate_length must be >= 1")
        if not self.cutoffs or any(int(k) != k or k < 1 for k in self.cutoffs):
            raise ConfigError(f"cutoffs must be positive integers, got {self.cutoffs}")
        o = self.optim
        if o.lr <= 0 or o.epochs < 0 or o.batch_size < 1 or o.decay_factor <= 0:
            raise ConfigError("optim: need lr > 0, epochs >= 0, batch_size >= 1, decay_factor > 0")
        d = self.data
        if d.synthetic is None and d.train is None:
            raise ConfigError("data: give either a synthetic spec or a train path")
        if d.synthetic is not None and d.train is not None:
            raise ConfigError("data: synthetic and file paths are mutually exclusive")
        try:
            self.loss.validate()
            if d.synthetic is not None:
                d.synthetic.validate()
        except RankingError as exc:
            raise ConfigError(str(exc)) from exc
        if self.model.output_dim != self.loss.output_dim:
            self.model.output_dim = self.loss.output_dim
        # d_f is filled from the data later; validate the rest now
        probe = dataclasses.replace(self.model, d_f=self.model.d_f or 1)
        try:
            probe.validate()
        except RankingError as exc:
            raise ConfigError(str(exc)) from exc
        return self


_NESTED = {
    (RunConfig, "data"): DataConfig,
    (RunConfig, "model"): ModelConfig,
    (RunConfig, "loss"): LossSpec,
    (RunConfig, "optim"): OptimConfig,
    (RunConfig, "rerank"): RerankConfig,
    (DataConfig, "synthetic"): SyntheticSpec,
}

# short names accepted on the command line
ALIASES = {"l": "slate_length", "N": "model.N", "H": "model.H", "d_h": "model.d_h",
           "d_fc": "model.d_fc", "p_drop": "model.p_drop", "lr": "optim.lr"}


def _build(cls, raw, path=""):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path.rstrip('.') or 'config'} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {path.rstrip('.') or 'config'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        sub = _NESTED.get((cls, name))
        if sub is not None and value is not None:
            value = _build(sub, value, f"{path}{name}.")
        kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(raw):
    return _build(RunConfig, raw).validate()


def load_config(path=None, overrides=(), seed=None, precision=None):
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        apply_override(raw, item)
    if seed is not None:
        raw["seed"] = seed
    if precision is not None:
        raw["precision"] = precision
    return config_from_dict(raw)


def apply_override(raw, item):
    """Set ``raw[a][b] = value`` from ``"a.b=value"``; values parse as JSON when possible."""
    key, sep, text = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key = ALIASES.get(key, key)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {part} is not a section")
    node[parts[-1]] = value


def config_to_dict(config):
    return asdict(config)


def dump_config(config):
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"
