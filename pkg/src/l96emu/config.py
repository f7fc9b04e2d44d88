"""Experiment configuration: defaults, YAML loading and hashing.

Values are resolved in three layers: built-in defaults (desk or full
scale), then the YAML file, then command-line overrides.
"""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

METHODS = ("esn", "ann", "lstm")


@dataclass
class DynamicsSection:
    F: float = 20.0
    a: float = 1.0
    b: float = 10.0
    c: float = 10.0
    d: float = 10.0
    e: float = 10.0
    g: float = 10.0
    h: float = 1.0
    K: int = 8
    J: int = 8
    I: int = 8


@dataclass
class DataSection:
    dt: float = 0.005
    n_steps: int = 2_000_000
    spinup_steps: int = 2000
    trajectory: str = ""      # empty: <out>/trajectory.bin
    chunk: int = 1_000_000


@dataclass
class SplitSection:
    n_train: int = 100_000
    n_test: int = 2000
    n_ics: int = 10
    min_separation: int = 2000
    train_split: int = 0


@dataclass
class EsnSection:
    D: int = 2000
    rho: float = 0.1
    degree: float = 3.0
    input_scale: float = 0.1
    alpha: float = 1e-4
    transform: str = "T2"
    warmup: int = 100


@dataclass
class AnnSection:
    hidden: list = field(default_factory=lambda: [100, 100, 100, 100])
    learning_rate: float = 1e-3
    batch_size: int = 100
    loss: str = "mae"
    epochs: int = 30
    val_fraction: float = 0.05
    patience: int = 3
    min_delta: float = 1e-5


@dataclass
class LstmSection:
    d_h: int = 50
    q: int = 3
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 100
    epochs: int = 30
    val_fraction: float = 0.05
    patience: int = 3
    min_delta: float = 1e-5


@dataclass
class EvaluateSection:
    pred_steps: int = 2000
    threshold: float = 0.3
    error_cap: float = 10.0


@dataclass
class ClimateSection:
    length: int = 100_000
    n_quartiles: int = 4
    grid_points: int = 401
    baseline_chunks: int = 8


@dataclass
class SweepSection:
    kind: str = "N"
    n_grid: list = field(default_factory=lambda: [10_000, 30_000, 100_000])
    d_grid: list = field(default_factory=lambda: [500, 1000, 2000])
    methods: list = field(default_factory=lambda: list(METHODS))


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/default"
    method: str = "esn"
    threads: int = 1
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    data: DataSection = field(default_factory=DataSection)
    splits: SplitSection = field(default_factory=SplitSection)
    esn: EsnSection = field(default_factory=EsnSection)
    ann: AnnSection = field(default_factory=AnnSection)
    lstm: LstmSection = field(default_factory=LstmSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    climate: ClimateSection = field(default_factory=ClimateSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    @property
    def out_dir(self):
        return Path(self.out)

    @property
    def trajectory_path(self):
        return Path(self.data.trajectory) if self.data.trajectory \
            else self.out_dir / "trajectory.bin"

    def config_hash(self):
        """Hash of everything that can change a result (not ``out``/``threads``)."""
        doc = self.to_dict()
        doc.pop("out")
        doc.pop("threads")
        doc["data"].pop("trajectory")
        raw = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(raw).hexdigest()[:16]

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        positive = {
            "data.dt": self.data.dt, "data.n_steps": self.data.n_steps,
            "data.chunk": self.data.chunk, "splits.n_train": self.splits.n_train,
            "splits.n_test": self.splits.n_test, "splits.n_ics": self.splits.n_ics,
            "evaluate.pred_steps": self.evaluate.pred_steps,
            "evaluate.threshold": self.evaluate.threshold,
            "evaluate.error_cap": self.evaluate.error_cap,
            "climate.length": self.climate.length,
            "climate.n_quartiles": self.climate.n_quartiles,
            "climate.grid_points": self.climate.grid_points,
            "esn.D": self.esn.D, "lstm.d_h": self.lstm.d_h, "lstm.q": self.lstm.q,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.data.spinup_steps < 0 or self.splits.min_separation < 0:
            raise ConfigError("spinup_steps and min_separation must be >= 0")
        if not 0 <= self.splits.train_split < self.splits.n_ics:
            raise ConfigError("splits.train_split must index one of the n_ics splits")
        if self.evaluate.pred_steps > self.splits.n_test:
            raise ConfigError("evaluate.pred_steps cannot exceed splits.n_test")
        if self.esn.warmup < 1 or self.esn.warmup > self.splits.n_train:
            raise ConfigError("esn.warmup must lie in [1, n_train]")
        if self.lstm.q >= self.splits.n_train:
            raise ConfigError("lstm.q must be smaller than n_train")
        if self.sweep.kind not in ("N", "D"):
            raise ConfigError(f"sweep.kind must be 'N' or 'D', got {self.sweep.kind!r}")
        bad = [m for m in self.sweep.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown sweep methods {bad}")
        return self


PAPER_SCALE = {
    "data": {"n_steps": 100_000_000},
    "splits": {"n_train": 500_000, "n_ics": 100},
    "esn": {"D": 5000},
    "climate": {"length": 4_000_000},
    "sweep": {"n_grid": [10_000, 50_000, 100_000, 500_000, 1_000_000, 2_000_000],
              "d_grid": [500, 1000, 2000, 3000, 5000]},
}


def _coerce(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        # YAML reads 1e5 as a string and 100000.0 as a float; accept both if integral
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        if default and not isinstance(default[0], str):
            return [_coerce(v, default[0], f"{where}[{i}]") for i, v in enumerate(value)]
        return list(value)
    return value


def _merge(obj, doc, where=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(doc).__name__}")
    names = {f.name for f in dataclasses.fields(obj)}
    for key, value in doc.items():
        path = f"{where}.{key}" if where else str(key)
        if key not in names:
            raise ConfigError(f"unknown config key {path!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _merge(current, value, path)
        else:
            setattr(obj, key, _coerce(value, current, path))


def load_config(path=None, paper_scale=False, overrides=None) -> ExperimentConfig:
    """Build a validated config from defaults, an optional YAML file and overrides."""
    cfg = ExperimentConfig()
    if paper_scale:
        _merge(cfg, PAPER_SCALE)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            doc = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        _merge(cfg, doc)
    if overrides:
        _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def from_dict(doc) -> ExperimentConfig:
    cfg = ExperimentConfig()
    _merge(cfg, doc)
    return cfg.validate()
