"""Standardisation, train/test splitting and model-facing views of X series."""
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CapacityError, DegenerateDataError

__all__ = [
    "SlowSeries",
    "SplitSpec",
    "Split",
    "standardize",
    "make_splits",
    "delta_pairs",
    "embed",
]

MAX_PLACEMENT_ATTEMPTS = 10**6


@dataclass
class SlowSeries:
    """X samples (``n_steps x K``) taken every ``dt``."""

    samples: np.ndarray
    dt: float = 0.005
    standardized: bool = False
    mean: np.ndarray = None
    std: np.ndarray = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {self.samples.shape}")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def n_components(self):
        return self.samples.shape[1]

    def to_physical(self, values=None):
        """Undo standardisation on ``values`` (default: the whole series)."""
        values = self.samples if values is None else np.asarray(values)
        if not self.standardized:
            return values.copy()
        return values * self.std + self.mean

    def to_standard(self, values):
        """Apply this series' standardisation to raw ``values``."""
        if not self.standardized:
            raise ValueError("series carries no standardisation statistics")
        return (np.asarray(values) - self.mean) / self.std


def standardize(series: SlowSeries) -> SlowSeries:
    """Per-component zero mean / unit standard deviation over the whole series."""
    if series.standardized:
        raise ValueError("series is already standardized")
    if len(series) < 2:
        raise CapacityError("need at least 2 samples to standardize")
    mean = series.samples.mean(axis=0)
    std = series.samples.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DegenerateDataError(f"zero-variance component(s) {bad.tolist()}")
    return replace(series, samples=(series.samples - mean) / std,
                   standardized=True, mean=mean, std=std)


@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    n_test: int = 2000
    n_sets: int = 100
    min_separation: int = 2000
    seed: int = 0

    @property
    def segment_length(self):
        return self.n_train + self.n_test

    @property
    def required_length(self):
        return self.n_sets * self.segment_length + (self.n_sets - 1) * self.min_separation


@dataclass
class Split:
    index: int
    start: int
    train: np.ndarray = field(repr=False)
    test: np.ndarray = field(repr=False)

    @property
    def n_train(self):
        return self.train.shape[0]

    @property
    def train_range(self):
        return self.start, self.start + self.n_train

    @property
    def test_range(self):
        return self.start + self.n_train, self.start + self.n_train + self.test.shape[0]


def _place_segments(length, spec: SplitSpec, rng):
    seg = spec.segment_length
    last = length - seg
    starts = np.empty(0, dtype=np.int64)
    attempts = 0
    # neighbouring segments must leave min_separation free samples in between
    reach = seg + spec.min_separation
    while starts.size < spec.n_sets:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise CapacityError(
                f"could not place {spec.n_sets} segments of length {seg} with gap "
                f"{spec.min_separation} in {length} samples after {attempts} attempts; "
                f"need at least {spec.required_length} samples (more in practice)"
            )
        attempts += 1
        s = int(rng.integers(0, last + 1))
        if starts.size and np.any(np.abs(starts - s) < reach):
            continue
        starts = np.append(starts, s)
    return starts


def make_splits(series: SlowSeries, spec: SplitSpec) -> list:
    """Randomly place ``n_sets`` train/test segments, deterministic in ``spec.seed``.

    Splits are returned in placement order; each holds views into ``series``.
    """
    if spec.n_train < 1 or spec.n_test < 1 or spec.n_sets < 1:
        raise ValueError("n_train, n_test and n_sets must be positive")
    if spec.min_separation < 0:
        raise ValueError("min_separation must be >= 0")
    length = len(series)
    if length < spec.required_length:
        raise CapacityError(
            f"series has {length} samples but {spec.n_sets} splits of "
            f"{spec.segment_length} with gap {spec.min_separation} need "
            f"{spec.required_length}"
        )
    rng = np.random.default_rng(spec.seed)
    starts = _place_segments(length, spec, rng)
    return splits_from_starts(series, starts, spec.n_train, spec.n_test)


def splits_from_starts(series: SlowSeries, starts, n_train, n_test) -> list:
    x = series.samples
    out = []
    for i, s in enumerate(starts):
        s = int(s)
        if s < 0 or s + n_train + n_test > len(series):
            raise CapacityError(f"segment at {s} runs past the end of the series")
        out.append(Split(i, s, x[s:s + n_train], x[s + n_train:s + n_train + n_test]))
    return out


def delta_pairs(train):
    """Inputs ``X(t)`` and increments ``X(t+dt) - X(t)``; ``N-1`` rows each."""
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise CapacityError("delta_pairs needs at least 2 samples")
    return x[:-1], np.diff(x, axis=0)


def embed(train, q: int):
    """Time-delay windows of ``q`` consecutive rows and the row that follows.

    Returns ``(windows, targets)`` with shapes ``(N-q, q, K)`` and ``(N-q, K)``;
    ``windows[t]`` is ``X[t:t+q]`` and ``targets[t]`` is ``X[t+q]``.
    """
    x = np.asarray(train, dtype=np.float64)
    if q < 1:
        raise ValueError("lookback q must be >= 1")
    if x.ndim != 2 or x.shape[0] <= q:
        raise CapacityError(f"need more than q={q} samples, got {x.shape[0]}")
    windows = sliding_window_view(x[:-1], q, axis=0).transpose(0, 2, 1)
    return windows, x[q:]
