"""Multivariate time series container, windowing, chronological splits and
a seeded synthetic generator with rare ramp events."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyData,
    EmptyEvalSplit,
    EmptyTrainSplit,
    IndexOutOfRange,
    SeriesTooShort,
    UnknownChannel,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Immutable T x C matrix of finite values with named channels.

    ``values`` is stored as a read-only float64 array. ``dropped_rows`` records
    how many rows were rejected while loading (always 0 for generated data).
    """

    channel_names: tuple[str, ...]
    values: np.ndarray
    interval_seconds: float = 10.0
    target_channel: str | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        names = tuple(str(n) for n in self.channel_names)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"values must be a T x C matrix, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise EmptyData("dataset needs at least one row and one channel")
        if len(names) != values.shape[1]:
            raise DataError(
                f"{len(names)} channel names for {values.shape[1]} value columns"
            )
        if len(set(names)) != len(names):
            raise DataError(f"channel names are not unique: {names}")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain NaN or infinite entries")
        if not (self.interval_seconds > 0 and math.isfinite(self.interval_seconds)):
            raise DataError("interval_seconds must be a positive finite number")
        target = names[0] if self.target_channel is None else self.target_channel
        if target not in names:
            raise UnknownChannel(f"target channel {target!r} not in {list(names)}")
        values.flags.writeable = False
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target_channel", target)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def channel_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise UnknownChannel(
                f"unknown channel {name!r}; available: {list(self.channel_names)}"
            ) from None

    @property
    def target_index(self) -> int:
        return self.channel_index(self.target_channel)

    @property
    def target(self) -> np.ndarray:
        return self.values[:, self.target_index]

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.channel_index(name)]


@dataclass(frozen=True)
class WindowSpec:
    length_steps: int
    horizon_steps: int
    target_channel: str | None = None

    def __post_init__(self):
        for name in ("length_steps", "horizon_steps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise DataError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class IndexRange:
    """Half-open range ``[start, stop)`` of window-end indices."""

    start: int
    stop: int

    def __post_init__(self):
        if self.start < 0 or self.stop <= self.start:
            raise DataError(f"invalid index range [{self.start}, {self.stop})")

    def __len__(self):
        return self.stop - self.start

    def __iter__(self):
        return iter(range(self.start, self.stop))

    def __contains__(self, t):
        return self.start <= t < self.stop

    def contains_range(self, other: IndexRange) -> bool:
        return self.start <= other.start and other.stop <= self.stop

    def to_array(self) -> np.ndarray:
        return np.arange(self.start, self.stop, dtype=np.int64)


def _target_index(dataset: TimeSeriesDataset, window_spec: WindowSpec) -> int:
    name = window_spec.target_channel or dataset.target_channel
    return dataset.channel_index(name)


# --------------------------------------------------------------------------
# CSV loading
# --------------------------------------------------------------------------


def _parse_row(row):
    try:
        vals = [float(x) for x in row]
    except ValueError:
        return None
    if not all(math.isfinite(v) for v in vals):
        return None
    return vals


def load_csv(
    path,
    target_channel: str | None = None,
    interval_seconds: float = 10.0,
) -> TimeSeriesDataset:
    """Read a header + numeric rows CSV into a dataset.

    Rows with an unparseable, NaN or infinite field are dropped; the number of
    dropped rows is logged and stored on ``dataset.dropped_rows``. A row with the
    wrong number of fields is an error, not a dropped row.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyData(f"{path} is empty")
        header = [h.strip() for h in header]
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            parsed = _parse_row(row)
            if parsed is None:
                dropped += 1
            else:
                rows.append(parsed)
    if target_channel is not None and target_channel not in header:
        raise UnknownChannel(f"target channel {target_channel!r} not in header {header}")
    if not rows:
        raise EmptyData(f"{path} has no usable data rows ({dropped} dropped)")
    if dropped:
        logger.warning("%s: dropped %d row(s) with missing or non-numeric values", path, dropped)
    return TimeSeriesDataset(
        channel_names=tuple(header),
        values=np.asarray(rows, dtype=np.float64),
        interval_seconds=interval_seconds,
        target_channel=target_channel,
        dropped_rows=dropped,
    )


def write_csv(dataset: TimeSeriesDataset, path) -> None:
    """Write ``dataset`` with shortest round-trip float formatting."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.channel_names)
        for row in dataset.values.tolist():
            writer.writerow([repr(v) for v in row])


# --------------------------------------------------------------------------
# Windowing and splits
# --------------------------------------------------------------------------


def valid_indices(dataset: TimeSeriesDataset, window_spec: WindowSpec) -> IndexRange:
    """Window-end indices ``t`` with a full input window and an in-range target.

    That is ``L-1 <= t <= T-Δ-1``, returned as the half-open ``[L-1, T-Δ)``.
    """
    L, d, T = window_spec.length_steps, window_spec.horizon_steps, dataset.n_steps
    if T < L + d:
        raise SeriesTooShort(
            f"series of length {T} is shorter than window {L} + horizon {d}"
        )
    return IndexRange(L - 1, T - d)


def window_at(dataset: TimeSeriesDataset, window_spec: WindowSpec, t: int):
    """Return ``(input, target)``: rows ``t-L+1..t`` and the target at ``t+Δ``."""
    valid = valid_indices(dataset, window_spec)
    if t not in valid:
        raise IndexOutOfRange(
            f"index {t} outside valid window range [{valid.start}, {valid.stop})"
        )
    L = window_spec.length_steps
    window = dataset.values[t - L + 1 : t + 1]
    target = float(dataset.values[t + window_spec.horizon_steps, _target_index(dataset, window_spec)])
    return window, target


def windows_at(dataset: TimeSeriesDataset, window_spec: WindowSpec, indices):
    """Vectorised :func:`window_at`: returns ``(N x L x C windows, N targets)``."""
    indices = np.asarray(indices, dtype=np.int64)
    valid = valid_indices(dataset, window_spec)
    if indices.size and (indices.min() < valid.start or indices.max() >= valid.stop):
        raise IndexOutOfRange(
            f"indices outside valid window range [{valid.start}, {valid.stop})"
        )
    L = window_spec.length_steps
    view = np.lib.stride_tricks.sliding_window_view(dataset.values, L, axis=0)
    # view[i] covers rows i..i+L-1 with shape (C, L)
    windows = view[indices - L + 1].transpose(0, 2, 1)
    targets = dataset.values[indices + window_spec.horizon_steps, _target_index(dataset, window_spec)]
    return windows, targets


def split_chronological(
    dataset: TimeSeriesDataset, window_spec: WindowSpec, train_fraction: float
) -> tuple[IndexRange, IndexRange]:
    """Split the valid indices into an early train range and a late eval range.

    The first ``floor(fraction * V)`` valid indices train; ``L + Δ`` indices
    after them are discarded so no eval window or target touches train rows.
    """
    if not 0 < train_fraction < 1:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    valid = valid_indices(dataset, window_spec)
    gap = window_spec.length_steps + window_spec.horizon_steps
    n_train = math.floor(train_fraction * len(valid))
    if n_train < 1:
        raise EmptyTrainSplit(f"train split of {len(valid)} valid indices is empty")
    eval_start = valid.start + n_train + gap
    if eval_start >= valid.stop:
        raise EmptyEvalSplit(
            f"no eval indices left: {len(valid)} valid, {n_train} train, gap {gap}"
        )
    return IndexRange(valid.start, valid.start + n_train), IndexRange(eval_start, valid.stop)


# --------------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic rare-ramp generator.

    ``noise_std`` is the stationary standard deviation of the mean-reverting
    baseline fluctuation, not the per-step innovation.
    """

    length: int = 100_000
    mean_reversion: float = 0.02
    noise_std: float = 0.5
    event_prob: float = 0.001
    ramp_magnitude: float = 10.0
    event_duration: int = 50
    n_exogenous: int = 2
    seed: int = 0
    baseline: float = 70.0
    lead_steps: int = 20
    decay_rate: float = 0.005
    exog_noise: float = 1.5
    interval_seconds: float = 10.0
    target_channel: str = "temperature"

    def __post_init__(self):
        def bad(name, msg):
            raise ConfigError(name, msg)

        if not isinstance(self.length, int) or self.length < 2:
            bad("length", f"must be an integer >= 2, got {self.length!r}")
        if not 0 < self.mean_reversion <= 1:
            bad("mean_reversion", f"must lie in (0, 1], got {self.mean_reversion!r}")
        if not self.noise_std >= 0:
            bad("noise_std", f"must be >= 0, got {self.noise_std!r}")
        if not 0 <= self.event_prob <= 1:
            bad("event_prob", f"must lie in [0, 1], got {self.event_prob!r}")
        if not math.isfinite(self.ramp_magnitude):
            bad("ramp_magnitude", "must be finite")
        if not isinstance(self.event_duration, int) or self.event_duration < 1:
            bad("event_duration", f"must be an integer >= 1, got {self.event_duration!r}")
        if not isinstance(self.n_exogenous, int) or self.n_exogenous < 0:
            bad("n_exogenous", f"must be an integer >= 0, got {self.n_exogenous!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", f"must be a non-negative integer, got {self.seed!r}")
        if not 0 < self.decay_rate <= 1:
            bad("decay_rate", f"must lie in (0, 1], got {self.decay_rate!r}")
        if not self.exog_noise >= 0:
            bad("exog_noise", f"must be >= 0, got {self.exog_noise!r}")
        if not isinstance(self.lead_steps, int) or self.lead_steps < 0:
            bad("lead_steps", f"must be an integer >= 0, got {self.lead_steps!r}")
        if not self.interval_seconds > 0:
            bad("interval_seconds", "must be positive")


@dataclass(frozen=True)
class SyntheticSeries:
    dataset: TimeSeriesDataset
    event_onsets: np.ndarray = field(repr=False)

    @property
    def n_events(self) -> int:
        return int(self.event_onsets.size)


def _exogenous_lead(config: SyntheticConfig, j: int) -> int:
    return config.lead_steps + 10 * j


def simulate(config: SyntheticConfig) -> SyntheticSeries:
    """Run the generator and also return the event onset indices."""
    rng = np.random.default_rng(config.seed)
    T, k = config.length, config.event_duration
    phi = 1.0 - config.mean_reversion
    max_lead = _exogenous_lead(config, config.n_exogenous - 1) if config.n_exogenous else 0
    n_ext = T + max_lead

    innovation_std = config.noise_std * math.sqrt(1.0 - phi * phi)
    base0 = rng.normal(0.0, config.noise_std)
    shocks = rng.normal(0.0, innovation_std, size=T)
    onset = rng.random(n_ext) < config.event_prob
    # number of ramps active at each step: onsets in (t-k, t]
    active = np.convolve(onset.astype(np.int64), np.ones(k, dtype=np.int64))[:n_ext]

    step = config.ramp_magnitude / k
    keep = 1.0 - config.decay_rate
    base = np.empty(T)
    offset = np.empty(T)
    b, e = base0, 0.0
    for t in range(T):
        if t:
            b = phi * b + shocks[t]
        e = e + step * active[t] if active[t] else keep * e
        base[t] = b
        offset[t] = e
    temperature = config.baseline + base + offset

    columns = [temperature]
    names = [config.target_channel]
    indicator = (active > 0).astype(np.float64)
    for j in range(config.n_exogenous):
        lead = _exogenous_lead(config, j)
        noise = rng.normal(0.0, config.exog_noise * (j + 1), size=T)
        columns.append(indicator[lead : lead + T] + noise)
        names.append(f"exog_{j}")

    dataset = TimeSeriesDataset(
        channel_names=tuple(names),
        values=np.column_stack(columns),
        interval_seconds=config.interval_seconds,
        target_channel=config.target_channel,
    )
    return SyntheticSeries(dataset, np.flatnonzero(onset[:T]))


def generate_synthetic(config: SyntheticConfig) -> TimeSeriesDataset:
    """Deterministic synthetic series: a mean-reverting target with rare ramps.

    Each step starts, with probability ``event_prob``, a linear ramp adding
    ``ramp_magnitude`` to the target over ``event_duration`` steps, after which
    the excess decays geometrically at ``decay_rate`` per step. Exogenous channel ``j`` is a
    copy of the ramp-active indicator with Gaussian noise of standard deviation
    ``exog_noise * (j + 1)`` that leads the target by ``lead_steps + 10 j``
    steps, so rises are partly predictable from the inputs.
    """
    return simulate(config).dataset
