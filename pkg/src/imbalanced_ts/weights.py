"""Per-window importance weights."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .dataset import IndexRange, TimeSeriesDataset, WindowSpec, _target_index, valid_indices
from .errors import DataError, EmptyData, IndexOutOfRange


@dataclass(frozen=True)
class TargetVariation:
    """``w_t = |y(t + delta) - y(t)|``."""

    delta_steps: int

    def __post_init__(self):
        if isinstance(self.delta_steps, bool) or int(self.delta_steps) != self.delta_steps or self.delta_steps < 1:
            raise DataError(f"delta_steps must be a positive integer, got {self.delta_steps!r}")


@dataclass(frozen=True)
class TargetLevel:
    """Forecast target ``y(t + horizon)``, shifted so the minimum over the range is 0."""


@dataclass(frozen=True)
class ChannelWindowStat:
    """A statistic of one input channel over the window rows ``t-L+1..t``."""

    channel: str
    stat: str = "mean"

    STATS = ("mean", "std", "max")

    def __post_init__(self):
        if self.stat not in self.STATS:
            raise DataError(f"stat must be one of {self.STATS}, got {self.stat!r}")


WeightFunctionSpec = Union[TargetVariation, TargetLevel, ChannelWindowStat]


@dataclass(frozen=True)
class WeightSeries:
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        w = np.array(self.weights, dtype=np.float64)
        if idx.ndim != 1 or w.shape != idx.shape:
            raise DataError("indices and weights must be 1-D arrays of equal length")
        if idx.size == 0:
            raise EmptyData("weight series is empty")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise DataError("indices must be strictly increasing")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("weights must be finite and nonnegative")
        idx.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.indices.size

    def subset(self, indices) -> WeightSeries:
        """Restrict to ``indices`` (which must all be present)."""
        indices = np.asarray(indices, dtype=np.int64)
        pos = np.searchsorted(self.indices, indices)
        if np.any(pos >= self.indices.size) or np.any(self.indices[np.minimum(pos, self.indices.size - 1)] != indices):
            raise IndexOutOfRange("some indices are not part of this weight series")
        return WeightSeries(indices, self.weights[pos])

    def weight_of(self, indices) -> np.ndarray:
        return self.subset(indices).weights


def compute_weights(
    dataset: TimeSeriesDataset,
    window_spec: WindowSpec,
    weight_spec: WeightFunctionSpec,
    index_range: IndexRange | None = None,
) -> WeightSeries:
    """Evaluate ``weight_spec`` at every window-end index of ``index_range``.

    Defaults to all valid indices. For :class:`TargetVariation` the offset is
    the spec's own ``delta_steps``, which must keep ``t + delta`` inside the
    series; matching it to the forecast horizon is the caller's job.
    """
    valid = valid_indices(dataset, window_spec)
    if index_range is None:
        index_range = valid
    if len(index_range) == 0:
        raise EmptyData("empty index range")
    if not valid.contains_range(index_range):
        raise IndexOutOfRange(
            f"range [{index_range.start}, {index_range.stop}) not within valid "
            f"indices [{valid.start}, {valid.stop})"
        )
    t = index_range.to_array()

    if isinstance(weight_spec, TargetVariation):
        y = dataset.values[:, _target_index(dataset, window_spec)]
        d = int(weight_spec.delta_steps)
        if t[-1] + d >= dataset.n_steps:
            raise IndexOutOfRange(f"t + {d} runs past the end of the series")
        w = np.abs(y[t + d] - y[t])
    elif isinstance(weight_spec, TargetLevel):
        y = dataset.values[:, _target_index(dataset, window_spec)]
        level = y[t + window_spec.horizon_steps]
        w = level - level.min()
    elif isinstance(weight_spec, ChannelWindowStat):
        x = dataset.channel(weight_spec.channel)
        L = window_spec.length_steps
        windows = np.lib.stride_tricks.sliding_window_view(x, L)[t - L + 1]
        w = getattr(np, weight_spec.stat)(windows, axis=1)
        if weight_spec.stat != "std":
            # a level statistic can be negative; shift like TargetLevel
            w = w - w.min()
    else:
        raise TypeError(f"unsupported weight function spec: {weight_spec!r}")
    return WeightSeries(t, w)


def write_weights_csv(series: WeightSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "weight"])
        for i, w in zip(series.indices.tolist(), series.weights.tolist()):
            writer.writerow([i, repr(w)])


def read_weights_csv(path) -> WeightSeries:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"index", "weight"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        rows = [(int(r["index"]), float(r["weight"])) for r in reader]
    if not rows:
        raise EmptyData(f"{path} has no rows")
    idx, w = zip(*rows)
    return WeightSeries(np.array(idx), np.array(w))


def summarize(series: WeightSeries) -> dict:
    """Quantile summary used by the ``weights`` subcommand."""
    w = series.weights
    qs = np.quantile(w, [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0])
    keys = ("min", "q25", "median", "q75", "q90", "q99", "max")
    out = {"count": int(w.size), "mean": float(w.mean())}
    out.update({k: float(v) for k, v in zip(keys, qs)})
    return out
