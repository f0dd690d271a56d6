"""Freedman-Diaconis binning, histogram lookup and before/after density reports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyData, OutOfSupport


def fd_bin_width(values) -> float:
    """Freedman-Diaconis bin width ``2 * IQR / cbrt(n)``.

    Quartiles use linear interpolation between order statistics at position
    ``p * (n - 1)``. If the IQR is zero the width falls back to ``range / B``
    with Sturges' ``B = ceil(log2 n) + 1``; if the range is zero too the width
    is 1.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyData("cannot estimate a bin width from no values")
    if not np.all(np.isfinite(x)):
        raise DataError("values must be finite")
    n = x.size
    q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
    iqr = q3 - q1
    if iqr > 0:
        return float(2.0 * iqr / np.cbrt(n))
    span = float(x.max() - x.min())
    if span > 0:
        return span / (math.ceil(math.log2(n)) + 1)
    return 1.0


@dataclass(frozen=True)
class Histogram:
    """Bins ``[e_i, e_{i+1})`` with the last bin closed on the right."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def bin_index(self, values) -> np.ndarray:
        """Bin number of each value; raises :class:`OutOfSupport` outside the edges."""
        v = np.asarray(values, dtype=np.float64)
        lo, hi = self.edges[0], self.edges[-1]
        if np.any(~(v >= lo)) or np.any(~(v <= hi)):
            bad = v[~((v >= lo) & (v <= hi))].ravel()[0]
            raise OutOfSupport(f"value {bad!r} outside histogram support [{lo!r}, {hi!r}]")
        idx = np.searchsorted(self.edges, v, side="right") - 1
        return np.minimum(idx, self.n_bins - 1)


def build(values, width: float) -> Histogram:
    """Histogram of ``values`` with bins of ``width`` starting at ``min(values)``.

    The number of bins is ``max(1, ceil((max - min) / width))``.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyData("cannot build a histogram of no values")
    if not np.all(np.isfinite(x)):
        raise DataError("histogram values must be finite")
    if not (width > 0 and math.isfinite(width)):
        raise DataError(f"bin width must be positive and finite, got {width!r}")
    lo, hi = float(x.min()), float(x.max())
    n_bins = max(1, math.ceil((hi - lo) / width))
    edges = lo + width * np.arange(n_bins + 1, dtype=np.float64)
    # lo + B*width can round to just below hi
    edges[-1] = max(edges[-1], hi)
    if np.any(np.diff(edges) <= 0):
        raise DataError(f"bin width {width!r} is below the float resolution at {lo!r}")
    idx = np.minimum(np.searchsorted(edges, x, side="right") - 1, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    edges.flags.writeable = False
    counts.flags.writeable = False
    return Histogram(edges, counts)


def lookup(hist: Histogram, v):
    """Count of the bin containing ``v`` (scalar or array)."""
    counts = hist.counts[hist.bin_index(v)]
    return int(counts) if np.ndim(counts) == 0 else counts


def resolve_width(values, binning) -> float:
    """``binning`` is ``"auto"``/``None`` for Freedman-Diaconis or a fixed positive width."""
    if binning is None or binning == "auto":
        return fd_bin_width(values)
    return float(binning)


@dataclass(frozen=True)
class DensityReport:
    edges: np.ndarray
    density_before: np.ndarray
    density_after: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


def _density(counts, widths):
    return counts / (counts.sum() * widths)


def density_report(before, after, binning="auto") -> DensityReport:
    """Normalised densities of two weight samples on shared edges.

    ``before``/``after`` are :class:`~imbalanced_ts.weights.WeightSeries` or
    plain arrays of weights. The edges come from the union of both samples.
    """
    b = np.asarray(getattr(before, "weights", before), dtype=np.float64)
    a = np.asarray(getattr(after, "weights", after), dtype=np.float64)
    if b.size == 0 or a.size == 0:
        raise EmptyData("density report needs two nonempty samples")
    union = np.concatenate([b, a])
    edges = build(union, resolve_width(union, binning)).edges
    shared = Histogram(edges, np.zeros(edges.size - 1, dtype=np.int64))
    nb = edges.size - 1
    cb = np.bincount(shared.bin_index(b), minlength=nb)
    ca = np.bincount(shared.bin_index(a), minlength=nb)
    widths = np.diff(edges)
    return DensityReport(edges, _density(cb, widths), _density(ca, widths))


def flatness_ratio(density) -> float:
    """Max over min of the strictly positive bin densities."""
    d = np.asarray(density)
    pos = d[d > 0]
    if pos.size == 0:
        raise EmptyData("no positive density bins")
    return float(pos.max() / pos.min())


def write_density_csv(report: DensityReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "density_before", "density_after"])
        e = report.edges.tolist()
        for i, (db, da) in enumerate(zip(report.density_before.tolist(), report.density_after.tolist())):
            writer.writerow([repr(e[i]), repr(e[i + 1]), repr(db), repr(da)])


def read_density_csv(path) -> DensityReport:
    cols = ("bin_left", "bin_right", "density_before", "density_after")
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols if c not in (reader.fieldnames or ())]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        rows = [[float(r[c]) for c in cols] for r in reader]
    if not rows:
        raise EmptyData(f"{path} has no rows")
    arr = np.array(rows)
    edges = np.append(arr[:, 0], arr[-1, 1])
    return DensityReport(edges, arr[:, 2], arr[:, 3])


def render_ascii(report: DensityReport, max_rows: int = 24, bar_width: int = 30) -> str:
    """Side-by-side text bars of the before/after probability mass per bin.

    Adjacent bins are merged when there are more than ``max_rows`` of them.
    """
    mass_b = report.density_before * report.widths
    mass_a = report.density_after * report.widths
    n = mass_b.size
    groups = np.array_split(np.arange(n), min(n, max_rows))
    gb = np.array([mass_b[g].sum() for g in groups])
    ga = np.array([mass_a[g].sum() for g in groups])
    peak = max(gb.max(), ga.max()) or 1.0
    lines = [f"{'bin':>21}  {'before':<{bar_width}} {'after':<{bar_width}}"]
    for g, mb, ma in zip(groups, gb, ga):
        left, right = report.edges[g[0]], report.edges[g[-1] + 1]
        bar_b = "#" * round(bar_width * mb / peak)
        bar_a = "#" * round(bar_width * ma / peak)
        lines.append(f"[{left:9.3g},{right:9.3g})  {bar_b:<{bar_width}} {bar_a:<{bar_width}}")
    return "\n".join(lines)
