"""Weight-based under-sampling: threshold (TUS), stochastic (SUS) and
inverse-histogram (IHS) samplers with fixed-size weighted draws."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import histogram
from .errors import DataError, EmptyData, ZeroInclusionWeights
from .weights import WeightSeries


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


@dataclass(frozen=True)
class NoSampling:
    label = "None"


@dataclass(frozen=True)
class TUS:
    """Keep indices with weight strictly above ``tau``, all equally likely."""

    tau: float

    def __post_init__(self):
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise DataError(f"TUS threshold must be finite and >= 0, got {self.tau!r}")

    @property
    def label(self):
        return f"TUS-{_fmt(self.tau)}"


@dataclass(frozen=True)
class SUS:
    """Relative inclusion probability ``(w / max w) ** factor``."""

    factor: float

    def __post_init__(self):
        if not (self.factor > 0 and math.isfinite(self.factor)):
            raise DataError(f"SUS factor must be finite and > 0, got {self.factor!r}")

    @property
    def label(self):
        return f"SUS-{_fmt(self.factor)}"


@dataclass(frozen=True)
class IHS:
    """Relative inclusion probability ``1 / count(bin of w)``.

    ``width`` of None means Freedman-Diaconis binning of the weights.
    """

    width: float | None = None

    def __post_init__(self):
        if self.width is not None and not (self.width > 0 and math.isfinite(self.width)):
            raise DataError(f"IHS bin width must be finite and > 0, got {self.width!r}")

    @property
    def label(self):
        return "IHS" if self.width is None else f"IHS-{_fmt(self.width)}"


SamplerSpec = Union[NoSampling, TUS, SUS, IHS]

LABEL_FORMS = ("None", "TUS-<tau>", "SUS-<factor>", "IHS", "IHS-<bin width>")
_LABEL_RE = re.compile(r"^\s*(none|tus|sus|ihs)\s*(?:-\s*(\S+))?\s*$", re.IGNORECASE)


def parse_sampler(label: str) -> SamplerSpec:
    """Parse a label such as ``"SUS-3"``, ``"TUS-2.5"``, ``"IHS"`` or ``"None"``."""
    m = _LABEL_RE.match(str(label))
    if m is None:
        raise DataError(f"unknown sampler label {label!r}; valid labels: {', '.join(LABEL_FORMS)}")
    kind, arg = m.group(1).lower(), m.group(2)
    try:
        value = None if arg is None else float(arg)
    except ValueError:
        raise DataError(
            f"bad parameter in sampler label {label!r}; valid labels: {', '.join(LABEL_FORMS)}"
        ) from None
    if kind == "none" and value is None:
        return NoSampling()
    if kind == "ihs":
        return IHS(value)
    if kind in ("tus", "sus") and value is not None:
        return TUS(value) if kind == "tus" else SUS(value)
    raise DataError(f"unknown sampler label {label!r}; valid labels: {', '.join(LABEL_FORMS)}")


def inclusion_weight(sampler: SamplerSpec, w: float, hist: histogram.Histogram | None = None) -> float:
    """Relative inclusion weight of a single sample with weight ``w``.

    For SUS ``w`` must already be normalised to [0, 1]; IHS needs the
    histogram of the weights it was drawn from.
    """
    if not w >= 0:
        raise DataError(f"weights must be nonnegative, got {w!r}")
    if isinstance(sampler, NoSampling):
        return 1.0
    if isinstance(sampler, TUS):
        return 1.0 if w > sampler.tau else 0.0
    if isinstance(sampler, SUS):
        if w > 1:
            raise DataError(f"SUS expects a weight normalised to [0, 1], got {w!r}")
        return float(w) ** sampler.factor
    if isinstance(sampler, IHS):
        if hist is None:
            raise DataError("IHS inclusion weights need a histogram")
        return 1.0 / histogram.lookup(hist, w)
    raise TypeError(f"unsupported sampler: {sampler!r}")


def inclusion_weights(sampler: SamplerSpec, weights) -> np.ndarray:
    """Inclusion weights for a whole weight sample, as used by :func:`draw`.

    SUS divides by the sample maximum before exponentiation; IHS builds its
    histogram from the sample itself.
    """
    w = np.asarray(weights, dtype=np.float64)
    if isinstance(sampler, NoSampling):
        return np.ones_like(w)
    if isinstance(sampler, TUS):
        return (w > sampler.tau).astype(np.float64)
    if isinstance(sampler, SUS):
        top = w.max()
        if top == 0:
            return np.zeros_like(w)
        return (w / top) ** sampler.factor
    if isinstance(sampler, IHS):
        hist = histogram.build(w, histogram.resolve_width(w, sampler.width))
        return 1.0 / histogram.lookup(hist, w)
    raise TypeError(f"unsupported sampler: {sampler!r}")


# --------------------------------------------------------------------------
# Per-index uniforms
# --------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def index_uniforms(seed: int, indices) -> np.ndarray:
    """Uniforms in (0, 1) that depend only on ``(seed, index)``.

    Counter-based: the value for an index never depends on which other
    indices are drawn or in which order.
    """
    if seed < 0:
        raise DataError(f"seed must be nonnegative, got {seed}")
    idx = np.asarray(indices, dtype=np.int64).astype(np.uint64)
    s = _splitmix64(np.array([seed & _MASK64], dtype=np.uint64))[0]
    z = _splitmix64(_splitmix64(idx) ^ s)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


# --------------------------------------------------------------------------
# Drawing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleIndexSet:
    indices: np.ndarray
    sampler: SamplerSpec
    seed: int
    source: tuple[int, int]
    n_requested: int

    @property
    def label(self) -> str:
        return self.sampler.label

    def __len__(self):
        return self.indices.size

    def provenance(self) -> dict:
        params = {k: v for k, v in vars(self.sampler).items()}
        return {
            "sampler": self.label,
            "kind": type(self.sampler).__name__,
            "parameters": params,
            "seed": int(self.seed),
            "source_range": [int(self.source[0]), int(self.source[1])],
            "n_requested": int(self.n_requested),
            "n_drawn": int(self.indices.size),
        }


def draw(sampler: SamplerSpec, weight_series: WeightSeries, n: int, seed: int) -> SampleIndexSet:
    """Draw ``min(n, #positive inclusion weights)`` distinct indices.

    Weighted sampling without replacement with exponential keys: each eligible
    index gets ``log(u) / inclusion_weight`` with ``u`` from
    :func:`index_uniforms`, and the ``n`` largest keys win. The result is
    sorted and depends only on the inputs and ``seed``.
    """
    if n < 1:
        raise DataError(f"sample size must be >= 1, got {n}")
    if len(weight_series) == 0:
        raise EmptyData("cannot sample from an empty weight series")
    incl = inclusion_weights(sampler, weight_series.weights)
    eligible = np.flatnonzero(incl > 0)
    if eligible.size == 0:
        raise ZeroInclusionWeights(f"{sampler.label}: every inclusion weight is zero")
    idx = weight_series.indices[eligible]
    k = min(n, eligible.size)
    if k < eligible.size:
        keys = np.log(index_uniforms(seed, idx)) / incl[eligible]
        order = np.lexsort((idx, -keys))
        idx = np.sort(idx[order[:k]])
    idx = np.array(idx, dtype=np.int64)
    idx.flags.writeable = False
    src = (int(weight_series.indices[0]), int(weight_series.indices[-1]) + 1)
    return SampleIndexSet(idx, sampler, int(seed), src, int(n))


def write_sample(sample: SampleIndexSet, csv_path, json_path=None) -> None:
    """One-column ``index`` CSV plus an optional JSON provenance record."""
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index"])
        writer.writerows([i] for i in sample.indices.tolist())
    if json_path is not None:
        Path(json_path).write_text(json.dumps(sample.provenance(), indent=2) + "\n", encoding="utf-8")


def read_sample_indices(csv_path) -> np.ndarray:
    with Path(csv_path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "index" not in (reader.fieldnames or ()):
            raise DataError(f"{csv_path}: missing column 'index'")
        return np.array([int(r["index"]) for r in reader], dtype=np.int64)
