"""Imbalanced time-series forecasting: weight functions, weight-based
under-sampling and a train/eval cross-evaluation harness."""

from .dataset import (
    IndexRange,
    SyntheticConfig,
    TimeSeriesDataset,
    WindowSpec,
    generate_synthetic,
    load_csv,
    split_chronological,
    valid_indices,
    window_at,
)
from .evaluation import EvalMatrix, SelectionResult, cross_evaluate, max_error_row, rmse, select_sampler
from .histogram import DensityReport, Histogram, build, density_report, fd_bin_width, lookup
from .models import KNN, MLP, Persistence, Ridge, extract_features, fit, predict
from .sampling import IHS, SUS, TUS, NoSampling, SampleIndexSet, draw, inclusion_weight, parse_sampler
from .weights import ChannelWindowStat, TargetLevel, TargetVariation, WeightSeries, compute_weights

__version__ = "0.1.0"
