import numpy as np
import pytest

from imbalanced_ts.dataset import SyntheticConfig, TimeSeriesDataset, WindowSpec, generate_synthetic


@pytest.fixture(scope="session")
def standard_synthetic():
    """The default 100k-step synthetic series used across statistical tests."""
    return generate_synthetic(SyntheticConfig())


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(SyntheticConfig(length=20_000, seed=5))


@pytest.fixture
def window30():
    return WindowSpec(30, 30)


def make_dataset(target, extra=None, names=None):
    cols = [np.asarray(target, dtype=float)]
    if extra is not None:
        cols += [np.asarray(c, dtype=float) for c in extra]
    names = names or ["y"] + [f"x{i}" for i in range(len(cols) - 1)]
    return TimeSeriesDataset(tuple(names), np.column_stack(cols), target_channel=names[0])


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# Published TCN block of the cross-evaluation table: rows trained on, columns
# evaluated on, both in the order below.
TCN_LABELS = ("None", "SUS-1", "SUS-3", "IHS")
TCN_MEAN = np.array(
    [
        [0.871, 1.684, 3.060, 3.142],
        [1.007, 1.462, 2.686, 2.703],
        [3.41, 2.4, 1.592, 2.283],
        [2.579, 2.016, 1.845, 2.145],
    ]
)
TCN_STD = np.array(
    [
        [0.021, 0.037, 0.068, 0.05],
        [0.079, 0.041, 0.066, 0.063],
        [0.213, 0.091, 0.124, 0.008],
        [0.231, 0.091, 0.062, 0.039],
    ]
)


def write_tcn_csv(path):
    lines = ["train_label,eval_label,mean,std,n"]
    for i, a in enumerate(TCN_LABELS):
        for j, b in enumerate(TCN_LABELS):
            lines.append(f"{a},{b},{float(TCN_MEAN[i, j])!r},{float(TCN_STD[i, j])!r},10")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
