"""Train-sampler x eval-sampler RMSE matrix and min-of-max sampler selection."""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import models as M
from . import sampling as S
from .dataset import TimeSeriesDataset, WindowSpec, _target_index, split_chronological, windows_at
from .errors import DataError, EmptyData, ShapeMismatch
from .weights import TargetVariation, WeightFunctionSpec, compute_weights


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ShapeMismatch(f"{p.size} predictions for {t.size} truths")
    if p.size == 0:
        raise EmptyData("rmse of an empty sample")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def derive_seed(master: int, *parts) -> int:
    """64-bit seed from a master seed and labels/counters, order-sensitive."""
    h = hashlib.sha256(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f" + str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


@dataclass(frozen=True)
class CellRecord:
    """Raw outcome of one (train sampler, eval sampler, replicate) evaluation."""

    train_label: str
    eval_label: str
    replicate: int
    indices: np.ndarray
    truths: np.ndarray
    predictions: np.ndarray
    weights: np.ndarray

    @property
    def rmse(self) -> float:
        return rmse(self.predictions, self.truths)


@dataclass(frozen=True)
class EvalMatrix:
    train_labels: tuple[str, ...]
    eval_labels: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    n_replicates: int
    records: tuple[CellRecord, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        shape = (len(self.train_labels), len(self.eval_labels))
        if 0 in shape:
            raise EmptyData("evaluation matrix has no cells")
        if np.shape(self.mean) != shape or np.shape(self.std) != shape:
            raise ShapeMismatch(f"cell arrays must have shape {shape}")
        if len(set(self.train_labels)) != shape[0] or len(set(self.eval_labels)) != shape[1]:
            raise DataError("duplicate sampler labels")
        if self.n_replicates < 1:
            raise DataError("n_replicates must be >= 1")

    def cell(self, train_label: str, eval_label: str):
        i, j = self._row(train_label), self._col(eval_label)
        return float(self.mean[i, j]), float(self.std[i, j]), self.n_replicates

    def _row(self, label):
        try:
            return self.train_labels.index(label)
        except ValueError:
            raise DataError(f"unknown train label {label!r}; have {list(self.train_labels)}") from None

    def _col(self, label):
        try:
            return self.eval_labels.index(label)
        except ValueError:
            raise DataError(f"unknown eval label {label!r}; have {list(self.eval_labels)}") from None


def _with_none(samplers) -> list:
    samplers = list(samplers)
    if not samplers:
        raise DataError("need at least one sampler")
    out = [S.NoSampling()]
    seen = {"None"}
    for s in samplers:
        s = S.parse_sampler(s) if isinstance(s, str) else s
        if s.label not in seen:
            seen.add(s.label)
            out.append(s)
    return out


def check_weight_horizon(weight_spec: WeightFunctionSpec, window_spec: WindowSpec) -> None:
    if isinstance(weight_spec, TargetVariation) and weight_spec.delta_steps != window_spec.horizon_steps:
        raise DataError(
            f"target-variation delta ({weight_spec.delta_steps}) must equal the forecast "
            f"horizon ({window_spec.horizon_steps})"
        )


def cross_evaluate(
    dataset: TimeSeriesDataset,
    window_spec: WindowSpec,
    weight_spec: WeightFunctionSpec,
    samplers,
    model_spec: M.ModelSpec,
    n_train: int,
    n_eval: int,
    n_replicates: int = 10,
    seed: int = 0,
    train_fraction: float = 0.7,
    n_jobs: int = 1,
    keep_records: bool = True,
) -> EvalMatrix:
    """Train with every sampler and score on sets drawn with every sampler.

    The no-sampling baseline ``"None"`` is always the first row and column.
    For replicate ``r`` the training draw of sampler ``a`` uses
    ``derive_seed(seed, a, r, "train")`` and the eval draw of sampler ``b``
    uses ``derive_seed(seed, b, r, "eval")``; eval sets are shared by all
    training samplers. (train sampler, replicate) tasks run on ``n_jobs``
    threads and the result does not depend on scheduling.
    """
    if n_train < 1 or n_eval < 1:
        raise DataError("n_train and n_eval must be >= 1")
    if n_replicates < 1:
        raise DataError("n_replicates must be >= 1")
    check_weight_horizon(weight_spec, window_spec)
    specs = _with_none(samplers)
    labels = tuple(s.label for s in specs)
    train_range, eval_range = split_chronological(dataset, window_spec, train_fraction)
    train_w = compute_weights(dataset, window_spec, weight_spec, train_range)
    eval_w = compute_weights(dataset, window_spec, weight_spec, eval_range)
    ti = _target_index(dataset, window_spec)

    def features(idx):
        windows, targets = windows_at(dataset, window_spec, idx)
        return M.extract_features_batch(windows), targets

    # eval sets first: one per (eval sampler, replicate), shared across rows
    eval_sets = {}
    for r in range(n_replicates):
        for b in specs:
            sample = S.draw(b, eval_w, n_eval, derive_seed(seed, b.label, r, "eval"))
            X, y = features(sample.indices)
            eval_sets[b.label, r] = (sample.indices, X, y, eval_w.weight_of(sample.indices))

    def run(task):
        a, r = task
        sample = S.draw(a, train_w, n_train, derive_seed(seed, a.label, r, "train"))
        X, y = features(sample.indices)
        spec = model_spec
        if isinstance(spec, M.MLP):
            spec = M.MLP(**{**vars(spec), "seed": derive_seed(spec.seed, a.label, r, "fit") % 2**32})
        model = M.fit_features(spec, X, y, target_index=ti)
        out = []
        for b in specs:
            idx, Xe, ye, we = eval_sets[b.label, r]
            out.append(CellRecord(a.label, b.label, r, idx, ye, M.predict_features(model, Xe), we))
        return out

    tasks = [(a, r) for a in specs for r in range(n_replicates)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    scores = np.empty((len(specs), len(specs), n_replicates))
    records = []
    for (a, r), cells in zip(tasks, results):
        i = labels.index(a.label)
        for j, rec in enumerate(cells):
            scores[i, j, r] = rec.rmse
        if keep_records:
            records.extend(cells)
    mean = scores.mean(axis=2)
    std = scores.std(axis=2, ddof=1) if n_replicates > 1 else np.zeros_like(mean)
    return EvalMatrix(labels, labels, mean, std, n_replicates, tuple(records))


# --------------------------------------------------------------------------
# Selection heuristic
# --------------------------------------------------------------------------


def max_error_row(matrix: EvalMatrix, train_label: str):
    """Largest mean RMSE of a row and the eval label where it occurs (first on ties)."""
    row = matrix.mean[matrix._row(train_label)]
    j = int(np.argmax(row))
    return float(row[j]), matrix.eval_labels[j]


@dataclass(frozen=True)
class SelectionResult:
    max_errors: dict
    ranking: tuple[str, ...]

    @property
    def selected(self) -> str:
        return self.ranking[0]

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "ranking": list(self.ranking),
            "rows": [
                {
                    "train_label": label,
                    "max_error": self.max_errors[label][0],
                    "std_at_max": self.max_errors[label][2],
                    "measured_on": self.max_errors[label][1],
                }
                for label in self.ranking
            ],
        }


def select_sampler(matrix: EvalMatrix) -> SelectionResult:
    """Rank training samplers by their worst eval-set RMSE, lowest first.

    Ties go to the smaller row mean, then to the earlier label.
    """
    info, keys = {}, []
    for pos, label in enumerate(matrix.train_labels):
        worst, where = max_error_row(matrix, label)
        i = matrix._row(label)
        info[label] = (worst, where, float(matrix.std[i, matrix._col(where)]))
        keys.append((worst, float(matrix.mean[i].mean()), pos, label))
    ranking = tuple(k[-1] for k in sorted(keys))
    return SelectionResult(info, ranking)


# --------------------------------------------------------------------------
# Export / import
# --------------------------------------------------------------------------

MATRIX_COLUMNS = ("train_label", "eval_label", "mean", "std", "n")


def write_matrix_csv(matrix: EvalMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MATRIX_COLUMNS)
        for i, a in enumerate(matrix.train_labels):
            for j, b in enumerate(matrix.eval_labels):
                writer.writerow([a, b, repr(float(matrix.mean[i, j])), repr(float(matrix.std[i, j])), matrix.n_replicates])


def read_matrix_csv(path) -> EvalMatrix:
    """Parse a matrix CSV; rows may come in any order but every cell must be present."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or ())]
        reader.fieldnames = fields
        for col in MATRIX_COLUMNS:
            if col not in fields:
                raise DataError(f"{path}: missing column {col!r}")
        cells, train, evals, ns = {}, [], [], set()
        for lineno, row in enumerate(reader, start=2):
            a, b = row["train_label"].strip(), row["eval_label"].strip()
            try:
                m, s, n = float(row["mean"]), float(row["std"]), int(row["n"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: non-numeric mean/std/n") from None
            if not (m >= 0 and s >= 0 and n >= 1):
                raise DataError(f"{path}:{lineno}: need mean >= 0, std >= 0, n >= 1")
            if (a, b) in cells:
                raise DataError(f"{path}:{lineno}: duplicate cell ({a}, {b})")
            cells[a, b] = (m, s)
            ns.add(n)
            train += [a] if a not in train else []
            evals += [b] if b not in evals else []
    if not cells:
        raise EmptyData(f"{path} has no cells")
    if len(ns) != 1:
        raise DataError(f"{path}: replicate counts differ across cells: {sorted(ns)}")
    mean = np.empty((len(train), len(evals)))
    std = np.empty_like(mean)
    for i, a in enumerate(train):
        for j, b in enumerate(evals):
            if (a, b) not in cells:
                raise DataError(f"{path}: missing cell ({a}, {b})")
            mean[i, j], std[i, j] = cells[a, b]
    return EvalMatrix(tuple(train), tuple(evals), mean, std, ns.pop())


def format_table(matrix: EvalMatrix, digits: int = 3) -> str:
    """Aligned 'Trained on' x 'Evaluated on' table of mean +- std."""
    cells = [
        [f"{matrix.mean[i, j]:.{digits}f} ± {matrix.std[i, j]:.{digits}f}" for j in range(len(matrix.eval_labels))]
        for i in range(len(matrix.train_labels))
    ]
    w0 = max(len("Trained on"), *(len(a) for a in matrix.train_labels))
    widths = [max(len(b), *(len(cells[i][j]) for i in range(len(cells)))) for j, b in enumerate(matrix.eval_labels)]
    total = sum(widths) + 3 * (len(widths) - 1)
    lines = [
        f"{'':<{w0}} | {'Evaluated on':^{total}}",
        f"{'Trained on':<{w0}} | " + " | ".join(f"{b:>{w}}" for b, w in zip(matrix.eval_labels, widths)),
        "-" * (w0 + 3 + total),
    ]
    for a, row in zip(matrix.train_labels, cells):
        lines.append(f"{a:<{w0}} | " + " | ".join(f"{c:>{w}}" for c, w in zip(row, widths)))
    lines.append(f"({matrix.n_replicates} replicate(s); RMSE mean ± std)")
    return "\n".join(lines)


TRIPLE_COLUMNS = ("train_label", "eval_label", "replicate", "index", "truth", "prediction", "weight")


def write_triples_csv(records, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIPLE_COLUMNS)
        for rec in records:
            for i, t, p, w in zip(rec.indices.tolist(), rec.truths.tolist(), rec.predictions.tolist(), rec.weights.tolist()):
                writer.writerow([rec.train_label, rec.eval_label, rec.replicate, i, repr(t), repr(p), repr(w)])


def read_triples_csv(path) -> list[CellRecord]:
    groups: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in TRIPLE_COLUMNS:
            if col not in (reader.fieldnames or ()):
                raise DataError(f"{path}: missing column {col!r}")
        for row in reader:
            key = (row["train_label"], row["eval_label"], int(row["replicate"]))
            groups.setdefault(key, []).append(
                (int(row["index"]), float(row["truth"]), float(row["prediction"]), float(row["weight"]))
            )
    out = []
    for (a, b, r), rows in groups.items():
        arr = list(zip(*rows))
        out.append(CellRecord(a, b, r, np.array(arr[0]), np.array(arr[1]), np.array(arr[2]), np.array(arr[3])))
    return out


def write_selection_json(result: SelectionResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
