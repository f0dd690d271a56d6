import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TCN_LABELS, TCN_MEAN, TCN_STD, write_tcn_csv
from imbalanced_ts.dataset import SyntheticConfig, WindowSpec, generate_synthetic
from imbalanced_ts.errors import DataError, EmptyData, ShapeMismatch
from imbalanced_ts.evaluation import (
    EvalMatrix,
    cross_evaluate,
    derive_seed,
    format_table,
    max_error_row,
    read_matrix_csv,
    read_triples_csv,
    rmse,
    select_sampler,
    write_matrix_csv,
    write_triples_csv,
)
from imbalanced_ts.models import KNN, Persistence, Ridge
from imbalanced_ts.weights import TargetVariation

WS = WindowSpec(30, 30)
TV = TargetVariation(30)


def tcn_matrix():
    return EvalMatrix(TCN_LABELS, TCN_LABELS, TCN_MEAN, TCN_STD, 10)


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([0, 0], [3, 4]) == np.sqrt(12.5)
    assert rmse([2], [5]) == 3.0
    with pytest.raises(EmptyData):
        rmse([], [])
    with pytest.raises(ShapeMismatch):
        rmse([1, 2], [1])


def test_derive_seed():
    a = derive_seed(0, "SUS-3", 1, "train")
    assert a == derive_seed(0, "SUS-3", 1, "train")
    others = {derive_seed(0, "SUS-3", 1, "eval"), derive_seed(1, "SUS-3", 1, "train"), derive_seed(0, "SUS-3", 2, "train")}
    assert a not in others and len(others) == 3
    assert 0 <= a < 2**64


def test_max_error_rows():
    m = tcn_matrix()
    assert max_error_row(m, "None") == (3.142, "IHS")
    assert max_error_row(m, "SUS-3") == (3.41, "None")
    flat = EvalMatrix(("A",), ("x", "y"), np.array([[2.0, 2.0]]), np.zeros((1, 2)), 1)
    assert max_error_row(flat, "A") == (2.0, "x")


def test_select_table():
    res = select_sampler(tcn_matrix())
    assert res.selected == "IHS"
    assert res.ranking == ("IHS", "SUS-1", "None", "SUS-3")
    d = res.to_dict()
    assert d["rows"][0] == {"train_label": "IHS", "max_error": 2.579, "std_at_max": 0.231, "measured_on": "None"}
    single = EvalMatrix(("A",), ("A", "B"), np.array([[1.0, 2.0]]), np.zeros((1, 2)), 1)
    assert select_sampler(single).selected == "A"


def test_select_tie_break():
    mean = np.array([[3.0, 1.0], [3.0, 0.5], [3.0, 0.5]])
    m = EvalMatrix(("A", "B", "C"), ("x", "y"), mean, np.zeros((3, 2)), 1)
    assert select_sampler(m).ranking == ("B", "C", "A")


@settings(max_examples=50)
@given(st.permutations(range(4)), st.permutations(range(4)))
def test_selection_permutation_invariant(rows, cols):
    m = tcn_matrix()
    labels_r = tuple(TCN_LABELS[i] for i in rows)
    labels_c = tuple(TCN_LABELS[j] for j in cols)
    p = EvalMatrix(labels_r, labels_c, TCN_MEAN[np.ix_(rows, cols)], TCN_STD[np.ix_(rows, cols)], 10)
    assert select_sampler(p).ranking == select_sampler(m).ranking


def test_matrix_validation():
    with pytest.raises(ShapeMismatch):
        EvalMatrix(("A",), ("A",), np.zeros((2, 1)), np.zeros((2, 1)), 1)
    with pytest.raises(DataError):
        EvalMatrix(("A", "A"), ("A",), np.zeros((2, 1)), np.zeros((2, 1)), 1)
    with pytest.raises(DataError):
        tcn_matrix().cell("FOO", "None")


def test_matrix_csv_round_trip(tmp_path):
    write_matrix_csv(tcn_matrix(), tmp_path / "m.csv")
    back = read_matrix_csv(tmp_path / "m.csv")
    assert back.train_labels == TCN_LABELS and back.n_replicates == 10
    np.testing.assert_array_equal(back.mean, TCN_MEAN)
    np.testing.assert_array_equal(back.std, TCN_STD)
    m2 = read_matrix_csv(write_tcn_csv(tmp_path / "t.csv"))
    np.testing.assert_array_equal(m2.mean, TCN_MEAN)


def test_matrix_csv_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("train_label,eval_label,mean,n\nA,A,1.0,1\n")
    with pytest.raises(DataError, match="'std'"):
        read_matrix_csv(p)
    p.write_text("train_label,eval_label,mean,std,n\nA,A,1.0,0,1\nA,B,1.0,0,1\nB,A,1.0,0,1\n")
    with pytest.raises(DataError, match=r"missing cell \(B, B\)"):
        read_matrix_csv(p)
    p.write_text("train_label,eval_label,mean,std,n\nA,A,x,0,1\n")
    with pytest.raises(DataError, match="non-numeric"):
        read_matrix_csv(p)
    p.write_text("train_label,eval_label,mean,std,n\n")
    with pytest.raises(EmptyData):
        read_matrix_csv(p)


def test_format_table():
    text = format_table(tcn_matrix())
    assert "Trained on" in text and "Evaluated on" in text
    assert "3.142 ± 0.050" in text
    assert all(label in text for label in TCN_LABELS)


@pytest.fixture(scope="module")
def small_data():
    return generate_synthetic(SyntheticConfig(length=12_000, seed=9))


def test_matrix_shape_and_labels(small_data):
    m = cross_evaluate(small_data, WS, TV, ["SUS-1"], Ridge(1.0), 500, 200, n_replicates=1)
    assert m.train_labels == m.eval_labels == ("None", "SUS-1")
    assert m.mean.shape == (2, 2) and np.all(m.std == 0)
    assert len(m.records) == 4


def test_cross_evaluate_records(small_data):
    m = cross_evaluate(small_data, WS, TV, ["SUS-3", "IHS"], KNN(3), 600, 200, n_replicates=3, seed=4)
    assert m.train_labels == ("None", "SUS-3", "IHS")
    recs = {(r.train_label, r.eval_label, r.replicate): r for r in m.records}
    for b, r in itertools.product(m.eval_labels, range(3)):
        ref = recs["None", b, r].indices
        for a in m.train_labels:
            # eval sets are shared across train samplers
            np.testing.assert_array_equal(recs[a, b, r].indices, ref)
    for i, a in enumerate(m.train_labels):
        for j, b in enumerate(m.eval_labels):
            vals = [recs[a, b, r].rmse for r in range(3)]
            assert m.mean[i, j] == pytest.approx(np.mean(vals), rel=1e-14)
            assert m.std[i, j] == pytest.approx(np.std(vals, ddof=1), rel=1e-12)


def test_cross_evaluate_deterministic_and_parallel(small_data):
    args = (small_data, WS, TV, ["SUS-1", "IHS"], Ridge(0.5), 800, 300)
    a = cross_evaluate(*args, n_replicates=3, seed=2, n_jobs=1)
    b = cross_evaluate(*args, n_replicates=3, seed=2, n_jobs=4)
    assert a.mean.tobytes() == b.mean.tobytes() and a.std.tobytes() == b.std.tobytes()
    c = cross_evaluate(*args, n_replicates=3, seed=3)
    assert not np.array_equal(a.mean, c.mean)


def test_persistence_cells_match_weights(small_data):
    m = cross_evaluate(small_data, WS, TV, ["SUS-3"], Persistence(), 500, 400, n_replicates=4)
    for rec in m.records:
        assert rec.rmse == np.sqrt(np.mean(rec.weights**2))
    none, _, _ = m.cell("None", "None")
    high, _, _ = m.cell("None", "SUS-3")
    assert high > none


def test_horizon_mismatch(small_data):
    with pytest.raises(DataError, match="horizon"):
        cross_evaluate(small_data, WS, TargetVariation(10), ["SUS-1"], Ridge(), 100, 100)


def test_triples_round_trip(tmp_path, small_data):
    m = cross_evaluate(small_data, WS, TV, ["SUS-1"], Ridge(1.0), 300, 100, n_replicates=2)
    write_triples_csv(m.records, tmp_path / "t.csv")
    back = {(r.train_label, r.eval_label, r.replicate): r for r in read_triples_csv(tmp_path / "t.csv")}
    assert len(back) == len(m.records)
    for rec in m.records:
        other = back[rec.train_label, rec.eval_label, rec.replicate]
        np.testing.assert_array_equal(other.indices, rec.indices)
        np.testing.assert_array_equal(other.predictions, rec.predictions)
        assert other.rmse == rec.rmse
