"""Acceptance criteria. Each test prints one ``[PASS]``/``[FAIL]`` line."""

import json
import time

import numpy as np
import pytest

from conftest import TCN_LABELS, write_tcn_csv
from imbalanced_ts import histogram as H
from imbalanced_ts.cli import cmd_select, main
from imbalanced_ts.dataset import SyntheticConfig, WindowSpec, generate_synthetic
from imbalanced_ts.evaluation import cross_evaluate
from imbalanced_ts.models import MLP, Persistence, Ridge
from imbalanced_ts.sampling import IHS, SUS, TUS, draw, inclusion_weight
from imbalanced_ts.weights import TargetVariation, compute_weights
from test_histogram import fd_oracle
from test_models import gradient_check

WS = WindowSpec(30, 30)
TV = TargetVariation(30)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, started):
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail} ({time.perf_counter() - started:.1f}s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


@pytest.fixture(scope="module")
def synthetic_weights(standard_synthetic):
    return compute_weights(standard_synthetic, WS, TV)


def test_1_equation_fidelity(report):
    t0 = time.perf_counter()
    checks = [
        inclusion_weight(TUS(2), 5.0) == 1.0,
        inclusion_weight(TUS(2), 2.0) == 0.0,
        inclusion_weight(TUS(2), 1.0) == 0.0,
        inclusion_weight(SUS(3), 0.8) / inclusion_weight(SUS(3), 0.2) == 64.0,
        inclusion_weight(SUS(3), 0.5) == 0.125,
    ]
    hist = H.build(np.r_[np.zeros(90), np.ones(9), [2.5]], 1.0)
    mass = [c * inclusion_weight(IHS(1.0), v, hist) for c, v in zip(hist.counts, (0.0, 1.0, 2.5))]
    checks.append(hist.counts.tolist() == [90, 9, 1] and mass == [1.0, 1.0, 1.0])
    report(1, "inclusion-weight fidelity", all(checks), f"{sum(checks)}/{len(checks)} exact hand cases", t0)


def test_2_fd_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 500))
        kind = i % 4
        if kind == 0:
            x = rng.normal(size=n)
        elif kind == 1:
            x = rng.exponential(size=n) * 10
        elif kind == 2:
            x = rng.integers(0, 4, size=n).astype(float)  # heavy ties
        else:
            x = rng.uniform(-100, 100, size=n)
        worst = max(worst, abs(H.fd_bin_width(x) - fd_oracle(list(x))))
    exact = H.fd_bin_width(np.arange(1.0, 9.0)) == 3.5
    report(2, "FD bin width vs oracle", worst <= 1e-12 and exact, f"max abs diff {worst:.2e} over 1000 inputs; {{1..8}} -> 3.5 {exact}", t0)


def test_3_heuristic_reproduction(report, tmp_path, capsys):
    t0 = time.perf_counter()
    res = cmd_select(write_tcn_csv(tmp_path / "table.csv"))
    capsys.readouterr()
    ok = res.selected == "IHS" and res.ranking == ("IHS", "SUS-1", "None", "SUS-3")
    report(3, "min-of-max selection on the published table", ok, f"selected {res.selected}, ranking {list(res.ranking)}", t0)


def test_4_ihs_flattening(report, standard_synthetic, synthetic_weights):
    t0 = time.perf_counter()
    assert standard_synthetic.n_steps >= 100_000
    factors = []
    for seed in range(10):
        s = draw(IHS(), synthetic_weights, 10_000, seed)
        rep = H.density_report(synthetic_weights, synthetic_weights.weight_of(s.indices))
        factors.append(H.flatness_ratio(rep.density_before) / H.flatness_ratio(rep.density_after))
    mean = float(np.mean(factors))
    report(4, "IHS flattening", mean >= 3.0, f"mean flatness reduction {mean:.2f}x over 10 seeds (min {min(factors):.2f}x)", t0)


@pytest.mark.slow
def test_5_directional_bias(report, standard_synthetic):
    t0 = time.perf_counter()
    details, ok = [], True
    for name, spec in (("Ridge", Ridge(1.0)), ("MLP", MLP())):
        m = cross_evaluate(standard_synthetic, WS, TV, ["SUS-3"], spec, 10_000, 2_000,
                           n_replicates=5, seed=0, n_jobs=4, keep_records=False)
        nn, ns = m.cell("None", "None")[0], m.cell("None", "SUS-3")[0]
        sn, ss = m.cell("SUS-3", "None")[0], m.cell("SUS-3", "SUS-3")[0]
        ok &= ns > ss and sn > nn
        details.append(f"{name}: (None->SUS-3) {ns:.3f} > (SUS-3->SUS-3) {ss:.3f}, (SUS-3->None) {sn:.3f} > (None->None) {nn:.3f}")
    report(5, "directional bias", ok, "; ".join(details), t0)


def test_6_persistence_cross_link(report, small_synthetic):
    t0 = time.perf_counter()
    m = cross_evaluate(small_synthetic, WS, TV, ["SUS-1", "SUS-3", "IHS"], Persistence(), 2_000, 1_000, n_replicates=3, seed=1)
    worst = 0.0
    for rec in m.records:
        worst = max(worst, abs(rec.rmse - np.sqrt(np.mean(rec.weights**2))))
    for i, a in enumerate(m.train_labels):
        for j, b in enumerate(m.eval_labels):
            vals = [np.sqrt(np.mean(r.weights**2)) for r in m.records if (r.train_label, r.eval_label) == (a, b)]
            worst = max(worst, abs(m.mean[i, j] - np.mean(vals)))
    report(6, "persistence cross-link", worst <= 1e-10, f"max |RMSE - rms(w)| = {worst:.2e} over {len(m.records)} cells x replicates", t0)


def test_7_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "data: {synthetic: {length: 30000, seed: 7}}\n"
        "samplers: [SUS-1, SUS-3, IHS]\n"
        "model: {kind: mlp, hidden_units: 8, epochs: 5}\n"
        "n_train: 2000\nn_eval: 500\nn_replicates: 3\n"
    )
    blobs = []
    for name, jobs in (("s1", 1), ("s2", 1), ("p1", 4), ("p2", 3)):
        assert main(["evaluate", "-c", str(cfg), "-o", str(tmp_path / name), "--n-jobs", str(jobs)]) == 0
        blobs.append((tmp_path / name / "matrix.csv").read_bytes())
    capsys.readouterr()
    ok = len(set(blobs)) == 1
    report(7, "determinism", ok, f"{len(set(blobs))} distinct matrix.csv across 2 serial + 2 parallel runs", t0)


def test_8_gradient_check(report):
    t0 = time.perf_counter()
    errs = [gradient_check(seed) for seed in range(100, 120)]
    worst = max(errs)
    report(8, "MLP gradient check", worst < 1e-4, f"max relative error {worst:.2e} over 20 instances", t0)


def test_9_factor_monotonicity(report, synthetic_weights):
    t0 = time.perf_counter()
    q90 = np.quantile(synthetic_weights.weights, 0.9)
    frac = {}
    for f in (1, 3):
        frac[f] = float(np.mean([
            np.mean(synthetic_weights.weight_of(draw(SUS(f), synthetic_weights, 10_000, seed).indices) > q90)
            for seed in range(20)
        ]))
    report(9, "SUS factor monotonicity", frac[3] > frac[1], f"fraction above q90: f=3 {frac[3]:.3f} vs f=1 {frac[1]:.3f} (20 seeds)", t0)
