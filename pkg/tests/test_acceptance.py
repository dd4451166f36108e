"""Acceptance suite: one test per criterion, one PASS/FAIL line each."""

import dataclasses
import functools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from dual_oracle import svr_dual_oracle
from hesitancy.evaluation import (
    aggregate_zip,
    constant_baselines,
    kfold,
    rmse,
    stratified_split,
)
from hesitancy.models import (
    SVRHyperparams,
    fit_ols,
    fit_sgd,
    fit_svr_rbf,
    kkt_report,
)
from hesitancy.pipeline import Manifest, run_ingest, run_matrix, run_report, run_split
from hesitancy.smo import rbf_kernel
from hesitancy.textprep import process_text

TABLE_BASELINES = {0.0: 0.411, 1.0: 0.830, 0.5: 0.423, "mean": 0.334}
GT_MEAN = 0.2403
GT_STD = 0.334


def criterion(number, name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] C{number} {name}: FAIL")
                raise
            print(f"[ACCEPTANCE] C{number} {name}: PASS")

        return run

    return wrap


def moment_matched_dataset(n=493, mean=GT_MEAN, std=GT_STD):
    """Values in {0, mean, 1} whose sample moments best match the targets."""
    target_var = std * std
    best = None
    for nm in range(n + 1):
        # mean = (nm * mean_val + n1) / n  ->  n1 for the target mean
        n1 = round(n * mean - nm * mean)
        if n1 < 0 or nm + n1 > n:
            continue
        vals_mean = (nm * mean + n1) / n
        second = (nm * mean * mean + n1) / n
        var = second - vals_mean**2
        err = abs(vals_mean - mean) + abs(math.sqrt(max(var, 0.0)) - std)
        if best is None or err < best[0]:
            best = (err, nm, n1)
    _, nm, n1 = best
    values = np.concatenate(
        [np.zeros(n - nm - n1), np.full(nm, mean), np.ones(n1)]
    )
    return values


@criterion(1, "constant-baseline reproduction")
def test_c1_constant_baselines():
    t0 = time.perf_counter()
    # Identity from the exact moments.
    for c, expected in TABLE_BASELINES.items():
        c_val = GT_MEAN if c == "mean" else c
        identity = math.sqrt(GT_STD**2 + (GT_MEAN - c_val) ** 2)
        assert abs(identity - expected) <= 0.0015, (c, identity, expected)
    # The evaluator on a 493-zip dataset constructed to those moments.
    values = moment_matched_dataset()
    assert values.shape == (493,)
    assert values.min() >= 0.0 and values.max() <= 1.0
    gt = {f"{10000 + i:05d}": float(v) for i, v in enumerate(values)}
    rows = constant_baselines(gt, values, values, values)
    by_const = {round(r.constant, 4): r.zip_rmse for r in rows}
    assert abs(by_const[0.0] - 0.411) <= 0.0015
    assert abs(by_const[1.0] - 0.830) <= 0.0015
    assert abs(by_const[0.5] - 0.423) <= 0.0015
    mean_row = next(r for r in rows if r.name == "mean_ground_truth")
    assert abs(mean_row.zip_rmse - 0.334) <= 0.0015
    # The identity itself holds exactly on the constructed data.
    for row in rows:
        lhs = row.zip_rmse**2
        rhs = values.var() + (values.mean() - row.constant) ** 2
        assert abs(lhs - rhs) < 1e-12
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "synthetic-corpus model matrix beats baselines")
def test_c2_matrix_on_synthetic_corpus(synth_config, tmp_path):
    cfg = dataclasses.replace(synth_config, out_dir=str(tmp_path / "out"))
    t0 = time.perf_counter()
    code = run_matrix(cfg, Manifest(cfg, "matrix"))
    elapsed = time.perf_counter() - t0
    assert code == 0
    data = json.loads((Path(cfg.out_dir) / "matrix.json").read_text())
    cells = {c["cell_id"]: c for c in data["cells"]}
    assert len(cells) == 32
    assert all(c["status"] == "ok" for c in cells.values())
    best_baseline = min(b["zip_rmse"] for b in data["baselines"])
    for cell in cells.values():
        assert cell["zip_rmse"] < best_baseline, (cell["cell_id"], best_baseline)
    # The planted signal is nonlinear: the RBF kernel must beat least squares.
    for rep in ("text_only", "text_and_hashtags", "hybrid"):
        rbf = cells[f"{rep}|svr_rbf|zip|nosent"]["zip_rmse"]
        ols = cells[f"{rep}|ols|zip|nosent"]["zip_rmse"]
        assert rbf < ols, (rep, rbf, ols)
    assert elapsed < 180.0, f"matrix took {elapsed:.1f}s"


@criterion(3, "RBF-SVR dual matches the brute-force oracle")
def test_c3_svr_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.RandomState(5)
    n_checked = 0
    for _ in range(20):
        n = rng.randint(3, 9)
        d = rng.randint(1, 4)
        X = rng.randn(n, d) * rng.uniform(0.5, 2.0)
        y = rng.randn(n) * rng.uniform(0.2, 1.5)
        C = float(rng.choice([0.5, 1.0, 2.0]))
        eps = float(rng.choice([0.0, 0.05, 0.1, 0.3]))
        m = fit_svr_rbf(X, y, SVRHyperparams(C=C, epsilon=eps, tol=1e-4))
        assert m.converged
        K = rbf_kernel(X, X, m.gamma)
        _beta, oracle_obj = svr_dual_oracle(K, y, C=C, eps=eps)
        assert abs(m.train_objective - oracle_obj) <= 1e-3
        report = kkt_report(m, X, y, tol=1e-3)
        assert report["ok"], report
        n_checked += 1
    assert n_checked >= 20
    assert time.perf_counter() - t0 < 30.0


@criterion(4, "OLS matches the direct normal-equation oracle")
def test_c4_ols_oracle():
    rng = np.random.RandomState(23)
    for _ in range(100):
        n = int(rng.randint(12, 60))
        d = int(rng.randint(1, 8))
        X = rng.randn(n, d)
        y = rng.randn(n)
        m = fit_ols(X, y)
        A = np.hstack([X, np.ones((n, 1))])
        theta, *_ = np.linalg.lstsq(A, y, rcond=None)
        assert np.max(np.abs(m.w - theta[:-1])) < 1e-6
        assert abs(m.b - theta[-1]) < 1e-6
        resid = y - m.predict(X)
        assert np.max(np.abs(X.T @ resid)) < 1e-6


@criterion(5, "SGD consistency with least squares")
def test_c5_sgd_consistency():
    rng = np.random.RandomState(7)
    X = rng.randn(200, 4)
    w_true = np.array([1.0, -2.0, 0.5, 3.0])
    y = X @ w_true + 0.7
    sgd = fit_sgd(X, y, seed=42)
    ols = fit_ols(X, y)
    assert np.max(np.abs(sgd.w - ols.w)) < 1e-2
    assert abs(sgd.b - ols.b) < 1e-2
    again = fit_sgd(X, y, seed=42)
    assert np.array_equal(sgd.w, again.w)
    assert sgd.b == again.b


@criterion(6, "split and fold arithmetic at corpus scale")
def test_c6_split_fold_arithmetic():
    # 493 zips, 29,458 tweets: 59 per zip plus one extra for the first 371.
    sizes = [59 + (1 if i < 371 else 0) for i in range(493)]
    assert sum(sizes) == 29458
    zips = []
    for i, size in enumerate(sizes):
        zips += [f"{10000 + i:05d}"] * size
    split = stratified_split(zips, test_frac=0.2, seed=42)
    assert len(split.train_idx) == 23566
    assert len(split.test_idx) == 5892
    train_zips = {zips[i] for i in split.train_idx}
    test_zips = {zips[i] for i in split.test_idx}
    assert train_zips == test_zips == set(zips)
    folds = kfold(23566, k=5, seed=42)
    assert [len(f) for f in folds] == [4714, 4713, 4713, 4713, 4713]
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, np.arange(23566))


@criterion(7, "text pipeline golden corpus")
def test_c7_text_golden_file():
    golden = Path(__file__).parent / "data" / "golden_tweets.jsonl"
    cases = [json.loads(line) for line in golden.read_text(encoding="utf-8").splitlines() if line]
    assert len(cases) == 50
    for case in cases:
        got = [[t.text, t.is_hashtag] for t in process_text(case["text"]).tokens]
        assert got == case["tokens"], case["text"]


@criterion(8, "aggregation and RMSE identities")
def test_c8_eval_identities():
    assert aggregate_zip({"z": [0.2, 0.4, 0.6]})["z"] == pytest.approx(0.4, abs=1e-12)
    assert aggregate_zip({"z": [0.1, 0.1, 0.7, 0.7]})["z"] == pytest.approx(0.4, abs=1e-12)
    assert aggregate_zip({"z": [0.9]})["z"] == 0.9
    y = np.array([0.13, 0.77, 0.42])
    assert rmse(y, y) == 0.0
    assert rmse([0.0, 1.0], [0.5, 0.5]) == pytest.approx(0.5, abs=1e-12)
    rng = np.random.RandomState(1)
    for _ in range(50):
        vals = rng.rand(int(rng.randint(1, 40)))
        c = float(rng.rand())
        lhs = rmse(vals, np.full(vals.shape, c)) ** 2
        rhs = vals.var() + (vals.mean() - c) ** 2
        assert abs(lhs - rhs) < 1e-12
        grouped = aggregate_zip({"z": vals.tolist()})["z"]
        assert vals.min() - 1e-12 <= grouped <= vals.max() + 1e-12


@criterion(9, "end-to-end determinism")
def test_c9_end_to_end_determinism(mini_paths, tmp_path):
    from hesitancy.config import load_config

    reports = ["stats.csv", "split.json", "matrix.csv", "matrix.json",
               "predictions.json", "report.csv", "report.txt"]
    digests = []
    for run in ("a", "b"):
        cfg = load_config(mini_paths["config"], {"paths.out": str(tmp_path / run)})
        manifest = Manifest(cfg, "all")
        run_ingest(cfg, manifest)
        run_split(cfg, manifest)
        assert run_matrix(cfg, manifest) == 0
        run_report(cfg, manifest)
        manifest.write(cfg.out_dir)
        digests.append({name: (Path(cfg.out_dir) / name).read_bytes() for name in reports})
    for name in reports:
        assert digests[0][name] == digests[1][name], f"{name} differs between runs"
