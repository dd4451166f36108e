"""Pseudo-labeling, splitting, cross-validation, aggregation, RMSE, baselines.

Tweets inherit the hesitancy score of their zip as a pseudo-label. The
train/test split is stratified by zip so every zip appears on both sides;
zip-level predictions are the mean of a zip's tweet-level predictions.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, FitError, IngestError
from .features import StandardizationPolicy, standardize_split
from .models import FittedModel, RegressorSpec, fit

_ZIP_RE = re.compile(r"^[0-9]{5}$")

GROUND_TRUTH_HEADER = ["zip", "hesitancy"]


def load_ground_truth(path) -> dict[str, float]:
    """Load zip -> hesitancy CSV; values outside [0, 1] are fatal."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot open ground truth {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GROUND_TRUTH_HEADER:
            raise ConfigError(f"{path}: expected header zip,hesitancy")
        gt: dict[str, float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise IngestError(f"{path}:{lineno}: expected 2 cells")
            z = row[0].strip()
            if not _ZIP_RE.match(z):
                raise IngestError(f"{path}:{lineno}: bad zip {z!r}")
            if z in gt:
                raise IngestError(f"{path}:{lineno}: duplicate zip {z}")
            try:
                v = float(row[1])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: bad hesitancy {row[1]!r}") from exc
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise IngestError(f"{path}:{lineno}: hesitancy {v} outside [0, 1]")
            gt[z] = v
    return gt


def pseudo_label(
    zips: Sequence[str], gt: Mapping[str, float]
) -> tuple[np.ndarray, np.ndarray, int]:
    """Label each tweet with its zip's hesitancy.

    Returns (keep_indices, labels, n_dropped); tweets in zips absent from
    the ground truth are dropped and counted.
    """
    keep: list[int] = []
    labels: list[float] = []
    for i, z in enumerate(zips):
        v = gt.get(z)
        if v is None:
            continue
        if not (0.0 <= v <= 1.0):
            raise IngestError(f"ground truth for zip {z} outside [0, 1]: {v}")
        keep.append(i)
        labels.append(v)
    n_dropped = len(zips) - len(keep)
    return np.array(keep, dtype=np.int64), np.array(labels, dtype=np.float64), n_dropped


@dataclass
class SplitResult:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int


def stratified_split(zips: Sequence[str], test_frac: float = 0.2, seed: int = 0) -> SplitResult:
    """Zip-stratified train/test split.

    Per-zip test counts start at floor(n_z * test_frac); the remainder up to
    the global target round(N * test_frac) goes to the zips with the largest
    fractional parts (ties by zip ascending). A final adjustment keeps every
    zip represented on both sides whenever the allocation permits it.
    Deterministic for a fixed seed.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must be in (0, 1)")
    n = len(zips)
    if n == 0:
        raise ValueError("empty corpus")
    groups: dict[str, list[int]] = {}
    for i, z in enumerate(zips):
        groups.setdefault(z, []).append(i)
    for z, idx in groups.items():
        if len(idx) < 2:
            raise ValueError(f"zip {z} has fewer than 2 tweets; cannot stratify")
    order = sorted(groups)
    target = int(math.floor(n * test_frac + 0.5))
    base: dict[str, int] = {}
    frac: dict[str, float] = {}
    for z in order:
        exact = len(groups[z]) * test_frac
        b = int(math.floor(exact + 1e-9))
        base[z] = b
        frac[z] = exact - b
    remainder = target - sum(base.values())
    if remainder > 0:
        for z in sorted(order, key=lambda z: (-frac[z], z))[:remainder]:
            base[z] += 1
    # Keep both sides nonempty for every zip when slots allow it.
    for z in order:
        if base[z] == 0:
            donors = [d for d in order if base[d] >= 2 and d != z]
            if donors:
                donor = max(donors, key=lambda d: (base[d], d))
                base[donor] -= 1
                base[z] += 1
        elif base[z] >= len(groups[z]):
            receivers = [r for r in order if base[r] < len(groups[r]) - 1 and r != z]
            if receivers:
                receiver = min(receivers, key=lambda r: (base[r], r))
                base[receiver] += 1
                base[z] -= 1
    rng = np.random.RandomState(seed)
    train: list[int] = []
    test: list[int] = []
    for z in order:
        idx = np.array(groups[z], dtype=np.int64)
        perm = rng.permutation(len(idx))
        t = base[z]
        test.extend(idx[perm[:t]])
        train.extend(idx[perm[t:]])
    return SplitResult(
        train_idx=np.array(sorted(train), dtype=np.int64),
        test_idx=np.array(sorted(test), dtype=np.int64),
        seed=seed,
    )


def kfold(n: int, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Shuffled k-fold partition; fold sizes differ by at most 1, larger first."""
    if k < 2:
        raise ValueError("cross-validation needs k >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = np.random.RandomState(seed)
    perm = rng.permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    folds = []
    start = 0
    for s in sizes:
        folds.append(np.array(sorted(perm[start : start + s]), dtype=np.int64))
        start += s
    return folds


def aggregate_zip(preds_by_zip: Mapping[str, Sequence[float]]) -> dict[str, float]:
    """Mean tweet-level prediction per zip."""
    out: dict[str, float] = {}
    for z in sorted(preds_by_zip):
        vals = preds_by_zip[z]
        if len(vals) == 0:
            raise ValueError(f"zip {z} has no predictions to aggregate")
        out[z] = float(np.mean(np.asarray(vals, dtype=np.float64)))
    return out


def group_by_zip(zips: Sequence[str], preds: Sequence[float]) -> dict[str, list[float]]:
    if len(zips) != len(preds):
        raise ValueError("zips and predictions must align")
    grouped: dict[str, list[float]] = {}
    for z, p in zip(zips, preds):
        grouped.setdefault(z, []).append(float(p))
    return grouped


def rmse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("rmse needs at least one point")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


@dataclass(frozen=True)
class BaselineRow:
    name: str
    constant: float
    tweet_rmse: float
    zip_rmse: float


BASELINE_NAMES = (
    "no_hesitancy",
    "complete_hesitancy",
    "partial_hesitancy",
    "mean_pseudo_train",
    "mean_pseudo_all",
    "mean_ground_truth",
)


def constant_baselines(
    gt: Mapping[str, float],
    train_labels: Sequence[float],
    all_labels: Sequence[float],
    test_labels: Sequence[float],
) -> list[BaselineRow]:
    """The six constant predictors, evaluated at tweet and zip level.

    Tweet-level RMSE is against the pseudo-labeled test set; zip-level RMSE
    is against the full ground truth.
    """
    if not gt or len(train_labels) == 0 or len(all_labels) == 0 or len(test_labels) == 0:
        raise ValueError("baselines need nonempty inputs")
    gt_values = np.array([gt[z] for z in sorted(gt)], dtype=np.float64)
    test = np.asarray(test_labels, dtype=np.float64)
    constants = (
        0.0,
        1.0,
        0.5,
        float(np.mean(np.asarray(train_labels, dtype=np.float64))),
        float(np.mean(np.asarray(all_labels, dtype=np.float64))),
        float(np.mean(gt_values)),
    )
    rows = []
    for name, c in zip(BASELINE_NAMES, constants):
        rows.append(
            BaselineRow(
                name=name,
                constant=c,
                tweet_rmse=rmse(test, np.full(test.shape, c)),
                zip_rmse=rmse(gt_values, np.full(gt_values.shape, c)),
            )
        )
    return rows


def cross_validate(
    spec: RegressorSpec,
    X: np.ndarray,
    y: np.ndarray,
    folds: Sequence[np.ndarray],
    scale_mask: np.ndarray | None = None,
    policy: StandardizationPolicy | None = None,
    predict_transform: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[float, list[float]]:
    """Mean held-fold RMSE; standardization refits inside each fold.

    X holds raw (unstandardized) features; folds index into its rows. Any
    failing fold aborts the whole run with the fold index in the error.
    """
    if len(folds) < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scores: list[float] = []
    for fi, fold in enumerate(folds):
        try:
            test_idx = np.asarray(fold, dtype=np.int64)
            train_idx = np.sort(
                np.concatenate([folds[j] for j in range(len(folds)) if j != fi])
            )
            Xtr, Xte = X[train_idx], X[test_idx]
            if scale_mask is not None and scale_mask.any():
                Xtr, Xte = standardize_split(Xtr, Xte, scale_mask, policy)
            model = fit(spec, Xtr, y[train_idx])
            preds = model.predict(Xte)
            if predict_transform is not None:
                preds = predict_transform(preds)
            scores.append(rmse(y[test_idx], preds))
        except Exception as exc:
            raise FitError(f"cross-validation fold {fi} failed: {exc}") from exc
    return float(np.mean(scores)), scores


@dataclass(frozen=True)
class MetroErrorStats:
    metro: str
    n_zips: int
    n_overestimated: int
    fraction_overestimated: float
    n_over_by_threshold: int
    n_absgap_ge_threshold: int


@dataclass
class ErrorAnalysis:
    threshold: float
    per_metro: list[MetroErrorStats]
    total: MetroErrorStats


def error_analysis(
    zip_preds: Mapping[str, float],
    gt: Mapping[str, float],
    zip_to_metro: Mapping[str, str],
    threshold: float = 0.20,
) -> ErrorAnalysis:
    """Over/under-estimation breakdown per metro.

    Overestimation is strict (prediction > truth); the gap buckets are
    inclusive (>= threshold).
    """
    buckets: dict[str, dict[str, int]] = {}
    for z in sorted(zip_preds):
        if z not in gt:
            raise ValueError(f"zip {z} missing from ground truth")
        if z not in zip_to_metro:
            raise ValueError(f"zip {z} missing from metro map")
        gap = zip_preds[z] - gt[z]
        acc = buckets.setdefault(
            zip_to_metro[z], {"n": 0, "over": 0, "over_t": 0, "abs_t": 0}
        )
        acc["n"] += 1
        if gap > 0:
            acc["over"] += 1
        if gap >= threshold:
            acc["over_t"] += 1
        if abs(gap) >= threshold:
            acc["abs_t"] += 1
    rows = []
    for metro in sorted(buckets):
        acc = buckets[metro]
        rows.append(
            MetroErrorStats(
                metro=metro,
                n_zips=acc["n"],
                n_overestimated=acc["over"],
                fraction_overestimated=acc["over"] / acc["n"],
                n_over_by_threshold=acc["over_t"],
                n_absgap_ge_threshold=acc["abs_t"],
            )
        )
    n = sum(r.n_zips for r in rows)
    over = sum(r.n_overestimated for r in rows)
    total = MetroErrorStats(
        metro="total",
        n_zips=n,
        n_overestimated=over,
        fraction_overestimated=over / n if n else 0.0,
        n_over_by_threshold=sum(r.n_over_by_threshold for r in rows),
        n_absgap_ge_threshold=sum(r.n_absgap_ge_threshold for r in rows),
    )
    return ErrorAnalysis(threshold=threshold, per_metro=rows, total=total)
