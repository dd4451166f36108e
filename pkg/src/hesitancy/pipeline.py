"""Pipeline stages: ingest, stats, split, train, matrix, report.

Each stage persists its artifacts under the configured output directory and
later stages reuse them when present, so long runs are resumable. Reports
are byte-deterministic for identical config and inputs; wall-clock values
and timestamps live only in the run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, require_paths
from .corpus import (
    ExactLookupResolver,
    JoinedCorpus,
    LocatedTweet,
    NearestCentroidResolver,
    ZipFeatureRecord,
    corpus_stats,
    filter_min_tweets,
    join_zip_features,
    load_zip_features,
    locate_tweets,
    parse_corpus,
    read_located_corpus,
    write_corpus_jsonl,
)
from .embedding import Representation, embed_matrix, load_vectors
from .errors import ConfigError
from .evaluation import (
    SplitResult,
    aggregate_zip,
    constant_baselines,
    cross_validate,
    error_analysis,
    group_by_zip,
    kfold,
    load_ground_truth,
    pseudo_label,
    rmse,
    stratified_split,
)
from .features import (
    FeatureConfig,
    StandardizationPolicy,
    build_design_matrix,
    external_mask,
    feature_layout,
    standardize_split,
)
from .models import (
    LinearSVRHyperparams,
    ModelFamily,
    RegressorSpec,
    SGDHyperparams,
    SVRHyperparams,
    fit,
    save_model,
)
from .textprep import ProcessedText, process_text

CORPUS_ARTIFACT = "corpus.jsonl"
STATS_ARTIFACT = "stats.csv"
SPLIT_ARTIFACT = "split.json"
MATRIX_CSV = "matrix.csv"
MATRIX_JSON = "matrix.json"
PREDICTIONS_ARTIFACT = "predictions.json"
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"
MANIFEST = "manifest.json"

ZIP_ONLY = "zip_only"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Per-run provenance record; the only artifact that may carry timestamps."""

    def __init__(self, cfg: PipelineConfig, command: str, overrides: dict | None = None):
        self.data = {
            "artifact_version": __version__,
            "command": command,
            "config": cfg.snapshot(),
            "overrides": dict(overrides or {}),
            "inputs": {},
            "stages": {},
            "cells": {},
            "created_unix": time.time(),
        }

    def add_input(self, name: str, path):
        if path and Path(path).exists():
            self.data["inputs"][name] = {"path": str(path), "sha256": sha256_file(path)}

    def stage(self, name: str, rows: int, seconds: float):
        self.data["stages"][name] = {"rows": int(rows), "seconds": float(seconds)}

    def add_cell(self, cell_id: str, family: str, hyperparams: dict | None, seed):
        self.data["cells"][cell_id] = {
            "family": family,
            "hyperparams": hyperparams or {},
            "seed": seed,
        }

    def write(self, out_dir):
        path = Path(out_dir) / MANIFEST
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolver(cfg: PipelineConfig):
    if cfg.resolver_kind == "exact":
        require_paths(cfg, "exact_table_path")
        return ExactLookupResolver.from_csv(cfg.exact_table_path, cfg.resolver_precision)
    require_paths(cfg, "centroids_path")
    return NearestCentroidResolver.from_csv(cfg.centroids_path, cfg.resolver_cutoff_km)


def _process_all(tweets) -> dict[str, ProcessedText]:
    return {t.tweet_id: process_text(t.text) for t in tweets}


@dataclass
class IngestResult:
    corpus: JoinedCorpus
    processed: dict[str, ProcessedText]
    counts: dict[str, int]


def run_ingest(cfg: PipelineConfig, manifest: Manifest) -> IngestResult:
    """Parse, geolocate, filter, and join the corpus; persist the artifacts."""
    require_paths(cfg, "corpus_path", "zip_features_path")
    if not cfg.boxes:
        raise ConfigError("no bounding boxes configured (box.<metro> entries)")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest.add_input("corpus", cfg.corpus_path)
    manifest.add_input("zip_features", cfg.zip_features_path)

    t0 = time.perf_counter()
    with open(cfg.corpus_path, encoding="utf-8") as fh:
        tweets, parse_report = parse_corpus(fh)
    n_retweets = 0
    if cfg.exclude_retweets:
        kept = [t for t in tweets if not t.is_retweet()]
        n_retweets = len(tweets) - len(kept)
        tweets = kept
    resolver = _resolver(cfg)
    if cfg.resolver_kind == "exact":
        manifest.add_input("exact_table", cfg.exact_table_path)
    else:
        manifest.add_input("centroids", cfg.centroids_path)
    located, locate_report = locate_tweets(tweets, cfg.boxes, resolver)
    filtered = filter_min_tweets(located, cfg.min_tweets)
    features = load_zip_features(cfg.zip_features_path)
    joined = join_zip_features(filtered, features)
    if cfg.refilter_after_join:
        refiltered = filter_min_tweets(joined.tweets, cfg.min_tweets)
        joined = JoinedCorpus(
            tweets=refiltered,
            features={z: joined.features[z] for z in sorted({t.zip_code for t in refiltered})},
            n_dropped_tweets=joined.n_dropped_tweets + len(joined.tweets) - len(refiltered),
            dropped_zips=joined.dropped_zips,
        )
    processed = _process_all(joined.tweets)
    manifest.stage("ingest", len(joined.tweets), time.perf_counter() - t0)

    write_corpus_jsonl(joined.tweets, out / CORPUS_ARTIFACT)
    stats = corpus_stats(joined.tweets, processed)
    write_stats_csv(stats, out / STATS_ARTIFACT)
    counts = {
        "parsed": parse_report.n_parsed,
        "rejected_lines": parse_report.n_rejected,
        "retweets_excluded": n_retweets,
        "no_metro": locate_report.n_no_metro,
        "no_zip": locate_report.n_no_zip,
        "below_min_tweets": len(located) - len(filtered),
        "dropped_null_features": joined.n_dropped_tweets,
        "final": len(joined.tweets),
    }
    for reason, n in sorted(parse_report.reasons.items()):
        counts[f"rejected_{reason}"] = n
    return IngestResult(corpus=joined, processed=processed, counts=counts)


def write_stats_csv(stats, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "metro",
                "n_zips",
                "n_tweets",
                "avg_tweets_per_zip",
                "n_hashtags_before",
                "n_hashtags_after",
                "n_unique_hashtags_after",
            ]
        )
        for row in list(stats.rows) + [stats.total]:
            writer.writerow(
                [
                    row.metro,
                    row.n_zips,
                    row.n_tweets,
                    f"{row.avg_tweets_per_zip:.3f}",
                    row.n_hashtags_raw,
                    row.n_hashtags_processed,
                    row.n_unique_hashtags,
                ]
            )


def ensure_ingested(cfg: PipelineConfig, manifest: Manifest) -> tuple[list[LocatedTweet], dict[str, ZipFeatureRecord]]:
    """Load the persisted corpus artifact, ingesting first if it is missing."""
    artifact = Path(cfg.out_dir) / CORPUS_ARTIFACT
    if artifact.exists():
        tweets = read_located_corpus(artifact)
        require_paths(cfg, "zip_features_path")
        features = load_zip_features(cfg.zip_features_path)
        joined = join_zip_features(tweets, features)
        if len(joined.tweets) != len(tweets):
            raise ConfigError(
                "corpus artifact does not match the feature table; re-run ingest"
            )
        return joined.tweets, joined.features
    result = run_ingest(cfg, manifest)
    return result.corpus.tweets, result.corpus.features


def run_stats(cfg: PipelineConfig, manifest: Manifest):
    tweets, _ = ensure_ingested(cfg, manifest)
    t0 = time.perf_counter()
    processed = _process_all(tweets)
    stats = corpus_stats(tweets, processed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_stats_csv(stats, out / STATS_ARTIFACT)
    manifest.stage("stats", len(tweets), time.perf_counter() - t0)
    return stats


def ensure_split(cfg: PipelineConfig, tweet_ids: list[str], zips: list[str], manifest: Manifest) -> SplitResult:
    """Load split.json when it matches the corpus, otherwise split and persist."""
    out = Path(cfg.out_dir)
    path = out / SPLIT_ARTIFACT
    id_to_idx = {tid: i for i, tid in enumerate(tweet_ids)}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = set(data.get("train_ids", [])) | set(data.get("test_ids", []))
        if known == set(tweet_ids):
            return SplitResult(
                train_idx=np.array(sorted(id_to_idx[t] for t in data["train_ids"]), dtype=np.int64),
                test_idx=np.array(sorted(id_to_idx[t] for t in data["test_ids"]), dtype=np.int64),
                seed=int(data["seed"]),
            )
        raise ConfigError("split.json does not match the corpus; delete it or re-run ingest")
    t0 = time.perf_counter()
    split = stratified_split(zips, cfg.test_frac, cfg.split_seed)
    out.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "seed": cfg.split_seed,
                "test_frac": cfg.test_frac,
                "train_ids": [tweet_ids[i] for i in split.train_idx],
                "test_ids": [tweet_ids[i] for i in split.test_idx],
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    manifest.stage("split", len(tweet_ids), time.perf_counter() - t0)
    return split


def run_split(cfg: PipelineConfig, manifest: Manifest) -> SplitResult:
    """Persist the stratified split for the labeled corpus."""
    tweets, _ = ensure_ingested(cfg, manifest)
    require_paths(cfg, "ground_truth_path")
    gt = load_ground_truth(cfg.ground_truth_path)
    keep, _labels, _dropped = pseudo_label([t.zip_code for t in tweets], gt)
    tweets = [tweets[i] for i in keep]
    if not tweets:
        raise ConfigError("no tweets remain after pseudo-labeling; check the ground truth")
    return ensure_split(cfg, [t.tweet_id for t in tweets], [t.zip_code for t in tweets], manifest)


@dataclass
class MatrixBundle:
    tweets: list[LocatedTweet]
    zips: list[str]
    labels: np.ndarray
    sentiments: np.ndarray
    zip_rows: np.ndarray
    embeddings: dict[str, np.ndarray]
    embed_counts: dict[str, np.ndarray]
    gt: dict[str, float]
    zip_to_metro: dict[str, str]
    split: SplitResult
    folds: list[np.ndarray]
    embed_dim: int


def build_bundle(cfg: PipelineConfig, manifest: Manifest) -> MatrixBundle:
    tweets, features = ensure_ingested(cfg, manifest)
    require_paths(cfg, "ground_truth_path", "vectors_path")
    manifest.add_input("ground_truth", cfg.ground_truth_path)
    manifest.add_input("vectors", cfg.vectors_path)
    gt = load_ground_truth(cfg.ground_truth_path)

    zips_all = [t.zip_code for t in tweets]
    keep, labels, _dropped = pseudo_label(zips_all, gt)
    tweets = [tweets[i] for i in keep]
    if not tweets:
        raise ConfigError("no tweets remain after pseudo-labeling; check the ground truth")
    zips = [t.zip_code for t in tweets]
    tweet_ids = [t.tweet_id for t in tweets]

    split = ensure_split(cfg, tweet_ids, zips, manifest)
    folds = kfold(len(split.train_idx), cfg.cv_k, cfg.cv_seed)

    t0 = time.perf_counter()
    processed = _process_all(tweets)
    table = load_vectors(cfg.vectors_path, expected_dim=cfg.embed_dim)
    token_lists = [processed[tid].tokens for tid in tweet_ids]
    embeddings: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}
    for rep in Representation:
        X, c = embed_matrix(token_lists, table, rep)
        embeddings[rep.value] = X
        counts[rep.value] = c
    manifest.stage("embed", len(tweets), time.perf_counter() - t0)

    sentiments = np.array([t.sentiment for t in tweets], dtype=np.float64)
    zip_rows = np.array([features[z].values() for z in zips], dtype=np.float64)
    zip_to_metro: dict[str, str] = {}
    for t in tweets:
        zip_to_metro.setdefault(t.zip_code, t.metro)
    return MatrixBundle(
        tweets=tweets,
        zips=zips,
        labels=labels,
        sentiments=sentiments,
        zip_rows=zip_rows,
        embeddings=embeddings,
        embed_counts=counts,
        gt=gt,
        zip_to_metro=zip_to_metro,
        split=split,
        folds=folds,
        embed_dim=table.dim,
    )


@dataclass(frozen=True)
class CellSpec:
    representation: str  # a Representation value or "zip_only"
    family: ModelFamily
    use_zip: bool
    use_sentiment: bool

    @property
    def cell_id(self) -> str:
        zf = "zip" if self.use_zip else "nozip"
        st = "sent" if self.use_sentiment else "nosent"
        return f"{self.representation}|{self.family.value}|{zf}|{st}"


def all_cells() -> list[CellSpec]:
    """The canonical model matrix: 30 text cells plus 2 zip-only cells."""
    cells: list[CellSpec] = []
    fams = [
        (ModelFamily.SVR_RBF, True),
        (ModelFamily.SVR_RBF, False),
        (ModelFamily.SVR_LINEAR, True),
        (ModelFamily.OLS, True),
        (ModelFamily.SGD, True),
    ]
    for rep in Representation:
        for family, use_zip in fams:
            for sent in (False, True):
                cells.append(CellSpec(rep.value, family, use_zip, sent))
    for sent in (False, True):
        cells.append(CellSpec(ZIP_ONLY, ModelFamily.SVR_RBF, True, sent))
    return cells


def select_cells(selection: str) -> list[CellSpec]:
    cells = all_cells()
    if selection.strip() == "all":
        return cells
    by_id = {c.cell_id: c for c in cells}
    chosen = []
    for raw in selection.split(","):
        cid = raw.strip()
        if not cid:
            continue
        if cid not in by_id:
            raise ConfigError(f"unknown matrix cell {cid!r}; known cells: {sorted(by_id)}")
        chosen.append(by_id[cid])
    if not chosen:
        raise ConfigError("matrix.cells selected no cells")
    return chosen


def family_hyperparams(cfg: PipelineConfig) -> dict[ModelFamily, object]:
    return {
        ModelFamily.OLS: None,
        ModelFamily.SGD: SGDHyperparams(
            alpha=cfg.sgd_alpha,
            eta0=cfg.sgd_eta0,
            power_t=cfg.sgd_power_t,
            max_epochs=cfg.sgd_max_epochs,
            tol=cfg.sgd_tol,
            n_iter_no_change=cfg.sgd_n_iter_no_change,
        ),
        ModelFamily.SVR_LINEAR: LinearSVRHyperparams(
            C=cfg.svr_linear_c,
            epsilon=cfg.svr_linear_epsilon,
            max_iter=cfg.svr_linear_max_iter,
            batch_size=cfg.svr_linear_batch_size,
            eta0=cfg.svr_linear_eta0,
            patience=cfg.svr_linear_patience,
            min_rel_improvement=cfg.svr_linear_min_improvement,
        ),
        ModelFamily.SVR_RBF: SVRHyperparams(
            C=cfg.svr_c,
            epsilon=cfg.svr_epsilon,
            gamma=cfg.svr_gamma,
            tol=cfg.svr_tol,
            max_passes=cfg.svr_max_passes,
            cache_mb=cfg.svr_cache_mb,
        ),
    }


def scale_policy(cfg: PipelineConfig) -> StandardizationPolicy:
    return StandardizationPolicy(
        scope=cfg.scale_scope,
        include_sentiment=cfg.standardize_sentiment,
        include_zip=cfg.standardize_zip,
        include_embedding=cfg.standardize_embedding,
    )


@dataclass
class CellResult:
    cell: CellSpec
    status: str = "ok"
    error: str = ""
    tweet_rmse: float | None = None
    cv_rmse: float | None = None
    zip_rmse: float | None = None
    converged: bool | None = None
    zip_preds: dict[str, float] = field(default_factory=dict)
    hyperparams: dict = field(default_factory=dict)
    seed: int | None = None


def _cell_feature_config(cell: CellSpec) -> FeatureConfig:
    if cell.representation == ZIP_ONLY:
        return FeatureConfig(
            representation=None,
            use_text=False,
            use_sentiment=cell.use_sentiment,
            use_zip_features=cell.use_zip,
        )
    return FeatureConfig(
        representation=Representation(cell.representation),
        use_text=True,
        use_sentiment=cell.use_sentiment,
        use_zip_features=cell.use_zip,
    )


def run_cell(cell: CellSpec, bundle: MatrixBundle, cfg: PipelineConfig):
    """Fit one matrix cell; returns (CellResult, FittedModel)."""
    fc = _cell_feature_config(cell)
    hps = family_hyperparams(cfg)[cell.family]
    policy = scale_policy(cfg)
    X = build_design_matrix(
        fc,
        bundle.embeddings.get(cell.representation) if fc.use_text else None,
        bundle.sentiments,
        bundle.zip_rows,
    )
    layout = feature_layout(fc, bundle.embed_dim)
    mask = external_mask(fc, bundle.embed_dim, policy)
    y = bundle.labels
    train_idx, test_idx = bundle.split.train_idx, bundle.split.test_idx
    folds = bundle.folds
    if cfg.drop_empty_embeddings and fc.use_text:
        used = bundle.embed_counts[cell.representation] > 0
        train_idx = train_idx[used[train_idx]]
        test_idx = test_idx[used[test_idx]]
        folds = kfold(len(train_idx), cfg.cv_k, cfg.cv_seed)
    Xtr_raw, Xte_raw = X[train_idx], X[test_idx]
    Xtr, Xte = standardize_split(Xtr_raw, Xte_raw, mask, policy)
    spec = RegressorSpec(cell.family, hyperparams=hps, seed=cfg.models_seed)
    model = fit(spec, Xtr, y[train_idx], layout=layout)
    preds = model.predict(Xte)
    clamp = (lambda p: np.clip(p, 0.0, 1.0)) if cfg.clamp_predictions else None
    if clamp is not None:
        preds = clamp(preds)
    tweet_rmse = rmse(y[test_idx], preds)
    cv_mean, _ = cross_validate(
        spec, Xtr_raw, y[train_idx], folds, scale_mask=mask, policy=policy,
        predict_transform=clamp,
    )
    test_zips = [bundle.zips[i] for i in test_idx]
    zip_preds = aggregate_zip(group_by_zip(test_zips, preds))
    zip_truth = np.array([bundle.gt[z] for z in sorted(zip_preds)], dtype=np.float64)
    zip_est = np.array([zip_preds[z] for z in sorted(zip_preds)], dtype=np.float64)
    result = CellResult(
        cell=cell,
        tweet_rmse=tweet_rmse,
        cv_rmse=cv_mean,
        zip_rmse=rmse(zip_truth, zip_est),
        converged=model.converged,
        zip_preds=zip_preds,
        hyperparams=dict(model.hyperparams),
        seed=model.seed,
    )
    return result, model


def run_matrix(cfg: PipelineConfig, manifest: Manifest) -> int:
    """Run the model matrix and the baselines; returns the exit code (0 or 2)."""
    bundle = build_bundle(cfg, manifest)
    cells = select_cells(cfg.matrix_cells)
    t0 = time.perf_counter()

    def safe_run(cell: CellSpec) -> CellResult:
        try:
            result, _model = run_cell(cell, bundle, cfg)
            return result
        except Exception as exc:  # cell isolation: one failure must not stop the rest
            return CellResult(cell=cell, status="failed", error=f"{type(exc).__name__}: {exc}")

    if cfg.matrix_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.matrix_workers) as pool:
            results = list(pool.map(safe_run, cells))
    else:
        results = [safe_run(c) for c in cells]

    y = bundle.labels
    baselines = constant_baselines(
        bundle.gt,
        y[bundle.split.train_idx],
        y,
        y[bundle.split.test_idx],
    )
    manifest.stage("matrix", len(cells), time.perf_counter() - t0)
    for r in results:
        manifest.add_cell(r.cell.cell_id, r.cell.family.value, r.hyperparams, r.seed)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(out / MATRIX_CSV, results, baselines)
    _write_matrix_json(out / MATRIX_JSON, results, baselines)
    preds = {r.cell.cell_id: r.zip_preds for r in results if r.status == "ok"}
    with open(out / PREDICTIONS_ARTIFACT, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"cells": preds}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 2 if any(r.status != "ok" for r in results) else 0


def _fmt(x, digits=6) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def _write_matrix_csv(path, results: list[CellResult], baselines):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "kind", "cell_id", "representation", "model", "zip_features",
                "sentiment", "constant", "tweet_rmse", "cv_rmse", "zip_rmse",
                "converged", "status", "error",
            ]
        )
        for r in results:
            writer.writerow(
                [
                    "model",
                    r.cell.cell_id,
                    r.cell.representation,
                    r.cell.family.value,
                    str(r.cell.use_zip).lower(),
                    str(r.cell.use_sentiment).lower(),
                    "",
                    _fmt(r.tweet_rmse),
                    _fmt(r.cv_rmse),
                    _fmt(r.zip_rmse),
                    "" if r.converged is None else str(r.converged).lower(),
                    r.status,
                    r.error,
                ]
            )
        for b in baselines:
            writer.writerow(
                [
                    "baseline", f"baseline|{b.name}", "", b.name, "", "",
                    f"{b.constant:.4f}", _fmt(b.tweet_rmse), "", _fmt(b.zip_rmse),
                    "", "ok", "",
                ]
            )


def _write_matrix_json(path, results: list[CellResult], baselines):
    data = {
        "cells": [
            {
                "cell_id": r.cell.cell_id,
                "representation": r.cell.representation,
                "model": r.cell.family.value,
                "zip_features": r.cell.use_zip,
                "sentiment": r.cell.use_sentiment,
                "tweet_rmse": r.tweet_rmse,
                "cv_rmse": r.cv_rmse,
                "zip_rmse": r.zip_rmse,
                "converged": r.converged,
                "status": r.status,
                "error": r.error,
            }
            for r in results
        ],
        "baselines": [
            {
                "name": b.name,
                "constant": b.constant,
                "tweet_rmse": b.tweet_rmse,
                "zip_rmse": b.zip_rmse,
            }
            for b in baselines
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_train(cfg: PipelineConfig, cell_id: str, manifest: Manifest) -> CellResult:
    """Fit a single cell and persist the model parameters."""
    cells = {c.cell_id: c for c in all_cells()}
    if cell_id not in cells:
        raise ConfigError(f"unknown cell {cell_id!r}; known cells: {sorted(cells)}")
    bundle = build_bundle(cfg, manifest)
    t0 = time.perf_counter()
    result, model = run_cell(cells[cell_id], bundle, cfg)
    manifest.stage("train", len(bundle.split.train_idx), time.perf_counter() - t0)
    manifest.add_cell(cell_id, result.cell.family.value, result.hyperparams, result.seed)
    out = Path(cfg.out_dir) / "models"
    out.mkdir(parents=True, exist_ok=True)
    safe = cell_id.replace("|", "__")
    save_model(model, out / f"{safe}.json")
    with open(out / f"{safe}.metrics.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "cell_id": cell_id,
                "tweet_rmse": result.tweet_rmse,
                "cv_rmse": result.cv_rmse,
                "zip_rmse": result.zip_rmse,
                "converged": result.converged,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return result


def run_report(cfg: PipelineConfig, manifest: Manifest):
    """Error-analysis breakdown for one matrix cell (default: best zip RMSE)."""
    out = Path(cfg.out_dir)
    matrix_path = out / MATRIX_JSON
    preds_path = out / PREDICTIONS_ARTIFACT
    if not matrix_path.exists() or not preds_path.exists():
        raise ConfigError("matrix artifacts not found; run the matrix stage first")
    with open(matrix_path, encoding="utf-8") as fh:
        matrix = json.load(fh)
    with open(preds_path, encoding="utf-8") as fh:
        predictions = json.load(fh)["cells"]
    ok_cells = {
        c["cell_id"]: c for c in matrix["cells"] if c["status"] == "ok" and c["zip_rmse"] is not None
    }
    if not ok_cells:
        raise ConfigError("no successful matrix cells to report on")
    if cfg.report_cell == "best":
        chosen = min(ok_cells.values(), key=lambda c: (c["zip_rmse"], c["cell_id"]))["cell_id"]
    else:
        chosen = cfg.report_cell
        if chosen not in ok_cells:
            raise ConfigError(
                f"cell {chosen!r} is not available; successful cells: {sorted(ok_cells)}"
            )
    tweets, _features = ensure_ingested(cfg, manifest)
    require_paths(cfg, "ground_truth_path")
    gt = load_ground_truth(cfg.ground_truth_path)
    zip_to_metro: dict[str, str] = {}
    for t in tweets:
        zip_to_metro.setdefault(t.zip_code, t.metro)
    t0 = time.perf_counter()
    analysis = error_analysis(predictions[chosen], gt, zip_to_metro)
    manifest.stage("report", analysis.total.n_zips, time.perf_counter() - t0)

    with open(out / REPORT_CSV, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "metro", "n_zips", "n_overestimated", "fraction_overestimated",
                "n_over_by_020", "n_absgap_ge_020",
            ]
        )
        for row in list(analysis.per_metro) + [analysis.total]:
            writer.writerow(
                [
                    row.metro,
                    row.n_zips,
                    row.n_overestimated,
                    f"{row.fraction_overestimated:.4f}",
                    row.n_over_by_threshold,
                    row.n_absgap_ge_threshold,
                ]
            )
    lines = [
        f"error analysis for cell {chosen}",
        f"zip-level RMSE {ok_cells[chosen]['zip_rmse']:.6f}",
        "",
    ]
    for row in list(analysis.per_metro) + [analysis.total]:
        lines.append(
            f"{row.metro}: {row.n_overestimated}/{row.n_zips} zips overestimated "
            f"({100.0 * row.fraction_overestimated:.2f}%), "
            f"{row.n_over_by_threshold} over by >= {analysis.threshold:.2f}, "
            f"{row.n_absgap_ge_threshold} with |gap| >= {analysis.threshold:.2f}"
        )
    with open(out / REPORT_TXT, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return analysis, chosen
