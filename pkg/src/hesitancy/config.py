"""Flat key-value pipeline configuration with dotted section names.

A config file holds ``key = value`` lines (``#`` comments allowed). Every
key can also be overridden on the command line; bounding boxes are ordered
``box.<metro> = min_lat,max_lat,min_lon,max_lon`` entries whose file order
is the metro assignment priority.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .corpus import BoundingBox
from .errors import ConfigError


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _gamma(raw: str):
    v = raw.strip()
    if v == "scale":
        return v
    return float(v)


# key -> (attribute, parser)
_SCHEMA = {
    "paths.corpus": ("corpus_path", str),
    "paths.vectors": ("vectors_path", str),
    "paths.zip_features": ("zip_features_path", str),
    "paths.centroids": ("centroids_path", str),
    "paths.exact_table": ("exact_table_path", str),
    "paths.ground_truth": ("ground_truth_path", str),
    "paths.out": ("out_dir", str),
    "corpus.min_tweets": ("min_tweets", int),
    "corpus.refilter_after_join": ("refilter_after_join", _bool),
    "corpus.exclude_retweets": ("exclude_retweets", _bool),
    "resolver.kind": ("resolver_kind", str),
    "resolver.cutoff_km": ("resolver_cutoff_km", float),
    "resolver.precision": ("resolver_precision", int),
    "embed.dim": ("embed_dim", int),
    "embed.drop_empty": ("drop_empty_embeddings", _bool),
    "features.scope": ("scale_scope", str),
    "features.standardize_sentiment": ("standardize_sentiment", _bool),
    "features.standardize_zip": ("standardize_zip", _bool),
    "features.standardize_embedding": ("standardize_embedding", _bool),
    "split.test_frac": ("test_frac", float),
    "split.seed": ("split_seed", int),
    "cv.k": ("cv_k", int),
    "cv.seed": ("cv_seed", int),
    "models.seed": ("models_seed", int),
    "models.clamp": ("clamp_predictions", _bool),
    "svr.c": ("svr_c", float),
    "svr.epsilon": ("svr_epsilon", float),
    "svr.gamma": ("svr_gamma", _gamma),
    "svr.tol": ("svr_tol", float),
    "svr.max_passes": ("svr_max_passes", int),
    "svr.cache_mb": ("svr_cache_mb", float),
    "svr_linear.c": ("svr_linear_c", float),
    "svr_linear.epsilon": ("svr_linear_epsilon", float),
    "svr_linear.max_iter": ("svr_linear_max_iter", int),
    "svr_linear.batch_size": ("svr_linear_batch_size", int),
    "svr_linear.eta0": ("svr_linear_eta0", float),
    "svr_linear.patience": ("svr_linear_patience", int),
    "svr_linear.min_improvement": ("svr_linear_min_improvement", float),
    "sgd.alpha": ("sgd_alpha", float),
    "sgd.eta0": ("sgd_eta0", float),
    "sgd.power_t": ("sgd_power_t", float),
    "sgd.max_epochs": ("sgd_max_epochs", int),
    "sgd.tol": ("sgd_tol", float),
    "sgd.n_iter_no_change": ("sgd_n_iter_no_change", int),
    "matrix.cells": ("matrix_cells", str),
    "matrix.workers": ("matrix_workers", int),
    "report.cell": ("report_cell", str),
}


@dataclass
class PipelineConfig:
    corpus_path: str = ""
    vectors_path: str = ""
    zip_features_path: str = ""
    centroids_path: str = ""
    exact_table_path: str = ""
    ground_truth_path: str = ""
    out_dir: str = "out"
    boxes: list[BoundingBox] = field(default_factory=list)
    min_tweets: int = 10
    refilter_after_join: bool = False
    exclude_retweets: bool = True
    resolver_kind: str = "centroid"
    resolver_cutoff_km: float = 25.0
    resolver_precision: int = 4
    embed_dim: int = 300
    drop_empty_embeddings: bool = False
    scale_scope: str = "separate"
    standardize_sentiment: bool = True
    standardize_zip: bool = True
    standardize_embedding: bool = False
    test_frac: float = 0.2
    split_seed: int = 42
    cv_k: int = 5
    cv_seed: int = 42
    models_seed: int = 42
    clamp_predictions: bool = False
    svr_c: float = 1.0
    svr_epsilon: float = 0.1
    svr_gamma: object = "scale"
    svr_tol: float = 1e-3
    svr_max_passes: int = 200
    svr_cache_mb: float = 64.0
    svr_linear_c: float = 1.0
    svr_linear_epsilon: float = 0.0
    svr_linear_max_iter: int = 4000
    svr_linear_batch_size: int = 128
    svr_linear_eta0: float = 0.05
    svr_linear_patience: int = 200
    svr_linear_min_improvement: float = 1e-6
    sgd_alpha: float = 1e-4
    sgd_eta0: float = 0.01
    sgd_power_t: float = 0.25
    sgd_max_epochs: int = 1000
    sgd_tol: float = 1e-3
    sgd_n_iter_no_change: int = 5
    matrix_cells: str = "all"
    matrix_workers: int = 1
    report_cell: str = "best"

    def snapshot(self) -> dict:
        """Stable dict view for the run manifest."""
        out = {}
        for f in fields(self):
            if f.name == "boxes":
                out["boxes"] = [
                    {
                        "metro": b.metro,
                        "min_lat": b.min_lat,
                        "max_lat": b.max_lat,
                        "min_lon": b.min_lon,
                        "max_lon": b.max_lon,
                    }
                    for b in self.boxes
                ]
            else:
                out[f.name] = getattr(self, f.name)
        return out


def _parse_box(metro: str, raw: str) -> BoundingBox:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"box.{metro}: expected min_lat,max_lat,min_lon,max_lon")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"box.{metro}: bad number in {raw!r}") from exc
    return BoundingBox(metro, *vals)


def parse_config_lines(lines, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines into an ordered raw mapping."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def build_config(raw: dict[str, str], overrides: dict[str, str] | None = None) -> PipelineConfig:
    merged = dict(raw)
    merged.update(overrides or {})
    cfg = PipelineConfig()
    boxes: list[BoundingBox] = []
    for key, value in merged.items():
        if key.startswith("box."):
            metro = key[len("box."):]
            if not metro:
                raise ConfigError("box entry needs a metro name (box.<metro>)")
            boxes.append(_parse_box(metro, value))
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        attr, parser = _SCHEMA[key]
        try:
            setattr(cfg, attr, parser(value))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    cfg.boxes = boxes
    if cfg.scale_scope not in ("separate", "train"):
        raise ConfigError(f"features.scope must be 'separate' or 'train', got {cfg.scale_scope!r}")
    if cfg.resolver_kind not in ("centroid", "exact"):
        raise ConfigError(f"resolver.kind must be 'centroid' or 'exact', got {cfg.resolver_kind!r}")
    if not 0.0 < cfg.test_frac < 1.0:
        raise ConfigError("split.test_frac must be in (0, 1)")
    return cfg


def load_config(path, overrides: dict[str, str] | None = None) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_lines(text.splitlines(), source=str(path)), overrides)


def require_paths(cfg: PipelineConfig, *names: str):
    """Validate that the named path fields are set and exist on disk."""
    for name in names:
        value = getattr(cfg, name)
        if not value:
            raise ConfigError(f"config is missing required path {name}")
        if not Path(value).exists():
            raise ConfigError(f"{name} does not exist: {value}")
