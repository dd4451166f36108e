"""Feature standardization and per-tweet feature vector assembly.

Column layout is fixed: embedding dimensions (when text is used), then
sentiment, then the four zip-level attributes (zhvi, n_health, n_edu,
n_pst). Only external columns pass through standardization by default;
embedding dimensions are used as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import ZipFeatureRecord
from .embedding import Representation, TweetEmbedding

ZIP_FEATURE_COLUMNS = ("zhvi", "n_health", "n_edu", "n_pst")


@dataclass(frozen=True)
class FeatureConfig:
    """Which blocks go into the design matrix for one model cell."""

    representation: Representation | None
    use_text: bool = True
    use_sentiment: bool = False
    use_zip_features: bool = True

    def __post_init__(self):
        if not (self.use_text or self.use_zip_features):
            raise ValueError("a cell must use text and/or zip features")
        if self.use_text and self.representation is None:
            raise ValueError("text cells need a representation")


@dataclass(frozen=True)
class StandardizationPolicy:
    """How to scale external columns around a train/test split.

    ``scope="separate"`` fits the scaler on each side independently;
    ``scope="train"`` fits on the train side and applies it to both.
    """

    scope: str = "separate"
    include_sentiment: bool = True
    include_zip: bool = True
    include_embedding: bool = False

    def __post_init__(self):
        if self.scope not in ("separate", "train"):
            raise ValueError(f"unknown standardization scope {self.scope!r}")


@dataclass
class StandardizationParams:
    means: np.ndarray
    stds: np.ndarray


def standardize_fit(matrix: np.ndarray) -> StandardizationParams:
    """Per-column mean and population standard deviation."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot fit standardization on an empty matrix")
    if X.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return StandardizationParams(means=X.mean(axis=0), stds=X.std(axis=0))


def standardize_apply(matrix: np.ndarray, params: StandardizationParams) -> np.ndarray:
    """(x - mean) / std per column; zero-std columns map to 0."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.means.shape[0]:
        raise ValueError(
            f"column count {X.shape[1] if X.ndim == 2 else 'n/a'} does not match "
            f"fitted params ({params.means.shape[0]})"
        )
    nonzero = params.stds != 0.0
    out = np.zeros_like(X, dtype=np.float64)
    out[:, nonzero] = (X[:, nonzero] - params.means[nonzero]) / params.stds[nonzero]
    return out


def feature_layout(cfg: FeatureConfig, embedding_dim: int = 300) -> list[str]:
    cols: list[str] = []
    if cfg.use_text:
        cols.extend(f"emb_{i:03d}" for i in range(embedding_dim))
    if cfg.use_sentiment:
        cols.append("sentiment")
    if cfg.use_zip_features:
        cols.extend(ZIP_FEATURE_COLUMNS)
    return cols


def external_mask(cfg: FeatureConfig, embedding_dim: int = 300,
                  policy: StandardizationPolicy | None = None) -> np.ndarray:
    """Boolean mask of columns that pass through standardization."""
    policy = policy or StandardizationPolicy()
    mask: list[bool] = []
    if cfg.use_text:
        mask.extend([policy.include_embedding] * embedding_dim)
    if cfg.use_sentiment:
        mask.append(policy.include_sentiment)
    if cfg.use_zip_features:
        mask.extend([policy.include_zip] * len(ZIP_FEATURE_COLUMNS))
    return np.array(mask, dtype=bool)


def assemble(
    embedding: TweetEmbedding | None,
    sentiment: float | None,
    zip_record: ZipFeatureRecord | None,
    cfg: FeatureConfig,
    embedding_dim: int = 300,
) -> np.ndarray:
    """Concatenate one tweet's enabled blocks in the fixed layout order.

    Raises ValueError naming the missing field when an enabled block has no
    data. Values are raw (pre-standardization).
    """
    parts: list[np.ndarray] = []
    if cfg.use_text:
        if embedding is None:
            raise ValueError("feature assembly: missing embedding")
        if embedding.vector.shape[0] != embedding_dim:
            raise ValueError(
                f"feature assembly: embedding dim {embedding.vector.shape[0]} != {embedding_dim}"
            )
        parts.append(np.asarray(embedding.vector, dtype=np.float64))
    if cfg.use_sentiment:
        if sentiment is None:
            raise ValueError("feature assembly: missing sentiment")
        parts.append(np.array([float(sentiment)]))
    if cfg.use_zip_features:
        if zip_record is None:
            raise ValueError("feature assembly: missing zip feature record")
        parts.append(np.array(zip_record.values(), dtype=np.float64))
    vec = np.concatenate(parts)
    if not np.all(np.isfinite(vec)):
        raise ValueError("feature assembly: non-finite value")
    return vec


def build_design_matrix(
    cfg: FeatureConfig,
    embeddings: np.ndarray | None,
    sentiments: Sequence[float] | None,
    zip_rows: np.ndarray | None,
) -> np.ndarray:
    """Vectorized assembly for a whole corpus slice (same layout as assemble)."""
    blocks: list[np.ndarray] = []
    n = None
    if cfg.use_text:
        if embeddings is None:
            raise ValueError("feature assembly: missing embedding")
        blocks.append(np.asarray(embeddings, dtype=np.float64))
        n = blocks[-1].shape[0]
    if cfg.use_sentiment:
        if sentiments is None:
            raise ValueError("feature assembly: missing sentiment")
        blocks.append(np.asarray(sentiments, dtype=np.float64).reshape(-1, 1))
        n = blocks[-1].shape[0]
    if cfg.use_zip_features:
        if zip_rows is None:
            raise ValueError("feature assembly: missing zip feature record")
        blocks.append(np.asarray(zip_rows, dtype=np.float64))
        n = blocks[-1].shape[0]
    if any(b.shape[0] != n for b in blocks):
        raise ValueError("feature assembly: block row counts differ")
    X = np.hstack(blocks)
    if not np.all(np.isfinite(X)):
        raise ValueError("feature assembly: non-finite value")
    return X


def standardize_split(
    X_train: np.ndarray,
    X_test: np.ndarray,
    mask: np.ndarray,
    policy: StandardizationPolicy | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Standardize the masked columns of a train/test pair per the policy."""
    policy = policy or StandardizationPolicy()
    cols = np.where(np.asarray(mask, dtype=bool))[0]
    Xtr = np.array(X_train, dtype=np.float64, copy=True)
    Xte = np.array(X_test, dtype=np.float64, copy=True)
    if cols.size == 0:
        return Xtr, Xte
    p_train = standardize_fit(Xtr[:, cols])
    Xtr[:, cols] = standardize_apply(Xtr[:, cols], p_train)
    if Xte.shape[0]:
        if policy.scope == "separate":
            p_test = standardize_fit(Xte[:, cols])
            Xte[:, cols] = standardize_apply(Xte[:, cols], p_test)
        else:
            Xte[:, cols] = standardize_apply(Xte[:, cols], p_train)
    return Xtr, Xte
