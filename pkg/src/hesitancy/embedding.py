"""Pretrained word-vector loading and tweet embedding.

Tweets are embedded as the unweighted mean of the vectors of their
in-vocabulary tokens. Three token-selection rules are supported: text only
(hashtags excluded), text and hashtags, and hybrid (hashtag tokens when the
tweet has any, otherwise the text tokens).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .textprep import Token

log = logging.getLogger(__name__)

DEFAULT_DIM = 300


class Representation(str, Enum):
    TEXT_ONLY = "text_only"
    TEXT_AND_HASHTAGS = "text_and_hashtags"
    HYBRID = "hybrid"


@dataclass
class VectorTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    n_malformed: int = 0
    n_duplicates: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


@dataclass
class TweetEmbedding:
    vector: np.ndarray
    n_tokens_used: int

    @property
    def is_empty(self) -> bool:
        return self.n_tokens_used == 0


def _is_header(fields: list[str]) -> bool:
    if len(fields) != 2:
        return False
    try:
        int(fields[0]), int(fields[1])
    except ValueError:
        return False
    return True


def load_vectors(path, expected_dim: int | None = DEFAULT_DIM) -> VectorTable:
    """Load a textual word-vector file (``token v1 ... v_dim`` per line).

    An optional ``count dim`` header is auto-detected (a first line with
    exactly two integer fields). The actual rows win over the header count.
    ``expected_dim`` must match the file's dimension; pass None to accept
    whatever the file declares. Malformed lines are skipped and counted;
    duplicate tokens keep the last occurrence and are counted.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot open vector file {path}: {exc}") from exc
    with fh:
        first = fh.readline()
        if not first:
            raise ConfigError(f"vector file {path} is empty")
        fields = first.split()
        declared_count = None
        dim = None
        pending: list[list[str]] = []
        if _is_header(fields):
            declared_count, dim = int(fields[0]), int(fields[1])
        else:
            pending.append(fields)
            dim = len(fields) - 1
        if dim is None or dim <= 0:
            raise ConfigError(f"vector file {path}: cannot determine dimension")
        if expected_dim is not None and dim != expected_dim:
            raise ConfigError(
                f"vector file {path}: dimension {dim} does not match expected {expected_dim}"
            )
        table = VectorTable(dim=dim)
        for fields in _chain_fields(pending, fh):
            if len(fields) != dim + 1:
                table.n_malformed += 1
                continue
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]], dtype=np.float64)
            except ValueError:
                table.n_malformed += 1
                continue
            if not np.all(np.isfinite(vec)):
                table.n_malformed += 1
                continue
            if token in table.vectors:
                table.n_duplicates += 1
            table.vectors[token] = vec
        if declared_count is not None and declared_count != len(table.vectors):
            log.warning(
                "vector file %s: header declares %d entries, parsed %d",
                path, declared_count, len(table.vectors),
            )
        if table.n_malformed:
            log.warning("vector file %s: skipped %d malformed lines", path, table.n_malformed)
        if table.n_duplicates:
            log.warning("vector file %s: %d duplicate tokens (last wins)", path, table.n_duplicates)
        return table


def _chain_fields(pending: list[list[str]], fh) -> Iterable[list[str]]:
    yield from pending
    for line in fh:
        fields = line.split()
        if fields:
            yield fields


def select_tokens(tokens: Sequence[Token], representation: Representation) -> list[Token]:
    """Pick the tokens a representation embeds.

    text_only drops hashtag tokens, text_and_hashtags keeps everything, and
    hybrid uses the hashtag tokens when the tweet has any and falls back to
    the text tokens otherwise.
    """
    if representation == Representation.TEXT_ONLY:
        return [t for t in tokens if not t.is_hashtag]
    if representation == Representation.TEXT_AND_HASHTAGS:
        return list(tokens)
    if representation == Representation.HYBRID:
        tags = [t for t in tokens if t.is_hashtag]
        return tags if tags else [t for t in tokens if not t.is_hashtag]
    raise ValueError(f"unknown representation {representation!r}")


def embed_tweet(tokens: Sequence[Token], table: VectorTable) -> TweetEmbedding:
    """Mean-pool the vectors of in-vocabulary tokens (multiplicity counts).

    Out-of-vocabulary tokens are skipped. With no usable token the embedding
    is the all-zero vector and marked empty.
    """
    total = np.zeros(table.dim, dtype=np.float64)
    used = 0
    for tok in tokens:
        vec = table.vectors.get(tok.text)
        if vec is not None:
            total += vec
            used += 1
    if used:
        total /= used
    return TweetEmbedding(vector=total, n_tokens_used=used)


def embed_matrix(
    token_lists: Sequence[Sequence[Token]],
    table: VectorTable,
    representation: Representation,
) -> tuple[np.ndarray, np.ndarray]:
    """Embed many tweets under one representation.

    Returns an (n, dim) matrix and the per-tweet count of tokens used.
    """
    X = np.zeros((len(token_lists), table.dim), dtype=np.float64)
    counts = np.zeros(len(token_lists), dtype=np.int64)
    for i, tokens in enumerate(token_lists):
        emb = embed_tweet(select_tokens(tokens, representation), table)
        X[i] = emb.vector
        counts[i] = emb.n_tokens_used
    return X, counts
