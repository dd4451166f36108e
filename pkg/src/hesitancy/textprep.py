"""Tweet text preprocessing: tokenization, normalization, hashtag accounting.

The pipeline is tokenize -> normalize. Tokenization lowercases, removes
mentions and URL tokens, and splits continuous hashtag runs (``#a#b#c``)
into individual hashtag-flagged tokens. Normalization strips every
non-letter character from each token, drops tokens of length <= 1, drops
stopwords, and lemmatizes what survives. Hashtag identity is carried on a
flag because the ``#`` symbol itself does not survive normalization.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable

# Negation/degree words that must never be treated as stopwords.
PROTECTED_WORDS = frozenset({"not", "no", "nor", "very", "most"})

_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
# Keep apostrophes and hyphens inside words so "covid-19" stays one token.
_PLAIN_TOKEN_RE = re.compile(r"[A-Za-z0-9'’-]+")
_NON_LETTER_RE = re.compile(r"[^a-z]+")


@dataclass(frozen=True)
class Token:
    """One preprocessed token.

    ``span`` holds (start, end) character offsets into the NFC-normalized
    source text of the region the token was derived from.
    """

    text: str
    is_hashtag: bool = False
    span: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ProcessedText:
    tokens: tuple[Token, ...]
    n_hashtags_raw: int
    n_hashtags_processed: int


class StopwordSet:
    """Stopword collection that never contains the protected words.

    Tokens are matched after non-letter stripping, so contractions in the
    source list ("you're", "don't") are indexed in stripped form as well.
    """

    def __init__(self, words: Iterable[str]):
        raw = {w.strip().lower() for w in words}
        raw.discard("")
        self.words = frozenset(raw - PROTECTED_WORDS)
        stripped = {_NON_LETTER_RE.sub("", w) for w in self.words}
        self._match = frozenset(stripped - PROTECTED_WORDS - {""})

    def __contains__(self, token: str) -> bool:
        return token in self._match

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_file(cls, path) -> "StopwordSet":
        with open(path, encoding="utf-8") as fh:
            return cls(line.strip() for line in fh if line.strip())

    @classmethod
    def default(cls) -> "StopwordSet":
        return default_stopwords()


class RuleLemmatizer:
    """Dictionary-plus-suffix lemmatizer with a noun-default part of speech.

    Lookup order for nouns: irregular-form table, known base words (left
    unchanged), then the suffix rules sses->ss, ies->y, s->empty. Verb mode
    additionally strips ing/ed, but only when the recovered stem (with
    e-restoration or consonant undoubling) is a known base word.
    """

    def __init__(self, exceptions: dict[str, str], base_words: Iterable[str]):
        self.exceptions = dict(exceptions)
        self.base_words = frozenset(base_words)

    def __call__(self, token: str, pos: str = "n") -> str:
        if pos == "v":
            return self._verb(token)
        return self._noun(token)

    def _noun(self, token: str) -> str:
        hit = self.exceptions.get(token)
        if hit:
            return hit
        if token in self.base_words:
            return token
        if token.endswith("sses"):
            return token[:-2]
        if token.endswith("ies") and len(token) >= 5:
            return token[:-3] + "y"
        if token.endswith("s") and len(token) >= 3 and not token.endswith(("ss", "us", "is")):
            return token[:-1]
        return token

    def _verb(self, token: str) -> str:
        hit = self.exceptions.get(token)
        if hit:
            return hit
        if token in self.base_words:
            return token
        for suffix in ("ing", "ed"):
            if token.endswith(suffix) and len(token) > len(suffix) + 1:
                stem = token[: -len(suffix)]
                undoubled = stem[:-1] if len(stem) >= 2 and stem[-1] == stem[-2] else None
                for cand in (stem, stem + "e", undoubled):
                    if cand and cand in self.base_words:
                        return cand
        return self._noun(token)

    @classmethod
    def default(cls) -> "RuleLemmatizer":
        return default_lemmatizer()


def _data_lines(name: str) -> list[str]:
    text = resources.files("hesitancy").joinpath("data", name).read_text(encoding="utf-8")
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@lru_cache(maxsize=1)
def default_stopwords() -> StopwordSet:
    return StopwordSet(_data_lines("stopwords.txt"))


@lru_cache(maxsize=1)
def default_lemmatizer() -> RuleLemmatizer:
    exceptions = {}
    for line in _data_lines("lemma_exceptions.txt"):
        form, lemma = line.split()
        exceptions[form] = lemma
    return RuleLemmatizer(exceptions, _data_lines("lemma_base_words.txt"))


def _blank(match: re.Match) -> str:
    return " " * len(match.group())


def tokenize(raw: str) -> list[Token]:
    """Split raw tweet text into lowercase provisional tokens.

    Mentions and URLs are removed (whether they form a whole whitespace
    chunk or are embedded in one). Each ``#`` opens a hashtag token that
    runs to the next ``#`` or whitespace, so ``#a#b#c`` yields three
    hashtag-flagged tokens; the ``#`` symbol itself is stripped. Plain text
    is split on characters outside letters, digits, apostrophes, and
    hyphens. Stopword, length, and character filtering happen later in
    :func:`normalize`.
    """
    text = unicodedata.normalize("NFC", raw)
    tokens: list[Token] = []
    for chunk_match in re.finditer(r"\S+", text):
        chunk = chunk_match.group()
        base = chunk_match.start()
        if _URL_RE.match(chunk):
            continue
        cleaned = _URL_RE.sub(_blank, chunk)
        cleaned = _MENTION_RE.sub(_blank, cleaned)
        pieces = cleaned.split("#")
        offset = 0
        for i, piece in enumerate(pieces):
            if i == 0:
                for m in _PLAIN_TOKEN_RE.finditer(piece):
                    tokens.append(
                        Token(m.group().lower(), False, (base + m.start(), base + m.end()))
                    )
            else:
                body = piece.strip()
                if body:
                    lead = len(piece) - len(piece.lstrip())
                    start = base + offset + lead
                    tokens.append(Token(body.lower(), True, (start, start + len(body))))
            offset += len(piece) + 1
    return tokens


def normalize(
    tokens: Iterable[Token],
    stopwords: StopwordSet | None = None,
    lemmatizer: Callable[[str], str] | None = None,
) -> list[Token]:
    """Strip non-letters, drop short tokens and stopwords, lemmatize the rest.

    Hashtag flags and spans survive normalization. Stopwords are also
    checked after lemmatization so the pipeline is idempotent on its own
    output.
    """
    stops = stopwords if stopwords is not None else default_stopwords()
    lemma_fn = lemmatizer if lemmatizer is not None else default_lemmatizer()
    out: list[Token] = []
    for tok in tokens:
        text = _NON_LETTER_RE.sub("", tok.text)
        if len(text) <= 1 or text in stops:
            continue
        lemma = lemma_fn(text)
        if len(lemma) <= 1 or lemma in stops:
            continue
        out.append(Token(lemma, tok.is_hashtag, tok.span))
    return out


def count_hashtags_raw(raw: str) -> int:
    """Number of '#' characters in the raw text."""
    return raw.count("#")


def count_hashtags_processed(tokens: Iterable[Token]) -> int:
    """Number of normalized tokens that originated from a hashtag."""
    return sum(1 for t in tokens if t.is_hashtag)


def lemmatize(token: str, lemmatizer: Callable[[str], str] | None = None) -> str:
    lemma_fn = lemmatizer if lemmatizer is not None else default_lemmatizer()
    return lemma_fn(token)


def process_text(
    raw: str,
    stopwords: StopwordSet | None = None,
    lemmatizer: Callable[[str], str] | None = None,
) -> ProcessedText:
    """Run the full pipeline on one tweet and count hashtags before/after."""
    normalized = normalize(tokenize(raw), stopwords, lemmatizer)
    return ProcessedText(
        tokens=tuple(normalized),
        n_hashtags_raw=count_hashtags_raw(raw),
        n_hashtags_processed=count_hashtags_processed(normalized),
    )
