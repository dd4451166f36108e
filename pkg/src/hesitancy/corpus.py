"""Corpus ingestion: JSONL parsing, metro/zip resolution, filtering, feature join.

The ingest order is fixed: metro assignment -> zip resolution -> minimum
tweet filter -> zip feature join. Null handling in the feature table is
zip-level: a zip either has a complete feature record or every tweet in it
is dropped.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import ConfigError, IngestError
from .textprep import ProcessedText

EARTH_RADIUS_KM = 6371.0088

_ZIP_RE = re.compile(r"^[0-9]{5}$")

REQUIRED_TWEET_FIELDS = ("tweet_id", "text", "lat", "lon", "sentiment")

ZIP_FEATURE_HEADER = ["zip", "zhvi", "n_health", "n_edu", "n_pst"]
CENTROID_HEADER = ["zip", "lat", "lon"]


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinates must be finite")
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} out of range")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class BoundingBox:
    metro: str
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if not self.min_lat < self.max_lat:
            raise ValueError(f"box {self.metro}: min_lat must be < max_lat")
        if not self.min_lon < self.max_lon:
            raise ValueError(f"box {self.metro}: min_lon must be < max_lon")

    def contains(self, p: GeoPoint) -> bool:
        # Boundary points count as inside.
        return (
            self.min_lat <= p.lat <= self.max_lat
            and self.min_lon <= p.lon <= self.max_lon
        )


@dataclass(frozen=True)
class RawTweet:
    tweet_id: str
    text: str
    point: GeoPoint
    sentiment: float

    def is_retweet(self) -> bool:
        return self.text.startswith("RT @")


@dataclass(frozen=True)
class LocatedTweet(RawTweet):
    metro: str = ""
    zip_code: str = ""


@dataclass(frozen=True)
class ZipFeatureRecord:
    """Per-zip external attributes. ``None`` marks a missing (null) value."""

    zip_code: str
    zhvi: float | None
    n_health: int | None
    n_edu: int | None
    n_pst: int | None

    def __post_init__(self):
        if not _ZIP_RE.match(self.zip_code):
            raise ValueError(f"bad zip code {self.zip_code!r}")
        if self.zhvi is not None and not self.zhvi > 0:
            raise ValueError(f"zip {self.zip_code}: zhvi must be positive when present")
        for name in ("n_health", "n_edu", "n_pst"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 0):
                raise ValueError(f"zip {self.zip_code}: {name} must be a nonnegative integer")

    @property
    def is_complete(self) -> bool:
        return None not in (self.zhvi, self.n_health, self.n_edu, self.n_pst)

    def values(self) -> tuple[float, float, float, float]:
        if not self.is_complete:
            raise ValueError(f"zip {self.zip_code}: incomplete feature record")
        return (float(self.zhvi), float(self.n_health), float(self.n_edu), float(self.n_pst))


@dataclass
class ParseReport:
    n_parsed: int = 0
    n_rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str):
        self.n_rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


def parse_corpus(lines: Iterable[str]) -> tuple[list[RawTweet], ParseReport]:
    """Parse a JSONL tweet stream; invalid lines are rejected, never fatal.

    Each line must be a JSON object with fields tweet_id (string), text
    (nonempty string), lat/lon (in-range numbers), sentiment (in [-1, 1]).
    Input order is preserved.
    """
    tweets: list[RawTweet] = []
    report = ParseReport()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.reject("bad_json")
            continue
        if not isinstance(obj, dict):
            report.reject("not_object")
            continue
        if any(k not in obj for k in REQUIRED_TWEET_FIELDS):
            report.reject("missing_field")
            continue
        tweet_id, text = obj["tweet_id"], obj["text"]
        if not isinstance(tweet_id, str) or not isinstance(text, str):
            report.reject("bad_type")
            continue
        if not tweet_id:
            report.reject("empty_tweet_id")
            continue
        if not text:
            report.reject("empty_text")
            continue
        try:
            lat, lon = float(obj["lat"]), float(obj["lon"])
            sentiment = float(obj["sentiment"])
        except (TypeError, ValueError):
            report.reject("bad_type")
            continue
        if not (-1.0 <= sentiment <= 1.0):
            report.reject("sentiment_out_of_range")
            continue
        try:
            point = GeoPoint(lat, lon)
        except ValueError:
            report.reject("bad_coordinates")
            continue
        tweets.append(RawTweet(tweet_id, text, point, sentiment))
        report.n_parsed += 1
    return tweets, report


def tweet_to_json(tweet: RawTweet) -> str:
    obj = {
        "tweet_id": tweet.tweet_id,
        "text": tweet.text,
        "lat": tweet.point.lat,
        "lon": tweet.point.lon,
        "sentiment": tweet.sentiment,
    }
    if isinstance(tweet, LocatedTweet):
        obj["metro"] = tweet.metro
        obj["zip"] = tweet.zip_code
    return json.dumps(obj, sort_keys=True)


def serialize_corpus(tweets: Iterable[RawTweet]) -> list[str]:
    return [tweet_to_json(t) for t in tweets]


def write_corpus_jsonl(tweets: Iterable[RawTweet], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tweets:
            fh.write(tweet_to_json(t) + "\n")


def read_located_corpus(path) -> list[LocatedTweet]:
    """Read a persisted (located) corpus artifact. Strict: bad rows are fatal."""
    out: list[LocatedTweet] = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot open corpus artifact {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(
                    LocatedTweet(
                        tweet_id=obj["tweet_id"],
                        text=obj["text"],
                        point=GeoPoint(float(obj["lat"]), float(obj["lon"])),
                        sentiment=float(obj["sentiment"]),
                        metro=obj["metro"],
                        zip_code=obj["zip"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: bad corpus row: {exc}") from exc
    return out


def assign_metro(p: GeoPoint, boxes: Sequence[BoundingBox]) -> str | None:
    """First configured box containing ``p`` (boundaries inclusive), else None."""
    if not boxes:
        raise ValueError("no bounding boxes configured")
    for box in boxes:
        if box.contains(p):
            return box.metro
    return None


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; accepts scalars or numpy arrays."""
    lat1, lon1 = np.radians(lat1), np.radians(lon1)
    lat2, lon2 = np.radians(lat2), np.radians(lon2)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


class ZipResolver(Protocol):
    def resolve(self, p: GeoPoint) -> str | None: ...


class ExactLookupResolver:
    """Zip lookup by rounded (lat, lon) key."""

    def __init__(self, table: Mapping[tuple[float, float], str], precision: int = 4):
        self.precision = int(precision)
        self.table = {}
        for (lat, lon), zip_code in table.items():
            if not _ZIP_RE.match(zip_code):
                raise ConfigError(f"bad zip code {zip_code!r} in lookup table")
            self.table[(round(float(lat), self.precision), round(float(lon), self.precision))] = zip_code

    @classmethod
    def from_csv(cls, path, precision: int = 4) -> "ExactLookupResolver":
        rows = _read_csv(path, ["lat", "lon", "zip"])
        table = {}
        for row in rows:
            try:
                table[(float(row["lat"]), float(row["lon"]))] = row["zip"]
            except ValueError as exc:
                raise ConfigError(f"corrupt lookup row in {path}: {row}") from exc
        return cls(table, precision)

    def resolve(self, p: GeoPoint) -> str | None:
        return self.table.get((round(p.lat, self.precision), round(p.lon, self.precision)))


class NearestCentroidResolver:
    """Nearest zip centroid within a cutoff radius, ties to the smaller zip."""

    def __init__(self, centroids: Mapping[str, tuple[float, float]], cutoff_km: float = 25.0):
        if not centroids:
            raise ConfigError("empty centroid table")
        self.cutoff_km = float(cutoff_km)
        # Sorted zip order makes the lexicographic tie-break an argmax-free scan.
        self.zips = sorted(centroids)
        lats, lons = [], []
        for z in self.zips:
            if not _ZIP_RE.match(z):
                raise ConfigError(f"bad zip code {z!r} in centroid table")
            lat, lon = centroids[z]
            GeoPoint(lat, lon)  # range validation
            lats.append(float(lat))
            lons.append(float(lon))
        self.lats = np.array(lats)
        self.lons = np.array(lons)

    @classmethod
    def from_csv(cls, path, cutoff_km: float = 25.0) -> "NearestCentroidResolver":
        rows = _read_csv(path, CENTROID_HEADER)
        centroids: dict[str, tuple[float, float]] = {}
        for row in rows:
            z = row["zip"]
            if z in centroids:
                raise ConfigError(f"duplicate zip {z} in centroid table {path}")
            try:
                centroids[z] = (float(row["lat"]), float(row["lon"]))
            except ValueError as exc:
                raise ConfigError(f"corrupt centroid row in {path}: {row}") from exc
        return cls(centroids, cutoff_km)

    def resolve(self, p: GeoPoint) -> str | None:
        d = haversine_km(p.lat, p.lon, self.lats, self.lons)
        dmin = float(d.min())
        if dmin > self.cutoff_km:
            return None
        # Group near-exact ties before applying the lexicographic rule.
        tie = d <= dmin + 1e-9
        return self.zips[int(np.argmax(tie))]


def resolve_zip(p: GeoPoint, resolver: ZipResolver) -> str | None:
    return resolver.resolve(p)


@dataclass
class LocateReport:
    n_no_metro: int = 0
    n_no_zip: int = 0


def locate_tweets(
    tweets: Iterable[RawTweet], boxes: Sequence[BoundingBox], resolver: ZipResolver
) -> tuple[list[LocatedTweet], LocateReport]:
    """Assign metro then zip; tweets failing either step are dropped (counted)."""
    report = LocateReport()
    located: list[LocatedTweet] = []
    for t in tweets:
        metro = assign_metro(t.point, boxes)
        if metro is None:
            report.n_no_metro += 1
            continue
        zip_code = resolver.resolve(t.point)
        if zip_code is None:
            report.n_no_zip += 1
            continue
        located.append(LocatedTweet(t.tweet_id, t.text, t.point, t.sentiment, metro, zip_code))
    return located, report


def filter_min_tweets(tweets: Sequence[LocatedTweet], threshold: int = 10) -> list[LocatedTweet]:
    """Drop every tweet in zips with fewer than ``threshold`` tweets (strict)."""
    counts: dict[str, int] = {}
    for t in tweets:
        counts[t.zip_code] = counts.get(t.zip_code, 0) + 1
    return [t for t in tweets if counts[t.zip_code] >= threshold]


def load_zip_features(path) -> dict[str, ZipFeatureRecord]:
    """Load the zip feature CSV; empty cells are nulls, duplicate zips are fatal."""
    rows = _read_csv(path, ZIP_FEATURE_HEADER)
    table: dict[str, ZipFeatureRecord] = {}
    for row in rows:
        z = row["zip"]
        if z in table:
            raise IngestError(f"duplicate zip {z} in feature table {path}")
        try:
            table[z] = ZipFeatureRecord(
                zip_code=z,
                zhvi=float(row["zhvi"]) if row["zhvi"] != "" else None,
                n_health=int(row["n_health"]) if row["n_health"] != "" else None,
                n_edu=int(row["n_edu"]) if row["n_edu"] != "" else None,
                n_pst=int(row["n_pst"]) if row["n_pst"] != "" else None,
            )
        except ValueError as exc:
            raise IngestError(f"bad feature row for zip {z} in {path}: {exc}") from exc
    return table


@dataclass
class JoinedCorpus:
    tweets: list[LocatedTweet]
    features: dict[str, ZipFeatureRecord]
    n_dropped_tweets: int
    dropped_zips: list[str]


def join_zip_features(
    tweets: Sequence[LocatedTweet], features: Mapping[str, ZipFeatureRecord]
) -> JoinedCorpus:
    """Attach zip features; zips with any missing attribute are dropped whole."""
    complete = {z: r for z, r in features.items() if r.is_complete}
    kept = [t for t in tweets if t.zip_code in complete]
    corpus_zips = {t.zip_code for t in tweets}
    dropped_zips = sorted(corpus_zips - set(complete))
    used = {t.zip_code for t in kept}
    return JoinedCorpus(
        tweets=kept,
        features={z: complete[z] for z in sorted(used)},
        n_dropped_tweets=len(tweets) - len(kept),
        dropped_zips=dropped_zips,
    )


@dataclass(frozen=True)
class MetroStats:
    metro: str
    n_zips: int
    n_tweets: int
    avg_tweets_per_zip: float
    n_hashtags_raw: int
    n_hashtags_processed: int
    n_unique_hashtags: int


@dataclass
class CorpusStats:
    rows: list[MetroStats]
    total: MetroStats


def corpus_stats(
    tweets: Sequence[LocatedTweet], processed: Mapping[str, ProcessedText]
) -> CorpusStats:
    """Per-metro dataset statistics plus a totals row.

    ``processed`` maps tweet_id to its ProcessedText; hashtag columns come
    from it. The totals row sums the summable columns; its unique-hashtag
    count is the global union, not a sum.
    """
    per_metro: dict[str, dict] = {}
    global_tags: set[str] = set()
    for t in tweets:
        acc = per_metro.setdefault(
            t.metro, {"zips": set(), "n": 0, "raw": 0, "proc": 0, "tags": set()}
        )
        p = processed[t.tweet_id]
        acc["zips"].add(t.zip_code)
        acc["n"] += 1
        acc["raw"] += p.n_hashtags_raw
        acc["proc"] += p.n_hashtags_processed
        for tok in p.tokens:
            if tok.is_hashtag:
                acc["tags"].add(tok.text)
                global_tags.add(tok.text)
    rows = []
    for metro in sorted(per_metro):
        acc = per_metro[metro]
        n_zips = len(acc["zips"])
        rows.append(
            MetroStats(
                metro=metro,
                n_zips=n_zips,
                n_tweets=acc["n"],
                avg_tweets_per_zip=acc["n"] / n_zips if n_zips else 0.0,
                n_hashtags_raw=acc["raw"],
                n_hashtags_processed=acc["proc"],
                n_unique_hashtags=len(acc["tags"]),
            )
        )
    n_zips = len({t.zip_code for t in tweets})
    n_tweets = len(tweets)
    total = MetroStats(
        metro="total",
        n_zips=n_zips,
        n_tweets=n_tweets,
        avg_tweets_per_zip=n_tweets / n_zips if n_zips else 0.0,
        n_hashtags_raw=sum(r.n_hashtags_raw for r in rows),
        n_hashtags_processed=sum(r.n_hashtags_processed for r in rows),
        n_unique_hashtags=len(global_tags),
    )
    return CorpusStats(rows=rows, total=total)


def _read_csv(path, expected_header: list[str]) -> list[dict[str, str]]:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty") from None
        if [h.strip() for h in header] != expected_header:
            raise ConfigError(
                f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected_header):
                raise ConfigError(f"{path}:{lineno}: expected {len(expected_header)} cells")
            rows.append({k: v.strip() for k, v in zip(expected_header, row)})
        return rows
