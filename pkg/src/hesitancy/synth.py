"""Seeded synthetic fixture generator.

Builds a small, self-contained input set (tweet corpus, zip centroids, zip
features, ground truth, word vectors, and a ready config file) whose labels
are a noisy function of the zip features plus a planted text signal. With
``nonlinear=True`` both links are curved (a U-shaped home-value effect and a
squared text-propensity effect), so kernel models have an edge over linear
ones. The corpus also plants retweets, out-of-area tweets, an under-sized
zip, and a zip with a null feature row to exercise the ingest rules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HESITANT_WORDS = [
    "hoax", "scam", "distrust", "refuse", "skeptic", "freedom", "conspiracy",
    "poison", "experiment", "microchip", "forced", "untested",
]
ACCEPTING_WORDS = [
    "science", "protect", "appointment", "booster", "grateful", "immunity",
    "clinic", "relief", "safe", "effective", "community", "doctor",
]
NEUTRAL_WORDS = [
    "today", "morning", "coffee", "weather", "park", "music", "family",
    "weekend", "dinner", "traffic", "office", "phone", "garden", "movie",
    "football", "holiday", "picture", "street", "market", "river", "train",
    "window", "kitchen", "summer", "winter", "neighbor", "school", "library",
    "bridge", "airport", "hotel", "beach", "mountain", "concert", "museum",
    "puppy",
]
HESITANT_TAGS = [
    "novax", "mychoice", "wakeup", "notomandates", "freedomrally",
    "naturalimmunity", "bigpharma", "plandemic",
]
ACCEPTING_TAGS = [
    "getvaccinated", "shotarm", "trustscience", "maskup", "staysafe",
    "protectothers", "herdimmunity", "vaxxed",
]
NEUTRAL_TAGS = [
    "monday", "sunset", "foodie", "catsoftwitter", "throwback", "weekendvibes",
    "citylife", "goodmorning", "nofilter", "blessed",
]
# Words used in tweets but deliberately absent from the vector file.
OOV_WORDS = ["zorblat", "quazzle", "vrimp"]


@dataclass
class SynthParams:
    n_zips: int = 20
    n_metros: int = 3
    min_tweets_per_zip: int = 44
    max_tweets_per_zip: int = 56
    dim: int = 300
    seed: int = 7
    nonlinear: bool = True
    noise: float = 0.04
    plant_undersized_zip: bool = True
    plant_null_feature_zip: bool = True
    n_retweets: int = 6
    n_out_of_area: int = 5


def _metro_boxes(n_metros: int) -> list[tuple[str, float, float, float, float]]:
    boxes = []
    for m in range(n_metros):
        lat0 = 10.0 + 10.0 * m
        boxes.append((f"metro_{m}", lat0, lat0 + 4.0, 10.0, 14.0))
    return boxes


def generate(out_dir, params: SynthParams | None = None) -> dict[str, str]:
    """Write the fixture into ``out_dir`` and return the file paths."""
    p = params or SynthParams()
    rng = np.random.RandomState(p.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    boxes = _metro_boxes(p.n_metros)

    # Zip placement: round-robin over metros, grid positions inside each box.
    zips = [f"{10001 + i:05d}" for i in range(p.n_zips)]
    extra_zips = []
    if p.plant_undersized_zip:
        extra_zips.append(f"{10001 + p.n_zips:05d}")
    if p.plant_null_feature_zip:
        extra_zips.append(f"{10002 + p.n_zips:05d}")
    all_zips = zips + extra_zips
    centroid: dict[str, tuple[float, float]] = {}
    metro_of: dict[str, str] = {}
    for i, z in enumerate(all_zips):
        m = i % p.n_metros
        k = i // p.n_metros
        name, lat0, _, lon0, _ = boxes[m]
        centroid[z] = (lat0 + 0.6 + 0.7 * (k // 4), lon0 + 0.6 + 0.7 * (k % 4))
        metro_of[z] = name

    # Latents: x from home value, s the zip's text propensity.
    x = rng.uniform(0.0, 1.0, size=p.n_zips)
    s = rng.uniform(0.0, 1.0, size=p.n_zips)
    if p.nonlinear:
        feat_part = 4.0 * (x - 0.5) ** 2
        text_part = s**2
    else:
        feat_part = x
        text_part = s
    u = 0.05 + 0.55 * feat_part + 0.55 * text_part + rng.normal(0.0, p.noise, size=p.n_zips)
    u = np.clip(u, 0.0, 1.0)

    zhvi = np.round(150_000.0 + 700_000.0 * x + rng.normal(0.0, 8_000.0, size=p.n_zips))
    n_health = rng.poisson(40.0, size=p.n_zips)
    n_edu = rng.poisson(25.0, size=p.n_zips)
    n_pst = rng.poisson(55.0, size=p.n_zips)

    # Word vectors: three class centers with per-word jitter.
    vocab = HESITANT_WORDS + ACCEPTING_WORDS + NEUTRAL_WORDS + HESITANT_TAGS + ACCEPTING_TAGS + NEUTRAL_TAGS
    centers = {
        "hes": rng.normal(0.0, 1.0, size=p.dim) / math.sqrt(p.dim) * 3.0,
        "acc": rng.normal(0.0, 1.0, size=p.dim) / math.sqrt(p.dim) * 3.0,
        "neu": rng.normal(0.0, 1.0, size=p.dim) / math.sqrt(p.dim) * 1.0,
    }

    def word_class(w: str) -> str:
        if w in HESITANT_WORDS or w in HESITANT_TAGS:
            return "hes"
        if w in ACCEPTING_WORDS or w in ACCEPTING_TAGS:
            return "acc"
        return "neu"

    vectors = {
        w: centers[word_class(w)] + rng.normal(0.0, 0.25, size=p.dim) for w in vocab
    }

    def make_text(p_hes: float) -> str:
        n_words = int(rng.randint(12, 19))
        words = []
        for _ in range(n_words):
            r = rng.rand()
            if r < 0.60:
                pool = HESITANT_WORDS if rng.rand() < p_hes else ACCEPTING_WORDS
                words.append(pool[int(rng.randint(len(pool)))])
            elif r < 0.97:
                words.append(NEUTRAL_WORDS[int(rng.randint(len(NEUTRAL_WORDS)))])
            else:
                words.append(OOV_WORDS[int(rng.randint(len(OOV_WORDS)))])
        if rng.rand() < 0.08:
            words.insert(int(rng.randint(len(words))), "@somebody")
        if rng.rand() < 0.06:
            words.append("https://t.co/abc123")
        text = " ".join(words)
        if rng.rand() < 0.55:
            n_tags = int(rng.randint(1, 4))
            tags = []
            for _ in range(n_tags):
                if rng.rand() < 0.7:
                    pool = HESITANT_TAGS if rng.rand() < p_hes else ACCEPTING_TAGS
                else:
                    pool = NEUTRAL_TAGS
                tags.append("#" + pool[int(rng.randint(len(pool)))])
            if rng.rand() < 0.15:
                tags.append(rng.choice(["#2020", "#K"]))
            text += " " + " ".join(tags)
        return text

    tweet_rows: list[dict] = []
    tid = 0

    def add_tweet(z: str, p_hes: float, u_z: float, prefix: str = ""):
        nonlocal tid
        tid += 1
        lat, lon = centroid[z]
        lat += float(rng.uniform(-0.02, 0.02))
        lon += float(rng.uniform(-0.02, 0.02))
        sentiment = float(np.clip(0.1 - 0.4 * u_z + rng.normal(0.0, 0.18), -1.0, 1.0))
        tweet_rows.append(
            {
                "tweet_id": f"t{tid:06d}",
                "text": prefix + make_text(p_hes),
                "lat": round(lat, 6),
                "lon": round(lon, 6),
                "sentiment": round(sentiment, 4),
            }
        )

    for i, z in enumerate(zips):
        n = int(rng.randint(p.min_tweets_per_zip, p.max_tweets_per_zip + 1))
        for _ in range(n):
            add_tweet(z, float(s[i]), float(u[i]))
    if p.plant_undersized_zip:
        for _ in range(7):
            add_tweet(extra_zips[0], 0.5, 0.5)
    if p.plant_null_feature_zip:
        z_null = extra_zips[-1]
        for _ in range(12):
            add_tweet(z_null, 0.5, 0.5)
    for _ in range(p.n_retweets):
        add_tweet(zips[0], float(s[0]), float(u[0]), prefix="RT @someone ")
    # Tweets outside every bounding box: dropped at metro assignment.
    for _ in range(p.n_out_of_area):
        tid += 1
        tweet_rows.append(
            {
                "tweet_id": f"t{tid:06d}",
                "text": make_text(0.5),
                "lat": round(float(rng.uniform(60.0, 70.0)), 6),
                "lon": round(float(rng.uniform(10.0, 14.0)), 6),
                "sentiment": 0.0,
            }
        )

    paths = {
        "corpus": str(out / "corpus.jsonl"),
        "vectors": str(out / "vectors.txt"),
        "zip_features": str(out / "zip_features.csv"),
        "centroids": str(out / "centroids.csv"),
        "ground_truth": str(out / "ground_truth.csv"),
        "config": str(out / "run.cfg"),
        "out": str(out / "out"),
    }

    with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
        for row in tweet_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    with open(paths["centroids"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("zip,lat,lon\n")
        for z in all_zips:
            lat, lon = centroid[z]
            fh.write(f"{z},{lat:.4f},{lon:.4f}\n")

    with open(paths["zip_features"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("zip,zhvi,n_health,n_edu,n_pst\n")
        for i, z in enumerate(zips):
            fh.write(f"{z},{zhvi[i]:.0f},{n_health[i]},{n_edu[i]},{n_pst[i]}\n")
        if p.plant_undersized_zip:
            fh.write(f"{extra_zips[0]},300000,20,10,30\n")
        if p.plant_null_feature_zip:
            fh.write(f"{extra_zips[-1]},,20,10,30\n")

    with open(paths["ground_truth"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("zip,hesitancy\n")
        for i, z in enumerate(zips):
            fh.write(f"{z},{u[i]:.6f}\n")

    with open(paths["vectors"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vectors)} {p.dim}\n")
        for w in vocab:
            vals = " ".join(f"{v:.6f}" for v in vectors[w])
            fh.write(f"{w} {vals}\n")

    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# generated fixture configuration\n")
        fh.write(f"paths.corpus = {paths['corpus']}\n")
        fh.write(f"paths.vectors = {paths['vectors']}\n")
        fh.write(f"paths.zip_features = {paths['zip_features']}\n")
        fh.write(f"paths.centroids = {paths['centroids']}\n")
        fh.write(f"paths.ground_truth = {paths['ground_truth']}\n")
        fh.write(f"paths.out = {paths['out']}\n")
        for name, lat0, lat1, lon0, lon1 in boxes:
            fh.write(f"box.{name} = {lat0},{lat1},{lon0},{lon1}\n")
        fh.write(f"embed.dim = {p.dim}\n")
    return paths
