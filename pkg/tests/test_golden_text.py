"""Golden-file test for the text pipeline: 50 tweets with checked-in tokens."""

import json
from pathlib import Path

from hesitancy.textprep import process_text

GOLDEN = Path(__file__).parent / "data" / "golden_tweets.jsonl"


def load_cases():
    with open(GOLDEN, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_golden_file_has_fifty_tweets():
    assert len(load_cases()) == 50


def test_golden_tokens_byte_exact():
    failures = []
    for i, case in enumerate(load_cases(), start=1):
        got = [[t.text, t.is_hashtag] for t in process_text(case["text"]).tokens]
        if got != case["tokens"]:
            failures.append((i, case["text"], case["tokens"], got))
    assert not failures, failures
