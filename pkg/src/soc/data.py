"""Loaders for the labeled corpora.

All loaders stream their input, skip bad rows instead of aborting, and
report what they dropped in a :class:`DatasetSummary`.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import FormatError, InputError
from .evaluation import SentimentClass

SENTIMENT140_LABELS = {"0": -1.0, "4": 1.0}
SENTIMENT140_NEUTRAL = "2"
MALFORMED_LIMIT = 0.5


@dataclass(frozen=True)
class LabeledExample:
    text: str
    binary_label: SentimentClass | None
    ternary_target: float | None

    def __post_init__(self):
        if self.binary_label is None and self.ternary_target is None:
            raise InputError("example needs a binary label or a ternary target")


def _example(text, target):
    label = None
    if target > 0:
        label = SentimentClass.POSITIVE
    elif target < 0:
        label = SentimentClass.NEGATIVE
    return LabeledExample(text, label, float(target))


@dataclass
class DatasetSummary:
    source: str
    counts: Counter = field(default_factory=Counter)
    dropped: int = 0
    malformed: int = 0

    @property
    def accepted(self):
        return sum(self.counts.values())

    @property
    def total(self):
        return self.accepted + self.dropped

    def __str__(self):
        parts = ", ".join(f"{k}={v}" for k, v in sorted(self.counts.items()))
        return f"{self.source}: {self.accepted} accepted ({parts}), {self.dropped} dropped ({self.malformed} malformed)"


def _record(summary, ex):
    key = ex.binary_label.value if ex.binary_label is not None else "neutral"
    summary.counts[key] += 1


def _check_malformed(summary):
    if summary.total and summary.malformed / summary.total > MALFORMED_LIMIT:
        raise FormatError(f"{summary.source}: {summary.malformed} of {summary.total} rows are malformed")


def load_sentiment140(path):
    """Rows ``target,id,date,flag,user,text``; 0 -> negative, 4 -> positive, 2 dropped."""
    summary = DatasetSummary(f"sentiment140:{path}")
    examples = []
    with open(path, encoding="utf-8", errors="replace", newline="") as fh:
        for row in csv.reader(fh):
            if len(row) != 6:
                summary.dropped += 1
                summary.malformed += 1
                continue
            target = row[0].strip()
            if target == SENTIMENT140_NEUTRAL:
                summary.dropped += 1
                continue
            if target not in SENTIMENT140_LABELS:
                summary.dropped += 1
                summary.malformed += 1
                continue
            ex = _example(row[5], SENTIMENT140_LABELS[target])
            examples.append(ex)
            _record(summary, ex)
    _check_malformed(summary)
    return examples, summary


def load_tsv(path):
    """Lines ``sentence<TAB>label`` with label 1 (positive) or 0 (negative)."""
    summary = DatasetSummary(f"tsv:{path}")
    examples = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            text, sep, label = line.rpartition("\t")
            label = label.strip()
            if not sep or label not in ("0", "1"):
                summary.dropped += 1
                summary.malformed += 1
                continue
            ex = _example(text, 1.0 if label == "1" else -1.0)
            examples.append(ex)
            _record(summary, ex)
    return examples, summary


def stars_to_target(stars):
    """Five-star rating collapsed to three buckets: 4-5 -> +1, 3 -> 0, 1-2 -> -1."""
    if stars >= 4:
        return 1.0
    if stars == 3:
        return 0.0
    return -1.0


def load_amazon(path, rating_field="overall", text_field="reviewText"):
    """JSON-lines reviews with a 1-5 star rating."""
    summary = DatasetSummary(f"amazon:{path}")
    examples = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            try:
                obj = json.loads(line)
                stars = float(obj[rating_field])
                text = obj[text_field]
            except (ValueError, KeyError, TypeError):
                summary.dropped += 1
                summary.malformed += 1
                continue
            if not isinstance(text, str) or not 1 <= stars <= 5 or stars != int(stars):
                summary.dropped += 1
                summary.malformed += 1
                continue
            ex = _example(text, stars_to_target(int(stars)))
            examples.append(ex)
            _record(summary, ex)
    return examples, summary


LOADERS = {"sentiment140": load_sentiment140, "tsv": load_tsv, "amazon": load_amazon}


def load(path, fmt):
    try:
        loader = LOADERS[fmt]
    except KeyError:
        raise InputError(f"unknown dataset format {fmt!r}; expected one of {sorted(LOADERS)}") from None
    return loader(path)
