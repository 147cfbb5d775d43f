"""Score bucketing, binary decisions and precision/recall reports."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError

BUCKET_THRESHOLD = 0.33

# softmax head output layout
POSITIVE_INDEX = 0
NEGATIVE_INDEX = 1


class SentimentClass(str, Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"

    @property
    def order(self):
        return _ORDER[self]

    def __str__(self):
        return self.value


_ORDER = {SentimentClass.NEGATIVE: 0, SentimentClass.NEUTRAL: 1, SentimentClass.POSITIVE: 2}


def bucketize(score):
    """Three-way class of a tanh score: (0.33, 1] positive, [-0.33, 0.33] neutral, rest negative."""
    score = float(score)
    if not -1.0 <= score <= 1.0:
        raise InputError(f"score {score} outside [-1, 1]")
    if score > BUCKET_THRESHOLD:
        return SentimentClass.POSITIVE
    if score < -BUCKET_THRESHOLD:
        return SentimentClass.NEGATIVE
    return SentimentClass.NEUTRAL


def binarize(output, head):
    """Positive/negative decision.  Ties (tanh 0.0, softmax 0.5/0.5) go to positive."""
    if head == "tanh":
        return SentimentClass.POSITIVE if float(output) >= 0.0 else SentimentClass.NEGATIVE
    if head == "softmax":
        probs = np.asarray(output)
        if probs[POSITIVE_INDEX] >= probs[NEGATIVE_INDEX]:
            return SentimentClass.POSITIVE
        return SentimentClass.NEGATIVE
    raise InputError(f"unknown head {head!r}")


def target_class(target):
    """Gold class of a regression target in {-1, 0, +1}."""
    if target > 0:
        return SentimentClass.POSITIVE
    if target < 0:
        return SentimentClass.NEGATIVE
    return SentimentClass.NEUTRAL


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: dict
    recall: dict
    confusion: dict
    total: int

    @property
    def classes(self):
        return sorted(self.precision, key=lambda c: c.order)

    @property
    def neutral_accuracy(self):
        """Fraction of gold-neutral examples predicted neutral; None without neutral gold."""
        return self.recall.get(SentimentClass.NEUTRAL)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "precision", "recall"])
        for c in self.classes:
            writer.writerow([c.value, _fmt(self.precision[c]), _fmt(self.recall[c])])
        writer.writerow(["accuracy", _fmt(self.accuracy), ""])
        return buf.getvalue()

    def to_text(self):
        lines = [f"{'class':<10} {'precision':>10} {'recall':>10}"]
        for c in self.classes:
            lines.append(f"{c.value:<10} {_pct(self.precision[c]):>10} {_pct(self.recall[c]):>10}")
        lines.append(f"{'accuracy':<10} {_pct(self.accuracy):>10}")
        if self.neutral_accuracy is not None:
            lines.append(f"{'neutral':<10} {_pct(self.neutral_accuracy):>10}")
        lines.append(f"n = {self.total}")
        return "\n".join(lines)


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def _pct(x):
    return "-" if x is None else f"{100 * x:.2f}%"


def metrics(predictions, gold_labels):
    """Accuracy plus per-class precision/recall; a zero denominator gives None, not 0."""
    preds = [SentimentClass(p) for p in predictions]
    golds = [SentimentClass(g) for g in gold_labels]
    if len(preds) != len(golds):
        raise InputError(f"{len(preds)} predictions but {len(golds)} gold labels")
    if not golds:
        raise InputError("cannot compute metrics on an empty set")
    confusion = Counter(zip(golds, preds))
    classes = set(golds) | set(preds)
    precision, recall = {}, {}
    for c in classes:
        tp = confusion[(c, c)]
        predicted = sum(n for (_, p), n in confusion.items() if p == c)
        actual = sum(n for (g, _), n in confusion.items() if g == c)
        precision[c] = tp / predicted if predicted else None
        recall[c] = tp / actual if actual else None
    correct = sum(confusion[(c, c)] for c in classes)
    return MetricsReport(
        accuracy=correct / len(golds),
        precision=precision,
        recall=recall,
        confusion=dict(confusion),
        total=len(golds),
    )
