"""Volume-weighted token ranking over a window of days.

For each token x with ``M_x`` comments in the window, its weight is
``W_x = M_x / max_k M_k`` and its adjusted score is ``score_orig * W_x``, so a
token discussed once cannot outrank a heavily discussed token with the same
average sentiment.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass

from .errors import FormatError, InputError, SOCError


@dataclass(frozen=True)
class CommentRecord:
    token: str
    day: dt.date
    text: str
    score: float | None = None


@dataclass(frozen=True)
class Window:
    start: dt.date
    end: dt.date

    def __post_init__(self):
        if not isinstance(self.start, dt.date) or not isinstance(self.end, dt.date):
            raise InputError("window bounds must be dates")
        if self.start > self.end:
            raise InputError(f"window start {self.start} is after end {self.end}")

    def __contains__(self, day):
        return self.start <= day <= self.end

    @classmethod
    def parse(cls, start, end):
        return cls(parse_day(start), parse_day(end))


@dataclass(frozen=True)
class RankEntry:
    token: str
    count: int
    weight: float
    score_orig: float
    score_adj: float


def parse_day(value):
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise InputError(f"invalid ISO-8601 day {value!r}") from None


def load_store(path):
    """Read a JSON-lines comment store: ``{"token", "date", "text", "score"?}`` per line."""
    records = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                token = obj["token"]
                day = dt.date.fromisoformat(obj["date"])
                text = obj.get("text", "")
                score = obj.get("score")
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise FormatError(f"bad comment record ({exc})", line=lineno) from None
            if not isinstance(token, str) or not token:
                raise FormatError("token must be a non-empty string", line=lineno)
            if score is not None:
                if isinstance(score, bool) or not isinstance(score, (int, float)) or not -1.0 <= score <= 1.0:
                    raise FormatError(f"score {score!r} is not a number in [-1, 1]", line=lineno)
                score = float(score)
            records.append(CommentRecord(token, day, text, score))
    return records


def window_counts(store, window):
    """M_x for every token in the store: records whose day falls inside the window."""
    if not isinstance(window, Window):
        raise InputError("window_counts needs a Window")
    counts = {r.token: 0 for r in store}
    for r in store:
        if r.day in window:
            counts[r.token] += 1
    return counts


def score_weights(counts):
    """W_x = M_x / max M; all weights are 0 when every count is 0."""
    if not counts:
        raise InputError("cannot weight an empty token set")
    top = max(counts.values())
    if top == 0:
        return {tok: 0.0 for tok in counts}
    return {tok: m / top for tok, m in counts.items()}


class ScoringError(SOCError):
    pass


def rank_tokens(store, window, scorer=None):
    """Rank tokens by volume-weighted mean comment score, best first.

    Records without a stored score are scored with ``scorer(text)``.  A token
    with no comments in the window gets a mean of 0.  Ties on the adjusted
    score are broken by token symbol.
    """
    counts = window_counts(store, window)
    if not counts:
        return []
    weights = score_weights(counts)
    sums = defaultdict(float)
    for r in store:
        if r.day not in window:
            continue
        s = r.score
        if s is None:
            if scorer is None:
                raise InputError(f"record for {r.token} on {r.day} has no score and no model was given to score it")
            try:
                s = float(scorer(r.text))
            except Exception as exc:
                raise ScoringError(f"scoring failed for {r.token} on {r.day} ({r.text[:40]!r}): {exc}") from exc
        sums[r.token] += s
    entries = []
    for tok, m in counts.items():
        orig = sums[tok] / m if m else 0.0
        entries.append(RankEntry(tok, m, weights[tok], orig, orig * weights[tok]))
    entries.sort(key=lambda e: (-e.score_adj, e.token))
    return entries


def ranking_csv(entries):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "token", "M", "W", "score_orig", "score_adj"])
    for i, e in enumerate(entries, 1):
        writer.writerow([i, e.token, e.count, repr(e.weight), repr(e.score_orig), repr(e.score_adj)])
    return buf.getvalue()


def daily_counts(store):
    """Per-token, per-day comment counts (C_n for each day n)."""
    return Counter((r.token, r.day) for r in store)
