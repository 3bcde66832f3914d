"""Precision, recall and F1 over entries, boundaries and path sets."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


@dataclass(frozen=True)
class Score:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "Score") -> "Score":
        return Score(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class Rates:
    """Averaged rates (macro aggregation has no meaningful counts)."""

    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def set_score(predicted: Iterable, truth: Iterable) -> Score:
    p, g = set(predicted), set(truth)
    tp = len(p & g)
    return Score(tp, len(p) - tp, len(g) - tp)


def entry_score(predicted: Iterable[int], truth: Iterable[int]) -> Score:
    return set_score(predicted, truth)


def boundary_score(predicted: Iterable, truth: Iterable, match: str = "entry+bytes") -> Score:
    """Exact-match boundary score.

    Items are objects with ``entry`` and ``bytes``. With ``match="entry+bytes"``
    a prediction is correct only if a truth function has the same entry and
    the identical byte set; ``match="bytes"`` ignores the entry.
    """
    def key(f):
        b = frozenset(f.bytes)
        return (f.entry, b) if match == "entry+bytes" else b

    if match not in ("entry+bytes", "bytes"):
        raise ValueError(f"unknown match rule {match!r}")
    return set_score(map(key, predicted), map(key, truth))


def failed_score(truth_size: int) -> Score:
    """Score for a contract the tool failed on: nothing found, everything missed."""
    return Score(0, 0, truth_size)


def pathset_score(predicted: Iterable[tuple], truth: Iterable[tuple]) -> Score:
    return set_score(predicted, truth)


def aggregate(scores: list[Score], mode: str = "micro") -> Score | Rates:
    """Micro sums counts before taking rates; macro averages per-contract rates."""
    if not scores:
        raise ValueError("nothing to aggregate")
    if mode == "micro":
        total = Score()
        for s in scores:
            total = total + s
        return total
    if mode == "macro":
        n = len(scores)
        return Rates(
            sum(s.precision for s in scores) / n,
            sum(s.recall for s in scores) / n,
            sum(s.f1 for s in scores) / n,
        )
    raise ValueError(f"unknown aggregation mode {mode!r}")


def table(rows: dict[str, Score | Rates]) -> str:
    """Aligned P/R/F1 text table, one row per metric."""
    width = max([len("metric")] + [len(k) for k in rows])
    out = [f"{'metric':<{width}}  {'P':>7}  {'R':>7}  {'F1':>7}"]
    for name, s in rows.items():
        out.append(f"{name:<{width}}  {s.precision:7.4f}  {s.recall:7.4f}  {s.f1:7.4f}")
    return "\n".join(out)


def per_contract_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
