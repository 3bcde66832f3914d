from dataclasses import dataclass

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evmfuncs.metrics import (
    Rates, Score, aggregate, boundary_score, entry_score, failed_score, pathset_score, per_contract_csv, table,
)


@dataclass
class F:
    entry: int
    bytes: frozenset


def test_hand_computed_rates():
    s = entry_score({1, 2, 3, 4}, {2, 4, 6})
    assert (s.tp, s.fp, s.fn) == (2, 2, 1)
    assert s.precision == pytest.approx(0.5)
    assert s.recall == pytest.approx(2 / 3)
    assert s.f1 == pytest.approx(2 * 0.5 * (2 / 3) / (0.5 + 2 / 3))


def test_zero_over_zero_is_zero():
    s = entry_score(set(), set())
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
    assert entry_score({1}, set()).recall == 0.0
    assert entry_score(set(), {1}).precision == 0.0


def test_failed_contract_scores_zero():
    s = failed_score(5)
    assert (s.tp, s.fp, s.fn) == (0, 0, 5)
    assert s.f1 == 0.0


def test_boundary_requires_exact_bytes():
    truth = [F(10, frozenset({10, 11, 12})), F(20, frozenset({20, 21}))]
    pred = [F(10, frozenset({10, 11, 12})), F(20, frozenset({20}))]
    s = boundary_score(pred, truth)
    assert (s.tp, s.fp, s.fn) == (1, 1, 1)
    # bytes-only matching ignores which offset is called the entry
    moved = [F(11, frozenset({10, 11, 12}))]
    assert boundary_score(moved, truth[:1]).tp == 0
    assert boundary_score(moved, truth[:1], match="bytes").tp == 1
    with pytest.raises(ValueError):
        boundary_score(pred, truth, match="fuzzy")


def test_micro_and_macro_differ():
    a, b = Score(9, 1, 0), Score(0, 0, 1)
    micro = aggregate([a, b], "micro")
    assert (micro.tp, micro.fp, micro.fn) == (9, 1, 1)
    assert micro.f1 == pytest.approx(0.9)
    macro = aggregate([a, b], "macro")
    assert isinstance(macro, Rates)
    assert macro.precision == pytest.approx(0.45)
    assert macro.recall == pytest.approx(0.5)
    assert macro.f1 == pytest.approx((2 * 0.9 / 1.9) / 2)
    with pytest.raises(ValueError):
        aggregate([], "micro")
    with pytest.raises(ValueError):
        aggregate([a], "median")


def test_path_sets():
    s = pathset_score({(1, 2), (1, 3)}, {(1, 2)})
    assert (s.tp, s.fp, s.fn) == (1, 1, 0)


def test_report_formats():
    text = table({"entry": Score(1, 0, 1), "boundary": Rates(1.0, 0.5, 2 / 3)})
    lines = text.splitlines()
    assert lines[0].split() == ["metric", "P", "R", "F1"]
    assert lines[1].split() == ["entry", "1.0000", "0.5000", "0.6667"]
    csv = per_contract_csv([{"id": "a", "f1": "1.0"}, {"id": "b", "f1": "0.0"}])
    assert csv == "id,f1\na,1.0\nb,0.0\n"
    assert per_contract_csv([]) == ""


sets = st.sets(st.integers(0, 30), max_size=15)


@given(sets, sets)
def test_score_properties(pred, truth):
    s = entry_score(pred, truth)
    assert s.tp + s.fp == len(pred) and s.tp + s.fn == len(truth)
    assert 0.0 <= s.f1 <= 1.0
    assert min(s.precision, s.recall) <= s.f1 + 1e-12 <= max(s.precision, s.recall) + 2e-12
    assert (s.f1 == 1.0) == (pred == truth and bool(truth))


@given(st.lists(st.tuples(sets, sets), min_size=1, max_size=6))
def test_micro_equals_pooled_counts(pairs):
    scores = [entry_score(p, t) for p, t in pairs]
    total = aggregate(scores, "micro")
    assert total.tp == sum(s.tp for s in scores)
    assert total.fp == sum(s.fp for s in scores)
    assert total.fn == sum(s.fn for s in scores)
