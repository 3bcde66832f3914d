import pytest

from evmfuncs.boundary import (
    INTERNAL, MISSING_CALL, SPURIOUS_CALL, BoundaryConfig, identify_boundaries,
    infer_call_return_sites, traverse_entry,
)
from evmfuncs.corpus import generate_corpus
from evmfuncs.disasm import decode
from evmfuncs.dispatcher import public_entries
from evmfuncs.segment import ControlFlow

import fixtures


def _bytes(result) -> dict[int, frozenset[int]]:
    return {r.entry: r.bytes for r in result.records}


def test_known_entry_marks_call_site():
    program, labels = fixtures.call_pattern()
    calls, rets = infer_call_return_sites(program, ControlFlow(program), {labels["foo"]})
    jump_pc = labels["ret"] - 1
    assert jump_pc in calls
    assert rets == {program.offsets[-1]}


def test_spurious_call_is_signalled():
    program, _ = fixtures.spurious_call()
    t = traverse_entry(program, 0x8E, {0x8E, 0xA3})
    (sig,) = t.signals
    assert sig.kind == SPURIOUS_CALL
    assert sig.pc == 0x95  # the JUMP into 0xa3


def test_spurious_call_is_repaired():
    program, _ = fixtures.spurious_call()
    res = identify_boundaries(program, [], {0x8E: 0.9, 0xA3: 0.9})
    assert res.blacklist == {0x95}
    assert 0xA3 in res.dropped
    got = _bytes(res)
    assert set(got) == {0, 0x8E}
    assert got[0x8E] == fixtures.span(program, 0x8E, 0x96) | fixtures.span(program, 0xA3, 0xA6)


def test_missing_call_is_signalled():
    program, _ = fixtures.missing_call()
    t = traverse_entry(program, 0x2A, {0x2A})
    (sig,) = t.signals
    assert (sig.kind, sig.value) == (MISSING_CALL, 0x43)


def test_missing_call_lowers_threshold_until_found():
    program, _ = fixtures.missing_call()
    res = identify_boundaries(program, [], {0x2A: 0.9, 0x5A: 0.35, 0x43: 0.05})
    assert res.lowerings == 2 and res.rho == pytest.approx(0.3)
    got = _bytes(res)
    assert set(got) == {0, 0x2A, 0x5A}
    assert got[0x2A] == fixtures.span(program, 0x2A, 0x32) | fixtures.span(program, 0x43, 0x46)
    assert got[0x5A] == fixtures.span(program, 0x5A, 0x5D)
    assert not res.signals


def test_missing_call_can_register_directly():
    program, _ = fixtures.missing_call()
    cfg = BoundaryConfig(register_missing=True)
    res = identify_boundaries(program, [], {0x2A: 0.9}, config=cfg)
    assert 0x5A in _bytes(res) and res.lowerings == 0


def test_threshold_floor_is_respected():
    program, _ = fixtures.missing_call()
    res = identify_boundaries(program, [], {0x2A: 0.9, 0x5A: 0.05})
    assert res.rho == pytest.approx(0.1)
    assert res.lowerings == 4
    assert 0x5A not in _bytes(res)


def test_shared_tail_belongs_to_both():
    program, labels = fixtures.shared_tail()
    res = identify_boundaries(program, [], oracle_entries=[labels["mul"], labels["add"]])
    got = _bytes(res)
    tail = fixtures.span(program, labels["tail"], len(program.code))
    assert tail <= got[labels["mul"]] and tail <= got[labels["add"]]
    assert not got[labels["mul"]] & fixtures.span(program, labels["add"], labels["tail"])


def test_uncalled_candidates_are_dropped():
    program, labels = fixtures.call_pattern()
    res = identify_boundaries(program, [], {labels["foo"]: 0.9, labels["ret"]: 0.8})
    assert labels["ret"] in res.dropped
    assert [r.entry for r in res.functions(INTERNAL)] == [labels["foo"]]


def _oracle_run(gt):
    program = decode(gt.bytecode)
    d = public_entries(program)
    return identify_boundaries(
        program, d.body_entries, oracle_entries=gt.internal_entries, interface_entries=d.interface_entries
    )


@pytest.mark.parametrize("style", ["plain", "dedup"])
def test_oracle_entries_give_exact_bytes(style):
    for gt in generate_corpus(31, 40, style):
        got = _bytes(_oracle_run(gt))
        for f in gt.functions:
            assert got.get(f.entry) == frozenset(f.bytes), (gt.id, f.name)


def test_deterministic():
    gt = generate_corpus(8, 1, "dedup")[0]
    a, b = _oracle_run(gt), _oracle_run(gt)
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]


def test_state_budget_marks_partial():
    gt = generate_corpus(8, 1, "plain")[0]
    program = decode(gt.bytecode)
    d = public_entries(program)
    res = identify_boundaries(program, d.body_entries, oracle_entries=gt.internal_entries,
                              interface_entries=d.interface_entries, config=BoundaryConfig(max_states=3))
    assert res.partial
    assert any("TraversalBudgetExceeded" in m for m in res.diagnostics)


@pytest.mark.parametrize("kw", [{"rho0": 0}, {"rho_min": 0.6}, {"delta": -0.1}, {"max_states": 0}])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        BoundaryConfig(**kw).validate()


def test_unresolved_jump_is_reported_not_raised():
    # CALLDATALOAD-derived jump target: nothing to follow
    program = decode("600035565b00")
    res = identify_boundaries(program, [], {})
    assert any("unresolved" in m for m in res.diagnostics)
