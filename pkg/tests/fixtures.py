"""Hand-assembled contracts reproducing small, well-understood code shapes.

Each builder returns ``(program, labels)`` plus whatever ground truth the
tests need. Offsets are pinned with ``fill_to`` so tests can assert exact
addresses; filler bytes are INVALID and never executed.
"""

from __future__ import annotations

from evmfuncs.corpus.asm import assemble, dest, fill_to, op, push, ref
from evmfuncs.disasm import Program, decode_bytes


def build(items) -> tuple[Program, dict[str, int]]:
    code, labels, _ = assemble(items)
    return decode_bytes(code), labels


def span(program: Program, start: int, stop: int) -> frozenset[int]:
    """Instruction offsets in ``[start, stop)``."""
    return frozenset(o for o in program.offsets if start <= o < stop)


def selector_dispatcher():
    """Two public functions: 0x3ccfd60b -> 0x4e, 0xf66c7281 -> 0x62, body of the first at 0xa2."""
    items = [push(0x80), push(0x40)] + op("MSTORE")
    items += [push(4)] + op("CALLDATASIZE", "LT") + [ref("fallback"), ("op", "JUMPI")]
    items += [push(0)] + op("CALLDATALOAD") + [push(0xE0)] + op("SHR")
    items += op("DUP1") + [push(0x3CCFD60B, 4)] + op("EQ") + [push(0x4E, 2)] + op("JUMPI")
    items += op("DUP1") + [push(0xF66C7281, 4)] + op("EQ") + [push(0x62, 2)] + op("JUMPI")
    items += [dest("fallback"), push(0)] + op("DUP1", "REVERT")
    items = fill_to(items, 0x4E)
    items += [dest("withdraw"), ref("ret1"), push(0xA2, 2)] + op("JUMP")
    items += [dest("ret1")] + op("STOP")
    items = fill_to(items, 0x62)
    items += [dest("other"), ref("ret2"), ref("body2")] + op("JUMP")
    items += [dest("ret2")] + op("STOP")
    items = fill_to(items, 0xA2)
    items += [dest("body1"), push(1), push(2)] + op("SSTORE", "JUMP")
    items += [dest("body2"), push(3), push(4)] + op("SSTORE", "JUMP")
    return build(items)


def call_pattern():
    """Return tag, arguments and callee tag pushed in the call-site block: foo(0xff, 0x0)."""
    items = [ref("ret"), push(0xFF), push(0x00), ref("foo")] + op("JUMP")
    items += [dest("ret")] + op("STOP")
    items += [dest("foo")] + op("ADD", "SWAP1", "JUMP")
    return build(items)


def split_call_pattern():
    """foo(a > b ? a : b): the return tag is pushed several blocks before the call jump."""
    items = [ref("ret"), push(5), push(9)] + op("DUP2", "DUP2", "GT") + [ref("take_a")] + op("JUMPI")
    items += op("SWAP1", "POP") + [ref("call")] + op("JUMP")
    items += [dest("take_a")] + op("POP")
    items += [dest("call"), ref("foo")] + op("JUMP")
    items += [dest("ret")] + op("STOP")
    items += [dest("foo")] + op("SWAP1", "JUMP")
    return build(items)


def shared_tail():
    """mul and add both jump into one tail block that performs the return."""
    items = [ref("r1"), push(2), push(3), ref("mul")] + op("JUMP")
    items += [dest("r1"), ref("r2")] + op("SWAP1") + [push(4), ref("add")] + op("JUMP")
    items += [dest("r2")] + op("STOP")
    items += [dest("mul")] + op("MUL") + [ref("tail")] + op("JUMP")
    items += [dest("add")] + op("ADD") + [ref("tail")] + op("JUMP")
    items += [dest("tail")] + op("SWAP1", "JUMP")
    return build(items)


def spurious_call():
    """A jump inside the function at 0x8e lands on 0xa3, whose exit returns for 0x8e."""
    items = [ref("ret", 1), push(5), push(0x8E, 2)] + op("JUMP")
    items += [dest("ret")] + op("STOP")
    items = fill_to(items, 0x8E)
    items += [dest("caller"), push(1)] + op("ADD") + [push(0xA3, 2)] + op("JUMP")
    items = fill_to(items, 0xA3)
    items += [dest("inner")] + op("SWAP1", "JUMP")
    return build(items)


def missing_call():
    """0x2a calls 0x5a, whose return jump consumes the constant 0x43 pushed by 0x2a."""
    items = [ref("ret", 1), push(0x2A)] + op("JUMP")
    items += [dest("ret")] + op("STOP")
    items = fill_to(items, 0x2A)
    items += [dest("caller"), push(0x43), push(7), push(0x5A)] + op("JUMP")
    items = fill_to(items, 0x43)
    items += [dest("back")] + op("POP", "JUMP")
    items = fill_to(items, 0x5A)
    items += [dest("callee")] + op("SWAP1", "JUMP")
    return build(items)
