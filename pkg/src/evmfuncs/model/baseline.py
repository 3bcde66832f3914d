"""Prior-work call-site rule used for comparison only.

A block that jumps to a pushed JUMPDEST while also pushing a second
JUMPDEST constant (the return address) is taken to be a call, and its jump
target an entry.
"""

from __future__ import annotations

from ..disasm import Program
from ..segment import JUMP, ControlFlow


def baseline_entries(program: Program, cf: ControlFlow | None = None) -> set[int]:
    cf = cf or ControlFlow(program)
    jd = program.jumpdests
    out = set()
    for b in cf.blocks:
        if b.terminator != JUMP:
            continue
        kind = cf.jump_kinds[b.last.offset]
        if not kind.direct:
            continue
        pushed = [ins.operand for ins in b.instructions[:-1] if ins.is_push and ins.push_size]
        others = list(pushed)
        if kind.target in others:
            others.remove(kind.target)
        if any(v in jd for v in others):
            out.add(kind.target)
    return out
