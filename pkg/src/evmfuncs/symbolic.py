"""Abstract operand-stack values and the per-instruction transfer function.

Stack values are either plain ``int`` constants or one of two symbols:
``PARAM`` (data the caller prepared before the analysed code began) and
``UNKNOWN`` (any runtime value). Stacks are tuples with the top at the end.
Only PUSH, AND, DUP and SWAP are modelled exactly; everything else pops its
arity and pushes ``UNKNOWN``.
"""

from __future__ import annotations

from typing import Union

from .disasm import Instruction
from .opcodes import info

MAX_STACK = 1024


class Symbol:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return (_symbol, (self.name,))


PARAM = Symbol("$")
UNKNOWN = Symbol("T")


def _symbol(name: str) -> Symbol:
    return PARAM if name == "$" else UNKNOWN


SymbolicValue = Union[int, Symbol]
Stack = tuple  # tuple[SymbolicValue, ...]


def is_const(v: SymbolicValue) -> bool:
    return type(v) is int


def tag_stack(stack: Stack, jumpdests: frozenset[int]) -> tuple[int, ...]:
    """Constants on ``stack`` that name a JUMPDEST, bottom to top."""
    return tuple(v for v in stack if type(v) is int and v in jumpdests)


def pop(stack: Stack, underflow: SymbolicValue = PARAM) -> tuple[SymbolicValue, Stack]:
    if stack:
        return stack[-1], stack[:-1]
    return underflow, stack


def apply(stack: Stack, ins: Instruction, underflow: SymbolicValue = PARAM) -> Stack:
    """Stack after executing ``ins``; jump operands are popped like any other op."""
    op = ins.opcode
    if ins.operand is not None or op == 0x5F:
        return stack + (ins.operand or 0,)
    if 0x80 <= op <= 0x8F:
        n = op - 0x7F
        v = stack[-n] if len(stack) >= n else underflow
        return stack + (v,)
    if 0x90 <= op <= 0x9F:
        n = op - 0x8F
        if len(stack) < n + 1:
            stack = (underflow,) * (n + 1 - len(stack)) + stack
        s = list(stack)
        s[-1], s[-1 - n] = s[-1 - n], s[-1]
        return tuple(s)
    if op == 0x16:
        a, stack = pop(stack, underflow)
        b, stack = pop(stack, underflow)
        if type(a) is int and type(b) is int:
            return stack + (a & b,)
        return stack + (UNKNOWN,)
    pops, pushes = info(op).pops, info(op).pushes
    if pops:
        stack = stack[:-pops] if pops < len(stack) else ()
    return stack + (UNKNOWN,) * pushes if pushes else stack
