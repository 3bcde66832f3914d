"""Basic blocks, reachable blocks and local jump classification."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

from .disasm import Instruction, Program
from .opcodes import HALTING
from .symbolic import UNKNOWN, apply

JUMP, CJUMP, HALT, FALL = "jump", "conditional-jump", "halt", "fall-through"


@dataclass(frozen=True)
class BasicBlock:
    entry: int
    instructions: tuple[Instruction, ...]
    terminator: str

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]

    @property
    def end(self) -> int:
        """Offset one past the last byte of the block."""
        return self.last.next_offset

    @property
    def offsets(self) -> list[int]:
        return [ins.offset for ins in self.instructions]

    def __repr__(self) -> str:
        return f"BasicBlock(0x{self.entry:x}..0x{self.last.offset:x}, {self.terminator})"


@dataclass(frozen=True)
class ReachableBlock:
    entry: int
    instructions: tuple[Instruction, ...]
    reachable: bool = True
    label: int | None = None

    @property
    def offsets(self) -> list[int]:
        return [ins.offset for ins in self.instructions]


@dataclass(frozen=True)
class JumpKind:
    kind: str  # DIRECT | INDIRECT | DEAD
    target: int | None = None
    fallthrough: int | None = None

    @property
    def direct(self) -> bool:
        return self.kind == "DIRECT"

    @property
    def indirect(self) -> bool:
        return self.kind == "INDIRECT"


INDIRECT = JumpKind("INDIRECT")


def _terminator(ins: Instruction) -> str | None:
    name = ins.name
    if name == "JUMP":
        return JUMP
    if name == "JUMPI":
        return CJUMP
    if name in HALTING:
        return HALT
    return None


def basic_blocks(program: Program) -> list[BasicBlock]:
    """Split at JUMPDESTs and after jumps/halts; every block is single-entry, single-exit."""
    blocks: list[BasicBlock] = []
    cur: list[Instruction] = []
    for ins in program.instructions:
        if ins.opcode == 0x5B and cur:
            blocks.append(BasicBlock(cur[0].offset, tuple(cur), FALL))
            cur = []
        cur.append(ins)
        term = _terminator(ins)
        if term is not None:
            blocks.append(BasicBlock(cur[0].offset, tuple(cur), term))
            cur = []
    if cur:
        blocks.append(BasicBlock(cur[0].offset, tuple(cur), FALL))
    return blocks


def reachable_blocks(program: Program) -> list[ReachableBlock]:
    """Blocks opened at offset 0 or a JUMPDEST and closed by a halt or the next JUMPDEST.

    Jumps may sit in the middle of a block. Instructions stranded between a
    halt and the next JUMPDEST cannot be entered; they still get a block so
    the sequence tiles the code, but it is marked ``reachable=False``.
    """
    blocks: list[ReachableBlock] = []
    cur: list[Instruction] = []
    live = True
    for ins in program.instructions:
        if ins.opcode == 0x5B and cur:
            blocks.append(ReachableBlock(cur[0].offset, tuple(cur), live))
            cur = []
        if not cur:
            live = ins.offset == 0 or ins.opcode == 0x5B
        cur.append(ins)
        if ins.name in HALTING:
            blocks.append(ReachableBlock(cur[0].offset, tuple(cur), live))
            cur = []
    if cur:
        blocks.append(ReachableBlock(cur[0].offset, tuple(cur), live))
    return blocks


def classify_jump(block: BasicBlock, jumpdests: frozenset[int]) -> JumpKind:
    """DIRECT when the jump target is produced inside ``block`` itself.

    PUSH/DUP/SWAP/AND are simulated exactly; values flowing in from before the
    block are unknown, so jumps consuming them are INDIRECT. A constant target
    that is not a JUMPDEST is a DEAD (reverting) jump.
    """
    stack: tuple = ()
    for ins in block.instructions[:-1]:
        stack = apply(stack, ins, UNKNOWN)
    target = stack[-1] if stack else UNKNOWN
    fall = block.end if block.terminator == CJUMP else None
    if type(target) is not int:
        return JumpKind("INDIRECT", None, fall)
    if target in jumpdests:
        return JumpKind("DIRECT", target, fall)
    return JumpKind("DEAD", target, fall)


class ControlFlow:
    """Block partition of a program plus per-jump classification, computed once."""

    def __init__(self, program: Program):
        self.program = program
        self.blocks = basic_blocks(program)
        self.entries = [b.entry for b in self.blocks]
        self.by_entry = {b.entry: b for b in self.blocks}

    @cached_property
    def jump_kinds(self) -> dict[int, JumpKind]:
        """Jump instruction offset -> classification."""
        jd = self.program.jumpdests
        return {
            b.last.offset: classify_jump(b, jd)
            for b in self.blocks
            if b.terminator in (JUMP, CJUMP)
        }

    def block_at(self, offset: int) -> BasicBlock:
        i = bisect_right(self.entries, offset) - 1
        return self.blocks[i]

    def fallthrough(self, block: BasicBlock) -> int | None:
        """Start of the block that follows ``block`` in layout order, if any."""
        if block.terminator in (JUMP, HALT):
            return None
        nxt = block.end
        return nxt if nxt in self.by_entry else None

    def direct_targets(self, block: BasicBlock) -> int | None:
        kind = self.jump_kinds.get(block.last.offset)
        return kind.target if kind is not None and kind.direct else None
