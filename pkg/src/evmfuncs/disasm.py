"""Bytecode decoding into an instruction stream with exact byte offsets."""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property

from . import opcodes
from .opcodes import stack_arity  # noqa: F401  (re-exported)


class MalformedHex(ValueError):
    """Input text is not an even-length hexadecimal string."""


_HEX_RE = re.compile(r"[0-9a-fA-F]*")


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    operand: int | None = None
    width: int = 1
    truncated: bool = False

    @property
    def name(self) -> str:
        return opcodes.info(self.opcode).name

    @property
    def is_push(self) -> bool:
        return self.operand is not None

    @property
    def push_size(self) -> int:
        return opcodes.push_width(self.opcode)

    @property
    def next_offset(self) -> int:
        return self.offset + self.width

    def encode(self) -> bytes:
        if self.operand is None:
            return bytes([self.opcode])
        size = self.push_size
        raw = self.operand.to_bytes(size, "big")
        # a truncated operand was zero-padded on decode; only the real bytes go back
        return bytes([self.opcode]) + raw[: self.width - 1]

    def __str__(self) -> str:
        if self.operand is None:
            return f"0x{self.offset:04x} {self.name}"
        text = f"0x{self.offset:04x} {self.name} 0x{self.operand:0{2 * self.push_size}x}"
        return text + " (truncated)" if self.truncated else text


@dataclass(frozen=True)
class Program:
    code: bytes
    instructions: tuple[Instruction, ...]
    jumpdests: frozenset[int] = field(default_factory=frozenset)

    @cached_property
    def offsets(self) -> list[int]:
        return [ins.offset for ins in self.instructions]

    @cached_property
    def index(self) -> dict[int, int]:
        """Instruction offset -> position in ``instructions``."""
        return {ins.offset: i for i, ins in enumerate(self.instructions)}

    def at(self, offset: int) -> Instruction:
        return self.instructions[self.index[offset]]

    def containing(self, byte_offset: int) -> Instruction:
        """The instruction whose encoding covers ``byte_offset``."""
        i = bisect_right(self.offsets, byte_offset) - 1
        if i < 0 or byte_offset >= len(self.code):
            raise IndexError(byte_offset)
        return self.instructions[i]

    def __len__(self) -> int:
        return len(self.instructions)

    def encode(self) -> bytes:
        return b"".join(ins.encode() for ins in self.instructions)

    def listing(self) -> str:
        return "\n".join(str(ins) for ins in self.instructions)


def parse_hex(text: str) -> bytes:
    text = text.strip()
    if text[:2] in ("0x", "0X"):
        text = text[2:]
    if len(text) % 2 or not _HEX_RE.fullmatch(text):
        raise MalformedHex(f"not an even-length hex string ({len(text)} chars)")
    return bytes.fromhex(text)


def decode_bytes(code: bytes) -> Program:
    out: list[Instruction] = []
    jumpdests = set()
    pc, n = 0, len(code)
    while pc < n:
        op = code[pc]
        size = opcodes.push_width(op)
        if size:
            raw = code[pc + 1 : pc + 1 + size]
            truncated = len(raw) < size
            operand = int.from_bytes(raw.ljust(size, b"\x00"), "big")
            out.append(Instruction(pc, op, operand, 1 + len(raw), truncated))
            pc += 1 + len(raw)
            continue
        if op == 0x5B:
            jumpdests.add(pc)
        out.append(Instruction(pc, op))
        pc += 1
    return Program(bytes(code), tuple(out), frozenset(jumpdests))


def decode(hex_text: str) -> Program:
    """Decode hex text (optional ``0x`` prefix) into a :class:`Program`.

    Push operands are consumed as data, so ``0x5b`` bytes inside them never
    become jump destinations. Unknown bytes decode as one-byte ``INVALID``.
    """
    return decode_bytes(parse_hex(hex_text))
