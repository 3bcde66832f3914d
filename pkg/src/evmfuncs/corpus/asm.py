"""A tiny label-resolving EVM assembler used by the generator and test fixtures.

Items are tuples:

    ("op", "ADD")               plain opcode
    ("push", value, width)      PUSHwidth value (width 0 emits PUSH0)
    ("ref", label, width)       PUSH of a label's offset (default width 2)
    ("dest", label)             JUMPDEST defining ``label``
    ("raw", bytes)              literal bytes (filler, metadata)
"""

from __future__ import annotations

from ..opcodes import BY_NAME

Item = tuple


def op(*names: str) -> list[Item]:
    return [("op", n) for n in names]


def push(value: int, width: int | None = None) -> Item:
    if width is None:
        width = max(1, (value.bit_length() + 7) // 8)
    return ("push", value, width)


def ref(label: str, width: int = 2) -> Item:
    return ("ref", label, width)


def dest(label: str) -> Item:
    return ("dest", label)


def item_size(item: Item) -> int:
    kind = item[0]
    if kind == "op" or kind == "dest":
        return 1
    if kind in ("push", "ref"):
        return 1 + item[2]
    if kind == "raw":
        return len(item[1])
    raise ValueError(f"unknown item {item!r}")


def layout(items: list[Item]) -> tuple[list[int], dict[str, int]]:
    """Offsets of every item and the label table."""
    offsets, labels, pc = [], {}, 0
    for it in items:
        offsets.append(pc)
        if it[0] == "dest":
            if it[1] in labels:
                raise ValueError(f"duplicate label {it[1]!r}")
            labels[it[1]] = pc
        pc += item_size(it)
    return offsets, labels


def _push_bytes(value: int, width: int) -> bytes:
    if width == 0:
        if value:
            raise ValueError("PUSH0 cannot carry a value")
        return bytes([0x5F])
    if value >= 1 << (8 * width):
        raise ValueError(f"value 0x{value:x} does not fit PUSH{width}")
    return bytes([0x5F + width]) + value.to_bytes(width, "big")


def assemble(items: list[Item]) -> tuple[bytes, dict[str, int], list[int]]:
    """Return ``(code, labels, item_offsets)``."""
    offsets, labels = layout(items)
    out = bytearray()
    for it in items:
        kind = it[0]
        if kind == "op":
            out.append(BY_NAME[it[1]])
        elif kind == "dest":
            out.append(0x5B)
        elif kind == "push":
            out += _push_bytes(it[1], it[2])
        elif kind == "ref":
            if it[1] not in labels:
                raise KeyError(f"undefined label {it[1]!r}")
            out += _push_bytes(labels[it[1]], it[2])
        else:
            out += it[1]
    return bytes(out), labels, offsets


def fill_to(items: list[Item], target: int, byte: int = 0xFE) -> list[Item]:
    """Pad ``items`` with filler bytes so the next item starts at ``target``."""
    size = sum(item_size(it) for it in items)
    if size > target:
        raise ValueError(f"already past 0x{target:x} (at 0x{size:x})")
    if size < target:
        items = items + [("raw", bytes([byte]) * (target - size))]
    return items
