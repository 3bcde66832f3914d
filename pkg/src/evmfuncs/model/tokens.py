"""Instruction tokens and per-block token sequences for the entry labeler."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..disasm import Instruction, Program
from ..opcodes import OPCODES
from ..segment import ReachableBlock, reachable_blocks

PAD, UNK = "<pad>", "<unk>"


def _build_vocab() -> tuple[str, ...]:
    names = [OPCODES[op].name for op in sorted(OPCODES)]
    names.append("INVALID")
    names += [f"PUSH{k}_DEST" for k in range(1, 33)]
    seen, out = set(), [PAD, UNK]
    for n in names:
        if n not in seen:
            seen.add(n)
            out.append(n)
    return tuple(out)


VOCAB = _build_vocab()
INDEX = {tok: i for i, tok in enumerate(VOCAB)}
PAD_ID, UNK_ID = INDEX[PAD], INDEX[UNK]


def vocab_hash(vocab: tuple[str, ...] = VOCAB) -> str:
    return hashlib.sha256("\n".join(vocab).encode()).hexdigest()[:16]


def token(ins: Instruction, jumpdests: frozenset[int]) -> str:
    """Mnemonic, with push operands dropped unless they name a jump destination."""
    if ins.is_push and ins.push_size and ins.operand in jumpdests:
        return f"{ins.name}_DEST"
    return ins.name


@dataclass
class BlockTokens:
    blocks: list[ReachableBlock]
    ids: np.ndarray  # flat token ids, one per instruction
    spans: np.ndarray  # [n_blocks, 2] token index ranges

    @property
    def entries(self) -> list[int]:
        return [b.entry for b in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)


def preprocess(program: Program) -> BlockTokens:
    blocks = reachable_blocks(program)
    jd = program.jumpdests
    ids, spans = [], []
    for b in blocks:
        start = len(ids)
        ids.extend(INDEX.get(token(ins, jd), UNK_ID) for ins in b.instructions)
        spans.append((start, len(ids)))
    return BlockTokens(blocks, np.asarray(ids, dtype=np.int64), np.asarray(spans, dtype=np.int64).reshape(-1, 2))


def can_be_entry(block: ReachableBlock) -> bool:
    return block.entry == 0 or block.instructions[0].opcode == 0x5B
