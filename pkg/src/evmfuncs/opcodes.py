"""EVM opcode table: byte value -> (mnemonic, pops, pushes)."""

from __future__ import annotations

from typing import NamedTuple


class OpInfo(NamedTuple):
    name: str
    pops: int
    pushes: int


_BASE = {
    0x00: ("STOP", 0, 0),
    0x01: ("ADD", 2, 1),
    0x02: ("MUL", 2, 1),
    0x03: ("SUB", 2, 1),
    0x04: ("DIV", 2, 1),
    0x05: ("SDIV", 2, 1),
    0x06: ("MOD", 2, 1),
    0x07: ("SMOD", 2, 1),
    0x08: ("ADDMOD", 3, 1),
    0x09: ("MULMOD", 3, 1),
    0x0A: ("EXP", 2, 1),
    0x0B: ("SIGNEXTEND", 2, 1),
    0x10: ("LT", 2, 1),
    0x11: ("GT", 2, 1),
    0x12: ("SLT", 2, 1),
    0x13: ("SGT", 2, 1),
    0x14: ("EQ", 2, 1),
    0x15: ("ISZERO", 1, 1),
    0x16: ("AND", 2, 1),
    0x17: ("OR", 2, 1),
    0x18: ("XOR", 2, 1),
    0x19: ("NOT", 1, 1),
    0x1A: ("BYTE", 2, 1),
    0x1B: ("SHL", 2, 1),
    0x1C: ("SHR", 2, 1),
    0x1D: ("SAR", 2, 1),
    0x20: ("SHA3", 2, 1),
    0x30: ("ADDRESS", 0, 1),
    0x31: ("BALANCE", 1, 1),
    0x32: ("ORIGIN", 0, 1),
    0x33: ("CALLER", 0, 1),
    0x34: ("CALLVALUE", 0, 1),
    0x35: ("CALLDATALOAD", 1, 1),
    0x36: ("CALLDATASIZE", 0, 1),
    0x37: ("CALLDATACOPY", 3, 0),
    0x38: ("CODESIZE", 0, 1),
    0x39: ("CODECOPY", 3, 0),
    0x3A: ("GASPRICE", 0, 1),
    0x3B: ("EXTCODESIZE", 1, 1),
    0x3C: ("EXTCODECOPY", 4, 0),
    0x3D: ("RETURNDATASIZE", 0, 1),
    0x3E: ("RETURNDATACOPY", 3, 0),
    0x3F: ("EXTCODEHASH", 1, 1),
    0x40: ("BLOCKHASH", 1, 1),
    0x41: ("COINBASE", 0, 1),
    0x42: ("TIMESTAMP", 0, 1),
    0x43: ("NUMBER", 0, 1),
    0x44: ("DIFFICULTY", 0, 1),
    0x45: ("GASLIMIT", 0, 1),
    0x46: ("CHAINID", 0, 1),
    0x47: ("SELFBALANCE", 0, 1),
    0x48: ("BASEFEE", 0, 1),
    0x50: ("POP", 1, 0),
    0x51: ("MLOAD", 1, 1),
    0x52: ("MSTORE", 2, 0),
    0x53: ("MSTORE8", 2, 0),
    0x54: ("SLOAD", 1, 1),
    0x55: ("SSTORE", 2, 0),
    0x56: ("JUMP", 1, 0),
    0x57: ("JUMPI", 2, 0),
    0x58: ("PC", 0, 1),
    0x59: ("MSIZE", 0, 1),
    0x5A: ("GAS", 0, 1),
    0x5B: ("JUMPDEST", 0, 0),
    0x5F: ("PUSH0", 0, 1),
    0xA0: ("LOG0", 2, 0),
    0xA1: ("LOG1", 3, 0),
    0xA2: ("LOG2", 4, 0),
    0xA3: ("LOG3", 5, 0),
    0xA4: ("LOG4", 6, 0),
    0xF0: ("CREATE", 3, 1),
    0xF1: ("CALL", 7, 1),
    0xF2: ("CALLCODE", 7, 1),
    0xF3: ("RETURN", 2, 0),
    0xF4: ("DELEGATECALL", 6, 1),
    0xF5: ("CREATE2", 4, 1),
    0xFA: ("STATICCALL", 6, 1),
    0xFD: ("REVERT", 2, 0),
    0xFE: ("INVALID", 0, 0),
    0xFF: ("SELFDESTRUCT", 1, 0),
}

OPCODES: dict[int, OpInfo] = {op: OpInfo(*v) for op, v in _BASE.items()}
for _k in range(1, 33):
    OPCODES[0x5F + _k] = OpInfo(f"PUSH{_k}", 0, 1)
for _k in range(1, 17):
    OPCODES[0x7F + _k] = OpInfo(f"DUP{_k}", _k, _k + 1)
    OPCODES[0x8F + _k] = OpInfo(f"SWAP{_k}", _k + 1, _k + 1)

INVALID_INFO = OpInfo("INVALID", 0, 0)

BY_NAME: dict[str, int] = {info.name: op for op, info in OPCODES.items()}

HALTING = frozenset({"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})
JUMPS = frozenset({"JUMP", "JUMPI"})


def info(opcode: int) -> OpInfo:
    return OPCODES.get(opcode, INVALID_INFO)


def push_width(opcode: int) -> int:
    """Number of immediate operand bytes carried by ``opcode`` (0 unless PUSH1..PUSH32)."""
    if 0x60 <= opcode <= 0x7F:
        return opcode - 0x5F
    return 0


def stack_arity(opcode: int | str) -> tuple[int, int]:
    """Return ``(pops, pushes)`` for an opcode byte or mnemonic.

    Unknown bytes and ``INVALID`` report ``(0, 0)``.
    """
    if isinstance(opcode, str):
        code = BY_NAME.get(opcode.upper())
        if code is None:
            return (0, 0)
        opcode = code
    i = info(opcode)
    return (i.pops, i.pushes)
