"""Public function discovery from the selector dispatcher at offset 0.

The dispatcher is walked as a small CFG with an abstract stack that knows
three things beyond plain constants: the raw first calldata word, the 4-byte
selector extracted from it, and the outcome of comparing the selector with a
constant. A conditional jump on ``selector == C`` yields an interface entry.
Other conditional jumps (size checks, binary-search splits) are explored on
both sides. Interface entries themselves are never entered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .abi import MalformedAbi, selector_of, signatures
from .disasm import Program
from .opcodes import HALTING, info
from .segment import CJUMP, HALT, JUMP, ControlFlow

_CD0 = ("calldata0",)
_SEL = ("selector",)
_SIZE = ("calldatasize",)
_TOP = ("top",)

WALK_LIMIT = 512


@dataclass(frozen=True)
class PublicFunction:
    selector: int | None
    interface_entry: int
    body_entry: int | None = None
    fallback: bool = False

    @property
    def hex_selector(self) -> str:
        return "fallback" if self.selector is None else f"0x{self.selector:08x}"


@dataclass
class Dispatch:
    functions: list[PublicFunction]
    fallback: PublicFunction | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def interface_entries(self) -> set[int]:
        return {f.interface_entry for f in self.functions}

    @property
    def body_entries(self) -> set[int]:
        return {f.body_entry for f in self.functions if f.body_entry is not None}

    def to_json(self, names: dict[int, str] | None = None) -> list[dict]:
        out = []
        for f in self.functions:
            row = {
                "selector": f.hex_selector,
                "interface_entry": f.interface_entry,
                "body_entry": f.body_entry,
            }
            if names and f.selector in names:
                row["name"] = names[f.selector]
            out.append(row)
        return out


def _step(stack: list, ins) -> None:
    """Abstract transfer function for the dispatcher walk (mutates ``stack``)."""

    def pop():
        return stack.pop() if stack else _TOP

    name = ins.name
    if ins.is_push:
        stack.append(ins.operand)
    elif name.startswith("DUP"):
        n = int(name[3:])
        stack.append(stack[-n] if len(stack) >= n else _TOP)
    elif name.startswith("SWAP"):
        n = int(name[4:])
        while len(stack) < n + 1:
            stack.insert(0, _TOP)
        stack[-1], stack[-1 - n] = stack[-1 - n], stack[-1]
    elif name == "CALLDATALOAD":
        stack.append(_CD0 if pop() == 0 else _TOP)
    elif name == "CALLDATASIZE":
        stack.append(_SIZE)
    elif name == "DIV":
        a, b = pop(), pop()
        stack.append(_SEL if a == _CD0 and b == 1 << 224 else _TOP)
    elif name == "SHR":
        shift, value = pop(), pop()
        stack.append(_SEL if shift == 224 and value == _CD0 else _TOP)
    elif name == "AND":
        a, b = pop(), pop()
        if _SEL in (a, b) and 0xFFFFFFFF in (a, b):
            stack.append(_SEL)
        elif type(a) is int and type(b) is int:
            stack.append(a & b)
        else:
            stack.append(_TOP)
    elif name == "EQ":
        a, b = pop(), pop()
        if a == _SEL and type(b) is int:
            stack.append(("eq", b))
        elif b == _SEL and type(a) is int:
            stack.append(("eq", a))
        else:
            stack.append(_TOP)
    elif name in ("LT", "GT"):
        a, b = pop(), pop()
        stack.append(("size-check",) if _SIZE in (a, b) else _TOP)
    else:
        pops, pushes = info(ins.opcode).pops, info(ins.opcode).pushes
        for _ in range(pops):
            pop()
        stack.extend([_TOP] * pushes)


def public_entries(program: Program, cf: ControlFlow | None = None) -> Dispatch:
    """Walk the dispatcher from offset 0 and collect selector -> interface entry."""
    cf = cf or ControlFlow(program)
    dispatch = Dispatch([])
    if not program.instructions:
        dispatch.diagnostics.append("NoDispatcher: empty program")
        return dispatch
    found: dict[int, int] = {}
    chain_ends: list[int] = []
    size_targets: list[int] = []
    saw_selector = False
    work = [(0, ())]
    seen: set = set()
    while work and len(seen) < WALK_LIMIT:
        entry, frozen = work.pop()
        key = (entry, frozen)
        if key in seen or entry not in cf.by_entry:
            continue
        seen.add(key)
        block = cf.by_entry[entry]
        stack = list(frozen)
        for ins in block.instructions[:-1] if block.terminator in (JUMP, CJUMP) else block.instructions:
            _step(stack, ins)
        saw_selector = saw_selector or _SEL in stack
        if block.terminator == HALT:
            continue
        if block.terminator == JUMP:
            target = stack.pop() if stack else _TOP
            if type(target) is int and target in program.jumpdests and target not in found.values():
                work.append((target, tuple(stack)))
            continue
        if block.terminator == CJUMP:
            target = stack.pop() if stack else _TOP
            cond = stack.pop() if stack else _TOP
            fall = block.end
            rest = tuple(stack)
            valid = type(target) is int and target in program.jumpdests
            if isinstance(cond, tuple) and cond[:1] == ("eq",):
                if valid:
                    found.setdefault(cond[1], target)
                if fall in cf.by_entry:
                    nxt = cf.by_entry[fall]
                    if not _compares_selector(nxt):
                        chain_ends.append(fall)
                    work.append((fall, rest))
                continue
            if cond == ("size-check",) and valid:
                size_targets.append(target)
            # split trees and size checks: both sides
            if fall in cf.by_entry:
                work.append((fall, rest))
            if valid and target not in found.values():
                work.append((target, rest))
            continue
        # fall-through block
        if block.end in cf.by_entry:
            work.append((block.end, tuple(stack)))

    if not saw_selector and not found:
        dispatch.diagnostics.append("NoDispatcher: no selector comparison reachable from offset 0")
    if len(seen) >= WALK_LIMIT:
        dispatch.diagnostics.append("dispatcher walk limit reached")
    funcs = [
        PublicFunction(sel, iface, body_entry(program, iface, cf))
        for sel, iface in sorted(found.items(), key=lambda kv: kv[1])
    ]
    dispatch.functions = funcs
    fb = next(iter(size_targets), None)
    if fb is None and chain_ends:
        fb = min(chain_ends)
    if fb is not None:
        dispatch.fallback = PublicFunction(None, fb, fallback=True)
    return dispatch


def _compares_selector(block) -> bool:
    return any(ins.name == "EQ" for ins in block.instructions) and any(
        ins.is_push and ins.push_size == 4 for ins in block.instructions
    )


def _push_consts(stack: tuple) -> list[int]:
    return [v for v in stack if type(v) is int]


def body_entry(program: Program, interface_entry: int, cf: ControlFlow | None = None,
               limit: int = 64) -> int | None:
    """Follow the argument-decoding stub from ``interface_entry`` to the body jump.

    The body jump is a DIRECT jump made while a return address (a JUMPDEST
    constant) sits below the target on the stack. If the code at that return
    address finishes the transaction without calling anything else, the jump
    target is the body entry; otherwise the walk continues at the return site
    (interface code that calls several helpers). ``None`` means no such jump
    exists before the stub halts, i.e. the body is inlined.
    """
    from .symbolic import UNKNOWN, apply

    cf = cf or ControlFlow(program)
    jd = program.jumpdests
    work = [(interface_entry, ())]
    seen = set()
    while work and len(seen) < limit:
        entry, stack = work.pop(0)
        if (entry, stack) in seen or entry not in cf.by_entry:
            continue
        seen.add((entry, stack))
        block = cf.by_entry[entry]
        for ins in block.instructions[:-1]:
            stack = apply(stack, ins, UNKNOWN)
        last = block.last
        if block.terminator == HALT:
            continue
        if block.terminator == JUMP:
            target = stack[-1] if stack else UNKNOWN
            below = stack[:-1]
            if type(target) is not int or target not in jd:
                continue
            returns = [v for v in below if type(v) is int and v in jd]
            if returns:
                ret = returns[-1]
                if _finishes_quietly(program, cf, ret):
                    return target if target != interface_entry else None
                # helper call inside the stub: resume after it returns
                keep = below[: len(below) - 1 - below[::-1].index(ret)]
                work.append((ret, keep))
                continue
            work.append((target, below))
        elif block.terminator == CJUMP:
            target, rest = (stack[-1] if stack else UNKNOWN), stack[:-2]
            if block.end in cf.by_entry:
                work.append((block.end, rest))
            if type(target) is int and target in jd:
                work.append((target, rest))
        elif last.next_offset in cf.by_entry:
            work.append((last.next_offset, stack))
    return None


def _finishes_quietly(program: Program, cf: ControlFlow, start: int, limit: int = 16) -> bool:
    """True when every path from ``start`` halts with RETURN/STOP and makes no call."""
    from .symbolic import UNKNOWN, apply

    jd = program.jumpdests
    work, seen = [start], set()
    while work:
        entry = work.pop()
        if entry in seen:
            continue
        seen.add(entry)
        if len(seen) > limit or entry not in cf.by_entry:
            return False
        block = cf.by_entry[entry]
        stack: tuple = ()
        for ins in block.instructions[:-1]:
            stack = apply(stack, ins, UNKNOWN)
        if block.terminator == HALT:
            if block.last.name not in HALTING:
                return False
            continue
        if block.terminator == JUMP:
            target = stack[-1] if stack else UNKNOWN
            if type(target) is not int or any(type(v) is int and v in jd for v in stack[:-1]):
                return False
            work.append(target)
        elif block.terminator == CJUMP:
            target = stack[-1] if stack else UNKNOWN
            if type(target) is not int:
                return False
            work += [target, block.end]
        else:
            work.append(block.end)
    return True


@dataclass
class AbiMatch:
    names: dict[int, str]
    unmatched_selectors: list[int]
    unmatched_abi: list[str]

    def name_of(self, selector: int) -> str:
        return self.names.get(selector, f"0x{selector:08x}")


def match_abi(publics: list[PublicFunction] | Dispatch, abi) -> AbiMatch:
    """Join recovered selectors to ABI signatures by hashing each signature."""
    if isinstance(publics, Dispatch):
        publics = publics.functions
    sigs = signatures(abi) if abi not in (None, "", []) else []
    by_sel = {}
    for sig in sigs:
        by_sel.setdefault(selector_of(sig), sig)
    present = {f.selector for f in publics if f.selector is not None}
    names = {s: by_sel[s] for s in present if s in by_sel}
    return AbiMatch(
        names=names,
        unmatched_selectors=sorted(present - set(by_sel)),
        unmatched_abi=sorted(sig for s, sig in by_sel.items() if s not in present),
    )


__all__ = [
    "AbiMatch", "Dispatch", "MalformedAbi", "PublicFunction",
    "body_entry", "match_abi", "public_entries",
]
