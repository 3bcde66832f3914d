"""Function boundaries by path-sensitive traversal over a symbolic operand stack.

Each known entry is explored with a worklist of states ``(pc, ctx, stack)``.
``ctx`` is a stack of ``(callee_entry, call_site_pc)`` frames: a direct jump
into a known entry pushes a frame, an indirect jump that consumes a constant
pops one. Only instructions reached with an empty ``ctx`` belong to the
function being analysed. States are merged on the program counter, the
jump-destination constants on the stack and the context.

At an indirect jump the consumed value tells whether the call structure seen
so far is consistent:

* ``$`` (caller data) with frames open: the last "call" was really a plain
  jump, so its call-site is blacklisted (SPURIOUS_CALL);
* a constant with no frames open: some call went unnoticed, so the entry
  threshold is lowered (MISSING_CALL).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .disasm import Instruction, Program
from .opcodes import HALTING
from .segment import CJUMP, FALL, HALT, JUMP, ControlFlow
from .symbolic import MAX_STACK, PARAM, UNKNOWN, apply, pop, tag_stack

SPURIOUS_CALL = "SPURIOUS_CALL"
MISSING_CALL = "MISSING_CALL"

PUBLIC_BODY, INTERNAL, DISPATCHER = "public-body", "internal", "dispatcher"


class UnresolvedJump(Exception):
    pass


class InvalidTarget(Exception):
    pass


@dataclass(frozen=True)
class Signal:
    kind: str  # SPURIOUS_CALL | MISSING_CALL
    pc: int  # call-site pc for SPURIOUS_CALL, indirect jump pc for MISSING_CALL
    entry: int
    value: int | None = None  # constant consumed by a MISSING_CALL jump


@dataclass(frozen=True)
class AnalysisState:
    pc: int
    ctx: tuple[tuple[int, int], ...] = ()
    stack: tuple = ()


@dataclass
class BoundaryConfig:
    rho0: float = 0.5
    delta: float = 0.1
    rho_min: float = 0.1
    max_lowerings: int = 5
    max_states: int = 100_000
    timeout_secs: float = 60.0
    max_ctx_depth: int = 16
    max_iterations: int = 64
    register_missing: bool = False

    def validate(self) -> None:
        for name in ("rho0", "rho_min"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name}={v} must lie in (0, 1]")
        if self.rho_min > self.rho0:
            raise ValueError("rho_min must not exceed rho0")
        if self.max_lowerings < 0 or self.max_iterations <= 0:
            raise ValueError("lowering and iteration caps must be non-negative")
        if self.delta <= 0 or self.max_states <= 0 or self.timeout_secs <= 0 or self.max_ctx_depth <= 0:
            raise ValueError("budgets and threshold step must be positive")


class Budget:
    """State and wall-clock allowance shared by every traversal of one contract."""

    def __init__(self, max_states: int, timeout_secs: float):
        self.max_states = max_states
        self.deadline = time.monotonic() + timeout_secs
        self.states = 0
        self.exceeded: str | None = None

    def charge(self) -> bool:
        self.states += 1
        if self.states > self.max_states:
            self.exceeded = "states"
        elif self.states % 256 == 0 and time.monotonic() > self.deadline:
            self.exceeded = "time"
        return self.exceeded is None


@dataclass
class Traversal:
    entry: int
    bytes: set[int] = field(default_factory=set)
    signals: list[Signal] = field(default_factory=list)
    calls: set[tuple[int, int]] = field(default_factory=set)  # (call pc, callee) made from this function
    returns: dict[int, int] = field(default_factory=dict)  # call pc -> resolved return address
    edges: set[tuple[int, int]] = field(default_factory=set)  # block -> block, empty ctx only
    exits: set[int] = field(default_factory=set)  # blocks leaving the function
    visited: set[int] = field(default_factory=set)  # every pc touched, including callees
    unresolved: int = 0
    invalid_targets: int = 0
    depth_cut: int = 0
    states: int = 0
    budget_exceeded: str | None = None


@dataclass
class FunctionRecord:
    entry: int
    bytes: frozenset[int]
    kind: str
    callers: set[int] = field(default_factory=set)
    calls: set[tuple[int, int]] = field(default_factory=set)
    returns: dict[int, int] = field(default_factory=dict)
    edges: set[tuple[int, int]] = field(default_factory=set)
    exits: set[int] = field(default_factory=set)
    partial: bool = False

    def to_json(self) -> dict:
        return {
            "entry": f"0x{self.entry:x}",
            "kind": self.kind,
            "bytes": [f"0x{b:x}" for b in sorted(self.bytes)],
            "callers": [f"0x{c:x}" for c in sorted(self.callers)],
            "partial": self.partial,
        }


@dataclass
class BoundaryResult:
    records: list[FunctionRecord]
    signals: list[Signal]
    blacklist: set[int]
    rho: float
    lowerings: int
    iterations: int
    dropped: set[int]
    diagnostics: list[str] = field(default_factory=list)
    partial: bool = False

    def by_entry(self) -> dict[int, FunctionRecord]:
        return {r.entry: r for r in self.records}

    def functions(self, *kinds: str) -> list[FunctionRecord]:
        kinds = kinds or (PUBLIC_BODY, INTERNAL)
        return [r for r in self.records if r.kind in kinds]


def infer_call_return_sites(program: Program, cf: ControlFlow, entries: Iterable[int]) -> tuple[set[int], set[int]]:
    """Call-site and return-site pcs implied by a set of known entries."""
    entries = set(entries)
    calls, rets = set(), set()
    for pc, kind in cf.jump_kinds.items():
        if kind.direct and kind.target in entries:
            calls.add(pc)
        elif kind.indirect:
            rets.add(pc)
    for b in cf.blocks:
        if b.terminator in (FALL, CJUMP) and b.end in entries:
            calls.add(b.last.offset)
    return calls, rets


def step(state: AnalysisState, ins: Instruction, jumpdests: frozenset[int]) -> tuple[list[int], tuple]:
    """Successor pcs and operand stack after executing ``ins`` symbolically.

    A jump consuming ``$`` leaves the function and has no successors.
    """
    name = ins.name
    stack = state.stack
    if name in ("JUMP", "JUMPI"):
        target, stack = pop(stack, PARAM)
        if name == "JUMPI":
            _, stack = pop(stack, PARAM)
        nxt = [ins.next_offset] if name == "JUMPI" else []
        if target is PARAM:
            return nxt, stack
        if target is UNKNOWN:
            raise UnresolvedJump(f"jump at 0x{ins.offset:x} consumes an unknown value")
        if target not in jumpdests:
            raise InvalidTarget(f"jump at 0x{ins.offset:x} targets 0x{target:x}, not a JUMPDEST")
        return [target] + nxt, stack
    if ins.name in HALTING:
        return [], stack
    return [ins.next_offset], apply(stack, ins, PARAM)


def validate_return(consumed, ctx: tuple, pc: int, entry: int) -> Signal | None:
    """Check the value consumed by an indirect jump against the context stack."""
    if consumed is PARAM and ctx:
        return Signal(SPURIOUS_CALL, ctx[-1][1], entry)
    if type(consumed) is int and not ctx:
        return Signal(MISSING_CALL, pc, entry, consumed)
    return None


def traverse_entry(
    program: Program,
    entry: int,
    entries: Iterable[int],
    blacklist: Iterable[int] = (),
    cf: ControlFlow | None = None,
    budget: Budget | None = None,
    max_ctx_depth: int = 16,
) -> Traversal:
    """Explore everything reachable from ``entry``; attribute empty-context code to it."""
    cf = cf or ControlFlow(program)
    entries = frozenset(entries)
    blacklist = frozenset(blacklist)
    jd = program.jumpdests
    kinds = cf.jump_kinds
    budget = budget or Budget(100_000, 60.0)
    out = Traversal(entry)
    seen: set = set()
    work: list[AnalysisState] = [AnalysisState(entry)]

    def push(src: int, pc: int, ctx: tuple, stack: tuple) -> None:
        if not ctx:
            out.edges.add((src, pc))
        work.append(AnalysisState(pc, ctx, stack))

    while work:
        st = work.pop()
        key = (st.pc, tag_stack(st.stack, jd), st.ctx)
        if key in seen:
            continue
        seen.add(key)
        if not budget.charge():
            out.budget_exceeded = budget.exceeded
            break
        out.states += 1
        block = cf.by_entry.get(st.pc)
        if block is None:
            out.invalid_targets += 1
            continue
        ctx, stack = st.ctx, st.stack
        if not ctx:
            out.bytes.update(block.offsets)
        out.visited.update(block.offsets)
        for ins in block.instructions[:-1]:
            stack = apply(stack, ins, PARAM)
        if len(stack) > MAX_STACK:
            out.unresolved += 1
            continue
        last = block.last
        term = block.terminator

        if term == HALT:
            if not ctx:
                out.exits.add(block.entry)
            continue
        if term == FALL:
            stack = apply(stack, last, PARAM)
            nxt = block.end
            if nxt not in cf.by_entry:
                if not ctx:
                    out.exits.add(block.entry)
                continue
            if nxt in entries and nxt != entry:
                # falling into another function: a call with no return address
                if not ctx:
                    out.calls.add((last.offset, nxt))
                continue
            push(block.entry, nxt, ctx, stack)
            continue

        consumed = stack[-1] if stack else PARAM
        try:
            succ, after = step(AnalysisState(last.offset, ctx, stack), last, jd)
        except UnresolvedJump:
            out.unresolved += 1
            succ, after = ([block.end] if term == CJUMP else []), pop(pop(stack, PARAM)[1], PARAM)[1]
            consumed = None
        except InvalidTarget:
            out.invalid_targets += 1
            succ, after = ([block.end] if term == CJUMP else []), pop(pop(stack, PARAM)[1], PARAM)[1]
            consumed = None

        kind = kinds.get(last.offset)
        if term == CJUMP:
            fall = block.end
            if fall in cf.by_entry:
                if fall in entries and fall != entry:
                    if not ctx:
                        out.calls.add((last.offset, fall))
                else:
                    push(block.entry, fall, ctx, after)
            if type(consumed) is int and consumed in succ:
                if kind is not None and kind.direct and consumed in entries and last.offset not in blacklist:
                    if len(ctx) >= max_ctx_depth:
                        out.depth_cut += 1
                    else:
                        if not ctx:
                            out.calls.add((last.offset, consumed))
                        work.append(AnalysisState(consumed, ctx + ((consumed, last.offset),), after))
                else:
                    push(block.entry, consumed, ctx, after)
            continue

        # unconditional jump
        if consumed is None:
            continue
        if consumed is PARAM:
            sig = validate_return(consumed, ctx, last.offset, entry)
            if sig is not None:
                out.signals.append(sig)
            elif not ctx:
                out.exits.add(block.entry)
            continue
        target = consumed
        if kind is not None and kind.direct:
            if target in entries and last.offset not in blacklist:
                if len(ctx) >= max_ctx_depth:
                    out.depth_cut += 1
                    continue
                if not ctx:
                    out.calls.add((last.offset, target))
                work.append(AnalysisState(target, ctx + ((target, last.offset),), after))
            else:
                push(block.entry, target, ctx, after)
            continue
        # indirect jump resolving to a constant: a return
        if ctx:
            callee, call_pc = ctx[-1]
            rest = ctx[:-1]
            if not rest:
                out.returns[call_pc] = target
                out.edges.add((cf.block_at(call_pc).entry, target))
            work.append(AnalysisState(target, rest, after))
        else:
            out.signals.append(validate_return(target, ctx, last.offset, entry))
            push(block.entry, target, ctx, after)
    out.signals = sorted(set(out.signals), key=lambda s: (s.kind, s.pc, s.entry))
    return out


def _candidates(probs: Mapping[int, float], rho: float, exclude: set[int], legal: set[int]) -> set[int]:
    return {o for o, p in probs.items() if p >= rho and o not in exclude and o in legal}


def identify_boundaries(
    program: Program,
    public_bodies: Iterable[int],
    probabilities: Mapping[int, float] | None = None,
    oracle_entries: Iterable[int] | None = None,
    interface_entries: Iterable[int] = (),
    config: BoundaryConfig | None = None,
    cf: ControlFlow | None = None,
    include_dispatcher: bool = True,
) -> BoundaryResult:
    """Refine entries and call-sites until traversal raises no new signals.

    Candidate internal entries come either from ``probabilities`` (block entry
    offset -> marginal probability, thresholded at a falling ``rho``) or from
    an explicit ``oracle_entries`` list. Public bodies are always kept;
    internal candidates that end up with no caller are dropped.
    """
    config = config or BoundaryConfig()
    config.validate()
    cf = cf or ControlFlow(program)
    budget = Budget(config.max_states, config.timeout_secs)
    publics = set(public_bodies)
    interfaces = set(interface_entries)
    legal = set(program.jumpdests) | {0}
    probs = dict(probabilities or {})
    oracle = oracle_entries is not None
    diagnostics: list[str] = []

    rho = config.rho0
    lowerings = 0
    if oracle:
        candidates = set(oracle_entries) - publics - interfaces - {0}
    else:
        candidates = _candidates(probs, rho, publics | interfaces | {0}, legal)
    registered: set[int] = set()
    blacklist: set[int] = set()
    dropped: set[int] = set()
    cache: dict[int, Traversal] = {}
    iterations = 0
    refinement_cut = False

    def entry_set() -> set[int]:
        return publics | ((candidates | registered) - dropped)

    def roots() -> list[int]:
        rs = sorted(entry_set())
        return ([0] if include_dispatcher and 0 not in rs else []) + rs

    def run_all() -> None:
        ents = frozenset(entry_set())
        for e in roots():
            if e not in cache:
                cache[e] = traverse_entry(program, e, ents, blacklist, cf, budget, config.max_ctx_depth)

    current = frozenset(entry_set())
    while True:
        iterations += 1
        if frozenset(entry_set()) != current:
            cache.clear()
            current = frozenset(entry_set())
        run_all()
        if budget.exceeded:
            break
        if iterations >= config.max_iterations:
            refinement_cut = True
            break
        signals = [s for t in cache.values() for s in t.signals]
        spurious = {s.pc for s in signals if s.kind == SPURIOUS_CALL} - blacklist
        if spurious:
            blacklist |= spurious
            for e in [e for e, t in cache.items() if t.visited & spurious]:
                del cache[e]
            continue
        missing = [s for s in signals if s.kind == MISSING_CALL]
        if missing:
            if config.register_missing:
                new = set()
                for s in missing:
                    callee = _enclosing_jumpdest(program, s.pc)
                    if callee is not None and callee not in entry_set() and callee not in interfaces:
                        new.add(callee)
                if new:
                    registered |= new
                    continue
            if not oracle:
                changed = False
                while not changed and lowerings < config.max_lowerings and rho - config.delta >= config.rho_min - 1e-9:
                    rho = round(rho - config.delta, 10)
                    lowerings += 1
                    new = _candidates(probs, rho, publics | interfaces | {0}, legal)
                    changed = new != candidates
                    candidates = new
                if changed:
                    continue
        # drop never-called candidates until stable
        inbound: dict[int, set[int]] = {}
        for e, t in cache.items():
            for pc, callee in t.calls:
                if callee != e:
                    inbound.setdefault(callee, set()).add(pc)
        uncalled = {c for c in (candidates | registered) - dropped if not inbound.get(c)}
        if uncalled:
            dropped |= uncalled
            continue
        break

    ents = entry_set()
    records = []
    all_signals: list[Signal] = []
    callers: dict[int, set[int]] = {}
    for e, t in cache.items():
        for pc, callee in t.calls:
            callers.setdefault(callee, set()).add(pc)
    for e in roots():
        t = cache.get(e)
        if t is None:
            continue
        kind = DISPATCHER if e == 0 and e not in ents else PUBLIC_BODY if e in publics else INTERNAL
        records.append(
            FunctionRecord(
                entry=e,
                bytes=frozenset(t.bytes),
                kind=kind,
                callers=callers.get(e, set()),
                calls=set(t.calls),
                returns=dict(t.returns),
                edges=set(t.edges),
                exits=set(t.exits),
                partial=t.budget_exceeded is not None,
            )
        )
        all_signals += t.signals
        if t.unresolved:
            diagnostics.append(f"0x{e:x}: {t.unresolved} unresolved jump(s) abandoned")
        if t.depth_cut:
            diagnostics.append(f"0x{e:x}: {t.depth_cut} path(s) cut at context depth {config.max_ctx_depth}")
    if budget.exceeded:
        diagnostics.append(f"TraversalBudgetExceeded: {budget.exceeded}")
    if refinement_cut:
        diagnostics.append("RefinementBudgetExceeded: iteration cap reached")
    return BoundaryResult(
        records=records,
        signals=all_signals,
        blacklist=blacklist,
        rho=rho,
        lowerings=lowerings,
        iterations=iterations,
        dropped=dropped,
        diagnostics=diagnostics,
        partial=bool(budget.exceeded or refinement_cut),
    )


def _enclosing_jumpdest(program: Program, pc: int) -> int | None:
    """Closest JUMPDEST at or before ``pc``."""
    best = None
    for d in program.jumpdests:
        if d <= pc and (best is None or d > best):
            best = d
    return best
