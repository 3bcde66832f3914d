"""Synthetic runtime-bytecode generator with exact function labels.

Contracts are built from an explicit block-level IR: each IR block becomes
exactly one basic block in the output, so the generator knows every
function's blocks, its intra-procedural edges and its call-sites without
looking at the emitted bytes. Function byte labels are the instructions of
all IR blocks reachable from the function entry along intra-procedural edges
(a call edge continues at the return site).

Calling convention follows the common Solidity shape: the caller pushes the
return address, then the arguments, then the callee tag and jumps; the callee
leaves its return values where the return address was and jumps back.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field

from ..abi import selector_of
from . import asm
from .truth import FunctionLabel, GroundTruthContract

EXIT = "EXIT"


class InfeasibleSpec(ValueError):
    pass


@dataclass
class GenSpec:
    seed: int = 0
    n_public: int = 2
    n_internal: int = 2
    max_call_depth: int = 3
    share_probability: float = 0.0
    noncontiguous_probability: float = 0.0
    modifier_probability: float = 0.3
    split_call_probability: float = 0.3
    optimize_style: str = "plain"  # plain | dedup
    selector_style: str = "auto"  # div | shr | auto
    max_statements: int = 6

    def validate(self) -> None:
        if min(self.n_public, self.n_internal, self.max_call_depth) < 0:
            raise InfeasibleSpec("counts must be non-negative")
        for name in ("share_probability", "noncontiguous_probability",
                     "modifier_probability", "split_call_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InfeasibleSpec(f"{name}={p} outside [0, 1]")
        if self.optimize_style not in ("plain", "dedup"):
            raise InfeasibleSpec(f"unknown optimize_style {self.optimize_style!r}")
        if self.selector_style not in ("div", "shr", "auto"):
            raise InfeasibleSpec(f"unknown selector_style {self.selector_style!r}")
        if self.share_probability > 0 and self.n_internal < 2:
            raise InfeasibleSpec("code sharing needs at least two internal functions")
        if self.n_internal and not self.n_public:
            raise InfeasibleSpec("internal functions need a public caller")
        if self.n_internal and self.max_call_depth < 1:
            raise InfeasibleSpec("internal functions need max_call_depth >= 1")


class _Block:
    __slots__ = ("label", "jumpdest", "items", "succ", "exits", "open", "after_jumpi", "call")

    def __init__(self, label: str, jumpdest: bool):
        self.label = label
        self.jumpdest = jumpdest
        self.items: list = [asm.dest(label)] if jumpdest else []
        self.succ: list[str] = []
        self.exits = False
        self.open = True
        self.after_jumpi = False
        self.call: tuple[str, str] | None = None  # (callee function, return label)


@dataclass
class _Fn:
    name: str
    visibility: str
    n_args: int = 0
    n_rets: int = 0
    n_locals: int = 0
    level: int = 0
    entry: str = ""
    signature: str = ""
    callees: list[str] = field(default_factory=list)
    blocks: list[_Block] = field(default_factory=list)
    detached: list[_Block] = field(default_factory=list)
    tail: str | None = None  # label of a shareable epilogue block
    shares: str | None = None  # function whose tail this one reuses


_WORDS = ["transfer", "approve", "mint", "burn", "withdraw", "deposit", "claim", "stake",
          "vote", "pause", "settle", "register", "update", "release", "lock", "swap"]
_ARITH = ["ADD", "MUL", "SUB", "XOR", "OR", "AND", "DIV"]


class _Emitter:
    """Builds the IR blocks of one function while tracking the operand stack layout."""

    def __init__(self, gen: "_Generator", fn: _Fn):
        self.gen = gen
        self.rng = gen.rng
        self.fn = fn
        self.cur: _Block | None = None
        self._jumpi_block: _Block | None = None
        self.st: list[str] = []
        self.counter = 0

    # -- block plumbing ------------------------------------------------
    def open(self, label: str | None = None, jumpdest: bool = True, detached: bool = False) -> _Block:
        if label is None:
            label = self.gen.fresh(self.fn.name)
        cur = self.cur
        if cur is not None and cur.open and not cur.jumpdest and not cur.items:
            # empty fall-through block after a JUMPI: let the JUMPI fall into the new block
            (self.fn.detached if cur in self.fn.detached else self.fn.blocks).remove(cur)
            del self.gen.blocks[cur.label]
            pred = self._jumpi_block
            pred.succ.remove(cur.label)
            pred.open = True
            cur = self.cur = pred
        if cur is not None and cur.open:
            if not jumpdest and not cur.after_jumpi:
                raise AssertionError("fall-through into a non-JUMPDEST block would merge blocks")
            if detached:
                raise AssertionError("cannot fall through into a detached block")
            cur.succ.append(label)
            cur.open = False
        block = _Block(label, jumpdest)
        (self.fn.detached if detached else self.fn.blocks).append(block)
        self.gen.blocks[label] = block
        self.gen.owner_hint[label] = self.fn.name
        self.cur = block
        return block

    def emit(self, *items) -> None:
        assert not self.cur.after_jumpi, "code after JUMPI needs a new block"
        self.cur.items.extend(items)

    def op(self, *names: str) -> None:
        self.emit(*asm.op(*names))

    def jump(self, label: str, succ: str | None = None) -> None:
        self.emit(asm.ref(label), ("op", "JUMP"))
        self.cur.succ.append(succ or label)
        self.cur.open = False
        self.cur = None

    def jumpi(self, label: str) -> None:
        self.emit(asm.ref(label), ("op", "JUMPI"))
        self.cur.succ.append(label)
        self.cur.after_jumpi = True
        self.st.pop()  # condition

    def after_jumpi_block(self) -> None:
        self._jumpi_block = self.cur
        self.open(jumpdest=False)

    def halt(self, *names: str) -> None:
        self.op(*names)
        self.cur.exits = True
        self.cur.open = False
        self.cur = None

    # -- stack helpers -------------------------------------------------
    def pushc(self, value: int | None = None) -> None:
        if value is None:
            value = self.rng.choice([0, 1, 2, 0x20, 0x40, self.rng.randrange(3, 256)])
        self.emit(asm.push(value, 1))
        self.st.append("_t")

    def dup(self, var: str) -> None:
        n = len(self.st) - self.st.index(var)
        assert 1 <= n <= 16, (var, self.st)
        self.op(f"DUP{n}")
        self.st.append("_t")

    def store(self, var: str) -> None:
        n = len(self.st) - 1 - self.st.index(var)
        assert 1 <= n <= 16, (var, self.st)
        self.op(f"SWAP{n}", "POP")
        self.st.pop()

    def binop(self, name: str) -> None:
        self.op(name)
        self.st.pop()

    def readable(self) -> list[str]:
        return [v for v in self.st if v[0] in "arli" and len(self.st) - self.st.index(v) <= 15]

    def writable(self) -> list[str]:
        return [v for v in self.st if v[0] in "arl" and len(self.st) - self.st.index(v) <= 15]

    def value(self) -> None:
        vars_ = self.readable()
        if vars_ and self.rng.random() < 0.7:
            self.dup(self.rng.choice(vars_))
        else:
            self.pushc()

    def sink(self) -> None:
        w = self.writable()
        if w:
            self.store(self.rng.choice(w))
        else:
            self.op("POP")
            self.st.pop()

    def cond(self) -> None:
        self.value()
        self.pushc()
        self.binop(self.rng.choice(["LT", "GT", "EQ"]))
        if self.rng.random() < 0.4:
            self.op("ISZERO")

    def true_cond(self) -> None:
        """A condition that holds on the happy path (zero call value, non-empty calldata)."""
        kind = self.rng.randrange(3)
        if kind == 0:
            self.op("CALLVALUE", "ISZERO")
        elif kind == 1:
            self.op("CALLDATASIZE")
            self.emit(asm.push(3, 1))
            self.op("LT")  # 3 < calldatasize
        else:
            self.op("ADDRESS", "ISZERO", "ISZERO")
        self.st.append("_t")

    # -- statements ----------------------------------------------------
    def require(self, true: bool = True) -> None:
        self.true_cond() if true else self.cond()
        if self.gen.dedup:
            self.op("ISZERO")
            self.jumpi(self.gen.revert_label())
            self.after_jumpi_block()
        else:
            ok = self.gen.fresh(self.fn.name)
            self.jumpi(ok)
            self.after_jumpi_block()
            self.emit(asm.push(0, 1))
            self.halt("DUP1", "REVERT")
            self.open(ok)

    def s_arith(self) -> None:
        self.value()
        self.pushc()
        self.binop(self.rng.choice(_ARITH))
        self.sink()

    def s_sstore(self) -> None:
        self.value()
        self.pushc(self.rng.randrange(2, 8))  # slots 0 and 1 belong to the modifiers
        self.op("SSTORE")
        self.st[-2:] = []

    def s_sload(self) -> None:
        self.emit(asm.push(self.rng.randrange(0, 8), 1))
        self.op("SLOAD")
        self.st.append("_t")
        self.sink()

    def s_mstore(self) -> None:
        self.value()
        self.pushc(0x80 + 0x20 * self.rng.randrange(4))
        self.op("MSTORE")
        self.st[-2:] = []

    def s_log(self) -> None:
        self.value()
        self.pushc(0x20)
        self.pushc(0x80)
        self.op("LOG1")
        self.st[-3:] = []

    def s_if(self, depth: int) -> None:
        self.cond()
        skip = self.gen.fresh(self.fn.name)
        self.jumpi(skip)
        self.after_jumpi_block()
        self.statements(depth + 1, self.rng.randint(1, 2))
        self.open(skip)

    def s_ifelse(self, depth: int) -> None:
        self.cond()
        other, end = self.gen.fresh(self.fn.name), self.gen.fresh(self.fn.name)
        self.jumpi(other)
        self.after_jumpi_block()
        self.statements(depth + 1, self.rng.randint(1, 2))
        self.jump(end)
        self.open(other)
        self.statements(depth + 1, self.rng.randint(1, 2))
        self.open(end)

    def s_loop(self, depth: int) -> None:
        self.counter += 1
        var = f"i{self.counter}"
        self.emit(asm.push(0, 1))
        self.st.append(var)
        head, done = self.gen.fresh(self.fn.name), self.gen.fresh(self.fn.name)
        self.open(head)
        self.pushc(self.rng.randint(1, 3))
        self.dup(var)
        self.binop("LT")  # i < n
        self.op("ISZERO")
        self.jumpi(done)
        self.after_jumpi_block()
        self.statements(depth + 1, self.rng.randint(1, 2), loops=False)
        assert self.st[-1] == var
        self.pushc(1)
        self.binop("ADD")
        self.jump(head)
        self.open(done)
        self.op("POP")
        self.st.pop()

    def s_call(self, callee: str) -> None:
        target = self.gen.fns[callee]
        ret = self.gen.fresh(self.fn.name)
        base = len(self.st)
        split = target.n_args >= 1 and self.rng.random() < self.gen.spec.split_call_probability
        self.emit(asm.ref(ret))
        self.st.append("_ret")
        for _ in range(target.n_args - (1 if split else 0)):
            self.value()
        if split:
            # return address pushed blocks before the call-site (ternary argument)
            other, join = self.gen.fresh(self.fn.name), self.gen.fresh(self.fn.name)
            self.cond()
            self.jumpi(other)
            self.after_jumpi_block()
            saved = list(self.st)
            self.value()
            self.jump(join)
            self.st = saved
            self.open(other)
            self.value()
            self.open(join)
        self.emit(asm.ref(target.entry), ("op", "JUMP"))
        self.cur.succ.append(ret)
        self.cur.call = (callee, ret)
        self.cur.open = False
        self.cur = None
        self.st[base:] = ["_t"] * target.n_rets
        self.open(ret)
        for _ in range(target.n_rets):
            self.sink()

    def statements(self, depth: int, count: int, loops: bool = True) -> None:
        kinds = ["arith", "arith", "sstore", "sload", "mstore", "log"]
        if depth < 2:
            kinds += ["if", "ifelse", "require"]
            if loops:
                kinds.append("loop")
        for _ in range(count):
            kind = self.rng.choice(kinds)
            if kind == "arith":
                self.s_arith()
            elif kind == "sstore":
                self.s_sstore()
            elif kind == "sload":
                self.s_sload()
            elif kind == "mstore":
                self.s_mstore()
            elif kind == "log":
                self.s_log()
            elif kind == "if":
                self.s_if(depth)
            elif kind == "ifelse":
                self.s_ifelse(depth)
            elif kind == "loop":
                self.s_loop(depth)
            else:
                self.require(true=True)

    # -- whole functions ---------------------------------------------------
    def epilogue(self) -> None:
        fn = self.fn
        for _ in range(fn.n_locals):
            self.op("POP")
        if fn.n_rets:
            self.op(f"SWAP{fn.n_args + 1}")
            for _ in range(fn.n_args):
                self.op("SWAP1", "POP")
        else:
            for _ in range(fn.n_args):
                self.op("POP")
        self.cur.exits = True
        self.op("JUMP")
        self.cur.open = False
        self.cur = None

    def function(self) -> None:
        fn, rng = self.fn, self.rng
        self.open(fn.entry)
        self.st = ["_ra"] + [f"a{j}" for j in range(fn.n_args)]
        for j in range(fn.n_rets):
            self.emit(asm.push(0, 1))
            self.st.append(f"r{j}")
        for j in range(fn.n_locals):
            self.emit(asm.push(0, 1))
            self.st.append(f"l{j}")
        guard = rng.random() < self.gen.spec.modifier_probability
        reentrancy = fn.visibility == "public" and rng.random() < self.gen.spec.modifier_probability / 2
        if guard:
            # owner check: storage slot 0 holds the owner
            self.emit(asm.push(0, 1))
            self.op("SLOAD", "CALLER", "EQ")
            self.st.append("_t")
            if self.gen.dedup:
                self.op("ISZERO")
                self.jumpi(self.gen.revert_label())
                self.after_jumpi_block()
            else:
                ok = self.gen.fresh(fn.name)
                self.jumpi(ok)
                self.after_jumpi_block()
                self.emit(asm.push(0, 1))
                self.halt("DUP1", "REVERT")
                self.open(ok)
        if reentrancy:
            self.emit(asm.push(1, 1))
            self.op("SLOAD", "ISZERO")
            self.st.append("_t")
            ok = self.gen.fresh(fn.name)
            self.jumpi(ok)
            self.after_jumpi_block()
            self.emit(asm.push(0, 1))
            self.halt("DUP1", "REVERT")
            self.open(ok)
            self.emit(asm.push(1, 1), asm.push(1, 1))
            self.op("SSTORE")

        n = rng.randint(1, self.gen.spec.max_statements)
        calls = list(fn.callees)
        slots = sorted(rng.randint(0, n) for _ in calls)
        for i in range(n + 1):
            while slots and slots[0] == i:
                slots.pop(0)
                self.s_call(calls.pop(0))
            if i < n:
                self.statements(0, 1)
        if reentrancy:
            self.emit(asm.push(0, 1), asm.push(1, 1))
            self.op("SSTORE")

        if fn.shares is not None:
            self.jump(self.gen.fns[fn.shares].tail)
            return
        detach = rng.random() < self.gen.spec.noncontiguous_probability
        if fn.tail is not None or detach or rng.random() < 0.3:
            label = fn.tail or self.gen.fresh(fn.name)
            if detach:
                self.jump(label)
            self.open(label, detached=detach)
            if fn.tail is not None:
                # shared epilogue carries one statement so the shared block is non-trivial
                self.s_sstore()
        self.epilogue()


class _Generator:
    def __init__(self, spec: GenSpec):
        spec.validate()
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.dedup = spec.optimize_style == "dedup"
        self.blocks: dict[str, _Block] = {}
        self.owner_hint: dict[str, str] = {}
        self.fns: dict[str, _Fn] = {}
        self.labels = 0
        self._revert: str | None = None

    def fresh(self, prefix: str) -> str:
        self.labels += 1
        return f"{prefix}.t{self.labels}"

    def revert_label(self) -> str:
        if self._revert is None:
            self._revert = "__revert__"
        return self._revert

    # -- planning ------------------------------------------------------------
    def plan(self) -> tuple[list[_Fn], list[_Fn]]:
        rng, spec = self.rng, self.spec
        words = rng.sample(_WORDS, min(len(_WORDS), spec.n_public))
        publics = []
        for i in range(spec.n_public):
            word = words[i] if i < len(words) else f"op{i}"
            fn = _Fn(f"{word}{i}", "public", rng.randint(0, 3), rng.randint(0, 1), rng.randint(0, 2))
            fn.signature = f"{fn.name}({','.join(['uint256'] * fn.n_args)})"
            fn.entry = f"{fn.name}.body"
            publics.append(fn)
        internals = []
        for i in range(spec.n_internal):
            fn = _Fn(f"_internal{i}", "internal", rng.randint(0, 3), rng.randint(0, 1), rng.randint(0, 2))
            fn.entry = f"{fn.name}.entry"
            fn.level = rng.randint(1, spec.max_call_depth)
            internals.append(fn)
        for fn in publics + internals:
            self.fns[fn.name] = fn

        # every internal function gets a caller one level above it
        levels = sorted({f.level for f in internals})
        for fn in internals:
            level = fn.level
            while level - 1 not in levels and level - 1 > 0:
                level -= 1
            fn.level = level
            levels = sorted({f.level for f in internals})
        for fn in internals:
            pool = publics if fn.level == 1 else [g for g in internals if g.level == fn.level - 1]
            if not pool:
                pool = publics
                fn.level = 1
            rng.choice(pool).callees.append(fn.name)
        for fn in publics + internals:
            for g in internals:
                if g.level > fn.level and g.name not in fn.callees and rng.random() < 0.2:
                    fn.callees.append(g.name)
            rng.shuffle(fn.callees)

        # deduplicated epilogues shared between internal functions
        if self.spec.share_probability > 0:
            owners: list[_Fn] = []
            for fn in internals:
                if owners and rng.random() < self.spec.share_probability:
                    host = rng.choice(owners)
                    fn.n_args, fn.n_rets, fn.n_locals = host.n_args, host.n_rets, host.n_locals
                    fn.shares = host.name
                else:
                    fn.tail = f"{fn.name}.tail"
                    owners.append(fn)
        return publics, internals

    # -- dispatcher and interface stubs ------------------------------------------
    def dispatcher(self, publics: list[_Fn]) -> _Fn:
        rng = self.rng
        fn = _Fn("__dispatcher__", "dispatcher", entry="__start__")
        self.fns[fn.name] = fn
        e = _Emitter(self, fn)
        e.open("__start__", jumpdest=False)
        e.emit(asm.push(0x80, 1), asm.push(0x40, 1))
        e.op("MSTORE")
        if not publics:
            e.emit(asm.push(0, 1))
            e.halt("DUP1", "REVERT")
            return fn
        fallback = "__fallback__"
        e.emit(asm.push(4, 1))
        e.op("CALLDATASIZE", "LT")
        e.st = ["_t"]
        e.jumpi(fallback)
        e.after_jumpi_block()
        style = self.spec.selector_style
        if style == "auto":
            style = rng.choice(["div", "shr"])
        e.emit(asm.push(0, 1))
        e.op("CALLDATALOAD")
        if style == "div":
            e.emit(asm.push(1 << 224, 29))
            e.op("SWAP1", "DIV")
            e.emit(asm.push(0xFFFFFFFF, 4))
            e.op("AND")
        else:
            e.emit(asm.push(0xE0, 1))
            e.op("SHR")
        e.st = ["sel"]
        order = sorted(publics, key=lambda f: selector_of(f.signature))

        def chain(fns: list[_Fn]) -> None:
            for i, f in enumerate(fns):
                if i:
                    e.after_jumpi_block()
                e.op("DUP1")
                e.emit(asm.push(selector_of(f.signature), 4))
                e.op("EQ")
                e.st.append("_t")
                e.jumpi(f"{f.name}.iface")

        if len(order) >= 4 and rng.random() < 0.5:
            half = len(order) // 2
            lower = "__lower__"
            e.op("DUP1")
            e.emit(asm.push(selector_of(order[half].signature), 4))
            e.op("GT")
            e.st.append("_t")
            e.jumpi(lower)
            e.after_jumpi_block()
            chain(order[half:])
            e.after_jumpi_block()
            e.jump(fallback)
            e.open(lower)
            chain(order[:half])
        else:
            chain(order)
        e.open(fallback)
        if rng.random() < 0.5:
            e.emit(asm.push(0, 1))
            e.halt("DUP1", "REVERT")
        else:
            e.halt("STOP")

        for f in publics:
            e.open(f"{f.name}.iface")
            payable = rng.random() < 0.3
            if not payable:
                if self.dedup:
                    e.op("CALLVALUE", "ISZERO", "ISZERO")
                    e.st.append("_t")
                    e.jumpi(self.revert_label())
                    e.after_jumpi_block()
                else:
                    ok = self.fresh(fn.name)
                    e.op("CALLVALUE", "DUP1", "ISZERO")
                    e.st += ["_v", "_t"]
                    e.jumpi(ok)
                    e.after_jumpi_block()
                    e.emit(asm.push(0, 1))
                    e.halt("DUP1", "REVERT")
                    e.open(ok)
                    e.op("POP")
            ret = f"{f.name}.iret"
            e.emit(asm.ref(ret))
            for j in range(f.n_args):
                e.emit(asm.push(4 + 32 * j, 1))
                e.op("CALLDATALOAD")
            e.emit(asm.ref(f.entry), ("op", "JUMP"))
            e.cur.succ.append(ret)
            e.cur.call = (f.name, ret)
            e.cur.open = False
            e.cur = None
            e.open(ret)
            if f.n_rets:
                e.emit(asm.push(0, 1))
                e.op("MSTORE")
                e.emit(asm.push(0x20, 1), asm.push(0, 1))
                e.halt("RETURN")
            else:
                e.halt("STOP")
        return fn

    # -- assembly ----------------------------------------------------------------
    def build(self, cid: str) -> GroundTruthContract:
        rng, spec = self.rng, self.spec
        publics, internals = self.plan()
        disp = self.dispatcher(publics)
        # hosts before sharers so a shared tail exists when it is referenced
        for fn in publics + internals:
            _Emitter(self, fn).function()

        bodies = publics + internals
        rng.shuffle(bodies)
        sharers = [f for f in bodies if f.shares]
        bodies = [f for f in bodies if not f.shares] + sharers
        order = [disp] + bodies
        layout: list[_Block] = []
        for fn in order:
            layout += fn.blocks
        for fn in order:
            layout += fn.detached
        if self._revert is not None:
            rv = _Block(self._revert, True)
            rv.items += [asm.push(0, 1), ("op", "DUP1"), ("op", "REVERT")]
            rv.exits = True
            rv.open = False
            self.blocks[rv.label] = rv
            layout.append(rv)

        items: list = []
        spans: dict[str, tuple[int, int]] = {}
        for b in layout:
            assert not b.open, f"block {b.label} left open"
            assert b.items, f"block {b.label} is empty"
            spans[b.label] = (len(items), len(items) + len(b.items))
            items += b.items
        trailer = bytes([0xFE, 0xA1, 0x65]) + b"bzzr0" + bytes([0x58, 0x20])
        trailer += bytes(rng.randrange(256) for _ in range(32)) + bytes([0x00, 0x29])
        items.append(("raw", trailer))
        code, labels, offsets = asm.assemble(items)

        def block_offsets(label: str) -> list[int]:
            lo, hi = spans[label]
            return offsets[lo:hi]

        def start(label: str) -> int:
            return offsets[spans[label][0]]

        functions = []
        for fn in order:
            owned = self._reachable(fn.entry)
            offs = sorted({o for lbl in owned for o in block_offsets(lbl)})
            nodes = sorted(start(lbl) for lbl in owned)
            edges = set()
            for lbl in owned:
                b = self.blocks[lbl]
                for s in b.succ:
                    edges.add((start(lbl), start(s)))
                if b.exits:
                    edges.add((start(lbl), EXIT))
            functions.append(
                FunctionLabel(
                    name=fn.name,
                    visibility=fn.visibility,
                    entry=start(fn.entry),
                    bytes=offs,
                    cfg_nodes=nodes,
                    cfg_edges=sorted(edges, key=lambda e: (e[0], str(e[1]))),
                )
            )

        call_sites = []
        for fn in order:
            for b in fn.blocks + fn.detached:
                if b.call is not None:
                    callee, ret = b.call
                    call_sites.append({
                        "caller": start(fn.entry),
                        "callee": start(self.fns[callee].entry),
                        "pc": block_offsets(b.label)[-1],
                        "return_site": start(ret),
                    })
        dispatch = [
            {
                "selector": f"0x{selector_of(f.signature):08x}",
                "signature": f.signature,
                "interface_entry": start(f"{f.name}.iface"),
                "body_entry": start(f.entry),
            }
            for f in publics
        ]
        abi = [
            {
                "type": "function",
                "name": f.name,
                "inputs": [{"name": f"a{j}", "type": "uint256"} for j in range(f.n_args)],
                "outputs": [{"name": "", "type": "uint256"}] * f.n_rets,
                "stateMutability": "nonpayable",
            }
            for f in publics
        ]
        return GroundTruthContract(
            id=cid,
            bytecode=code.hex(),
            functions=functions,
            abi=abi,
            provenance={"generator": asdict(spec)},
            dispatch=dispatch,
            call_sites=call_sites,
        )

    def _reachable(self, entry: str) -> list[str]:
        seen, stack = {entry}, [entry]
        while stack:
            for s in self.blocks[stack.pop()].succ:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return sorted(seen)


def generate(spec: GenSpec, cid: str | None = None) -> GroundTruthContract:
    """Build one labelled contract; a pure function of ``spec``."""
    return _Generator(spec).build(cid or f"gen-{spec.seed}")


def corpus_specs(seed: int, count: int, style: str = "plain") -> list[GenSpec]:
    """Randomised per-contract specs for a corpus of the given optimisation style."""
    rng = random.Random(seed)
    specs = []
    for i in range(count):
        n_public = rng.randint(1, 6)
        n_internal = rng.randint(0, 8)
        dedup = style == "dedup"
        specs.append(
            GenSpec(
                seed=rng.randrange(1 << 31),
                n_public=n_public,
                n_internal=n_internal,
                max_call_depth=rng.randint(1, 3),
                share_probability=0.5 if dedup and n_internal >= 2 else 0.0,
                noncontiguous_probability=0.3 if dedup else 0.0,
                modifier_probability=0.3,
                split_call_probability=0.3,
                optimize_style=style,
            )
        )
    return specs


def generate_corpus(seed: int, count: int, style: str = "plain") -> list[GroundTruthContract]:
    return [
        generate(spec, f"{style}-{seed}-{i:05d}")
        for i, spec in enumerate(corpus_specs(seed, count, style))
    ]
