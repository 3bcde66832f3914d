"""Intra-procedural CFGs, call graphs and the acyclic path sets used to compare them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Union

from .disasm import Program
from .segment import CJUMP, FALL, HALT, JUMP, ControlFlow

EXIT = "EXIT"
DISPATCHER = "dispatcher"

Node = Union[int, str]


class PathBudgetExceeded(RuntimeError):
    pass


def _order(n: Node) -> tuple:
    # integers ascending, symbolic nodes last
    return (1, 0, n) if isinstance(n, str) else (0, n, "")


@dataclass
class IntraCfg:
    entry: int
    nodes: list[int]
    edges: list[tuple[int, Node]]

    def successors(self) -> dict[Node, list[Node]]:
        succ: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        succ[EXIT] = []
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        for k in succ:
            succ[k] = sorted(set(succ[k]), key=_order)
        return succ

    def to_json(self) -> dict:
        return {"entry": self.entry, "nodes": self.nodes + [EXIT], "edges": [list(e) for e in self.edges]}

    def to_dot(self, name: str | None = None) -> str:
        lines = [f'digraph "{name or hex(self.entry)}" {{']
        for n in self.nodes:
            shape = "doublecircle" if n == self.entry else "box"
            lines.append(f'  "{n:#x}" [shape={shape}];')
        lines.append(f'  "{EXIT}" [shape=point];')
        for a, b in self.edges:
            tb = b if isinstance(b, str) else f"{b:#x}"
            lines.append(f'  "{a:#x}" -> "{tb}";')
        lines.append("}")
        return "\n".join(lines)

    @classmethod
    def from_edges(cls, entry: int, nodes: Iterable[int], edges: Iterable[tuple]) -> "IntraCfg":
        nodes = sorted(set(nodes) | {entry})
        keep = set(nodes)
        es = {
            (int(a), b if b == EXIT else int(b))
            for a, b in edges
            if a in keep and (b == EXIT or b in keep)
        }
        return cls(entry, nodes, sorted(es, key=lambda e: (e[0], _order(e[1]))))


def intra_cfg(program: Program, record, entries: Iterable[int] = (), cf: ControlFlow | None = None) -> IntraCfg:
    """CFG of one function restricted to its bytes.

    Jumps into other functions are replaced by an edge to the return site
    (the traversal's resolved return address when known, else the next
    instruction). Halts and returning indirect jumps lead to EXIT.
    """
    cf = cf or ControlFlow(program)
    entries = set(entries)
    returns = getattr(record, "returns", {}) or {}
    owned = set(record.bytes)
    nodes = [b.entry for b in cf.blocks if b.entry in owned]
    edges: set[tuple[int, Node]] = set()

    def call_edge(block, pc):
        ret = returns.get(pc, block.end)
        edges.add((block.entry, ret))

    for entry in nodes:
        b = cf.by_entry[entry]
        if b.terminator == HALT:
            edges.add((entry, EXIT))
            continue
        if b.terminator == FALL:
            nxt = b.end
            if nxt in entries and nxt != record.entry:
                call_edge(b, b.last.offset)
            elif nxt in cf.by_entry:
                edges.add((entry, nxt))
            else:
                edges.add((entry, EXIT))
            continue
        kind = cf.jump_kinds[b.last.offset]
        if b.terminator == CJUMP:
            edges.add((entry, b.end))
        if kind.direct:
            if kind.target in entries:
                call_edge(b, b.last.offset)
            else:
                edges.add((entry, kind.target))
        elif b.terminator == JUMP and kind.indirect:
            edges.add((entry, EXIT))
    return IntraCfg.from_edges(record.entry, nodes, edges)


def cfg_from_truth(label) -> IntraCfg:
    return IntraCfg.from_edges(label.entry, label.cfg_nodes or [label.entry], label.cfg_edges or [])


def _dfs_backedges(*roots: Node, succ: dict[Node, list[Node]]) -> tuple[list[tuple[Node, Node]], list[Node]]:
    """Backedges of an iterative DFS forest (roots and children in the given order) and the visit order."""
    seen: set[Node] = set()
    back: list[tuple[Node, Node]] = []
    order: list[Node] = []
    for root in roots:
        if root in seen:
            continue
        on_stack: set[Node] = {root}
        seen.add(root)
        order.append(root)
        stack = [(root, iter(succ.get(root, ())))]
        while stack:
            node, it = stack[-1]
            child = next(it, None)
            if child is None:
                stack.pop()
                on_stack.discard(node)
                continue
            if child in on_stack:
                back.append((node, child))
            elif child not in seen:
                seen.add(child)
                on_stack.add(child)
                order.append(child)
                stack.append((child, iter(succ.get(child, ()))))
    return back, order


@dataclass
class AcyclicPathSet:
    paths: set[tuple[Node, ...]] = field(default_factory=set)
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.paths)


def remove_backedges(entry: int, succ: dict[Node, list[Node]]) -> dict[Node, list[Node]]:
    """Replace every DFS backedge ``w -> v`` by ``entry -> v`` and ``w -> EXIT``."""
    back, _ = _dfs_backedges(entry, succ=succ)
    out = {k: list(v) for k, v in succ.items()}
    for w, v in back:
        out[w].remove(v)
        if EXIT not in out[w]:
            out[w].append(EXIT)
        if v != entry and v not in out[entry]:
            out[entry].append(v)
    for k in out:
        out[k] = sorted(set(out[k]), key=_order)
    return out


def is_acyclic(root: Node, succ: dict[Node, list[Node]]) -> bool:
    return not _dfs_backedges(root, succ=succ)[0]


def _simple_paths(src: Node, dst: Node, succ: dict[Node, list[Node]], cap: int) -> tuple[set[tuple], bool]:
    paths: set[tuple] = set()
    path = [src]
    on_path = {src}
    stack = [iter(succ.get(src, ()))]
    while stack:
        child = next(stack[-1], None)
        if child is None:
            stack.pop()
            on_path.discard(path.pop())
            continue
        if child in on_path:
            continue
        if child == dst:
            paths.add(tuple(path) + (dst,))
            if len(paths) >= cap:
                return paths, True
            continue
        path.append(child)
        on_path.add(child)
        stack.append(iter(succ.get(child, ())))
    return paths, False


def acyclic_paths(cfg: IntraCfg, cap: int = 10_000) -> AcyclicPathSet:
    """All entry -> EXIT paths after backedge removal; ``truncated`` is set at the cap."""
    dag = remove_backedges(cfg.entry, cfg.successors())
    assert is_acyclic(cfg.entry, dag), "surrogate rewriting left a cycle"
    paths, cut = _simple_paths(cfg.entry, EXIT, dag, cap)
    return AcyclicPathSet(paths, cut)


@dataclass
class CallGraph:
    nodes: list[Node]
    edges: list[tuple[Node, int, int | None]]  # (caller, callee, call-site pc); None for surrogates
    interface: dict[int, int] = field(default_factory=dict)  # public node -> interface entry
    surrogates: list[tuple[Node, int, int | None]] = field(default_factory=list)

    def successors(self) -> dict[Node, list[Node]]:
        succ: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        for a, b, _ in self.edges:
            succ.setdefault(a, []).append(b)
        return {k: sorted(set(v), key=_order) for k, v in succ.items()}

    def edge_set(self) -> set[tuple[Node, int]]:
        return {(a, b) for a, b, _ in self.edges}

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": n, "interface_entry": self.interface.get(n)} if n != DISPATCHER else {"id": n}
                for n in self.nodes
            ],
            "edges": [{"caller": a, "callee": b, "pc": pc} for a, b, pc in self.edges],
            "surrogates": [{"caller": a, "callee": b, "pc": pc} for a, b, pc in self.surrogates],
        }

    def to_dot(self) -> str:
        def label(n):
            return n if isinstance(n, str) else f"{n:#x}"

        lines = ["digraph callgraph {"]
        for n in self.nodes:
            lines.append(f'  "{label(n)}";')
        for a, b, pc in self.edges:
            attr = "" if pc is not None else " [style=dashed]"
            lines.append(f'  "{label(a)}" -> "{label(b)}"{attr};')
        lines.append("}")
        return "\n".join(lines)


def call_graph(
    entries: Iterable[int],
    publics: Iterable[tuple[int, int]],
    call_sites: Iterable[tuple[Node, int, int]],
) -> CallGraph:
    """Call graph rooted at a dispatcher node, with recursion cut by surrogate edges.

    ``publics`` pairs each public function node (its body entry) with its
    interface entry; the dispatcher gets an edge to every public node.
    ``call_sites`` are ``(caller, callee, pc)``; a caller of ``0`` or
    ``DISPATCHER`` means the dispatcher itself.
    """
    publics = list(publics)
    nodes = sorted(set(entries) | {p for p, _ in publics}, key=_order)
    known = set(nodes)
    edges: set[tuple[Node, int, int | None]] = set()
    for caller, callee, pc in call_sites:
        caller = DISPATCHER if caller in (0, DISPATCHER) and caller not in known else caller
        if callee in known and (caller == DISPATCHER or caller in known):
            edges.add((caller, callee, pc))
    linked = {b for a, b, _ in edges if a == DISPATCHER}
    for p, _ in publics:
        if p not in linked:
            edges.add((DISPATCHER, p, None))
    cg = CallGraph([DISPATCHER] + nodes, sorted(edges, key=_edge_key), {p: i for p, i in publics})

    # recursive call-sites become surrogate dispatcher edges
    while True:
        # unreachable recursive cycles are cut too, so the whole graph ends up acyclic
        back, _ = _dfs_backedges(DISPATCHER, *nodes, succ=cg.successors())
        if not back:
            break
        w, v = back[0]
        removed = [e for e in cg.edges if e[0] == w and e[1] == v]
        cg.edges = [e for e in cg.edges if not (e[0] == w and e[1] == v)]
        cg.surrogates += removed
        if not any(e[0] == DISPATCHER and e[1] == v for e in cg.edges):
            cg.edges.append((DISPATCHER, v, None))
        cg.edges.sort(key=_edge_key)
    return cg


def _edge_key(e) -> tuple:
    return (_order(e[0]), _order(e[1]), -1 if e[2] is None else e[2])


def call_graph_from_records(records, dispatch) -> CallGraph:
    """Call graph of a boundary result; ``dispatch`` supplies interface entries."""
    publics = []
    for f in dispatch.functions:
        publics.append((f.body_entry if f.body_entry is not None else f.interface_entry, f.interface_entry))
    sites = []
    entries = []
    for r in records:
        caller = DISPATCHER if r.kind == "dispatcher" else r.entry
        if r.kind != "dispatcher":
            entries.append(r.entry)
        for pc, callee in r.calls:
            sites.append((caller, callee, pc))
    return call_graph(entries, publics, sites)


def call_graph_from_truth(gt) -> CallGraph:
    publics = [(d["body_entry"], d["interface_entry"]) for d in gt.dispatch]
    entries = [f.entry for f in gt.of_kind("public", "internal")]
    dispatcher = {f.entry for f in gt.of_kind("dispatcher")}
    sites = [
        (DISPATCHER if cs["caller"] in dispatcher else cs["caller"], cs["callee"], cs["pc"])
        for cs in gt.call_sites
    ]
    return call_graph(entries, publics, sites)


def callgraph_paths(cg: CallGraph, cap: int = 10_000) -> dict[Node, set[tuple[int, ...]]]:
    """For each function node, every dispatcher -> node path (dispatcher omitted)."""
    succ = cg.successors()
    assert is_acyclic(DISPATCHER, succ), "call graph still has a cycle"
    out: dict[Node, set[tuple[int, ...]]] = {n: set() for n in cg.nodes if n != DISPATCHER}
    total = 0
    path: list[int] = []
    stack = [iter(succ.get(DISPATCHER, ()))]
    while stack:
        child = next(stack[-1], None)
        if child is None:
            stack.pop()
            if path:
                path.pop()
            continue
        path.append(child)
        out[child].add(tuple(path))
        total += 1
        if total >= cap:
            raise PathBudgetExceeded(f"more than {cap} call-graph paths")
        stack.append(iter(succ.get(child, ())))
    return out


def dump_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=1)
