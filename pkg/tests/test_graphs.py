"""Path enumeration checked against an independent recursive DFS plus networkx."""

import random

import networkx as nx
import pytest

from evmfuncs.boundary import identify_boundaries
from evmfuncs.corpus import generate_corpus
from evmfuncs.disasm import decode
from evmfuncs.dispatcher import public_entries
from evmfuncs.graphs import (
    DISPATCHER, EXIT, IntraCfg, PathBudgetExceeded, acyclic_paths, call_graph, call_graph_from_records,
    call_graph_from_truth, callgraph_paths, cfg_from_truth, intra_cfg, remove_backedges,
)

import fixtures
from graph_oracle import random_callgraph, random_cfg, reference_callgraph_paths, reference_paths


def test_acyclic_paths_match_reference():
    rng = random.Random(11)
    for _ in range(300):
        nodes, edges = random_cfg(rng)
        cfg = IntraCfg.from_edges(0, nodes, edges)
        got = acyclic_paths(cfg)
        assert not got.truncated
        assert got.paths == reference_paths(0, cfg.nodes, cfg.edges)


def test_loop_gets_surrogate_edges():
    # 0 -> 1 -> 2 -> 1, 2 -> EXIT
    cfg = IntraCfg.from_edges(0, [0, 1, 2], [(0, 1), (1, 2), (2, 1), (2, EXIT)])
    dag = remove_backedges(0, cfg.successors())
    assert dag[2] == [EXIT] and 1 in dag[0]
    assert acyclic_paths(cfg).paths == {(0, 1, 2, EXIT)}


def test_path_cap_truncates():
    # a ladder of diamonds has 2**k paths
    edges = []
    for i in range(0, 20, 3):
        edges += [(i, i + 1), (i, i + 2), (i + 1, i + 3), (i + 2, i + 3)]
    edges.append((21, EXIT))
    cfg = IntraCfg.from_edges(0, range(22), edges)
    got = acyclic_paths(cfg, cap=16)
    assert got.truncated and len(got) == 16


def test_call_graph_rewriting_and_paths():
    rng = random.Random(5)
    for _ in range(300):
        funcs, publics, sites = random_callgraph(rng)
        cg = call_graph(funcs, publics, sites)
        succ = cg.successors()
        g = nx.DiGraph([(a, b) for a, bs in succ.items() for b in bs])
        assert nx.is_directed_acyclic_graph(g)
        # every original call edge is either kept or recorded as a surrogate
        kept = {(a, b) for a, b, pc in cg.edges if pc is not None} | {(a, b) for a, b, _ in cg.surrogates}
        assert kept == {(a, b) for a, b, _ in sites}
        for p, i in publics:
            assert (DISPATCHER, p) in cg.edge_set() and cg.interface[p] == i
        assert callgraph_paths(cg) == reference_callgraph_paths(succ)


def test_self_recursion_becomes_surrogate():
    cg = call_graph([1], [(1, 50)], [(1, 1, 7)])
    assert cg.surrogates == [(1, 1, 7)]
    assert callgraph_paths(cg) == {1: {(1,)}}


def test_callgraph_path_budget():
    funcs = list(range(1, 13))
    sites = [(a, b, a * 100 + b) for a in funcs for b in funcs if a < b]
    cg = call_graph(funcs, [(1, 99)], sites)
    with pytest.raises(PathBudgetExceeded):
        callgraph_paths(cg, cap=100)


def test_intra_cfg_of_shared_tail():
    program, labels = fixtures.shared_tail()
    res = identify_boundaries(program, [], oracle_entries=[labels["mul"], labels["add"]])
    entries = {r.entry for r in res.records}
    rec = next(r for r in res.records if r.entry == labels["mul"])
    cfg = intra_cfg(program, rec, entries)
    assert cfg.nodes == [labels["mul"], labels["tail"]]
    assert set(cfg.edges) == {(labels["mul"], labels["tail"]), (labels["tail"], EXIT)}
    assert "digraph" in cfg.to_dot()


@pytest.mark.parametrize("style", ["plain", "dedup"])
def test_recovered_graphs_equal_ground_truth_in_oracle_mode(style):
    for gt in generate_corpus(23, 25, style):
        program = decode(gt.bytecode)
        d = public_entries(program)
        res = identify_boundaries(program, d.body_entries, oracle_entries=gt.internal_entries,
                                  interface_entries=d.interface_entries)
        entries = {r.entry for r in res.records}
        by_entry = res.by_entry()
        for f in gt.of_kind("internal", "public"):
            got = intra_cfg(program, by_entry[f.entry], entries)
            want = cfg_from_truth(f)
            assert (got.nodes, set(got.edges)) == (want.nodes, set(want.edges)), (gt.id, f.name)
        assert callgraph_paths(call_graph_from_records(res.records, d)) == callgraph_paths(call_graph_from_truth(gt))
