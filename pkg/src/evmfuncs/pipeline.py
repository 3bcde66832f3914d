"""End-to-end analysis of one contract and evaluation over a labelled corpus."""

from __future__ import annotations

import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import graphs, metrics
from .boundary import INTERNAL, PUBLIC_BODY, BoundaryConfig, BoundaryResult, identify_boundaries
from .disasm import Program, decode
from .dispatcher import Dispatch, public_entries
from .model.baseline import baseline_entries
from .model.predict import probabilities
from .segment import ControlFlow


@dataclass
class Analysis:
    program: Program
    dispatch: Dispatch
    probabilities: dict[int, float]
    result: BoundaryResult
    seconds: float

    @property
    def known_entries(self) -> set[int]:
        return self.dispatch.interface_entries | self.dispatch.body_entries

    def public_nodes(self) -> set[int]:
        return {f.body_entry if f.body_entry is not None else f.interface_entry for f in self.dispatch.functions}


def analyze(
    program: Program,
    params: dict[str, np.ndarray] | None = None,
    oracle_entries=None,
    config: BoundaryConfig | None = None,
    token_cap: int = 50_000,
) -> Analysis:
    """Dispatcher, entry probabilities and boundary refinement for one program."""
    start = time.perf_counter()
    cf = ControlFlow(program)
    dispatch = public_entries(program, cf)
    publics = {f.body_entry if f.body_entry is not None else f.interface_entry for f in dispatch.functions}
    probs: dict[int, float] = {}
    if oracle_entries is None:
        if params is None:
            raise ValueError("either a trained model or an explicit entry list is required")
        if program.instructions:
            probs = probabilities(params, program, token_cap)
    result = identify_boundaries(
        program,
        publics,
        probabilities=probs,
        oracle_entries=oracle_entries,
        interface_entries=dispatch.interface_entries - publics,
        config=config,
        cf=cf,
    )
    return Analysis(program, dispatch, probs, result, time.perf_counter() - start)


@dataclass
class ContractOutcome:
    id: str
    status: str  # analyzed | timeout | fatal
    seconds: float
    scores: dict[str, metrics.Score] = field(default_factory=dict)
    error: str | None = None
    partial: bool = False


def _internal_truth(gt) -> set[int]:
    return gt.internal_entries


def score_contract(gt, an: Analysis, rho0: float, path_cap: int = 10_000) -> dict[str, metrics.Score]:
    """All per-contract scores for one analysed contract."""
    res = an.result
    known = an.known_entries
    internal_truth = gt.internal_entries
    body_truth = gt.body_entries
    internal_pred = {r.entry for r in res.records if r.kind == INTERNAL}
    funcs_pred = [r for r in res.records if r.kind in (INTERNAL, PUBLIC_BODY)]
    funcs_truth = gt.of_kind("internal", "public")
    raw = {o for o, p in an.probabilities.items() if p >= rho0} - known - {0}

    s = {
        "entry": metrics.entry_score(internal_pred, internal_truth),
        "entry_with_bodies": metrics.entry_score({r.entry for r in funcs_pred}, internal_truth | body_truth),
        "entry_model_raw": metrics.entry_score(raw, internal_truth),
        "boundary": metrics.boundary_score(funcs_pred, funcs_truth),
        "boundary_bytes_only": metrics.boundary_score(funcs_pred, funcs_truth, match="bytes"),
        "baseline_entry": metrics.entry_score(baseline_entries(an.program) - known, internal_truth),
    }

    # CFG path sets, matched by entry; unmatched functions contribute all their paths as errors
    cf = ControlFlow(an.program)
    entries = {r.entry for r in funcs_pred}
    pred_paths: set = set()
    for r in funcs_pred:
        cfg = graphs.intra_cfg(an.program, r, entries, cf)
        pred_paths |= {(r.entry,) + p for p in graphs.acyclic_paths(cfg, path_cap).paths}
    true_paths: set = set()
    for f in funcs_truth:
        if f.cfg_nodes is None:
            continue
        cfg = graphs.cfg_from_truth(f)
        true_paths |= {(f.entry,) + p for p in graphs.acyclic_paths(cfg, path_cap).paths}
    s["cfg_paths"] = metrics.pathset_score(pred_paths, true_paths)

    cg_pred = graphs.callgraph_paths(graphs.call_graph_from_records(res.records, an.dispatch), path_cap)
    cg_true = graphs.callgraph_paths(graphs.call_graph_from_truth(gt), path_cap)
    s["callgraph_paths"] = metrics.pathset_score(
        {p for ps in cg_pred.values() for p in ps}, {p for ps in cg_true.values() for p in ps}
    )
    return s


def failure_scores(gt) -> dict[str, metrics.Score]:
    n_int = len(gt.internal_entries)
    n_fun = len(gt.of_kind("internal", "public"))
    return {
        "entry": metrics.failed_score(n_int),
        "entry_with_bodies": metrics.failed_score(n_fun),
        "entry_model_raw": metrics.failed_score(n_int),
        "boundary": metrics.failed_score(n_fun),
        "boundary_bytes_only": metrics.failed_score(n_fun),
        "baseline_entry": metrics.failed_score(n_int),
        "cfg_paths": metrics.failed_score(0),
        "callgraph_paths": metrics.failed_score(0),
    }


@dataclass
class EvalSettings:
    config: BoundaryConfig = field(default_factory=BoundaryConfig)
    oracle: bool = False
    path_cap: int = 10_000
    token_cap: int = 50_000


_WORKER_PARAMS: dict | None = None


def _init_worker(params):
    global _WORKER_PARAMS
    _WORKER_PARAMS = params


def evaluate_one(gt, params, settings: EvalSettings) -> ContractOutcome:
    start = time.perf_counter()
    try:
        program = decode(gt.bytecode)
        oracle = sorted(gt.internal_entries) if settings.oracle else None
        an = analyze(program, params, oracle, settings.config, settings.token_cap)
        elapsed = time.perf_counter() - start
        timed_out = elapsed > settings.config.timeout_secs or any(
            "TraversalBudgetExceeded: time" in d for d in an.result.diagnostics
        )
        if timed_out:
            return ContractOutcome(gt.id, "timeout", elapsed, failure_scores(gt), partial=True)
        scores = score_contract(gt, an, settings.config.rho0, settings.path_cap)
        return ContractOutcome(gt.id, "analyzed", time.perf_counter() - start, scores, partial=an.result.partial)
    except Exception as exc:  # a failing contract is scored zero and reported, never fatal to the run
        return ContractOutcome(
            gt.id, "fatal", time.perf_counter() - start, failure_scores(gt),
            error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}",
        )


def _evaluate_worker(args):
    gt, settings = args
    return evaluate_one(gt, _WORKER_PARAMS, settings)


def evaluate(contracts: list, params, settings: EvalSettings | None = None, jobs: int = 1) -> list[ContractOutcome]:
    settings = settings or EvalSettings()
    if jobs <= 1 or len(contracts) < 2:
        return [evaluate_one(gt, params, settings) for gt in contracts]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(params,)) as pool:
        return list(pool.map(_evaluate_worker, [(gt, settings) for gt in contracts], chunksize=4))


def report(outcomes: list[ContractOutcome]) -> dict:
    """Aggregate outcomes into the JSON report (micro and macro, plus success accounting)."""
    counts = {"total": len(outcomes), "analyzed": 0, "timeouts": 0, "fatal": 0}
    for o in outcomes:
        counts[{"analyzed": "analyzed", "timeout": "timeouts", "fatal": "fatal"}[o.status]] += 1
    out: dict = {"accounting": counts, "micro": {}, "macro": {}}
    if outcomes:
        names = list(outcomes[0].scores)
        for name in names:
            per = [o.scores[name] for o in outcomes]
            out["micro"][name] = metrics.aggregate(per, "micro").to_json()
            out["macro"][name] = metrics.aggregate(per, "macro").to_json()
    out["success_rate"] = counts["analyzed"] / counts["total"] if counts["total"] else 0.0
    out["partial"] = sum(o.partial for o in outcomes)
    out["errors"] = {o.id: o.error for o in outcomes if o.error}
    return out


def timings_rows(outcomes: list[ContractOutcome]) -> list[dict]:
    rows = []
    for o in outcomes:
        row = {"id": o.id, "status": o.status, "seconds": f"{o.seconds:.6f}"}
        for name in ("entry", "boundary"):
            if name in o.scores:
                row[f"{name}_f1"] = f"{o.scores[name].f1:.6f}"
        rows.append(row)
    return rows
