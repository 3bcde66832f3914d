"""Entry probabilities for every reachable block of a program."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..disasm import Program
from . import crf
from .network import forward
from .tokens import PAD_ID, BlockTokens, can_be_entry
from .network import Batch
from .train import program_sequence


@dataclass(frozen=True)
class EntryPrediction:
    entry: int
    probability: float
    label: int


def _windows(spans: np.ndarray, cap: int) -> list[tuple[int, int]]:
    """Block ranges with at most ``cap`` tokens each, consecutive windows sharing one block."""
    k = len(spans)
    out, lo = [], 0
    while True:
        hi = lo + 1
        while hi < k and spans[hi, 1] - spans[lo, 0] <= cap:
            hi += 1
        out.append((lo, hi))
        if hi >= k:
            return out
        lo = max(hi - 1, lo + 1)


def block_scores(params: dict[str, np.ndarray], toks: BlockTokens, token_cap: int = 50_000) -> tuple[np.ndarray, np.ndarray]:
    """Per-block P(entry) and Viterbi labels; long programs run in overlapping windows."""
    k = len(toks)
    prob = np.zeros(k)
    hits = np.zeros(k)
    labels = np.zeros(k, dtype=np.int64)
    for lo, hi in _windows(toks.spans, token_cap):
        t0, t1 = int(toks.spans[lo, 0]), int(toks.spans[hi - 1, 1])
        spans = toks.spans[lo:hi] - t0
        em, _ = forward(params, Batch.build([(toks.ids[t0:t1], spans)], PAD_ID))
        em = em[0, : hi - lo]
        prob[lo:hi] += crf.marginals(em, params["trans"])
        hits[lo:hi] += 1
        labels[lo:hi] = np.maximum(labels[lo:hi], crf.viterbi(em, params["trans"]))
    return prob / hits, labels


def predict_all(params: dict[str, np.ndarray], program: Program, token_cap: int = 50_000) -> list[EntryPrediction]:
    toks = program_sequence(program)
    prob, labels = block_scores(params, toks, token_cap)
    return [
        EntryPrediction(b.entry, float(p), int(y))
        for b, p, y in zip(toks.blocks, prob, labels)
        if b.reachable and can_be_entry(b)
    ]


def probabilities(params: dict[str, np.ndarray], program: Program, token_cap: int = 50_000) -> dict[int, float]:
    return {e.entry: e.probability for e in predict_all(params, program, token_cap)}


def predict(params: dict[str, np.ndarray], program: Program, rho: float, exclude=(),
            token_cap: int = 50_000) -> dict[int, float]:
    """Block entries whose marginal reaches ``rho``, minus ``exclude`` (interface entries)."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    skip = set(exclude)
    return {
        e.entry: e.probability
        for e in predict_all(params, program, token_cap)
        if e.probability >= rho and e.entry not in skip
    }
