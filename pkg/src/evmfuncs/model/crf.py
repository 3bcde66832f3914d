"""Two-label linear-chain CRF: likelihood, posteriors, Viterbi and gradients.

Scores are ``sum_t E[t, y_t] + sum_{t>0} T[y_{t-1}, y_t]`` with no start or
end transitions. Everything runs in log space.
"""

from __future__ import annotations

import numpy as np


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def forward(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    alpha = np.empty_like(em)
    alpha[0] = em[0]
    for t in range(1, len(em)):
        alpha[t] = _lse(alpha[t - 1][:, None] + trans, 0) + em[t]
    return alpha


def backward(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    beta = np.zeros_like(em)
    for t in range(len(em) - 2, -1, -1):
        beta[t] = _lse(trans + (em[t + 1] + beta[t + 1])[None, :], 1)
    return beta


def log_partition(em: np.ndarray, trans: np.ndarray) -> float:
    return float(_lse(forward(em, trans)[-1], 0))


def path_score(em: np.ndarray, trans: np.ndarray, labels) -> float:
    y = np.asarray(labels, dtype=np.int64)
    s = em[np.arange(len(y)), y].sum()
    if len(y) > 1:
        s += trans[y[:-1], y[1:]].sum()
    return float(s)


def crf_nll(em: np.ndarray, trans: np.ndarray, labels) -> float:
    return log_partition(em, trans) - path_score(em, trans, labels)


def marginals(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Posterior P(y_t = 1) for every position."""
    return node_marginals(em, trans)[:, 1]


def node_marginals(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    alpha, beta = forward(em, trans), backward(em, trans)
    logz = _lse(alpha[-1], 0)
    return np.exp(alpha + beta - logz)


def crf_nll_grad(em: np.ndarray, trans: np.ndarray, labels) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and its gradients with respect to the emissions and transitions."""
    y = np.asarray(labels, dtype=np.int64)
    alpha, beta = forward(em, trans), backward(em, trans)
    logz = float(_lse(alpha[-1], 0))
    loss = logz - path_score(em, trans, y)
    d_em = np.exp(alpha + beta - logz)
    d_em[np.arange(len(y)), y] -= 1.0
    d_trans = np.zeros_like(trans)
    if len(y) > 1:
        pair = alpha[:-1, :, None] + trans[None] + (em[1:] + beta[1:])[:, None, :] - logz
        d_trans = np.exp(pair).sum(0)
        np.add.at(d_trans, (y[:-1], y[1:]), -1.0)
    return loss, d_em, d_trans


def viterbi(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Best label sequence; ties go to label 0."""
    n = len(em)
    score = em[0].copy()
    back = np.zeros((n, 2), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, None] + trans  # [prev, cur]
        # argmax returns the first maximum, i.e. the lower label on ties
        back[t] = cand.argmax(0)
        score = cand.max(0) + em[t]
    y = np.zeros(n, dtype=np.int64)
    y[-1] = int(score.argmax())
    for t in range(n - 1, 0, -1):
        y[t - 1] = back[t, y[t]]
    return y
