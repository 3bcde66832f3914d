"""Two-level bidirectional LSTM producing per-block emission scores.

Shapes: a batch holds ``B`` contracts, padded to ``N`` tokens and ``K``
blocks. Padding always sits at the end of a sequence, and the backward
direction runs over each sequence reversed within its own length, so padded
steps come last in both directions and never influence real positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crf import crf_nll_grad

LSTM_NAMES = ("tok_fw", "tok_bw", "blk_fw", "blk_bw")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(vocab_size: int, emb: int, h1: int, h2: int, seed: int, dtype=np.float64) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)

    def uniform(shape, fan):
        bound = 1.0 / np.sqrt(fan)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    def lstm(name, d_in, h):
        b = np.zeros(4 * h, dtype=dtype)
        b[h:2 * h] = 1.0  # forget gate
        return {f"{name}.W": uniform((d_in + h, 4 * h), d_in + h), f"{name}.b": b}

    p = {"emb": (rng.standard_normal((vocab_size, emb)) * 0.1).astype(dtype)}
    p.update(lstm("tok_fw", emb, h1))
    p.update(lstm("tok_bw", emb, h1))
    d_blk = emb + 2 * h1
    p.update(lstm("blk_fw", d_blk, h2))
    p.update(lstm("blk_bw", d_blk, h2))
    p["out.W"] = uniform((2 * h2, 2), 2 * h2)
    p["out.b"] = np.zeros(2, dtype=dtype)
    p["trans"] = np.zeros((2, 2), dtype=dtype)
    return p


def lstm_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    B, N, D = x.shape
    H = W.shape[1] // 4
    Wx, Wh = W[:D], W[D:]
    xw = x @ Wx + b
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    hs = np.empty((B, N, H), dtype=x.dtype)
    gates = np.empty((B, N, 4 * H), dtype=x.dtype)
    cs = np.empty((B, N + 1, H), dtype=x.dtype)
    cs[:, 0] = 0.0
    for t in range(N):
        z = xw[:, t] + h @ Wh
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :H], gates[:, t, H:2 * H], gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:] = i, f, g, o
        cs[:, t + 1] = c
        hs[:, t] = h
    return hs, (x, W, gates, cs, hs)


def lstm_backward(dhs: np.ndarray, cache):
    x, W, gates, cs, hs = cache
    B, N, D = x.shape
    H = W.shape[1] // 4
    Wx, Wh = W[:D], W[D:]
    dz_all = np.empty((B, N, 4 * H), dtype=x.dtype)
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    for t in range(N - 1, -1, -1):
        i, f, g, o = gates[:, t, :H], gates[:, t, H:2 * H], gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:]
        c, c_prev = cs[:, t + 1], cs[:, t]
        tc = np.tanh(c)
        dh = dhs[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        if t:
            dWh += hs[:, t - 1].T @ dz
        dh_next = dz @ Wh.T
    dWx = x.reshape(-1, D).T @ dz_all.reshape(-1, 4 * H)
    db = dz_all.sum((0, 1))
    dx = dz_all @ Wx.T
    return dx, np.concatenate([dWx, dWh]), db


def reverse_index(lengths: np.ndarray, n: int) -> np.ndarray:
    """Per-row gather index that reverses the first ``length`` steps and keeps the padding."""
    t = np.arange(n)[None, :]
    L = lengths[:, None]
    return np.where(t < L, L - 1 - t, t)


def _gather(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.take_along_axis(x, idx[:, :, None], axis=1)


def bilstm_forward(x, lengths, p, fw: str, bw: str):
    rev = reverse_index(lengths, x.shape[1])
    hf, cf = lstm_forward(x, p[f"{fw}.W"], p[f"{fw}.b"])
    hb_rev, cb = lstm_forward(_gather(x, rev), p[f"{bw}.W"], p[f"{bw}.b"])
    return hf, _gather(hb_rev, rev), (rev, cf, cb)


def bilstm_backward(dhf, dhb, cache, grads, fw: str, bw: str):
    rev, cf, cb = cache
    dx, dW, db = lstm_backward(dhf, cf)
    grads[f"{fw}.W"] += dW
    grads[f"{fw}.b"] += db
    dx_rev, dW, db = lstm_backward(_gather(dhb, rev), cb)
    grads[f"{bw}.W"] += dW
    grads[f"{bw}.b"] += db
    return dx + _gather(dx_rev, rev)


@dataclass
class Batch:
    ids: np.ndarray  # [B, N] token ids, padded
    tok_len: np.ndarray  # [B]
    spans: np.ndarray  # [B, K, 2] token ranges, padded with (0, 1)
    n_blocks: np.ndarray  # [B]

    @classmethod
    def build(cls, items: list[tuple[np.ndarray, np.ndarray]], pad_id: int) -> "Batch":
        B = len(items)
        N = max(1, max(len(ids) for ids, _ in items))
        K = max(1, max(len(sp) for _, sp in items))
        ids = np.full((B, N), pad_id, dtype=np.int64)
        spans = np.tile(np.array([0, 1], dtype=np.int64), (B, K, 1))
        tl = np.zeros(B, dtype=np.int64)
        nb = np.zeros(B, dtype=np.int64)
        for b, (tok, sp) in enumerate(items):
            ids[b, : len(tok)] = tok
            spans[b, : len(sp)] = sp
            tl[b], nb[b] = len(tok), len(sp)
        return cls(ids, tl, spans, nb)


def forward(p: dict[str, np.ndarray], batch: Batch):
    """Emission scores ``[B, K, 2]`` and a cache for :func:`backward`."""
    x = p["emb"][batch.ids]
    B, N, E = x.shape
    hf, hb, c_tok = bilstm_forward(x, batch.tok_len, p, "tok_fw", "tok_bw")

    starts, ends = batch.spans[..., 0], batch.spans[..., 1]
    sizes = (ends - starts).astype(x.dtype)[..., None]
    csum = np.concatenate([np.zeros((B, 1, E), dtype=x.dtype), np.cumsum(x, axis=1)], axis=1)
    mean = (_gather(csum, ends) - _gather(csum, starts)) / sizes
    feat = np.concatenate([mean, _gather(hf, ends - 1), _gather(hb, starts)], axis=2)
    K = feat.shape[1]
    valid = np.arange(K)[None, :] < batch.n_blocks[:, None]
    feat = feat * valid[..., None]

    gf, gb, c_blk = bilstm_forward(feat, batch.n_blocks, p, "blk_fw", "blk_bw")
    g = np.concatenate([gf, gb], axis=2)
    em = g @ p["out.W"] + p["out.b"]
    cache = (x, starts, ends, sizes, valid, c_tok, c_blk, g, hf.shape[2], gf.shape[2])
    return em, cache


def backward(p: dict[str, np.ndarray], batch: Batch, d_em: np.ndarray, cache, grads: dict[str, np.ndarray]) -> None:
    """Accumulate parameter gradients given ``dLoss/d emissions`` (padded blocks must be zero)."""
    x, starts, ends, sizes, valid, c_tok, c_blk, g, H1, H2 = cache
    B, N, E = x.shape
    grads["out.W"] += g.reshape(-1, g.shape[2]).T @ d_em.reshape(-1, 2)
    grads["out.b"] += d_em.sum((0, 1))
    dg = d_em @ p["out.W"].T
    dfeat = bilstm_backward(dg[..., :H2], dg[..., H2:], c_blk, grads, "blk_fw", "blk_bw")
    dfeat = dfeat * valid[..., None]

    dmean, dhf_end, dhb_start = dfeat[..., :E], dfeat[..., E:E + H1], dfeat[..., E + H1:]
    dhf = np.zeros((B, N, H1), dtype=x.dtype)
    dhb = np.zeros((B, N, H1), dtype=x.dtype)
    bidx = np.repeat(np.arange(B), starts.shape[1]).reshape(starts.shape)
    np.add.at(dhf, (bidx, ends - 1), dhf_end)
    np.add.at(dhb, (bidx, starts), dhb_start)
    dx = bilstm_backward(dhf, dhb, c_tok, grads, "tok_fw", "tok_bw")

    # mean pooling: every token of block k receives dmean_k / size_k
    per_block = dmean / sizes
    delta = np.zeros((B, N + 1, E), dtype=x.dtype)
    np.add.at(delta, (bidx, starts), per_block)
    np.add.at(delta, (bidx, ends), -per_block)
    dx += np.cumsum(delta, axis=1)[:, :N]
    dx *= (np.arange(N)[None, :] < batch.tok_len[:, None])[..., None]
    np.add.at(grads["emb"], batch.ids, dx)


def loss_and_grads(p: dict[str, np.ndarray], batch: Batch, labels: list[np.ndarray]):
    """Mean CRF negative log-likelihood over the batch, per-contract losses and gradients."""
    em, cache = forward(p, batch)
    B = len(labels)
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    d_em = np.zeros_like(em)
    losses = np.zeros(B)
    for b, y in enumerate(labels):
        k = int(batch.n_blocks[b])
        loss, de, dt = crf_nll_grad(em[b, :k], p["trans"], y)
        losses[b] = loss
        d_em[b, :k] = de / B
        grads["trans"] += dt / B
    backward(p, batch, d_em, cache, grads)
    return float(losses.mean()), losses, grads
