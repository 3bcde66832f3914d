"""Training loop, configuration and labelled sequences for the entry labeler."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..disasm import Program, decode
from .network import Batch, init_params, loss_and_grads, lstm_backward, lstm_forward
from .tokens import PAD_ID, VOCAB, BlockTokens, preprocess

log = logging.getLogger(__name__)


class DivergedTraining(RuntimeError):
    pass


class EmptyContract(ValueError):
    pass


@dataclass
class TrainConfig:
    seed: int = 0
    emb_dim: int = 32
    hidden1: int = 64
    hidden2: int = 64
    epochs: int = 20
    lr: float = 0.01
    momentum: float = 0.9
    clip: float = 5.0
    batch_size: int = 16
    plateau_tol: float = 1e-3
    token_cap: int = 50_000
    pretrain: bool = False
    pretrain_epochs: int = 2

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected key=value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in kinds:
                raise ValueError(f"line {n}: unknown key {key!r}")
            kind = kinds[key]
            if kind in ("bool", bool):
                values[key] = val.lower() in ("1", "true", "yes", "on")
            elif kind in ("int", int):
                values[key] = int(val)
            else:
                values[key] = float(val)
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


@dataclass
class LabeledSequence:
    """Token sequences of one contract's blocks with 0/1 entry labels."""

    tokens: BlockTokens
    labels: np.ndarray
    id: str = ""

    @classmethod
    def from_truth(cls, gt) -> "LabeledSequence":
        """Label blocks starting internal functions or public bodies."""
        toks = preprocess(decode(gt.bytecode))
        entries = {f.entry for f in gt.of_kind("internal", "public")}
        labels = np.array([int(e in entries) for e in toks.entries], dtype=np.int64)
        return cls(toks, labels, gt.id)

    def truncated(self, cap: int) -> "LabeledSequence":
        spans = self.tokens.spans
        if not len(spans) or spans[-1, 1] <= cap:
            return self
        k = max(1, int(np.searchsorted(spans[:, 1], cap, side="right")))
        end = int(spans[k - 1, 1])
        toks = BlockTokens(self.tokens.blocks[:k], self.tokens.ids[:end], spans[:k])
        return LabeledSequence(toks, self.labels[:k], self.id)


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[float]
    config: TrainConfig


def _batches(seqs: list[LabeledSequence], size: int, rng: np.random.Generator) -> list[list[int]]:
    """Length-bucketed batches in a seeded random order."""
    order = sorted(range(len(seqs)), key=lambda i: (len(seqs[i].tokens.ids), i))
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    perm = rng.permutation(len(chunks))
    return [chunks[i] for i in perm]


def make_batch(seqs: list[LabeledSequence]) -> Batch:
    for s in seqs:
        if not len(s.tokens):
            raise EmptyContract(f"contract {s.id!r} has no blocks")
    return Batch.build([(s.tokens.ids, s.tokens.spans) for s in seqs], PAD_ID)


class _Momentum:
    def __init__(self, params: dict[str, np.ndarray], lr: float, momentum: float, clip: float):
        self.lr, self.mu, self.clip = lr, momentum, clip
        self.vel = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> float:
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        scale = self.clip / norm if norm > self.clip else 1.0
        for k in sorted(params):
            v = self.vel[k]
            v *= self.mu
            v -= self.lr * scale * grads[k]
            params[k] += v
        return norm


def _pretrain(params: dict[str, np.ndarray], seqs: list[LabeledSequence], cfg: TrainConfig,
              rng: np.random.Generator) -> list[float]:
    """Next-token prediction with the forward instruction LSTM (updates ``emb`` and ``tok_fw``)."""
    V, H = len(VOCAB), cfg.hidden1
    head = {"W": rng.uniform(-1 / np.sqrt(H), 1 / np.sqrt(H), (H, V)), "b": np.zeros(V)}
    keys = ["emb", "tok_fw.W", "tok_fw.b"]
    opt = _Momentum({**{k: params[k] for k in keys}, **{f"lm.{k}": v for k, v in head.items()}},
                    cfg.lr, cfg.momentum, cfg.clip)
    history = []
    for _ in range(cfg.pretrain_epochs):
        total, count = 0.0, 0
        for idx in _batches(seqs, cfg.batch_size, rng):
            batch = make_batch([seqs[i] for i in idx])
            x = params["emb"][batch.ids]
            hs, cache = lstm_forward(x, params["tok_fw.W"], params["tok_fw.b"])
            B, N = batch.ids.shape
            mask = np.arange(N - 1)[None, :] < (batch.tok_len[:, None] - 1)
            logits = hs[:, :-1] @ head["W"] + head["b"]
            logits -= logits.max(-1, keepdims=True)
            prob = np.exp(logits)
            prob /= prob.sum(-1, keepdims=True)
            target = batch.ids[:, 1:]
            picked = np.take_along_axis(prob, target[..., None], -1)[..., 0]
            n = max(1, int(mask.sum()))
            total += float(-(np.log(picked + 1e-12) * mask).sum())
            count += n
            dlog = prob
            np.put_along_axis(dlog, target[..., None], np.take_along_axis(dlog, target[..., None], -1) - 1.0, -1)
            dlog *= mask[..., None] / n
            grads = {"lm.W": hs[:, :-1].reshape(-1, H).T @ dlog.reshape(-1, V), "lm.b": dlog.sum((0, 1))}
            dhs = np.zeros_like(hs)
            dhs[:, :-1] = dlog @ head["W"].T
            dx, dW, db = lstm_backward(dhs, cache)
            grads["tok_fw.W"], grads["tok_fw.b"] = dW, db
            demb = np.zeros_like(params["emb"])
            np.add.at(demb, batch.ids, dx)
            grads["emb"] = demb
            view = {**{k: params[k] for k in keys}, **{f"lm.{k}": v for k, v in head.items()}}
            opt.step(view, grads)
        history.append(total / max(1, count))
        log.info("pretrain epoch %d: next-token loss %.4f", len(history), history[-1])
    return history


def train(corpus: list[LabeledSequence], config: TrainConfig | None = None) -> TrainResult:
    """Fit the labeler by mini-batch gradient descent on the mean CRF loss."""
    cfg = config or TrainConfig()
    if not corpus:
        raise ValueError("empty training corpus")
    seqs = [s.truncated(cfg.token_cap) for s in corpus]
    rng = np.random.default_rng(cfg.seed)
    params = init_params(len(VOCAB), cfg.emb_dim, cfg.hidden1, cfg.hidden2, cfg.seed)
    if cfg.pretrain:
        _pretrain(params, seqs, cfg, rng)
    opt = _Momentum(params, cfg.lr, cfg.momentum, cfg.clip)
    history: list[float] = []
    best = np.inf
    for epoch in range(cfg.epochs):
        total, n = 0.0, 0
        for idx in _batches(seqs, cfg.batch_size, rng):
            chunk = [seqs[i] for i in idx]
            loss, _, grads = loss_and_grads(params, make_batch(chunk), [s.labels for s in chunk])
            if not np.isfinite(loss):
                raise DivergedTraining(f"loss became {loss} in epoch {epoch + 1}")
            opt.step(params, grads)
            total += loss * len(chunk)
            n += len(chunk)
        epoch_loss = total / n
        history.append(epoch_loss)
        if not all(np.isfinite(v).all() for v in params.values()):
            raise DivergedTraining(f"non-finite parameters after epoch {epoch + 1}")
        if epoch_loss > best * (1 - cfg.plateau_tol):
            opt.lr *= 0.5
        best = min(best, epoch_loss)
        log.info("epoch %d: loss %.4f lr %.5f", epoch + 1, epoch_loss, opt.lr)
    return TrainResult(params, history, cfg)


def program_sequence(program: Program) -> BlockTokens:
    toks = preprocess(program)
    if not len(toks):
        raise EmptyContract("program has no instructions")
    return toks
