"""Model files: a numpy ``.npz`` container with a JSON header."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tokens import VOCAB, vocab_hash

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def save_model(path: str | Path, params: dict[str, np.ndarray], config: dict | None = None,
               history: list[float] | None = None) -> Path:
    path = Path(path)
    header = {
        "format": FORMAT_VERSION,
        "vocab": list(VOCAB),
        "vocab_hash": vocab_hash(),
        "dims": {
            "emb": int(params["emb"].shape[1]),
            "hidden1": int(params["tok_fw.W"].shape[1] // 4),
            "hidden2": int(params["blk_fw.W"].shape[1] // 4),
        },
        "config": config or {},
        "history": list(history or []),
    }
    arrays = {f"p/{k}": v for k, v in params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)
    return path


def load_model(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            params = {k[2:]: data[k].copy() for k in data.files if k.startswith("p/")}
    except (OSError, KeyError, ValueError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if header.get("format") != FORMAT_VERSION:
        raise ModelFileError(f"model format {header.get('format')!r}, expected {FORMAT_VERSION}")
    if header.get("vocab_hash") != vocab_hash() or tuple(header.get("vocab", ())) != VOCAB:
        raise ModelFileError("model vocabulary does not match this build")
    return params, header
