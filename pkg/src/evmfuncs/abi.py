"""Contract-ABI helpers: canonical signatures and 4-byte selectors."""

from __future__ import annotations

import json
from typing import Any

from Crypto.Hash import keccak


class MalformedAbi(ValueError):
    pass


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


def selector_of(signature: str) -> int:
    return int.from_bytes(keccak256(signature.encode())[:4], "big")


def _canonical_type(param: dict) -> str:
    t = param["type"]
    if t.startswith("tuple"):
        inner = ",".join(_canonical_type(c) for c in param.get("components", []))
        return f"({inner}){t[len('tuple'):]}"
    return t


def signatures(abi: Any) -> list[str]:
    """Canonical ``name(type,...)`` strings for every function entry of an ABI."""
    if isinstance(abi, (str, bytes)):
        try:
            abi = json.loads(abi)
        except json.JSONDecodeError as exc:
            raise MalformedAbi(str(exc)) from exc
    if isinstance(abi, dict) and "abi" in abi:
        abi = abi["abi"]
    if not isinstance(abi, list):
        raise MalformedAbi("ABI must be a JSON list")
    out = []
    for entry in abi:
        if not isinstance(entry, dict):
            raise MalformedAbi(f"ABI entry is not an object: {entry!r}")
        if entry.get("type", "function") != "function":
            continue
        try:
            args = ",".join(_canonical_type(p) for p in entry.get("inputs", []))
            out.append(f"{entry['name']}({args})")
        except (KeyError, TypeError) as exc:
            raise MalformedAbi(f"bad ABI function entry: {entry!r}") from exc
    return out
