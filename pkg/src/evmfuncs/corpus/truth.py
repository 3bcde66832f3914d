"""Ground-truth contract records and their on-disk format.

Layout of a corpus directory::

    manifest.json        {"schema": "1.0", "contracts": [{"id", "provenance", "split"}...]}
    <id>.hex             runtime bytecode
    <id>.gt.json         function labels (see ``GroundTruthContract.to_json``)

The schema is a reconstruction of what an instrumented compiler could export;
offsets are instruction start offsets.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

SCHEMA_VERSION = "1.0"
VISIBILITIES = ("public", "internal", "dispatcher")


class MalformedGroundTruth(ValueError):
    pass


@dataclass
class FunctionLabel:
    name: str
    visibility: str
    entry: int
    bytes: list[int]
    cfg_nodes: list[int] | None = None
    cfg_edges: list[tuple[int, int | str]] | None = None


@dataclass
class GroundTruthContract:
    id: str
    bytecode: str
    functions: list[FunctionLabel]
    abi: list[dict] | None = None
    provenance: dict = field(default_factory=dict)
    dispatch: list[dict] = field(default_factory=list)
    call_sites: list[dict] = field(default_factory=list)

    @property
    def code(self) -> bytes:
        return bytes.fromhex(self.bytecode)

    def of_kind(self, *kinds: str) -> list[FunctionLabel]:
        return [f for f in self.functions if f.visibility in kinds]

    @property
    def internal_entries(self) -> set[int]:
        return {f.entry for f in self.of_kind("internal")}

    @property
    def body_entries(self) -> set[int]:
        return {f.entry for f in self.of_kind("public")}

    def to_json(self) -> dict[str, Any]:
        funcs = []
        for f in self.functions:
            d = {"name": f.name, "visibility": f.visibility, "entry": f.entry, "bytes": f.bytes}
            if f.cfg_nodes is not None:
                d["cfg"] = {"nodes": f.cfg_nodes, "edges": [list(e) for e in f.cfg_edges or []]}
            funcs.append(d)
        return {
            "schema": SCHEMA_VERSION,
            "id": self.id,
            "functions": funcs,
            "abi": self.abi,
            "provenance": self.provenance,
            "dispatch": self.dispatch,
            "call_sites": self.call_sites,
        }

    @classmethod
    def from_json(cls, doc: dict, bytecode: str) -> "GroundTruthContract":
        _check_schema(doc.get("schema"))
        try:
            funcs = []
            for f in doc["functions"]:
                cfg = f.get("cfg")
                funcs.append(
                    FunctionLabel(
                        name=str(f["name"]),
                        visibility=f["visibility"],
                        entry=int(f["entry"]),
                        bytes=[int(b) for b in f["bytes"]],
                        cfg_nodes=cfg["nodes"] if cfg else None,
                        cfg_edges=[tuple(e) for e in cfg["edges"]] if cfg else None,
                    )
                )
            gt = cls(
                id=str(doc["id"]),
                bytecode=bytecode,
                functions=funcs,
                abi=doc.get("abi"),
                provenance=doc.get("provenance") or {},
                dispatch=doc.get("dispatch") or [],
                call_sites=doc.get("call_sites") or [],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedGroundTruth(f"bad ground-truth document: {exc}") from exc
        validate(gt)
        return gt


def _check_schema(version: Any) -> None:
    if not isinstance(version, str) or version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise MalformedGroundTruth(f"unsupported schema version {version!r}")


def validate(gt: GroundTruthContract) -> None:
    try:
        size = len(gt.code)
    except ValueError as exc:
        raise MalformedGroundTruth(f"{gt.id}: bytecode is not hex") from exc
    entries = set()
    for f in gt.functions:
        if f.visibility not in VISIBILITIES:
            raise MalformedGroundTruth(f"{gt.id}: unknown visibility {f.visibility!r}")
        if f.entry in entries:
            raise MalformedGroundTruth(f"{gt.id}: duplicate entry {f.entry}")
        entries.add(f.entry)
        if f.entry not in f.bytes:
            raise MalformedGroundTruth(f"{gt.id}: entry {f.entry} of {f.name} not in its bytes")
        if any(b < 0 or b >= size for b in f.bytes):
            raise MalformedGroundTruth(f"{gt.id}: offset out of range in {f.name}")


def save(contracts: Iterable[GroundTruthContract], root: str | Path, splits: dict[str, str] | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for gt in contracts:
        (root / f"{gt.id}.hex").write_text(gt.bytecode + "\n")
        (root / f"{gt.id}.gt.json").write_text(json.dumps(gt.to_json(), separators=(",", ":")))
        row = {"id": gt.id, "provenance": gt.provenance}
        if splits and gt.id in splits:
            row["split"] = splits[gt.id]
        rows.append(row)
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"schema": SCHEMA_VERSION, "contracts": rows}, indent=1))
    return manifest


def read_manifest(root: str | Path) -> dict:
    path = Path(root) / "manifest.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedGroundTruth(f"cannot read {path}: {exc}") from exc
    _check_schema(doc.get("schema"))
    return doc


def load(root: str | Path, split: str | None = None) -> list[GroundTruthContract]:
    """Load every contract listed in ``root/manifest.json`` (optionally one split)."""
    root = Path(root)
    doc = read_manifest(root)
    seen: set[str] = set()
    out = []
    for row in doc["contracts"]:
        cid = row["id"]
        if cid in seen:
            raise MalformedGroundTruth(f"duplicate contract id {cid!r}")
        seen.add(cid)
        if split is not None and row.get("split") != split:
            continue
        try:
            bytecode = (root / f"{cid}.hex").read_text().strip()
            gt_doc = json.loads((root / f"{cid}.gt.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedGroundTruth(f"{cid}: {exc}") from exc
        if bytecode.startswith("0x"):
            bytecode = bytecode[2:]
        gt = GroundTruthContract.from_json(gt_doc, bytecode)
        if gt.id != cid:
            raise MalformedGroundTruth(f"{cid}: document id {gt.id!r} does not match manifest")
        out.append(gt)
    return out


def split(contracts: list, fraction: float, seed: int) -> tuple[list, list]:
    """Seeded random split; the first part gets ``round(fraction * n)`` contracts."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    ids = [c.id for c in contracts]
    if len(set(ids)) != len(ids):
        raise MalformedGroundTruth("duplicate contract ids")
    order = sorted(range(len(contracts)), key=lambda i: ids[i])
    random.Random(seed).shuffle(order)
    cut = round(fraction * len(contracts))
    first = sorted(order[:cut])
    second = sorted(order[cut:])
    return [contracts[i] for i in first], [contracts[i] for i in second]


def kfold(contracts: list, k: int, seed: int) -> list[list]:
    """Partition into ``k`` disjoint folds whose union is the input."""
    if k < 2:
        raise ValueError("k must be at least 2")
    order = sorted(range(len(contracts)), key=lambda i: contracts[i].id)
    random.Random(seed).shuffle(order)
    return [[contracts[i] for i in sorted(order[j::k])] for j in range(k)]
