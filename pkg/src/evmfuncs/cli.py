"""Command-line interface: ``evmfuncs <command> ...``.

Every command writes machine-readable output under ``--out`` (when given) and
exits 0 on success. Failures print a JSON error object on stderr and exit
with a nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import graphs, metrics
from .boundary import BoundaryConfig
from .corpus import truth
from .corpus.generate import generate_corpus
from .disasm import MalformedHex, Program, decode
from .dispatcher import match_abi, public_entries
from .segment import ControlFlow, reachable_blocks

EXIT_USAGE, EXIT_INPUT, EXIT_FAILURE = 2, 3, 1


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE, kind: str = "Error"):
        super().__init__(message)
        self.code = code
        self.kind = kind


@dataclass
class RunConfig:
    rho0: float = 0.5
    delta: float = 0.1
    rho_min: float = 0.1
    max_lowerings: int = 5
    max_states: int = 100_000
    timeout_secs: float = 60.0
    max_ctx_depth: int = 16
    path_cap: int = 10_000
    token_cap: int = 50_000
    seed: int = 0
    jobs: int = 1
    aggregation: str = "micro"

    def validate(self) -> None:
        if min(self.max_states, self.timeout_secs, self.path_cap, self.token_cap, self.jobs) <= 0:
            raise CliError("budgets and --jobs must be positive", EXIT_USAGE, "InvalidConfig")
        for name in ("rho0", "rho_min"):
            if not 0 < getattr(self, name) <= 1:
                raise CliError(f"{name} must lie in (0, 1]", EXIT_USAGE, "InvalidConfig")
        if self.aggregation not in ("micro", "macro"):
            raise CliError("aggregation must be micro or macro", EXIT_USAGE, "InvalidConfig")

    def boundary(self) -> BoundaryConfig:
        return BoundaryConfig(
            rho0=self.rho0, delta=self.delta, rho_min=self.rho_min, max_lowerings=self.max_lowerings,
            max_states=self.max_states, timeout_secs=self.timeout_secs, max_ctx_depth=self.max_ctx_depth,
        )


def _parse_kv(path: str) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_INPUT, "ConfigError") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value", EXIT_INPUT, "ConfigError")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def run_config(args) -> RunConfig:
    cfg = RunConfig()
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    if getattr(args, "config", None) and args.command != "train":
        for k, v in _parse_kv(args.config).items():
            if k not in types:
                raise CliError(f"unknown config key {k!r}", EXIT_USAGE, "ConfigError")
            setattr(cfg, k, types[k](v))
    overrides = {
        "threshold": "rho0", "timeout_secs": "timeout_secs", "jobs": "jobs",
        "max_states": "max_states", "path_cap": "path_cap", "seed": "seed", "aggregation": "aggregation",
    }
    for flag, key in overrides.items():
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, key, types[key](val))
    cfg.validate()
    return cfg


def _read_program(src: str) -> Program:
    try:
        text = sys.stdin.read() if src == "-" else Path(src).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {src}: {exc}", EXIT_INPUT, "InputError") from exc
    try:
        return decode("".join(text.split()))
    except MalformedHex as exc:
        raise CliError(str(exc), EXIT_INPUT, "MalformedHex") from exc


def _parse_offsets(text: str) -> list[int]:
    path = Path(text)
    if path.exists():
        text = path.read_text()
        try:
            doc = json.loads(text)
            if isinstance(doc, list):
                return [int(str(v), 0) for v in doc]
        except json.JSONDecodeError:
            pass
    try:
        return [int(tok, 0) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise CliError(f"bad offset list: {exc}", EXIT_USAGE, "InvalidArgument") from exc


def _out_dir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        (out / name).write_text(text if text.endswith("\n") else text + "\n")


def _load_params(args):
    if not getattr(args, "model", None):
        return None
    from .model.store import ModelFileError, load_model

    try:
        params, _ = load_model(args.model)
    except ModelFileError as exc:
        raise CliError(str(exc), EXIT_INPUT, "ModelFileError") from exc
    return params


def _analysis(args, program: Program):
    from .pipeline import analyze

    cfg = run_config(args)
    oracle = _parse_offsets(args.oracle_entries) if getattr(args, "oracle_entries", None) else None
    params = _load_params(args)
    if params is None and oracle is None:
        raise CliError("a --model file or an --oracle-entries list is required", EXIT_USAGE, "MissingModel")
    return analyze(program, params, oracle, cfg.boundary(), cfg.token_cap), cfg


# -- commands ------------------------------------------------------------------

def cmd_disasm(args) -> None:
    program = _read_program(args.input)
    out = _out_dir(args)
    _write(out, "disasm.txt", program.listing())
    if out is not None:
        rows = [
            {"offset": i.offset, "op": i.name, "operand": None if i.operand is None else hex(i.operand),
             "truncated": i.truncated}
            for i in program.instructions
        ]
        _write(out, "disasm.json", json.dumps(rows))


def cmd_segment(args) -> None:
    program = _read_program(args.input)
    cf = ControlFlow(program)
    lines = ["# basic blocks"]
    for b in cf.blocks:
        kind = cf.jump_kinds.get(b.last.offset)
        extra = ""
        if kind is not None:
            extra = f" {kind.kind}" + (f" -> 0x{kind.target:x}" if kind.target is not None else "")
        lines.append(f"0x{b.entry:04x}..0x{b.last.offset:04x} {b.terminator}{extra}")
    lines.append("# reachable blocks")
    for rb in reachable_blocks(program):
        flag = "" if rb.reachable else " (unreachable)"
        lines.append(f"0x{rb.entry:04x} {len(rb.instructions)} instructions{flag}")
    _write(_out_dir(args), "segments.txt", "\n".join(lines))


def cmd_entries(args) -> None:
    program = _read_program(args.input)
    cfg = run_config(args)
    dispatch = public_entries(program)
    names = {}
    if args.abi:
        try:
            names = match_abi(dispatch, Path(args.abi).read_text()).names
        except (OSError, ValueError) as exc:
            raise CliError(str(exc), EXIT_INPUT, "MalformedAbi") from exc
    doc = {"public": dispatch.to_json(names), "diagnostics": dispatch.diagnostics}
    if getattr(args, "oracle_entries", None):
        doc["internal"] = [{"entry": e, "probability": 1.0} for e in _parse_offsets(args.oracle_entries)]
    else:
        params = _load_params(args)
        if params is None:
            raise CliError("entries requires --model or --oracle-entries", EXIT_USAGE, "MissingModel")
        from .model.predict import predict

        preds = predict(params, program, cfg.rho0, dispatch.interface_entries, cfg.token_cap) if program.instructions else {}
        doc["threshold"] = cfg.rho0
        doc["internal"] = [{"entry": e, "probability": p} for e, p in sorted(preds.items())]
    _write(_out_dir(args), "entries.json", json.dumps(doc, indent=1))


def cmd_boundaries(args) -> None:
    program = _read_program(args.input)
    an, _ = _analysis(args, program)
    res = an.result
    doc = {
        "functions": [r.to_json() for r in res.records],
        "threshold": res.rho,
        "lowerings": res.lowerings,
        "blacklist": sorted(res.blacklist),
        "dropped": sorted(res.dropped),
        "signals": [{"kind": s.kind, "pc": s.pc, "entry": s.entry} for s in res.signals],
        "diagnostics": res.diagnostics,
        "partial": res.partial,
    }
    _write(_out_dir(args), "boundaries.json", json.dumps(doc, indent=1))


def cmd_cfg(args) -> None:
    program = _read_program(args.input)
    an, _ = _analysis(args, program)
    cf = ControlFlow(program)
    funcs = an.result.functions()
    entries = {r.entry for r in funcs}
    cfgs = [graphs.intra_cfg(program, r, entries, cf) for r in funcs]
    if args.format == "dot":
        _write(_out_dir(args), "cfg.dot", "\n".join(c.to_dot() for c in cfgs))
    else:
        _write(_out_dir(args), "cfg.json", json.dumps([c.to_json() for c in cfgs], indent=1))


def cmd_callgraph(args) -> None:
    program = _read_program(args.input)
    an, _ = _analysis(args, program)
    cg = graphs.call_graph_from_records(an.result.records, an.dispatch)
    if args.format == "dot":
        _write(_out_dir(args), "callgraph.dot", cg.to_dot())
    else:
        _write(_out_dir(args), "callgraph.json", json.dumps(cg.to_json(), indent=1))


def cmd_gen_corpus(args) -> None:
    if args.count < 0:
        raise CliError("--count must be non-negative", EXIT_USAGE, "InvalidArgument")
    if not 0 < args.split < 1:
        raise CliError("--split must lie in (0, 1)", EXIT_USAGE, "InvalidArgument")
    contracts = generate_corpus(args.seed, args.count, args.style)
    splits = {}
    if len(contracts) >= 2:
        train_part, test_part = truth.split(contracts, args.split, args.seed)
        splits = {c.id: "train" for c in train_part} | {c.id: "test" for c in test_part}
    out = Path(args.out)
    truth.save(contracts, out, splits)
    print(json.dumps({"corpus": str(out), "contracts": len(contracts),
                      "train": sum(v == "train" for v in splits.values()),
                      "test": sum(v == "test" for v in splits.values())}))


def _load_corpus(args, split: str | None):
    try:
        return truth.load(args.corpus, split)
    except truth.MalformedGroundTruth as exc:
        raise CliError(str(exc), EXIT_INPUT, "MalformedGroundTruth") from exc


def cmd_train(args) -> None:
    from .model.store import save_model
    from .model.train import DivergedTraining, LabeledSequence, TrainConfig, train

    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.seed is not None:
        cfg.seed = args.seed
    contracts = _load_corpus(args, args.split)
    if not contracts:
        raise CliError("no training contracts found", EXIT_INPUT, "EmptyCorpus")
    try:
        result = train([LabeledSequence.from_truth(c) for c in contracts], cfg)
    except DivergedTraining as exc:
        raise CliError(str(exc), EXIT_FAILURE, "DivergedTraining") from exc
    save_model(args.model, result.params, asdict(cfg), result.history)
    print(json.dumps({"model": args.model, "contracts": len(contracts), "history": result.history}))


def cmd_eval(args) -> None:
    from .pipeline import EvalSettings, evaluate, report, timings_rows

    cfg = run_config(args)
    params = _load_params(args)
    if params is None and not args.oracle:
        raise CliError("eval requires --model or --oracle", EXIT_USAGE, "MissingModel")
    contracts = _load_corpus(args, args.split)
    if not contracts and args.split:
        contracts = _load_corpus(args, None)
    settings = EvalSettings(cfg.boundary(), args.oracle, cfg.path_cap, cfg.token_cap)
    outcomes = evaluate(contracts, params, settings, cfg.jobs)
    rep = report(outcomes)
    rep["aggregation"] = cfg.aggregation
    rep["config"] = asdict(cfg)
    out = _out_dir(args) or Path(".")
    (out / "report.json").write_text(json.dumps(rep, indent=1))
    (out / "timings.csv").write_text(metrics.per_contract_csv(timings_rows(outcomes)))
    rows = {k: metrics.Rates(v["precision"], v["recall"], v["f1"]) for k, v in rep[cfg.aggregation].items()}
    text = metrics.table(rows) if rows else "no contracts"
    (out / "report.txt").write_text(text + "\n")
    print(text)
    print(json.dumps(rep["accounting"]))


def cmd_baseline(args) -> None:
    from .model.baseline import baseline_entries

    if args.corpus:
        contracts = _load_corpus(args, args.split)
        scores = []
        for gt in contracts:
            program = decode(gt.bytecode)
            d = public_entries(program)
            pred = baseline_entries(program) - d.interface_entries - d.body_entries
            scores.append(metrics.entry_score(pred, gt.internal_entries))
        agg = metrics.aggregate(scores, "micro") if scores else metrics.Score()
        _write(_out_dir(args), "baseline.json", json.dumps({"contracts": len(scores), "entry": agg.to_json()}, indent=1))
        return
    if not args.input:
        raise CliError("baseline needs an input file or --corpus", EXIT_USAGE, "InvalidArgument")
    program = _read_program(args.input)
    d = public_entries(program)
    found = sorted(baseline_entries(program) - d.interface_entries - d.body_entries)
    _write(_out_dir(args), "baseline.json", json.dumps({"entries": found}, indent=1))


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evmfuncs", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=False):
        sp.add_argument("--out", help="output directory (default: stdout)")
        sp.add_argument("--config", help="key=value configuration file")
        if model:
            sp.add_argument("--model", help="trained model file")
            sp.add_argument("--oracle-entries", help="explicit internal entries (comma list or file)")
            sp.add_argument("--threshold", type=float, help="initial entry threshold rho")
            sp.add_argument("--timeout-secs", type=float)
            sp.add_argument("--max-states", type=int)

    for name, fn in (("disasm", cmd_disasm), ("segment", cmd_segment)):
        sp = sub.add_parser(name)
        sp.add_argument("input", help="hex file or - for stdin")
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("entries")
    sp.add_argument("input")
    sp.add_argument("--abi", help="contract ABI JSON for naming selectors")
    common(sp, model=True)
    sp.set_defaults(func=cmd_entries)

    sp = sub.add_parser("boundaries")
    sp.add_argument("input")
    common(sp, model=True)
    sp.set_defaults(func=cmd_boundaries)

    for name, fn in (("cfg", cmd_cfg), ("callgraph", cmd_callgraph)):
        sp = sub.add_parser(name)
        sp.add_argument("input")
        sp.add_argument("--format", choices=("json", "dot"), default="json")
        common(sp, model=True)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("gen-corpus")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--style", choices=("plain", "dedup"), default="plain")
    sp.add_argument("--split", type=float, default=0.5, help="training fraction")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("train")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="train")
    sp.add_argument("--model", required=True, help="output model file")
    sp.add_argument("--config", help="training key=value file")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--oracle", action="store_true", help="use ground-truth internal entries")
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--aggregation", choices=("micro", "macro"))
    sp.add_argument("--path-cap", type=int)
    common(sp, model=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("baseline")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--corpus")
    sp.add_argument("--split", default=None)
    common(sp)
    sp.set_defaults(func=cmd_baseline)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": exc.kind, "message": str(exc)}) + "\n")
        return exc.code
    except (ValueError, KeyError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
