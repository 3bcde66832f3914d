import json
import subprocess
import sys

import pytest

from evmfuncs.cli import main
from evmfuncs.corpus import load

import fixtures


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    assert main(["gen-corpus", "--seed", "4", "--count", "12", "--style", "dedup", "--out", str(root)]) == 0
    return root


@pytest.fixture(scope="module")
def model(corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "m.npz"
    cfg = path.with_suffix(".cfg")
    cfg.write_text("emb_dim=8\nhidden1=8\nhidden2=8\nepochs=2\nbatch_size=4\n")
    assert main(["train", "--corpus", str(corpus), "--model", str(path), "--config", str(cfg)]) == 0
    return path


def _hexfile(tmp_path, text, name="c.hex"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_disasm_listing(tmp_path, capsys):
    program, _ = fixtures.selector_dispatcher()
    assert main(["disasm", _hexfile(tmp_path, program.code.hex())]) == 0
    assert "PUSH4 0x3ccfd60b" in capsys.readouterr().out


def test_disasm_writes_json(tmp_path):
    out = tmp_path / "out"
    assert main(["disasm", _hexfile(tmp_path, "6001600201"), "--out", str(out)]) == 0
    rows = json.loads((out / "disasm.json").read_text())
    assert [r["op"] for r in rows] == ["PUSH1", "PUSH1", "ADD"]


@pytest.mark.parametrize("command", ["disasm", "segment", "entries", "boundaries", "cfg", "callgraph", "baseline"])
@pytest.mark.parametrize("text", ["0xzz", "abc", ""])
def test_bad_or_empty_input_never_crashes(tmp_path, capsys, command, text):
    argv = [command, _hexfile(tmp_path, text)]
    if command in ("entries", "boundaries", "cfg", "callgraph"):
        argv += ["--oracle-entries", "0x10"]
    code = main(argv)
    if text == "":
        assert code == 0
    else:
        assert code == 3 and _error(capsys)["error"] == "MalformedHex"


@pytest.mark.parametrize("command", ["disasm", "segment", "boundaries", "cfg", "callgraph", "baseline"])
def test_truncated_push(tmp_path, capsys, command):
    argv = [command, _hexfile(tmp_path, "5b600156" + "7f0102")]
    if command in ("boundaries", "cfg", "callgraph"):
        argv += ["--oracle-entries", "0"]
    assert main(argv) == 0


def test_missing_file_and_model(tmp_path, capsys):
    assert main(["disasm", str(tmp_path / "nope.hex")]) == 3
    assert _error(capsys)["error"] == "InputError"
    assert main(["boundaries", _hexfile(tmp_path, "00")]) == 2
    assert _error(capsys)["error"] == "MissingModel"
    assert main(["boundaries", _hexfile(tmp_path, "00"), "--model", str(tmp_path / "none.npz")]) == 3
    assert _error(capsys)["error"] == "ModelFileError"


def test_bad_config_is_reported(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rho0 = 2\n")
    assert main(["boundaries", _hexfile(tmp_path, "00"), "--oracle-entries", "0", "--config", str(cfg)]) == 2
    assert _error(capsys)["error"] == "InvalidConfig"
    cfg.write_text("colour = blue\n")
    assert main(["boundaries", _hexfile(tmp_path, "00"), "--oracle-entries", "0", "--config", str(cfg)]) == 2


def test_boundaries_with_oracle_entries(tmp_path):
    program, _ = fixtures.missing_call()
    out = tmp_path / "b"
    argv = ["boundaries", _hexfile(tmp_path, program.code.hex()), "--oracle-entries", "0x2a,0x5a", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads((out / "boundaries.json").read_text())
    assert sorted(int(f["entry"], 16) for f in doc["functions"]) == [0, 0x2A, 0x5A]


def test_graph_outputs(tmp_path, corpus):
    gt = load(corpus)[0]
    internal = ",".join(str(e) for e in sorted(gt.internal_entries)) or "0"
    hexfile = _hexfile(tmp_path, gt.bytecode)
    for command, fmt, name in (("cfg", "dot", "cfg.dot"), ("callgraph", "json", "callgraph.json")):
        out = tmp_path / command
        assert main([command, hexfile, "--oracle-entries", internal, "--format", fmt, "--out", str(out)]) == 0
        assert (out / name).stat().st_size > 0
    cg = json.loads((tmp_path / "callgraph" / "callgraph.json").read_text())
    assert {"id": "dispatcher"} in cg["nodes"]


def test_corpus_split(corpus):
    manifest = json.loads((corpus / "manifest.json").read_text())
    assert {r["split"] for r in manifest["contracts"]} == {"train", "test"}
    assert len(load(corpus, "train")) == 6


def test_entries_with_model_and_abi(tmp_path, model, capsys):
    program, _ = fixtures.selector_dispatcher()
    abi = tmp_path / "abi.json"
    abi.write_text(json.dumps([{"type": "function", "name": "withdraw", "inputs": []}]))
    argv = ["entries", _hexfile(tmp_path, program.code.hex()), "--model", str(model), "--abi", str(abi),
            "--threshold", "0.3"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    names = {p["selector"]: p.get("name") for p in doc["public"]}
    assert names["0x3ccfd60b"] == "withdraw()"
    assert doc["threshold"] == 0.3


def test_eval_outputs(tmp_path, corpus, model):
    out = tmp_path / "eval"
    assert main(["eval", "--corpus", str(corpus), "--model", str(model), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    acc = rep["accounting"]
    assert acc["total"] == 6 == acc["analyzed"] + acc["timeouts"] + acc["fatal"]
    assert (out / "timings.csv").read_text().startswith("id,status,seconds")
    assert "entry" in (out / "report.txt").read_text()


def test_eval_oracle_is_exact(tmp_path, corpus):
    out = tmp_path / "oracle"
    assert main(["eval", "--corpus", str(corpus), "--oracle", "--aggregation", "macro", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["micro"]["boundary"]["f1"] == 1.0


def test_baseline_over_corpus(tmp_path, corpus):
    out = tmp_path / "bl"
    assert main(["baseline", "--corpus", str(corpus), "--out", str(out)]) == 0
    doc = json.loads((out / "baseline.json").read_text())
    assert doc["contracts"] == 12


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "evmfuncs.cli", "disasm", _hexfile(tmp_path, "0x6001")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "PUSH1 0x01" in proc.stdout
