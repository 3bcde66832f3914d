import json

import numpy as np
import pytest

from evmfuncs.corpus import generate_corpus
from evmfuncs.disasm import decode
from evmfuncs.model import (
    EmptyContract, LabeledSequence, ModelFileError, TrainConfig, baseline_entries, load_model,
    predict, predict_all, preprocess, probabilities, save_model, train,
)
from evmfuncs.model.predict import _windows
from evmfuncs.model.tokens import INDEX, PAD_ID, UNK_ID, VOCAB, can_be_entry, token
from evmfuncs.model.train import make_batch

import fixtures

SMALL = TrainConfig(seed=5, emb_dim=8, hidden1=8, hidden2=8, epochs=3, batch_size=4)


@pytest.fixture(scope="module")
def corpus():
    return [LabeledSequence.from_truth(g) for g in generate_corpus(17, 8, "plain")]


@pytest.fixture(scope="module")
def trained(corpus):
    return train(corpus, SMALL)


def test_push_to_jumpdest_gets_its_own_token():
    program = decode("61000456" + "5b" + "6104005600")
    jd = program.jumpdests
    assert token(program.instructions[0], jd) == "PUSH2_DEST"
    assert token(program.instructions[3], jd) == "PUSH2"
    assert len(set(VOCAB)) == len(VOCAB)
    assert INDEX["<pad>"] == PAD_ID != UNK_ID


def test_preprocess_spans_tile_tokens():
    program = decode(generate_corpus(2, 1)[0].bytecode)
    toks = preprocess(program)
    assert toks.spans[0, 0] == 0 and toks.spans[-1, 1] == len(toks.ids) == len(program.instructions)
    assert (toks.spans[1:, 0] == toks.spans[:-1, 1]).all()
    assert all(can_be_entry(b) == (b.entry == 0 or b.instructions[0].name == "JUMPDEST") for b in toks.blocks)


def test_labels_mark_function_entries(corpus):
    gt = generate_corpus(17, 1, "plain")[0]
    seq = corpus[0]
    labelled = {e for e, y in zip(seq.tokens.entries, seq.labels) if y}
    assert labelled == gt.internal_entries | gt.body_entries


def test_truncation_keeps_whole_blocks(corpus):
    seq = corpus[0]
    cut = seq.truncated(40)
    assert cut.tokens.spans[-1, 1] <= 40 or len(cut.tokens) == 1
    assert len(cut.labels) == len(cut.tokens)


def test_windows_overlap_by_one_block():
    spans = np.array([[0, 3], [3, 5], [5, 9], [9, 10], [10, 14]])
    wins = _windows(spans, 6)
    assert wins[0][0] == 0 and wins[-1][1] == len(spans)
    for (a0, a1), (b0, b1) in zip(wins, wins[1:]):
        assert b0 == a1 - 1 or b0 == a0 + 1


def test_training_is_deterministic(corpus, trained):
    again = train(corpus, SMALL)
    assert again.history == trained.history
    for k in trained.params:
        np.testing.assert_array_equal(again.params[k], trained.params[k])
    assert len(trained.history) == SMALL.epochs
    assert trained.history[-1] < trained.history[0]


def test_pretraining_option_runs(corpus):
    cfg = TrainConfig(**{**vars(SMALL), "epochs": 1, "pretrain": True, "pretrain_epochs": 1})
    assert len(train(corpus[:3], cfg).history) == 1


def test_empty_contract_is_rejected():
    seq = LabeledSequence.from_truth(generate_corpus(1, 1)[0])
    empty = LabeledSequence(preprocess(decode("")), np.zeros(0, dtype=np.int64), "empty")
    with pytest.raises(EmptyContract):
        make_batch([seq, empty])


def test_config_text_round_trip(tmp_path):
    text = SMALL.to_text()
    assert TrainConfig.from_text(text) == SMALL
    (tmp_path / "t.cfg").write_text("epochs = 7  # short run\npretrain=true\n")
    cfg = TrainConfig.from_file(tmp_path / "t.cfg")
    assert cfg.epochs == 7 and cfg.pretrain is True
    with pytest.raises(ValueError):
        TrainConfig.from_text("depth=3")


def test_model_file_round_trip(tmp_path, trained):
    path = save_model(tmp_path / "m.npz", trained.params, vars(trained.config), trained.history)
    params, header = load_model(path)
    assert header["dims"] == {"emb": 8, "hidden1": 8, "hidden2": 8}
    for k in trained.params:
        np.testing.assert_array_equal(params[k], trained.params[k])


def test_model_file_mismatch_fails(tmp_path, trained):
    path = tmp_path / "m.npz"
    save_model(path, trained.params)
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    header = json.loads(str(arrays["header"]))
    header["vocab_hash"] = "0" * 16
    arrays["header"] = np.array(json.dumps(header))
    np.savez(tmp_path / "bad.npz", **arrays)
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "bad.npz")
    (tmp_path / "junk.npz").write_bytes(b"not a model")
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "junk.npz")


def test_prediction_covers_candidate_blocks(trained):
    program = decode(generate_corpus(40, 1)[0].bytecode)
    probs = probabilities(trained.params, program)
    blocks = [b for b in preprocess(program).blocks if b.reachable and can_be_entry(b)]
    assert set(probs) == {b.entry for b in blocks}
    assert all(0.0 <= p <= 1.0 for p in probs.values())
    picked = predict(trained.params, program, 0.5, exclude={0})
    assert 0 not in picked and all(p >= 0.5 for p in picked.values())
    # sliding windows cover every block
    windowed = predict_all(trained.params, program, token_cap=64)
    assert [e.entry for e in windowed] == sorted(probs)


def test_baseline_on_call_shapes():
    program, labels = fixtures.call_pattern()
    assert baseline_entries(program) == {labels["foo"]}
    program, labels = fixtures.split_call_pattern()
    assert labels["foo"] not in baseline_entries(program)
