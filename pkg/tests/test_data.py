import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigmae import data
from sigmae.vocab import Vocab

SCAN_X = "look right thrice after run left"
SCAN_Z = "I_TURN_LEFT I_RUN I_TURN_RIGHT I_LOOK I_TURN_RIGHT I_LOOK I_TURN_RIGHT I_LOOK"
PCFG_X = "echo  append  append  E18 C13 , L18 M17 , R1 L1 Y1 T18 J18"
PCFG_Z = "E18 C13 L18 M17 R1 L1 Y1 T18 J18 J18"


def test_scan_table_row():
    assert " ".join(data.interpret_scan(SCAN_X)) == SCAN_Z


def test_pcfg_table_row():
    assert " ".join(data.interpret_pcfg(PCFG_X)) == PCFG_Z


@pytest.mark.parametrize(
    "command, actions",
    [
        ("walk", "I_WALK"),
        ("jump left twice", "I_TURN_LEFT I_JUMP I_TURN_LEFT I_JUMP"),
        ("turn right", "I_TURN_RIGHT"),
        ("run opposite left", "I_TURN_LEFT I_TURN_LEFT I_RUN"),
        ("look around right", "I_TURN_RIGHT I_LOOK " * 3 + "I_TURN_RIGHT I_LOOK"),
        ("turn around left twice", " ".join(["I_TURN_LEFT"] * 8)),
        ("walk and jump", "I_WALK I_JUMP"),
        ("walk after jump", "I_JUMP I_WALK"),
    ],
)
def test_scan_semantics(command, actions):
    assert data.interpret_scan(command) == actions.split()


@pytest.mark.parametrize("bad", ["", "fly", "turn", "walk opposite", "walk left left"])
def test_scan_rejects_malformed(bad):
    with pytest.raises(ValueError):
        data.interpret_scan(bad)


@pytest.mark.parametrize(
    "expr, out",
    [
        ("copy A B", "A B"),
        ("reverse A B C", "C B A"),
        ("shift A B C", "B C A"),
        ("echo A B", "A B B"),
        ("repeat A B", "A B A B"),
        ("swap_first_last A B C", "C B A"),
        ("append A , B C", "A B C"),
        ("prepend A , B C", "B C A"),
        ("remove_first A , B C", "B C"),
        ("remove_second A , B C", "A"),
        ("reverse append A B , C", "C B A"),
        ("append reverse A B , C", "B A C"),
    ],
)
def test_pcfg_semantics(expr, out):
    assert data.interpret_pcfg(expr) == out.split()


@pytest.mark.parametrize("bad", ["append A B", "copy", "append A , B , C"])
def test_pcfg_rejects_malformed(bad):
    with pytest.raises(ValueError):
        data.interpret_pcfg(bad)


def test_mini_scan_grammar_is_injective_and_contains_table_row():
    cmds = data.mini_scan_commands()
    assert len({tuple(c) for c in cmds}) == len(cmds)
    outs = {tuple(data.interpret_scan(c)) for c in cmds}
    assert len(outs) == len(cmds)
    assert SCAN_X.split() in cmds


def test_full_scan_grammar_size():
    assert len(data.full_scan_commands()) == 20910


def test_generate_mini_scan():
    corpus = data.generate_mini_scan(500, 7)
    assert len(corpus) == 500
    assert len({tuple(x) for x in corpus.xs}) == 500
    for x, z in corpus.pairs:
        assert data.interpret_scan(x) == z
        assert all(t in corpus.vocab_x for t in x)
        assert all(t in corpus.vocab_z for t in z)
    again = data.generate_mini_scan(500, 7)
    assert again.pairs == corpus.pairs


def test_generate_mini_scan_too_large():
    with pytest.raises(ValueError):
        data.generate_mini_scan(10_000, 0)


def test_generate_mini_pcfg_set():
    corpus = data.generate_mini_pcfg_set(300, depth=2, rng=3)
    assert len({tuple(x) for x in corpus.xs}) == 300
    for x, z in corpus.pairs:
        assert data.interpret_pcfg(x) == z
    assert data.generate_mini_pcfg_set(300, depth=2, rng=3).pairs == corpus.pairs


def test_pcfg_depth_zero_is_plain_strings():
    corpus = data.generate_mini_pcfg_set(20, depth=0, rng=0)
    for x, z in corpus.pairs:
        assert x == z


def test_copy_task():
    corpus = data.generate_copy_task(60, 0, symbols=4, max_len=3)
    assert all(x == z for x, z in corpus.pairs)
    assert corpus.vocab_x == corpus.vocab_z


@pytest.mark.parametrize("eta, sizes", [(1.0, (100, 0, 0)), (0.0, (0, 50, 50)), (0.1, (10, 45, 45))])
def test_split_sizes(eta, sizes):
    corpus = data.generate_mini_scan(100, 0)
    sp = data.split_corpus(corpus, eta, 0)
    assert (len(sp.xz), len(sp.x), len(sp.z)) == sizes


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 200), st.floats(0, 1), st.integers(0, 10))
def test_split_invariants(n, eta, seed):
    corpus = data.ParallelCorpus([([f"x{i}"], [f"z{i}"]) for i in range(n)])
    sp = data.split_corpus(corpus, eta, seed)
    idx = [set(sp.indices[k]) for k in ("xz", "x", "z")]
    assert not (idx[0] & idx[1]) and not (idx[0] & idx[2]) and not (idx[1] & idx[2])
    assert sum(map(len, idx)) == n
    assert eta - 1 / n <= sp.eta <= eta + 1 / n
    # unparallel halves carry only their own side
    assert all(x[0].startswith("x") for x in sp.x) and all(z[0].startswith("z") for z in sp.z)


def test_split_errors():
    corpus = data.ParallelCorpus([(["a"], ["b"])] * 5)
    with pytest.raises(ValueError):
        data.split_corpus(corpus, 1.5)
    with pytest.raises(ValueError):
        data.split_corpus(data.ParallelCorpus([(["a"], ["b"])] * 2), 0.5)


def test_corpus_files_round_trip(tmp_path):
    corpus = data.generate_mini_scan(50, 1)
    sp = data.split_corpus(corpus, 0.2, 1)
    written = data.write_corpus_dir(tmp_path, corpus, {"corpus": corpus.pairs, "train_x": sp.x, "train_z": sp.z})
    assert data.read_parallel(written["corpus"]) == corpus.pairs
    assert data.read_single(written["train_x"]) == sp.x
    lines = written["vocab_x"].read_text().splitlines()
    assert lines[:3] == ["<pad>", "<bos>", "<eos>"]
    assert Vocab.load(written["vocab_x"]) == corpus.vocab_x
    assert Vocab.load(written["vocab_z"]) == corpus.vocab_z
    first = written["corpus"].read_text().splitlines()[0]
    assert first.count("\t") == 1


def test_vocab_rejects_unreserved_file(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("a\nb\nc\n")
    with pytest.raises(ValueError):
        Vocab.load(p)
