import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from evoforge import metrics
from evoforge.metrics import (UNPARSED, accuracy, lcs_length, make_tokenizer, normalized_score,
                              rouge_l, rouge_n, sari, sari_components)

words = st.lists(st.sampled_from(["a", "b", "c", "the", "cat", "sat"]), min_size=0, max_size=8)
text = words.map(" ".join)


def test_accuracy_examples():
    assert accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert accuracy(["a", "b"], ["b", "a"]) == 0.0
    assert accuracy(["x", "y", "z", "w"], ["x", "y", "z", "q"]) == 0.75


def test_accuracy_unparsed_is_wrong():
    assert accuracy([UNPARSED, "a"], [None, "a"]) == 0.5


def test_accuracy_length_mismatch():
    with pytest.raises(ValueError):
        accuracy(["a"], ["a", "b"])


def test_rouge_n_examples():
    assert rouge_n("the cat sat", ["the cat sat"]) == 1.0
    assert rouge_n("the cat", ["the cat sat"], 1) == pytest.approx(0.8)
    assert rouge_n("x y", ["a b"], 2) == 0.0


def test_rouge_n_clipping():
    # "the the the" vs "the cat": one match, not three
    assert rouge_n("the the the", ["the cat"], 1) == pytest.approx(2 * (1 / 3) * 0.5 / (1 / 3 + 0.5))


def test_rouge_n_empty_conventions():
    assert rouge_n("", [""], 1) == 1.0
    assert rouge_n("", ["a"], 1) == 0.0
    assert rouge_n("a", ["b c"], 2) == 0.0


def test_rouge_multi_reference_takes_max():
    assert rouge_n("the cat", ["dog", "the cat"], 1) == 1.0
    assert rouge_l("the cat", ["dog", "the cat"]) == 1.0


def test_rouge_l_examples():
    assert rouge_l("a b c", ["a b c"]) == 1.0
    assert rouge_l("a b c", ["a x c"]) == pytest.approx(2 / 3)
    assert rouge_l("", ["a b"]) == 0.0


def test_lcs_length():
    assert lcs_length("abcbdab", "bdcaba") == 4
    assert lcs_length([], ["a"]) == 0


def test_sari_identity_is_100():
    comp = sari_components("the cat sat", "the cat sat", ["the cat sat"])
    assert comp == {"keep": 1.0, "delete": 1.0, "add": 1.0}
    assert sari("the cat sat", "the cat sat", ["the cat sat"]) == 100.0


def test_sari_reference_beats_copy():
    src, ref = "the feline sat upon the mat", "the cat sat on the mat"
    assert sari(src, ref, [ref]) > sari(src, src, [ref])


def test_sari_unrelated_candidate():
    comp = sari_components("the cat is on the mat", "big red dog ran fast",
                           ["the cat is on a mat today"])
    assert comp["add"] == 0.0
    assert comp["keep"] == 0.0


def test_sari_needs_reference():
    with pytest.raises(ValueError):
        sari("a", "a", [])


def test_normalized_score():
    assert normalized_score(0.75, 0.70) == pytest.approx(5.0)
    assert normalized_score(0.70, 0.70) == 0.0
    assert normalized_score(0.60, 0.70) == pytest.approx(-10.0)
    with pytest.raises(ValueError):
        normalized_score(1.2, 0.5)


def test_tokenizer_punctuation_flag():
    tok = make_tokenizer(strip_punct=True)
    assert tok("Hello, World!") == ["hello", "world"]
    assert metrics.tokenize("Hello, World!") == ["hello,", "world!"]
    assert rouge_n("hello, world", ["hello world"], 1, tok) == 1.0


@pytest.mark.parametrize("triple", oracles.micro_corpus(20, seed=7))
def test_metrics_against_oracles(triple):
    src, cand, refs = triple
    for n in (1, 2):
        assert rouge_n(cand, refs, n) == pytest.approx(oracles.rouge_n(cand, refs, n), abs=1e-12)
    assert rouge_l(cand, refs) == pytest.approx(oracles.rouge_l(cand, refs), abs=1e-12)
    assert sari(src, cand, refs) == pytest.approx(oracles.sari(src, cand, refs), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(src=text, cand=text, refs=st.lists(text, min_size=1, max_size=3))
def test_metric_ranges(src, cand, refs):
    for n in (1, 2, 3):
        assert 0.0 <= rouge_n(cand, refs, n) <= 1.0
    assert 0.0 <= rouge_l(cand, refs) <= 1.0
    assert 0.0 <= sari(src, cand, refs) <= 100.0


@settings(max_examples=200, deadline=None)
@given(a=text, b=text)
def test_rouge_f1_swap_invariant(a, b):
    assert rouge_n(a, [b], 1) == pytest.approx(rouge_n(b, [a], 1))
    assert rouge_l(a, [b]) == pytest.approx(rouge_l(b, [a]))


@settings(max_examples=100, deadline=None)
@given(src=text, cand=text, refs=st.lists(text, min_size=2, max_size=4), data=st.data())
def test_sari_reference_order_invariant(src, cand, refs, data):
    shuffled = data.draw(st.permutations(refs))
    assert sari(src, cand, refs) == pytest.approx(sari(src, cand, shuffled), abs=1e-12)
