import pytest
from hypothesis import given, strategies as st

from utdmt.model1 import NULL, ParallelPair, TranslationTable, train
from utdmt.translate import (
    Prediction, load_predictions, save_predictions, topk, translate_lines, translate_utterance,
)

TABLE = TranslationTable({"c1": {"car": 0.7, "ball": 0.3}, "c2": {"a": 0.5, "b": 0.5},
                          NULL: {"car": 0.5, "a": 0.5}})


def test_topk_argmax_and_exhaustion():
    assert topk(TABLE, "c1", 1) == ["car"]
    assert topk(TABLE, "c1", 5) == ["car", "ball"]


def test_topk_lexicographic_tie():
    assert topk(TABLE, "c2", 1) == ["a"]


def test_null_never_translated():
    assert topk(TABLE, NULL, 3) == []
    assert translate_utterance(TABLE, [NULL], 1).words == ()


def test_translation_of_consistent_pair():
    pairs = [ParallelPair(["c1"], ["yes", "well", "car"]), ParallelPair(["c1", "c2"], ["know", "work"]),
             ParallelPair(["c2"], ["work"]), ParallelPair(["c2"], ["work"])]
    assert translate_utterance(train(pairs), ["c2"], 1).words == ("work",)


def test_empty_line_and_oov():
    assert translate_utterance(TABLE, [], 1) == Prediction("", 1, (), ())
    p = translate_utterance(TABLE, ["c9"], 1, "u")
    assert p.words == () and p.oov_terms == ("c9",)


@given(st.lists(st.sampled_from(["c1", "c2", "c9"]), max_size=6), st.integers(1, 4))
def test_size_bound_and_repetition(line, K):
    p = translate_utterance(TABLE, line, K)
    assert len(p.words) <= K * len(line)
    doubled = translate_utterance(TABLE, line + line, K)
    assert sorted(doubled.words) == sorted(p.words * 2)


def test_invalid_k():
    with pytest.raises(ValueError):
        translate_utterance(TABLE, ["c1"], 0)


def test_predictions_round_trip(tmp_path):
    preds = translate_lines(TABLE, {"u1": ["c1", "c9"], "u2": []}, ["u1", "u2"], 2)
    save_predictions(preds, tmp_path / "p.jsonl")
    first = (tmp_path / "p.jsonl").read_text().splitlines()[0]
    assert first == '{"utterance_id": "u1", "K": 2, "words": ["car", "ball"], "oov": ["c9"]}'
    assert load_predictions(tmp_path / "p.jsonl") == preds
