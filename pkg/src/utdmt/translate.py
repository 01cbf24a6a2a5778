"""Bag-of-words translation: K best target words per in-vocabulary pseudoterm."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .model1 import NULL, TranslationTable


@dataclass(frozen=True)
class Prediction:
    utterance_id: str
    K: int
    words: tuple[str, ...]
    oov_terms: tuple[str, ...]

    def to_record(self) -> dict:
        return {"utterance_id": self.utterance_id, "K": self.K,
                "words": list(self.words), "oov": list(self.oov_terms)}


def topk(table: TranslationTable, f: str, K: int) -> list[str]:
    if K < 1:
        raise ValueError("K must be >= 1")
    row = table.t.get(f)
    if not row or f == NULL:
        return []
    return sorted(row, key=lambda e: (-row[e], e))[:K]


def translate_utterance(table: TranslationTable, line: Iterable[str], K: int,
                        utterance_id: str = "") -> Prediction:
    """Each token contributes its own K guesses; unknown types are reported as OOV."""
    if K < 1:
        raise ValueError("K must be >= 1")
    words, oov = [], []
    for f in line:
        if f == NULL:
            continue
        if f not in table.t:
            oov.append(f)
            continue
        words.extend(topk(table, f, K))
    return Prediction(utterance_id, K, tuple(words), tuple(oov))


def translate_lines(table: TranslationTable, lines: dict[str, list[str]], ids, K: int) -> list[Prediction]:
    return [translate_utterance(table, lines[u], K, u) for u in ids]


def save_predictions(preds: Iterable[Prediction], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in preds:
            f.write(json.dumps(p.to_record(), ensure_ascii=False) + "\n")


def load_predictions(path) -> list[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                preds.append(Prediction(rec["utterance_id"], int(rec["K"]),
                                        tuple(rec["words"]), tuple(rec["oov"])))
    return preds
