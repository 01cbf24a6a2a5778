"""Corpus data model: utterances, manifests, tokenization, stopwords and splits."""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

_EDGE_PUNCT = string.punctuation + "¡¿«»“”‘’…"


class ManifestError(ValueError):
    """Raised when a manifest line cannot be turned into an Utterance."""


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    call_id: str
    speaker_id: str
    audio_ref: str
    duration_s: float
    translation: str
    transcript: str | None = None
    word_alignment: tuple[tuple[str, float, float], ...] | None = None
    audio: str | None = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError(f"{self.utterance_id}: duration_s must be positive")
        if self.word_alignment is not None:
            prev_start = -math.inf
            for word, start, end in self.word_alignment:
                if not 0 <= start < end <= self.duration_s + 1e-9:
                    raise ValueError(
                        f"{self.utterance_id}: bad alignment span for {word!r}: "
                        f"[{start}, {end}) outside [0, {self.duration_s}]"
                    )
                if start < prev_start:
                    raise ValueError(f"{self.utterance_id}: alignment not sorted by start")
                prev_start = start


@dataclass(frozen=True)
class Corpus:
    utterances: tuple[Utterance, ...]
    calls: dict[str, tuple[str, ...]] = field(init=False, compare=False)
    _index: dict[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        index: dict[str, int] = {}
        calls: dict[str, list[str]] = {}
        for i, utt in enumerate(self.utterances):
            if utt.utterance_id in index:
                raise ValueError(f"duplicate utterance_id {utt.utterance_id!r}")
            index[utt.utterance_id] = i
            calls.setdefault(utt.call_id, []).append(utt.utterance_id)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "calls", {c: tuple(ids) for c, ids in calls.items()})

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def __contains__(self, utterance_id):
        return utterance_id in self._index

    def __getitem__(self, utterance_id: str) -> Utterance:
        return self.utterances[self._index[utterance_id]]

    @property
    def ids(self) -> list[str]:
        return [u.utterance_id for u in self.utterances]

    def position(self, utterance_id: str) -> int:
        """Manifest position of an utterance (the corpus order)."""
        return self._index[utterance_id]


def _utterance_from_record(rec: dict, base_dir: Path | None) -> Utterance:
    for key in ("utterance_id", "call_id", "speaker_id", "features", "duration_s", "translation"):
        if key not in rec:
            raise KeyError(f"missing key {key!r}")
    alignment = rec.get("alignment")
    if alignment is not None:
        alignment = tuple((str(w), float(s), float(e)) for w, s, e in alignment)
    features = str(rec["features"])
    audio = rec.get("audio")
    if base_dir is not None:
        if not Path(features).is_absolute():
            features = str(base_dir / features)
        if audio is not None and not Path(audio).is_absolute():
            audio = str(base_dir / audio)
    return Utterance(
        utterance_id=str(rec["utterance_id"]),
        call_id=str(rec["call_id"]),
        speaker_id=str(rec["speaker_id"]),
        audio_ref=features,
        duration_s=float(rec["duration_s"]),
        translation=str(rec["translation"]),
        transcript=rec.get("transcript"),
        word_alignment=alignment,
        audio=audio,
    )


def load_manifest(path: str | Path) -> Corpus:
    """Read a JSON-lines manifest.

    Relative ``features``/``audio`` paths resolve against the manifest's
    directory. Errors carry the 1-based line number.
    """
    path = Path(path)
    utterances = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                utt = _utterance_from_record(rec, path.parent)
            except (ValueError, KeyError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if utt.utterance_id in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate utterance_id {utt.utterance_id!r} "
                    f"(first seen on line {seen[utt.utterance_id]})"
                )
            seen[utt.utterance_id] = lineno
            utterances.append(utt)
    return Corpus(tuple(utterances))


def utterance_record(utt: Utterance, base_dir: Path | None = None) -> dict:
    features = utt.audio_ref
    if base_dir is not None:
        try:
            features = str(Path(features).relative_to(base_dir))
        except ValueError:
            pass
    rec = {
        "utterance_id": utt.utterance_id,
        "call_id": utt.call_id,
        "speaker_id": utt.speaker_id,
        "features": features,
        "duration_s": utt.duration_s,
        "translation": utt.translation,
    }
    if utt.transcript is not None:
        rec["transcript"] = utt.transcript
    if utt.word_alignment is not None:
        rec["alignment"] = [list(a) for a in utt.word_alignment]
    if utt.audio is not None:
        rec["audio"] = utt.audio
    return rec


def save_manifest(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for utt in corpus:
            f.write(json.dumps(utterance_record(utt, path.parent), ensure_ascii=False) + "\n")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation from token edges.

    >>> tokenize("Yes, well and the car.")
    ['yes', 'well', 'and', 'the', 'car']
    """
    tokens = (tok.strip(_EDGE_PUNCT) for tok in text.lower().split())
    return [tok for tok in tokens if tok]


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]

    def __post_init__(self):
        for w in self.words:
            if not w or w != w.lower():
                raise ValueError(f"stopword entries must be nonempty lowercase: {w!r}")

    def __contains__(self, word):
        return word in self.words

    def __len__(self):
        return len(self.words)


def parse_stopwords(lines: Iterable[str]) -> StopwordList:
    words = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(line.lower())
    return StopwordList(frozenset(words))


def load_stopwords(path: str | Path | None = None) -> StopwordList:
    """Load a stopword file; ``None`` gives the bundled 127-word English list."""
    if path is None:
        text = resources.files("utdmt").joinpath("data/stopwords_en.txt").read_text("utf-8")
        return parse_stopwords(text.splitlines())
    with open(path, encoding="utf-8") as f:
        return parse_stopwords(f)


def filter_stopwords(tokens: list[str], stopwords: StopwordList) -> list[str]:
    return [tok for tok in tokens if tok not in stopwords]


@dataclass(frozen=True)
class Split:
    mode: str
    train_ids: frozenset[str]
    test_ids: frozenset[str]
    ratio: float
    seed: int

    def to_json(self, corpus: Corpus | None = None) -> str:
        if corpus is not None:
            order = corpus.position
            train = sorted(self.train_ids, key=order)
            test = sorted(self.test_ids, key=order)
        else:
            train, test = sorted(self.train_ids), sorted(self.test_ids)
        doc = {"mode": self.mode, "ratio": self.ratio, "seed": self.seed,
               "train": train, "test": test}
        return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def save_split(split: Split, path: str | Path, corpus: Corpus | None = None) -> None:
    Path(path).write_text(split.to_json(corpus), encoding="utf-8")


def load_split(path: str | Path) -> Split:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    train, test = frozenset(doc["train"]), frozenset(doc["test"])
    if train & test:
        raise ValueError(f"{path}: train and test overlap")
    return Split(doc["mode"], train, test, float(doc["ratio"]), int(doc["seed"]))


def split_corpus(corpus: Corpus, mode: str, ratio: float, seed: int) -> Split:
    """Deterministic train/test split at utterance or call level.

    Utterance mode puts exactly round(ratio * N) shuffled utterances in train.
    Call mode shuffles calls and moves them whole into train until the train
    utterance count first reaches ceil(ratio * N); at least one call is
    always kept for each side.
    """
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    ids = corpus.ids
    n = len(ids)

    if mode == "utterance":
        order = rng.permutation(n)
        n_train = math.floor(ratio * n + 0.5)
        train = frozenset(ids[i] for i in order[:n_train])
    elif mode == "call":
        call_ids = list(corpus.calls)
        if len(call_ids) < 2:
            raise ValueError("call-level split needs at least two calls")
        target = math.ceil(ratio * n)
        train_list: list[str] = []
        for k, ci in enumerate(rng.permutation(len(call_ids))):
            if len(train_list) >= target or k == len(call_ids) - 1:
                break
            train_list.extend(corpus.calls[call_ids[ci]])
        train = frozenset(train_list)
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    test = frozenset(ids) - train
    return Split(mode, train, test, ratio, seed)
