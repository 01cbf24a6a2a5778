"""Synthetic corpora with planted acoustic "words", speakers and exact alignments."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Utterance, load_stopwords, save_manifest
from .features import FeatureMatrix, feature_path, save_features

FRAME_SHIFT_MS = 10.0
_SRC_SYLLABLES = ("ba", "ko", "mi", "tu", "ne", "sa", "ri", "lo", "pe", "du")
_TGT_SYLLABLES = ("zor", "vek", "mul", "tash", "ren", "gip", "hol", "wex", "dan", "fli")


def _name(i: int, syllables) -> str:
    digits = []
    while True:
        i, r = divmod(i, len(syllables))
        digits.append(syllables[r])
        if i == 0:
            break
    # At least two syllables so names never collide with short stopwords.
    if len(digits) == 1:
        digits.append(syllables[0])
    return "".join(reversed(digits))


def source_type_name(i: int) -> str:
    return _name(i, _SRC_SYLLABLES)


def target_word_name(i: int) -> str:
    return _name(i, _TGT_SYLLABLES)


@dataclass(frozen=True)
class SynthConfig:
    num_source_types: int = 20
    num_calls: int = 6
    utterances_per_call: int = 8
    words_per_utterance: tuple[int, int] = (2, 5)
    dim: int = 26
    frames_per_word: tuple[int, int] = (55, 75)
    speaker_distortion: float = 0.5
    noise_sigma: float = 0.05
    silence_gap_frames: tuple[int, int] = (5, 15)
    seed: int = 0
    lexicon: dict[str, str] | None = field(default=None, hash=False)
    stopword_insert_rate: float = 0.3
    step_scale: float = 0.5

    def __post_init__(self):
        for name in ("words_per_utterance", "frames_per_word", "silence_gap_frames"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.words_per_utterance[1] < 1 or self.frames_per_word[0] < 1:
            raise ValueError("need at least one word per utterance and one frame per word")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if min(self.num_source_types, self.num_calls, self.utterances_per_call) < 1:
            raise ValueError("counts must be positive")
        if self.speaker_distortion < 0 or self.noise_sigma < 0:
            raise ValueError("speaker_distortion and noise_sigma must be nonnegative")
        if not 0 <= self.stopword_insert_rate < 1:
            raise ValueError("stopword_insert_rate must be in [0, 1)")
        if self.lexicon is not None:
            missing = set(self.source_types) - set(self.lexicon)
            if missing:
                raise ValueError(f"lexicon misses source types: {sorted(missing)[:5]}")

    @property
    def source_types(self) -> list[str]:
        return [source_type_name(i) for i in range(self.num_source_types)]

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for k in ("words_per_utterance", "frames_per_word", "silence_gap_frames"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("words_per_utterance", "frames_per_word", "silence_gap_frames"):
            d[k] = list(d[k])
        return d


@dataclass
class SynthCorpus:
    corpus: Corpus
    features: dict[str, FeatureMatrix]
    lexicon: dict[str, str]


def make_template(rng: np.random.Generator, length: int, dim: int, step_scale: float = 0.5) -> np.ndarray:
    """Smooth random trajectory: Gaussian random walk, unit-normalized per frame."""
    walk = rng.normal(size=dim) + np.cumsum(rng.normal(scale=step_scale, size=(length, dim)), axis=0)
    return walk / np.linalg.norm(walk, axis=1, keepdims=True)


def speaker_matrix(rng: np.random.Generator, dim: int, distortion: float) -> np.ndarray:
    """I + distortion * G with G ~ N(0, 1/dim), so distortion is a relative norm."""
    G = rng.normal(scale=1.0 / np.sqrt(dim), size=(dim, dim))
    return np.eye(dim) + distortion * G


def generate_corpus(config: SynthConfig) -> SynthCorpus:
    """Render a corpus; identical configs give identical output."""
    rng = np.random.default_rng(config.seed)
    types = config.source_types
    lexicon = dict(config.lexicon) if config.lexicon else {
        t: target_word_name(i) for i, t in enumerate(types)}
    stopwords = sorted(load_stopwords().words)

    templates = {}
    for t in types:
        length = int(rng.integers(config.frames_per_word[0], config.frames_per_word[1] + 1))
        templates[t] = make_template(rng, length, config.dim, config.step_scale)

    utterances, feats = [], {}
    for c in range(config.num_calls):
        call_id = f"call{c:03d}"
        M = speaker_matrix(rng, config.dim, config.speaker_distortion)
        for k in range(config.utterances_per_call):
            utt_id = f"{call_id}_u{k:03d}"
            n_words = int(rng.integers(max(1, config.words_per_utterance[0]),
                                       config.words_per_utterance[1] + 1))
            words = [types[i] for i in rng.integers(0, len(types), size=n_words)]
            gaps = rng.integers(config.silence_gap_frames[0], config.silence_gap_frames[1] + 1,
                                size=n_words + 1)
            pieces, alignment, pos = [], [], 0
            for w, gap in zip(words, gaps):
                pieces.append(np.zeros((gap, config.dim)))
                pos += int(gap)
                rendered = templates[w] @ M.T
                pieces.append(rendered)
                alignment.append((w, pos * FRAME_SHIFT_MS / 1000.0,
                                  (pos + len(rendered)) * FRAME_SHIFT_MS / 1000.0))
                pos += len(rendered)
            pieces.append(np.zeros((gaps[-1], config.dim)))
            frames = np.vstack(pieces)
            frames = frames + rng.normal(scale=config.noise_sigma, size=frames.shape) \
                if config.noise_sigma > 0 else frames

            target = []
            for w in words:
                if rng.random() < config.stopword_insert_rate:
                    target.append(stopwords[int(rng.integers(len(stopwords)))])
                target.append(lexicon[w])

            feats[utt_id] = FeatureMatrix(utt_id, FRAME_SHIFT_MS, frames)
            utterances.append(Utterance(
                utterance_id=utt_id, call_id=call_id, speaker_id=f"spk{c:03d}",
                audio_ref=f"features/{utt_id}.ptft",
                duration_s=len(frames) * FRAME_SHIFT_MS / 1000.0,
                translation=" ".join(target), transcript=" ".join(words),
                word_alignment=tuple(alignment),
            ))
    return SynthCorpus(Corpus(tuple(utterances)), feats, lexicon)


def write_corpus(sc: SynthCorpus, out_dir, config: SynthConfig | None = None) -> Path:
    """Write manifest.jsonl, features/*.ptft and lexicon.json; returns the manifest path."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    for utt in sc.corpus:
        save_features(sc.features[utt.utterance_id], feature_path(out / "features", utt.utterance_id))
    utts = tuple(
        Utterance(**{**u.__dict__, "audio_ref": str(out / "features" / f"{u.utterance_id}.ptft")})
        for u in sc.corpus
    )
    manifest = out / "manifest.jsonl"
    save_manifest(Corpus(utts), manifest)
    (out / "lexicon.json").write_text(json.dumps(sc.lexicon, indent=1, sort_keys=True) + "\n")
    if config is not None:
        (out / "synth_config.json").write_text(json.dumps(config.to_dict(), indent=1) + "\n")
    return manifest


@dataclass(frozen=True)
class PlantedPair:
    a: FeatureMatrix
    b: FeatureMatrix
    span_a: tuple[int, int]
    span_b: tuple[int, int]


def planted_pairs(num_pairs: int, pattern_frames: int = 60, context_frames: tuple[int, int] = (40, 90),
                  dim: int = 26, noise_sigma: float = 0.05, speaker_distortion: float = 0.0,
                  seed: int = 0) -> list[PlantedPair]:
    """Utterance pairs sharing one planted pattern inside unrelated random-walk context.

    Both utterances of a pair are rendered by the same speaker.
    """
    rng = np.random.default_rng(seed)
    out = []
    for p in range(num_pairs):
        pattern = make_template(rng, pattern_frames, dim)
        M = speaker_matrix(rng, dim, speaker_distortion)
        mats, spans = [], []
        for side in "ab":
            left = int(rng.integers(context_frames[0], context_frames[1] + 1))
            right = int(rng.integers(context_frames[0], context_frames[1] + 1))
            frames = np.vstack([make_template(rng, left, dim), pattern, make_template(rng, right, dim)])
            frames = frames @ M.T + rng.normal(scale=noise_sigma, size=frames.shape)
            mats.append(FeatureMatrix(f"pair{p:03d}{side}", FRAME_SHIFT_MS, frames))
            spans.append((left, left + pattern_frames))
        out.append(PlantedPair(mats[0], mats[1], spans[0], spans[1]))
    return out


def noise_utterances(n: int, frames: tuple[int, int] = (150, 250), dim: int = 26,
                     seed: int = 0) -> list[FeatureMatrix]:
    """I.i.d. Gaussian frames: a negative control with nothing to discover."""
    rng = np.random.default_rng(seed)
    return [FeatureMatrix(f"noise{i:03d}", FRAME_SHIFT_MS,
                          rng.normal(size=(int(rng.integers(frames[0], frames[1] + 1)), dim)))
            for i in range(n)]
