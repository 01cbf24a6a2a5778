"""Acoustic front end (MFCC + deltas) and the binary feature-file format."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.fft
from scipy.io import wavfile

MAGIC = b"PTFT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIf")
LOG_FLOOR = 1e-10


class FeatureFileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    utterance_id: str
    frame_shift_ms: float
    frames: np.ndarray

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"{self.utterance_id}: frames must be a nonempty T x dim array")
        if not np.all(np.isfinite(frames)):
            raise ValueError(f"{self.utterance_id}: frames contain non-finite values")
        if not self.frame_shift_ms > 0:
            raise ValueError("frame_shift_ms must be positive")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def __len__(self):
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.utterance_id == other.utterance_id
            and np.float32(self.frame_shift_ms) == np.float32(other.frame_shift_ms)
            and self.frames.shape == other.frames.shape
            and self.frames.tobytes() == other.frames.tobytes()
        )


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate_hz: int = 16000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_mel_filters: int = 23
    num_cepstra: int = 13
    preemphasis: float = 0.97
    append_deltas: bool = True

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not 0 < self.frame_shift_ms <= self.frame_length_ms:
            raise ValueError("need 0 < frame_shift_ms <= frame_length_ms")
        if not 0 < self.num_cepstra <= self.num_mel_filters:
            raise ValueError("need 0 < num_cepstra <= num_mel_filters")

    @classmethod
    def from_json(cls, path) -> "FeatureConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the mel scale, shape (num_filters, n_fft // 2 + 1)."""
    n_bins = n_fft // 2 + 1
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0), num_filters + 2)
    hz_points = _mel_to_hz(mel_points)
    bin_freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)
    fbank = np.zeros((num_filters, n_bins))
    for m in range(num_filters):
        left, center, right = hz_points[m : m + 3]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fbank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fbank


def deltas(feats: np.ndarray, width: int = 2) -> np.ndarray:
    """Regression deltas over +-width frames with edge replication."""
    padded = np.pad(feats, ((width, width), (0, 0)), mode="edge")
    n = len(feats)
    num = sum(k * (padded[width + k : width + k + n] - padded[width - k : width - k + n])
              for k in range(1, width + 1))
    return num / (2 * sum(k * k for k in range(1, width + 1)))


def num_frames_for(num_samples: int, config: FeatureConfig) -> int:
    frame_len = int(round(config.frame_length_ms * config.sample_rate_hz / 1000.0))
    shift = int(round(config.frame_shift_ms * config.sample_rate_hz / 1000.0))
    if num_samples < frame_len:
        return 0
    return (num_samples - frame_len) // shift + 1


def compute_mfcc(samples, config: FeatureConfig, utterance_id: str = "") -> FeatureMatrix:
    """MFCCs (optionally with deltas) for a mono signal in [-1, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected mono samples")
    sr = config.sample_rate_hz
    frame_len = int(round(config.frame_length_ms * sr / 1000.0))
    shift = int(round(config.frame_shift_ms * sr / 1000.0))
    n_frames = num_frames_for(len(x), config)
    if n_frames < 1:
        raise ValueError(f"need at least {frame_len} samples for one frame, got {len(x)}")

    emphasized = np.append(x[:1], x[1:] - config.preemphasis * x[:-1])
    idx = np.arange(frame_len)[None, :] + shift * np.arange(n_frames)[:, None]
    frames = emphasized[idx] * np.hamming(frame_len)

    n_fft = 1 << (frame_len - 1).bit_length()
    spectrum = np.abs(np.fft.rfft(frames, n=n_fft))
    fbank = mel_filterbank(config.num_mel_filters, n_fft, sr)
    log_mel = np.log(np.maximum(spectrum @ fbank.T, LOG_FLOOR))
    ceps = scipy.fft.dct(log_mel, type=2, axis=1, norm="ortho")[:, : config.num_cepstra]
    if config.append_deltas:
        ceps = np.hstack([ceps, deltas(ceps)])
    return FeatureMatrix(utterance_id, config.frame_shift_ms, ceps)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Mono float samples in [-1, 1] and the sample rate."""
    rate, data = wavfile.read(path)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if np.issubdtype(data.dtype, np.integer):
        data = data / float(np.iinfo(data.dtype).max)
    return np.asarray(data, dtype=np.float64), int(rate)


def save_features(fm: FeatureMatrix, path) -> None:
    T, dim = fm.frames.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, dim, T, fm.frame_shift_ms))
        f.write(fm.frames.astype("<f4", copy=False).tobytes())


def load_features(path, utterance_id: str | None = None) -> FeatureMatrix:
    """Load a feature file; the utterance id defaults to the file stem."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dim, T, shift = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFileError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * dim * T
    if len(raw) < expected:
        raise FeatureFileError(f"{path}: truncated data ({len(raw)} of {expected} bytes)")
    if len(raw) > expected:
        raise FeatureFileError(f"{path}: dimension mismatch, {len(raw) - expected} trailing bytes")
    frames = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(T, dim)
    return FeatureMatrix(utterance_id or path.stem, float(shift), frames.astype(np.float32))


def feature_path(out_dir, utterance_id: str) -> Path:
    return Path(out_dir) / f"{utterance_id}.ptft"
