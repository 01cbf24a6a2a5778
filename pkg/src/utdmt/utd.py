"""Unsupervised term discovery: diagonal seeds on cosine similarity + banded DTW.

Every unordered utterance pair (each utterance with itself included) is
compared exhaustively, so the cost is O(N^2 T^2) in the number of
utterances N and their length T. The pair loop is the unit of parallelism.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .features import FeatureMatrix

MATCH_HEADER = ("utt_a", "start_a", "end_a", "utt_b", "start_b", "end_b", "score")


@dataclass(frozen=True, order=True)
class Segment:
    utterance_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"invalid segment {self}")

    def __len__(self):
        return self.end_frame - self.start_frame

    def overlaps(self, other: "Segment") -> bool:
        return (
            self.utterance_id == other.utterance_id
            and self.start_frame < other.end_frame
            and other.start_frame < self.end_frame
        )


@dataclass(frozen=True)
class Match:
    a: Segment
    b: Segment
    score: float

    @property
    def key(self):
        return (self.a.utterance_id, self.a.start_frame, self.b.utterance_id,
                self.b.start_frame, self.a.end_frame, self.b.end_frame)

    def canonical(self) -> "Match":
        if self.b < self.a:
            return Match(self.b, self.a, self.score)
        return self


@dataclass(frozen=True)
class UtdParams:
    sim_threshold: float = 0.80
    min_seed_frames: int = 30
    max_gap_frames: int = 5
    band_radius_frames: int = 10
    dtw_score_threshold: float = 0.85
    min_match_frames: int = 50
    max_match_frames: int = 300

    def __post_init__(self):
        if not 0 < self.sim_threshold <= 1:
            raise ValueError("sim_threshold must be in (0, 1]")
        if not 0 < self.dtw_score_threshold <= 1:
            raise ValueError("dtw_score_threshold must be in (0, 1]")
        if not 1 <= self.min_seed_frames <= self.min_match_frames <= self.max_match_frames:
            raise ValueError("need 1 <= min_seed_frames <= min_match_frames <= max_match_frames")
        if self.max_gap_frames < 0 or self.band_radius_frames < 0:
            raise ValueError("max_gap_frames and band_radius_frames must be nonnegative")

    @classmethod
    def from_json(cls, path) -> "UtdParams":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Seed:
    offset: int
    i_start: int
    i_end: int  # exclusive

    @property
    def j_start(self):
        return self.i_start + self.offset

    @property
    def j_end(self):
        return self.i_end + self.offset


def cosine_similarity_matrix(A, B) -> np.ndarray:
    """Frame-by-frame cosine similarity; rows of zero norm give zero similarity."""
    a = np.asarray(getattr(A, "frames", A), dtype=np.float64)
    b = np.asarray(getattr(B, "frames", B), dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    a = np.divide(a, na[:, None], out=np.zeros_like(a), where=na[:, None] > 0)
    b = np.divide(b, nb[:, None], out=np.zeros_like(b), where=nb[:, None] > 0)
    return np.clip(a @ b.T, -1.0, 1.0)


def find_diagonal_seeds(S: np.ndarray, params: UtdParams) -> list[Seed]:
    """Runs of above-threshold cells along each diagonal, bridging short gaps.

    A seed's length is its span (gaps included). Seeds come back sorted by
    (offset, i_start).
    """
    Ta, Tb = S.shape
    ii, jj = np.nonzero(S >= params.sim_threshold)
    if len(ii) == 0:
        return []
    gap = params.max_gap_frames
    # One row per diagonal with a gap+1 wide separator, so runs never join
    # across diagonals.
    width = Ta + gap + 1
    pos = np.sort((jj - ii + Ta - 1).astype(np.int64) * width + ii)
    breaks = np.flatnonzero(np.diff(pos) > gap + 1)
    starts = pos[np.concatenate(([0], breaks + 1))]
    ends = pos[np.concatenate((breaks, [len(pos) - 1]))] + 1
    keep = ends - starts >= params.min_seed_frames
    seeds = []
    for s, e in zip(starts[keep].tolist(), ends[keep].tolist()):
        k, i0 = divmod(s, width)
        seeds.append(Seed(offset=k - (Ta - 1), i_start=i0, i_end=i0 + (e - s)))
    return seeds


@njit(cache=True)
def _band_dtw(S, a0, a1, b0, b1, offset, radius):
    """Min-cost (1 - cos) monotone path from (a0, b0) to (a1-1, b1-1) in the band.

    Returns (sum of similarities along the path, path length); length 0 if
    the end cell is unreachable.
    """
    n = a1 - a0
    m = b1 - b0
    cost = np.full((n, m), np.inf)
    length = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        lo = max(0, a0 + i + offset - radius - b0)
        hi = min(m - 1, a0 + i + offset + radius - b0)
        for j in range(lo, hi + 1):
            c = 1.0 - S[a0 + i, b0 + j]
            if i == 0 and j == 0:
                cost[i, j] = c
                length[i, j] = 1
                continue
            best = np.inf
            bl = 0
            if i > 0 and j > 0 and cost[i - 1, j - 1] < best:
                best = cost[i - 1, j - 1]
                bl = length[i - 1, j - 1]
            if i > 0 and cost[i - 1, j] < best:
                best = cost[i - 1, j]
                bl = length[i - 1, j]
            if j > 0 and cost[i, j - 1] < best:
                best = cost[i, j - 1]
                bl = length[i, j - 1]
            if best < np.inf:
                cost[i, j] = best + c
                length[i, j] = bl + 1
    L = length[n - 1, m - 1]
    if L == 0:
        return 0.0, 0
    return L - cost[n - 1, m - 1], L


@njit(cache=True)
def _extend(S, a0, a1, b0, b1, total, count, offset, radius,
            delta, sigma, max_gap, max_len, forward):
    """Greedy one-cell-at-a-time boundary extension in one direction.

    Steps to the most similar neighbouring cell while the running path mean
    stays >= sigma. Up to max_gap consecutive cells below delta are allowed,
    but the boundary is only committed on a cell >= delta.
    """
    Ta, Tb = S.shape
    if forward:
        ci, cj = a1 - 1, b1 - 1
    else:
        ci, cj = a0, b0
    best = (a0, a1, b0, b1, total, count)
    t, c = total, count
    gap_run = 0
    while True:
        found = False
        bs = -np.inf
        bi, bj = 0, 0
        for k in range(3):
            if forward:
                di = 1 if k != 2 else 0
                dj = 1 if k != 1 else 0
                ni, nj = ci + di, cj + dj
                ok = ni < Ta and nj < Tb and ni - a0 + 1 <= max_len and nj - b0 + 1 <= max_len
            else:
                di = 1 if k != 2 else 0
                dj = 1 if k != 1 else 0
                ni, nj = ci - di, cj - dj
                ok = ni >= 0 and nj >= 0 and a1 - ni <= max_len and b1 - nj <= max_len
            if not ok or abs((nj - ni) - offset) > radius:
                continue
            if S[ni, nj] > bs:
                bs = S[ni, nj]
                bi, bj = ni, nj
                found = True
        if not found:
            break
        t += bs
        c += 1
        if t / c < sigma:
            break
        ci, cj = bi, bj
        if bs >= delta:
            gap_run = 0
            if forward:
                best = (a0, ci + 1, b0, cj + 1, t, c)
            else:
                best = (ci, a1, cj, b1, t, c)
        else:
            gap_run += 1
            if gap_run > max_gap:
                break
    return best


def _refine(S, seed: Seed, params: UtdParams):
    """Refined (a0, a1, b0, b1, score) for a seed, or None."""
    d, r = seed.offset, params.band_radius_frames
    a0, a1, b0, b1 = seed.i_start, seed.i_end, seed.j_start, seed.j_end
    total, count = _band_dtw(S, a0, a1, b0, b1, d, r)
    if count == 0:
        return None
    args = (d, r, params.sim_threshold, params.dtw_score_threshold,
            params.max_gap_frames, params.max_match_frames)
    a0, a1, b0, b1, total, count = _extend(S, a0, a1, b0, b1, total, count, *args, True)
    a0, a1, b0, b1, total, count = _extend(S, a0, a1, b0, b1, total, count, *args, False)
    lo, hi = params.min_match_frames, params.max_match_frames
    if not (lo <= a1 - a0 <= hi and lo <= b1 - b0 <= hi):
        return None
    total, count = _band_dtw(S, a0, a1, b0, b1, d, r)
    if count == 0:
        return None
    score = max(0.0, total / count)
    if score < params.dtw_score_threshold:
        return None
    return a0, a1, b0, b1, score


def _to_match(A: FeatureMatrix, B: FeatureMatrix, refined) -> Match | None:
    a0, a1, b0, b1, score = refined
    sa = Segment(A.utterance_id, int(a0), int(a1))
    sb = Segment(B.utterance_id, int(b0), int(b1))
    if sa.overlaps(sb):
        return None
    return Match(sa, sb, float(score)).canonical()


def refine_match_dtw(A: FeatureMatrix, B: FeatureMatrix, seed: Seed, params: UtdParams,
                     S: np.ndarray | None = None) -> Match | None:
    """Refine one seed into a Match, or None if it fails a gate."""
    if S is None:
        S = cosine_similarity_matrix(A, B)
    refined = _refine(S, seed, params)
    if refined is None:
        return None
    return _to_match(A, B, refined)


def discover_pair(A: FeatureMatrix, B: FeatureMatrix, params: UtdParams) -> list[Match]:
    """All matches between two utterances (or within one, when A is B)."""
    same = A.utterance_id == B.utterance_id
    S = cosine_similarity_matrix(A, B)
    seeds = find_diagonal_seeds(S, params)
    if same:
        # Below this offset both sides are bound to overlap.
        min_offset = params.min_match_frames - params.band_radius_frames
        seeds = [s for s in seeds if s.offset > 0 and s.offset >= min_offset]
    if not seeds:
        return []

    def strength(s: Seed):
        run = S[np.arange(s.i_start, s.i_end), np.arange(s.j_start, s.j_end)]
        return (-float(run.mean()), s.offset, s.i_start)

    accepted: list[tuple[int, int, int, int]] = []
    found: dict[tuple, Match] = {}
    for seed in sorted(seeds, key=strength):
        if any(seed.i_start < a1 and a0 < seed.i_end and seed.j_start < b1 and b0 < seed.j_end
               for a0, a1, b0, b1 in accepted):
            continue
        refined = _refine(S, seed, params)
        if refined is None:
            continue
        match = _to_match(A, B, refined)
        if match is None:
            continue
        accepted.append(refined[:4])
        prev = found.get(match.key)
        if prev is None or match.score > prev.score:
            found[match.key] = match
    return list(found.values())


_WORKER_DB: dict = {}


def _init_worker(mats, params):
    _WORKER_DB["mats"] = mats
    _WORKER_DB["params"] = params


def _run_pairs(pairs):
    mats, params = _WORKER_DB["mats"], _WORKER_DB["params"]
    out = []
    for i, j in pairs:
        out.extend(discover_pair(mats[i], mats[j], params))
    return out


def discover_matches(db: Iterable[FeatureMatrix], params: UtdParams | None = None,
                     jobs: int = 1) -> list[Match]:
    """Exhaustive pairwise discovery, deduplicated and canonically sorted.

    The result does not depend on ``jobs``: pairs are independent and the
    merged output is sorted.
    """
    params = params or UtdParams()
    mats = list(db)
    if not mats:
        return []
    dims = {m.dim for m in mats}
    if len(dims) > 1:
        raise ValueError(f"feature dimension mismatch across db: {sorted(dims)}")
    pairs = [(i, j) for i in range(len(mats)) for j in range(i, len(mats))]

    if jobs <= 1 or len(pairs) < 2:
        _init_worker(mats, params)
        results = [_run_pairs(pairs)]
    else:
        chunks = [pairs[k::jobs * 4] for k in range(jobs * 4)]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(mats, params)) as pool:
            results = list(pool.map(_run_pairs, chunks))

    best: dict[tuple, Match] = {}
    for chunk in results:
        for m in chunk:
            prev = best.get(m.key)
            if prev is None or m.score > prev.score:
                best[m.key] = m
    return sorted(best.values(), key=lambda m: m.key)


def format_matches(matches: Sequence[Match]) -> str:
    lines = ["\t".join(MATCH_HEADER)]
    for m in matches:
        lines.append(
            f"{m.a.utterance_id}\t{m.a.start_frame}\t{m.a.end_frame}\t"
            f"{m.b.utterance_id}\t{m.b.start_frame}\t{m.b.end_frame}\t{m.score:.6f}"
        )
    return "\n".join(lines) + "\n"


def save_matches(matches: Sequence[Match], path) -> None:
    Path(path).write_text(format_matches(matches), encoding="utf-8")


def load_matches(path) -> list[Match]:
    """Read a match TSV; rows are canonicalized on load."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if tuple(header) != MATCH_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        matches = []
        for lineno, line in enumerate(f, 2):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 columns, got {len(cols)}")
            score = float(cols[6])
            if not math.isfinite(score):
                raise ValueError(f"{path}:{lineno}: non-finite score")
            a = Segment(cols[0], int(cols[1]), int(cols[2]))
            b = Segment(cols[3], int(cols[4]), int(cols[5]))
            matches.append(Match(a, b, score).canonical())
    return matches
