"""Pseudotext: per-utterance pseudoterm sequences from clusters or gold transcripts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .cluster import Clustering
from .corpus import Corpus, tokenize


@dataclass
class Pseudotext:
    lines: dict[str, list[str]]
    source: str = "utd"

    def __len__(self):
        return len(self.lines)

    def __getitem__(self, utterance_id):
        return self.lines[utterance_id]

    def subset(self, ids) -> "Pseudotext":
        ids = set(ids)
        return Pseudotext({u: toks for u, toks in self.lines.items() if u in ids}, self.source)

    def vocabulary(self) -> set[str]:
        return {tok for toks in self.lines.values() for tok in toks}


def generate_pseudotext(clustering: Clustering, corpus: Corpus) -> Pseudotext:
    """Replace every discovered occurrence by its cluster label, in time order.

    Ties on start frame fall back to end frame, then label.
    """
    per_utt: dict[str, list[tuple[int, int, str]]] = {u: [] for u in corpus.ids}
    for label, members in clustering.clusters.items():
        for occ in members:
            seg = occ.segment
            if seg.utterance_id not in per_utt:
                raise KeyError(f"occurrence in unknown utterance {seg.utterance_id!r}")
            per_utt[seg.utterance_id].append((seg.start_frame, seg.end_frame, label))
    lines = {u: [label for _, _, label in sorted(occs)] for u, occs in per_utt.items()}
    return Pseudotext(lines, "utd")


def generate_oracle_pseudotext(corpus: Corpus) -> Pseudotext:
    """Simulated perfect discovery: the tokenized transcript itself."""
    lines = {}
    for utt in corpus:
        if utt.transcript is None:
            raise ValueError(f"oracle requires transcripts; {utt.utterance_id!r} has none")
        lines[utt.utterance_id] = tokenize(utt.transcript)
    return Pseudotext(lines, "oracle")


def format_pseudotext(pt: Pseudotext) -> str:
    return "".join(f"{u}\t{' '.join(toks)}\n" for u, toks in pt.lines.items())


def save_pseudotext(pt: Pseudotext, path) -> None:
    Path(path).write_text(format_pseudotext(pt), encoding="utf-8")


def load_pseudotext(path, source: str = "utd") -> Pseudotext:
    lines = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: missing tab separator")
            utt, labels = line.split("\t", 1)
            if utt in lines:
                raise ValueError(f"{path}:{lineno}: duplicate utterance {utt!r}")
            lines[utt] = labels.split()
    return Pseudotext(lines, source)
