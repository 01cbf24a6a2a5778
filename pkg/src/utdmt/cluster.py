"""Pseudoterm clustering: merge overlapping match sides, then connected components."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .utd import Match, Segment


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]


@dataclass(frozen=True)
class Occurrence:
    node_id: int
    segment: Segment


@dataclass
class Clustering:
    clusters: dict[str, list[Occurrence]]
    params_echo: dict = field(default_factory=dict)

    @property
    def occurrences(self) -> list[Occurrence]:
        return [occ for members in self.clusters.values() for occ in members]

    def label_of(self) -> dict[int, str]:
        return {occ.node_id: label for label, members in self.clusters.items() for occ in members}

    def __len__(self):
        return len(self.clusters)


def overlap_fraction(x: Segment, y: Segment) -> float:
    """|x ∩ y| / min(|x|, |y|); zero across utterances."""
    if x.utterance_id != y.utterance_id:
        return 0.0
    inter = min(x.end_frame, y.end_frame) - max(x.start_frame, y.start_frame)
    if inter <= 0:
        return 0.0
    return inter / min(len(x), len(y))


def _order_key(order: Callable[[str], object] | None):
    if order is None:
        return lambda seg: (seg.utterance_id, seg.start_frame, seg.end_frame)
    return lambda seg: (order(seg.utterance_id), seg.start_frame, seg.end_frame)


def merge_overlapping(matches: Sequence[Match], overlap: float = 0.5,
                      order: Callable[[str], object] | None = None):
    """Merge same-utterance match sides whose fractional overlap >= ``overlap``.

    Returns ``(nodes, side_map)``: nodes carry the union extent of their
    merged sides and are numbered in corpus order (``order`` maps an
    utterance id to its sort key; default is the id itself). ``side_map``
    maps ``(match_index, 0 | 1)`` to a node id.
    """
    if not 0 < overlap <= 1:
        raise ValueError("overlap threshold must be in (0, 1]")
    sides = [seg for m in matches for seg in (m.a, m.b)]
    uf = UnionFind(len(sides))

    by_utt: dict[str, list[int]] = {}
    for k, seg in enumerate(sides):
        by_utt.setdefault(seg.utterance_id, []).append(k)
    for idxs in by_utt.values():
        idxs.sort(key=lambda k: (sides[k].start_frame, sides[k].end_frame))
        # Sweep: only sides starting before the current one ends can overlap it.
        for p, k in enumerate(idxs):
            end = sides[k].end_frame
            for q in idxs[p + 1:]:
                if sides[q].start_frame >= end:
                    break
                if overlap_fraction(sides[k], sides[q]) >= overlap:
                    uf.union(k, q)

    groups: dict[int, list[int]] = {}
    for k in range(len(sides)):
        groups.setdefault(uf.find(k), []).append(k)
    extents = []
    for members in groups.values():
        segs = [sides[k] for k in members]
        extents.append((Segment(segs[0].utterance_id,
                                min(s.start_frame for s in segs),
                                max(s.end_frame for s in segs)), members))
    key = _order_key(order)
    extents.sort(key=lambda e: key(e[0]))

    nodes, side_map = [], {}
    for node_id, (seg, members) in enumerate(extents):
        nodes.append(Occurrence(node_id, seg))
        for k in members:
            side_map[divmod(k, 2)] = node_id
    return nodes, side_map


def connected_components(nodes: Sequence[Occurrence], side_map: dict, matches: Sequence[Match],
                         order: Callable[[str], object] | None = None,
                         params_echo: dict | None = None) -> Clustering:
    """Connected components of the match graph, labelled c1, c2, ... in corpus order."""
    uf = UnionFind(len(nodes))
    for k in range(len(matches)):
        uf.union(side_map[(k, 0)], side_map[(k, 1)])
    comps: dict[int, list[Occurrence]] = {}
    for occ in nodes:
        comps.setdefault(uf.find(occ.node_id), []).append(occ)
    key = _order_key(order)
    for members in comps.values():
        members.sort(key=lambda o: key(o.segment))
    ordered = sorted(comps.values(), key=lambda ms: key(ms[0].segment))
    clusters = {f"c{n}": members for n, members in enumerate(ordered, 1)}
    return Clustering(clusters, dict(params_echo or {}))


def cluster_matches(matches: Sequence[Match], overlap: float = 0.5,
                    order: Callable[[str], object] | None = None) -> Clustering:
    nodes, side_map = merge_overlapping(matches, overlap, order)
    return connected_components(nodes, side_map, matches, order, {"overlap": overlap})


def format_clusters(clustering: Clustering) -> str:
    doc = {
        label: [{"utt": o.segment.utterance_id, "start": o.segment.start_frame,
                 "end": o.segment.end_frame} for o in members]
        for label, members in clustering.clusters.items()
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def save_clusters(clustering: Clustering, path) -> None:
    Path(path).write_text(format_clusters(clustering), encoding="utf-8")


def load_clusters(path) -> Clustering:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    clusters, node_id = {}, 0
    for label, members in doc.items():
        occs = []
        for rec in members:
            occs.append(Occurrence(node_id, Segment(rec["utt"], int(rec["start"]), int(rec["end"]))))
            node_id += 1
        clusters[label] = occs
    return Clustering(clusters)
