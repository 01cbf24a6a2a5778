"""Random small instances shared by the metric tests and the acceptance suite."""

from __future__ import annotations

import random

from utdmt.cluster import Clustering, Occurrence
from utdmt.corpus import Corpus, Utterance
from utdmt.utd import Segment

WORDS = ["car", "red", "two", "work", "yes", "plan"]


def random_multisets(rng: random.Random):
    pred = [rng.choice(WORDS) for _ in range(rng.randint(0, 6))]
    gold = [rng.choice(WORDS) for _ in range(rng.randint(0, 6))]
    return pred, gold


def random_labelled_clustering(rng: random.Random, frame_shift_ms: float = 10.0):
    """A corpus with tiled word alignments and clusters over random segments.

    Returns (clustering, corpus, expected label lists per cluster). Labels
    are computed here independently by scanning each frame's word.
    """
    utts, frame_words = [], {}
    for k in range(rng.randint(1, 4)):
        uid = f"u{k}"
        pos, align, per_frame = rng.randint(0, 5), [], []
        per_frame += [None] * pos
        for _ in range(rng.randint(1, 4)):
            w, n = rng.choice(WORDS), rng.randint(5, 20)
            align.append((w, pos * frame_shift_ms / 1000, (pos + n) * frame_shift_ms / 1000))
            per_frame += [len(align) - 1] * n
            pos += n
            gap = rng.randint(0, 3)
            per_frame += [None] * gap
            pos += gap
        frame_words[uid] = (per_frame, align)
        utts.append(Utterance(uid, f"call{k % 2}", "s", "x", pos * frame_shift_ms / 1000, "t",
                              word_alignment=tuple(align)))
    corpus = Corpus(tuple(utts))

    clusters, expected, node = {}, [], 0
    for c in range(rng.randint(0, 4)):
        members, labels = [], []
        for _ in range(rng.randint(1, 4)):
            uid = rng.choice(sorted(frame_words))
            per_frame, align = frame_words[uid]
            s = rng.randrange(len(per_frame))
            e = rng.randint(s + 1, len(per_frame))
            members.append(Occurrence(node, Segment(uid, s, e)))
            node += 1
            # Frame-count overlap per word index; earliest index wins ties.
            tally = {}
            for f in range(s, e):
                if per_frame[f] is not None:
                    tally[per_frame[f]] = tally.get(per_frame[f], 0) + 1
            labels.append(align[max(sorted(tally), key=lambda i: tally[i])][0] if tally else None)
        clusters[f"c{c + 1}"] = members
        expected.append(labels)
    return Clustering(clusters), corpus, expected


def random_intervals(rng: random.Random):
    num_frames = {f"u{k}": rng.randint(1, 60) for k in range(rng.randint(1, 4))}
    ivs, clusters, node = {}, {}, 0
    for c in range(rng.randint(0, 5)):
        members = []
        for _ in range(rng.randint(1, 3)):
            u = rng.choice(sorted(num_frames))
            s = rng.randrange(num_frames[u])
            e = rng.randint(s + 1, num_frames[u])
            ivs.setdefault(u, []).append((s, e))
            members.append(Occurrence(node, Segment(u, s, e)))
            node += 1
        clusters[f"c{c + 1}"] = members
    return Clustering(clusters), num_frames, ivs


def random_pseudotexts(rng: random.Random):
    vocab = [f"c{i}" for i in range(1, 7)]
    train = {f"t{k}": [rng.choice(vocab) for _ in range(rng.randint(0, 4))] for k in range(rng.randint(1, 4))}
    test = {f"s{k}": [rng.choice(vocab) for _ in range(rng.randint(0, 4))] for k in range(rng.randint(1, 4))}
    return train, test
