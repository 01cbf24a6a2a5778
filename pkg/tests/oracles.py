"""Independent brute-force reference implementations used by the tests.

Nothing here imports the code under test beyond plain data types.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def model1_counts_by_enumeration(pairs, t, null="NULL"):
    """Expected counts c[(f, e)] by summing over every alignment vector.

    For a pair with source f_1..f_m (plus NULL at position 0) and target
    e_1..e_n, each alignment a in {0..m}^n has weight prod_j t(e_j | f_{a_j})
    (the uniform alignment prior is constant and cancels). Counts are the
    posterior-weighted number of links (f, e).
    """
    counts = {}
    for source, target in pairs:
        if not source or not target:
            continue
        src = [null] + list(source)
        weights = {}
        for a in itertools.product(range(len(src)), repeat=len(target)):
            w = 1.0
            for j, i in enumerate(a):
                w *= t.get(src[i], {}).get(target[j], 0.0)
            weights[a] = w
        z = sum(weights.values())
        if z == 0:
            continue
        for a, w in weights.items():
            for j, i in enumerate(a):
                key = (src[i], target[j])
                counts[key] = counts.get(key, 0.0) + w / z
    return counts


def corr_bruteforce(pred, gold):
    """Greedy one-by-one matching of list items (multiset intersection size)."""
    remaining = list(gold)
    hits = 0
    for w in pred:
        if w in remaining:
            remaining.remove(w)
            hits += 1
    return hits


def pr_bruteforce(rows):
    """rows: list of (pred_list, gold_list); micro P/R as exact fractions."""
    corr = sum(corr_bruteforce(p, g) for p, g in rows)
    n_pred = sum(len(p) for p, _ in rows)
    n_gold = sum(len(g) for _, g in rows)
    prec = Fraction(corr, n_pred) if n_pred else Fraction(0)
    rec = Fraction(corr, n_gold) if n_gold else Fraction(0)
    return prec, rec


def purity_bruteforce(cluster_label_lists):
    """Each cluster contributes max over candidate words of its count of that word."""
    total = sum(len(v) for v in cluster_label_lists)
    if total == 0:
        return Fraction(0)
    good = 0
    for labels in cluster_label_lists:
        candidates = {x for x in labels if x is not None}
        good += max((sum(1 for x in labels if x == c) for c in candidates), default=0)
    return Fraction(good, total)


def coverage_bruteforce(intervals_by_utt, num_frames):
    """Mark frames in boolean lists and count."""
    covered = 0
    for u, T in num_frames.items():
        marks = [False] * T
        for s, e in intervals_by_utt.get(u, []):
            for k in range(s, min(e, T)):
                marks[k] = True
        covered += sum(marks)
    total = sum(num_frames.values())
    return Fraction(covered, total) if total else Fraction(0)


def oov_bruteforce(train_lines, test_lines):
    seen = []
    for toks in train_lines:
        seen.extend(toks)
    n = 0
    total = 0
    for toks in test_lines:
        for tok in toks:
            total += 1
            if tok not in seen:
                n += 1
    return n, (Fraction(n, total) if total else Fraction(0))
