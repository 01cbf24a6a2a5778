"""Translation metrics (corr@K, corpus P/R@K) and discovery diagnostics."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .cluster import Clustering
from .corpus import Corpus, StopwordList, filter_stopwords, tokenize
from .pseudotext import Pseudotext
from .translate import Prediction
from .utd import Match, Segment

LOCALITY_CLASSES = ("within_utterance", "within_call", "cross_call")


@dataclass(frozen=True)
class EvalRecord:
    utterance_id: str
    pred_at_k: Counter
    gold: Counter
    corr: int


def gold_set(translation: str, stopwords: StopwordList) -> Counter:
    """Content words of a reference; the stopwords themselves if nothing else is left."""
    tokens = tokenize(translation)
    content = filter_stopwords(tokens, stopwords)
    return Counter(content if content else tokens)


def corr_at_k(pred, gold) -> int:
    """|pred ∩ gold| under multiset intersection."""
    pred, gold = Counter(pred), Counter(gold)
    return sum((pred & gold).values())


def make_record(pred: Prediction, translation: str, stopwords: StopwordList) -> EvalRecord:
    p = Counter(pred.words)
    g = gold_set(translation, stopwords)
    return EvalRecord(pred.utterance_id, p, g, corr_at_k(p, g))


def evaluate_predictions(preds: Iterable[Prediction], corpus: Corpus,
                         stopwords: StopwordList) -> list[EvalRecord]:
    return [make_record(p, corpus[p.utterance_id].translation, stopwords) for p in preds]


def corpus_pr(records: Sequence[EvalRecord], average: str = "micro") -> dict[str, float]:
    """Corpus Precision@K / Recall@K.

    Micro: summed corr over summed |pred| and |gold|. Macro: mean of the
    per-utterance ratios over utterances with a nonzero denominator.
    """
    if not records:
        raise ValueError("no records to score")
    if average == "micro":
        corr = sum(r.corr for r in records)
        n_pred = sum(sum(r.pred_at_k.values()) for r in records)
        n_gold = sum(sum(r.gold.values()) for r in records)
        return {"precision": corr / n_pred if n_pred else 0.0,
                "recall": corr / n_gold if n_gold else 0.0}
    if average == "macro":
        ps = [r.corr / sum(r.pred_at_k.values()) for r in records if sum(r.pred_at_k.values())]
        rs = [r.corr / sum(r.gold.values()) for r in records if sum(r.gold.values())]
        return {"precision": sum(ps) / len(ps) if ps else 0.0,
                "recall": sum(rs) / len(rs) if rs else 0.0}
    raise ValueError(f"unknown averaging {average!r}")


def occurrence_label(segment: Segment, corpus: Corpus, frame_shift_ms: float = 10.0) -> str | None:
    """Gold word with maximal temporal overlap (earlier word on ties); None if no overlap."""
    utt = corpus[segment.utterance_id]
    if utt.word_alignment is None:
        raise ValueError(f"missing word alignment for {segment.utterance_id!r}")
    start = segment.start_frame * frame_shift_ms / 1000.0
    end = segment.end_frame * frame_shift_ms / 1000.0
    best, best_ov = None, 0.0
    for word, ws, we in utt.word_alignment:
        # Rounded so frame-exact ties are not decided by float noise.
        ov = round(min(end, we) - max(start, ws), 9)
        if ov > best_ov:
            best, best_ov = word, ov
    return best


def _plurality(labels: Iterable[str | None]) -> tuple[str | None, int]:
    counts = Counter(lab for lab in labels if lab is not None)
    if not counts:
        return None, 0
    label = min(counts, key=lambda lab: (-counts[lab], lab))
    return label, counts[label]


def cluster_labels(clustering: Clustering, corpus: Corpus,
                   frame_shift_ms: float = 10.0) -> dict[str, list[str | None]]:
    return {c: [occurrence_label(o.segment, corpus, frame_shift_ms) for o in members]
            for c, members in clustering.clusters.items()}


def cluster_purity(clustering: Clustering, corpus: Corpus, frame_shift_ms: float = 10.0) -> float:
    """Share of occurrences carrying their cluster's plurality gold word.

    Occurrences overlapping no gold word never count as matching.
    """
    labels = cluster_labels(clustering, corpus, frame_shift_ms)
    total = sum(len(v) for v in labels.values())
    if total == 0:
        return 0.0
    return sum(_plurality(v)[1] for v in labels.values()) / total


def union_length(intervals: Iterable[tuple[int, int]]) -> int:
    covered, cur_s, cur_e = 0, None, None
    for s, e in sorted(intervals):
        if cur_e is None or s > cur_e:
            if cur_e is not None:
                covered += cur_e - cur_s
            cur_s, cur_e = s, e
        else:
            cur_e = max(cur_e, e)
    if cur_e is not None:
        covered += cur_e - cur_s
    return covered


def audio_coverage(clustering: Clustering, num_frames: Mapping[str, int]) -> float:
    """Fraction of all frames inside at least one discovered occurrence."""
    total = sum(num_frames.values())
    if total == 0:
        return 0.0
    per_utt: dict[str, list[tuple[int, int]]] = {}
    for occ in clustering.occurrences:
        seg = occ.segment
        per_utt.setdefault(seg.utterance_id, []).append((seg.start_frame, seg.end_frame))
    covered = 0
    for u, ivs in per_utt.items():
        T = num_frames[u]
        covered += union_length((min(s, T), min(e, T)) for s, e in ivs)
    return covered / total


def oov_stats(train_pt: Pseudotext | Mapping, test_pt: Pseudotext | Mapping) -> dict:
    train_lines = getattr(train_pt, "lines", train_pt)
    test_lines = getattr(test_pt, "lines", test_pt)
    vocab = {tok for toks in train_lines.values() for tok in toks}
    total = sum(len(toks) for toks in test_lines.values())
    oov = sum(1 for toks in test_lines.values() for tok in toks if tok not in vocab)
    return {"tokens": oov, "total": total, "rate": oov / total if total else 0.0}


def locality_class(match: Match, corpus: Corpus) -> str:
    ua, ub = match.a.utterance_id, match.b.utterance_id
    if ua == ub:
        return "within_utterance"
    if corpus[ua].call_id == corpus[ub].call_id:
        return "within_call"
    return "cross_call"


def match_locality(matches: Sequence[Match], corpus: Corpus, frame_shift_ms: float = 10.0,
                   with_accuracy: bool = True) -> dict[str, dict]:
    """Share and accuracy of matches within utterances, within calls and across calls.

    A match is accurate when both sides carry the same (non-empty) gold label.
    """
    counts = Counter()
    correct = Counter()
    for m in matches:
        cls = locality_class(m, corpus)
        counts[cls] += 1
        if with_accuracy:
            la = occurrence_label(m.a, corpus, frame_shift_ms)
            lb = occurrence_label(m.b, corpus, frame_shift_ms)
            if la is not None and la == lb:
                correct[cls] += 1
    total = sum(counts.values())
    table = {}
    for cls in LOCALITY_CLASSES:
        n = counts[cls]
        table[cls] = {
            "count": n,
            "match_share": n / total if total else 0.0,
            "accuracy": (correct[cls] / n if n else 0.0) if with_accuracy else None,
        }
    return table


def gold_types(corpus: Corpus) -> set[str]:
    types = set()
    for utt in corpus:
        if utt.word_alignment is None:
            raise ValueError(f"missing word alignment for {utt.utterance_id!r}")
        types.update(w for w, _, _ in utt.word_alignment)
    return types


def cluster_mapping_stats(clustering: Clustering, corpus: Corpus, frame_shift_ms: float = 10.0) -> dict:
    """How clusters map onto gold word types (one-to-one, many-to-one, uncovered)."""
    labels = cluster_labels(clustering, corpus, frame_shift_ms)
    plural = {c: _plurality(v)[0] for c, v in labels.items()}
    owners = Counter(lab for lab in plural.values() if lab is not None)
    one_to_one = [c for c, lab in plural.items()
                  if lab is not None and owners[lab] == 1 and all(x == lab for x in labels[c])]
    rest = {lab for c, lab in plural.items() if lab is not None and c not in set(one_to_one)}
    covered = {lab for lab in plural.values() if lab is not None}
    gold = gold_types(corpus)
    return {
        "num_clusters": len(clustering.clusters),
        "one_to_one": len(one_to_one),
        "many_to_one_types": len(rest),
        "uncovered_gold_types": len(gold - covered),
        "gold_types": len(gold),
    }


@dataclass
class DiagnosticsReport:
    purity: float | None
    coverage: float
    oov: dict[str, dict] = field(default_factory=dict)
    locality: dict[str, dict] = field(default_factory=dict)
    cluster_counts: dict | None = None
    empty_utterance_rate: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def diagnose(matches: Sequence[Match], clustering: Clustering, corpus: Corpus,
             num_frames: Mapping[str, int], oov: Mapping[str, dict] | None = None,
             pseudotext: Pseudotext | None = None, frame_shift_ms: float = 10.0) -> DiagnosticsReport:
    """Discovery diagnostics; alignment-dependent parts are skipped when alignments are absent."""
    has_alignment = all(u.word_alignment is not None for u in corpus)
    empty_rate = 0.0
    if pseudotext is not None and len(pseudotext):
        empty_rate = sum(1 for toks in pseudotext.lines.values() if not toks) / len(pseudotext)
    return DiagnosticsReport(
        purity=cluster_purity(clustering, corpus, frame_shift_ms) if has_alignment else None,
        coverage=audio_coverage(clustering, num_frames),
        oov=dict(oov or {}),
        locality=match_locality(matches, corpus, frame_shift_ms, with_accuracy=has_alignment),
        cluster_counts=cluster_mapping_stats(clustering, corpus, frame_shift_ms) if has_alignment else None,
        empty_utterance_rate=empty_rate,
    )


def format_report_tsv(report: Mapping) -> str:
    """Report as TSV blocks shaped like the locality, OOV and P/R@K tables."""
    blocks = []
    diag = report.get("diagnostics")
    if diag and diag.get("locality"):
        loc = diag["locality"]
        rows = ["\tutterance\tcall\tcorpus",
                "Matches\t" + "\t".join(f"{loc[c]['match_share']:.4f}" for c in LOCALITY_CLASSES)]
        if all(loc[c]["accuracy"] is not None for c in LOCALITY_CLASSES):
            rows.append("Accuracy\t" + "\t".join(f"{loc[c]['accuracy']:.4f}" for c in LOCALITY_CLASSES))
        blocks.append("\n".join(rows))
    params = report.get("params", {})
    condition = f"{params.get('pseudotext', '')}/{params.get('split_mode', '')}".strip("/")
    if "oov" in report:
        o = report["oov"]
        blocks.append(f"condition\toov_tokens\toov_rate\n{condition}\t{o['tokens']}\t{o['rate']:.4f}")
    if "metrics" in report:
        rows = [f"K\tmetric\t{condition or 'value'}"]
        for k, m in report["metrics"].items():
            rows.append(f"{k}\tPrec.\t{m['precision']:.4f}")
            rows.append(f"{k}\tRec.\t{m['recall']:.4f}")
        blocks.append("\n".join(rows))
    if diag:
        rows = ["metric\tvalue"]
        for key in ("purity", "coverage", "empty_utterance_rate"):
            if diag.get(key) is not None:
                rows.append(f"{key}\t{diag[key]:.4f}")
        for key, val in (diag.get("cluster_counts") or {}).items():
            rows.append(f"{key}\t{val}")
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"
