"""IBM Model 1 with a Dirichlet prior (variational-Bayes M-step), no diagonal preference.

Direction is source (pseudoterms or oracle words) -> target (English content
words): the learned rows t(.|f) are the per-pseudoterm translation
distributions.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import digamma, logsumexp

from .corpus import Corpus, StopwordList, filter_stopwords, tokenize

NULL = "NULL"
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class ParallelPair:
    source: tuple[str, ...]
    target: tuple[str, ...]

    def __init__(self, source: Iterable[str], target: Iterable[str]):
        object.__setattr__(self, "source", tuple(source))
        object.__setattr__(self, "target", tuple(target))

    @property
    def usable(self) -> bool:
        return bool(self.source) and bool(self.target)


@dataclass
class TranslationTable:
    t: dict[str, dict[str, float]]
    alpha: float = 0.01
    target_vocab_size: int = 0
    history: list[float] = field(default_factory=list)

    def prob(self, f: str, e: str) -> float:
        return self.t.get(f, {}).get(e, 0.0)

    def __contains__(self, f):
        return f in self.t

    @property
    def source_types(self) -> list[str]:
        return [f for f in self.t if f != NULL]


def _usable(pairs: Sequence[ParallelPair]) -> list[ParallelPair]:
    return [p for p in pairs if p.usable]


def init_uniform(pairs: Sequence[ParallelPair], alpha: float = 0.01) -> TranslationTable:
    """Uniform rows over each source type's co-occurring targets; NULL covers all targets."""
    usable = _usable(pairs)
    if not usable:
        raise ValueError("no usable pairs (need nonempty source and target)")
    support: dict[str, set[str]] = defaultdict(set)
    vocab: set[str] = set()
    for p in usable:
        targets = set(p.target)
        vocab |= targets
        for f in set(p.source):
            support[f] |= targets
    support[NULL] = vocab
    t = {f: dict.fromkeys(sorted(es), 1.0 / len(es)) for f, es in sorted(support.items())}
    return TranslationTable(t, alpha, len(vocab))


def expected_counts(pairs: Sequence[ParallelPair], table: TranslationTable) -> dict[str, dict[str, float]]:
    """E-step: posterior alignment counts c(e, f), keyed [f][e].

    Each target token aligns to one of the source tokens or NULL with
    probability proportional to t(e|f). Contributions are summed with fsum,
    so the result does not depend on pair order.
    """
    parts: dict[tuple[str, str], list[float]] = defaultdict(list)
    t = table.t
    for p in _usable(pairs):
        src = (NULL,) + p.source
        for e in p.target:
            probs = [t[f].get(e, 0.0) for f in src]
            z = math.fsum(probs)
            if z <= 0:
                continue
            for f, pf in zip(src, probs):
                if pf > 0:
                    parts[(f, e)].append(pf / z)
    counts: dict[str, dict[str, float]] = defaultdict(dict)
    for (f, e), vals in sorted(parts.items()):
        counts[f][e] = math.fsum(vals)
    return dict(counts)


def em_iteration(pairs: Sequence[ParallelPair], table: TranslationTable) -> TranslationTable:
    """One E-step plus variational-Bayes M-step.

    t(e|f) is proportional to exp(digamma(c(e,f) + alpha)); the row factor
    exp(digamma(sum_e c + alpha V)) is common to the row and cancels in the
    renormalization over support(f).
    """
    counts = expected_counts(pairs, table)
    alpha, V = table.alpha, table.target_vocab_size
    new_t = {}
    for f, row in table.t.items():
        es = list(row)
        cf = counts.get(f, {})
        c = np.array([cf.get(e, 0.0) for e in es])
        logw = digamma(c + alpha) - digamma(c.sum() + alpha * V)
        probs = np.maximum(np.exp(logw - logsumexp(logw)), _TINY)
        probs /= probs.sum()
        new_t[f] = dict(zip(es, probs.tolist()))
    return TranslationTable(new_t, alpha, V, list(table.history))


def log_likelihood(pairs: Sequence[ParallelPair], table: TranslationTable) -> float:
    """sum over pairs and target tokens of log( 1/(|f|+1) * sum_i t(e_j|f_i) ), NULL included."""
    t = table.t
    terms = []
    for p in _usable(pairs):
        src = (NULL,) + p.source
        for e in p.target:
            s = math.fsum(t.get(f, {}).get(e, 0.0) for f in src)
            terms.append(math.log(s / len(src)) if s > 0 else -math.inf)
    return math.fsum(terms)


def train(pairs: Sequence[ParallelPair], iterations: int = 5, alpha: float = 0.01) -> TranslationTable:
    """Uniform init followed by ``iterations`` EM passes.

    ``table.history`` holds the corpus log-likelihood after initialization
    and after each iteration.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    table = init_uniform(pairs, alpha)
    table.history.append(log_likelihood(pairs, table))
    for _ in range(iterations):
        table = em_iteration(pairs, table)
        table.history.append(log_likelihood(pairs, table))
    return table


def content_words(text: str, stopwords: StopwordList) -> list[str]:
    """Tokens minus stopwords; all tokens if nothing else is left."""
    tokens = tokenize(text)
    content = filter_stopwords(tokens, stopwords)
    return content if content else tokens


def assemble_pairs(pseudotext_lines: dict[str, list[str]], corpus: Corpus, ids: Iterable[str],
                   stopwords: StopwordList) -> list[ParallelPair]:
    """Parallel pairs for the given utterances, in corpus order."""
    pairs = []
    for u in sorted(ids, key=corpus.position):
        pairs.append(ParallelPair(pseudotext_lines.get(u, []),
                                  content_words(corpus[u].translation, stopwords)))
    return pairs


def _sorted_rows(table: TranslationTable):
    rows = [(f, e, f"{p:.9f}") for f, row in table.t.items() for e, p in row.items()]
    rows.sort(key=lambda r: (r[0], -float(r[2]), r[1]))
    return rows


def format_table(table: TranslationTable) -> str:
    return "".join(f"{f}\t{e}\t{p}\n" for f, e, p in _sorted_rows(table))


def save_table(table: TranslationTable, path) -> None:
    Path(path).write_text(format_table(table), encoding="utf-8")


def load_table(path) -> TranslationTable:
    t: dict[str, dict[str, float]] = {}
    vocab = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            f, e, p = cols
            t.setdefault(f, {})[e] = float(p)
            vocab.add(e)
    return TranslationTable(t, float("nan"), len(vocab))
