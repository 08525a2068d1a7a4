"""Unsupervised word ranking and candidate phrase extraction.

Two word scorers share one candidate machinery:

* tf-idf:   Freq(w) / max_Freq * log2((N + 1) / (n + 1)), document frequencies
            taken from a corpus-level index.
* TextRank: stationary scores of an undirected co-occurrence graph,
            Score(v) = (1 - d) + d * sum_u w(u,v) / deg_w(u) * Score(u).

Candidate phrases follow the pattern (ADJ)* (NOUN)+ with no stopwords or
symbols inside; a phrase is scored by the arithmetic mean of its member-word
scores.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .preprocess import Token, sentence_spans

__all__ = [
    "DfIndex",
    "WordGraph",
    "CandidatePhrase",
    "GRAPH_POS",
    "build_df_index",
    "tfidf_score",
    "tfidf_scores",
    "build_word_graph",
    "textrank_scores",
    "extract_candidates",
    "maximal_phrase_spans",
    "phrase_weight",
    "score_candidates",
    "top_n_phrases",
]

# POS classes whose lemmas become graph nodes.
GRAPH_POS = frozenset({"NOUN", "VERB", "ADJ"})

# POS classes that may appear inside a candidate phrase.
_PHRASE_POS = frozenset({"ADJ", "NOUN"})


@dataclass(frozen=True)
class DfIndex:
    """Document-frequency index over a corpus: lemma -> number of documents."""

    n_docs: int
    df: Mapping[str, int]


@dataclass
class WordGraph:
    """Undirected co-occurrence graph of one document."""

    nodes: tuple[str, ...]
    edges: Mapping[tuple[str, str], float]
    window: int
    damping: float
    scores: Mapping[str, float] | None = None


@dataclass(frozen=True)
class CandidatePhrase:
    """A candidate keyphrase: member lemmas plus its earliest token span."""

    lemmas: tuple[str, ...]
    span: tuple[int, int]  # [start, end) in the full token sequence
    weight: float = 0.0
    source: str = ""


def _candidate_lemmas(tokens: Iterable[Token]) -> list[str]:
    return [t.lemma for t in tokens if not t.is_stopword and not t.is_symbol]


def build_df_index(token_docs: Sequence[Sequence[Token]]) -> DfIndex:
    """Count, for every lemma, how many documents contain it.

    Stopwords and symbols never enter the index. The index is immutable and
    shared by all per-document scoring calls.
    """
    if not token_docs:
        raise ValueError("cannot build a document-frequency index from an empty corpus")
    df: Counter[str] = Counter()
    for tokens in token_docs:
        df.update(set(_candidate_lemmas(tokens)))
    return DfIndex(n_docs=len(token_docs), df=dict(df))


def tfidf_score(tokens: Sequence[Token], word: str, index: DfIndex) -> float:
    """tf-idf of one lemma within one document.

    Term frequency is normalized by the document's maximum lemma frequency
    (stopwords and symbols excluded). A lemma the index has never seen gets
    n = 0, so its idf is log2(N + 1).
    """
    counts = Counter(_candidate_lemmas(tokens))
    if word not in counts:
        raise ValueError(f"word {word!r} does not occur in the document")
    max_freq = max(counts.values())
    n = index.df.get(word, 0)
    return counts[word] / max_freq * math.log2((index.n_docs + 1) / (n + 1))


def tfidf_scores(tokens: Sequence[Token], index: DfIndex) -> dict[str, float]:
    """tf-idf for every candidate lemma of the document at once."""
    counts = Counter(_candidate_lemmas(tokens))
    if not counts:
        return {}
    max_freq = max(counts.values())
    n_docs = index.n_docs
    return {
        w: c / max_freq * math.log2((n_docs + 1) / (index.df.get(w, 0) + 1))
        for w, c in counts.items()
    }


def build_word_graph(tokens: Sequence[Token], window: int = 2, damping: float = 0.85) -> WordGraph:
    """Build the undirected co-occurrence graph of one document.

    Nodes are distinct NOUN/VERB/ADJ lemmas (stopwords and symbols excluded).
    An edge gains one unit of weight for every pair of node occurrences lying
    within ``window`` consecutive candidate tokens of one sentence; windows
    never cross sentence boundaries. Self-loops are skipped.
    """
    if window < 2:
        raise ValueError(f"window must be at least 2, got {window}")
    if not (0.0 < damping < 1.0):
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    nodes: dict[str, None] = {}
    edges: Counter[tuple[str, str]] = Counter()
    for sentence in sentence_spans(list(tokens)):
        stream = [
            t.lemma
            for t in sentence
            if t.pos in GRAPH_POS and not t.is_stopword and not t.is_symbol
        ]
        for lemma in stream:
            nodes.setdefault(lemma)
        for i in range(len(stream)):
            for j in range(i + 1, min(i + window, len(stream))):
                a, b = stream[i], stream[j]
                if a == b:
                    continue
                key = (a, b) if a <= b else (b, a)
                edges[key] += 1
    return WordGraph(
        nodes=tuple(nodes),
        edges=dict(edges),
        window=window,
        damping=damping,
    )


def textrank_scores(
    graph: WordGraph,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> dict[str, float]:
    """Iterate the TextRank recurrence to a fixed point.

    All scores start at 1.0 and are updated simultaneously until the largest
    per-node change drops below ``tol``. Isolated nodes keep the exact value
    (1 - damping). If ``max_iter`` passes without convergence the last
    iterate is returned and a RuntimeWarning is emitted.
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter}")
    d = graph.damping
    neighbors: dict[str, list[tuple[str, float]]] = {v: [] for v in graph.nodes}
    out_sum: dict[str, float] = {v: 0.0 for v in graph.nodes}
    for (a, b), w in graph.edges.items():
        neighbors[a].append((b, w))
        neighbors[b].append((a, w))
        out_sum[a] += w
        out_sum[b] += w

    scores = {v: 1.0 for v in graph.nodes}
    base = 1.0 - d
    for v in graph.nodes:  # isolated nodes are already at their fixed point
        if not neighbors[v]:
            scores[v] = base

    for _ in range(max_iter):
        new_scores = {}
        delta = 0.0
        for v in graph.nodes:
            acc = 0.0
            for u, w in neighbors[v]:
                acc += w / out_sum[u] * scores[u]
            s = base + d * acc
            new_scores[v] = s
            delta = max(delta, abs(s - scores[v]))
        scores = new_scores
        if delta < tol:
            break
    else:
        warnings.warn(
            f"TextRank did not converge within {max_iter} iterations (delta={delta:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return scores


def _phrase_ok(pos_seq: Sequence[str]) -> bool:
    """Does the POS sequence match (ADJ)* (NOUN)+ ?"""
    if not pos_seq or pos_seq[-1] != "NOUN":
        return False
    seen_noun = False
    for p in pos_seq:
        if p == "NOUN":
            seen_noun = True
        elif p == "ADJ":
            if seen_noun:
                return False
        else:
            return False
    return seen_noun


def _eligible(tok: Token) -> bool:
    return tok.pos in _PHRASE_POS and not tok.is_stopword and not tok.is_symbol


def extract_candidates(
    tokens: Sequence[Token],
    max_phrase_len: int = 4,
    maximal_only: bool = False,
) -> list[CandidatePhrase]:
    """Enumerate candidate phrases matching (ADJ)* (NOUN)+.

    Every qualifying sub-span up to ``max_phrase_len`` tokens becomes a
    candidate; with ``maximal_only`` only spans that cannot be extended on
    either side qualify. Candidates are deduplicated by lemma sequence,
    keeping the earliest span, and returned in order of first occurrence.
    """
    if max_phrase_len < 1:
        raise ValueError(f"max_phrase_len must be positive, got {max_phrase_len}")
    tokens = list(tokens)
    seen: dict[tuple[str, ...], CandidatePhrase] = {}

    def admit(start: int, end: int) -> None:
        lemmas = tuple(t.lemma for t in tokens[start:end])
        if lemmas not in seen:
            seen[lemmas] = CandidatePhrase(lemmas=lemmas, span=(start, end))

    if maximal_only:
        for start, end in maximal_phrase_spans(tokens):
            if end - start <= max_phrase_len:
                admit(start, end)
    else:
        n = len(tokens)
        for start in range(n):
            if not _eligible(tokens[start]):
                continue
            noun_seen = False
            for end in range(start + 1, min(start + max_phrase_len, n) + 1):
                tok = tokens[end - 1]
                if not _eligible(tok):
                    break
                if tok.pos == "ADJ" and noun_seen:
                    break
                if tok.pos == "NOUN":
                    noun_seen = True
                    admit(start, end)
    return list(seen.values())


def maximal_phrase_spans(tokens: Sequence[Token]) -> list[tuple[int, int]]:
    """Non-overlapping maximal (ADJ)* (NOUN)+ spans over the token sequence.

    Used for candidate extraction in maximal-only mode and for phrase-level
    membership features. No length cap is applied here.
    """
    spans: list[tuple[int, int]] = []
    n = len(tokens)
    i = 0
    while i < n:
        if not _eligible(tokens[i]):
            i += 1
            continue
        # Greedily take ADJ* then NOUN+ from position i.
        j = i
        while j < n and _eligible(tokens[j]) and tokens[j].pos == "ADJ":
            j += 1
        k = j
        while k < n and _eligible(tokens[k]) and tokens[k].pos == "NOUN":
            k += 1
        if k > j:  # at least one noun: the span [i, k) is maximal
            spans.append((i, k))
            i = k
        else:  # adjectives with no noun head; skip the first and rescan
            i += 1
    return spans


def phrase_weight(phrase: CandidatePhrase, word_weights: Mapping[str, float]) -> float:
    """Arithmetic mean of member-word weights; unknown words weigh 0."""
    if not phrase.lemmas:
        raise ValueError("cannot weight an empty phrase")
    return sum(word_weights.get(w, 0.0) for w in phrase.lemmas) / len(phrase.lemmas)


def score_candidates(
    candidates: Iterable[CandidatePhrase],
    word_weights: Mapping[str, float],
    source: str = "",
) -> list[CandidatePhrase]:
    """Attach phrase weights (and a source label) to candidates."""
    return [
        dataclasses.replace(c, weight=phrase_weight(c, word_weights), source=source)
        for c in candidates
    ]


def top_n_phrases(candidates: Sequence[CandidatePhrase], n: int) -> list[CandidatePhrase]:
    """Highest-weighted candidates; ties go to the earlier occurrence.

    Sort key: weight descending, then span start, then span end, then the
    lemma sequence, which makes the ordering total and deterministic.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    ranked = sorted(candidates, key=lambda c: (-c.weight, c.span[0], c.span[1], c.lemmas))
    return ranked[:n]
