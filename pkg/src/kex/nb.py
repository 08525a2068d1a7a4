"""Supervised keyphrase ranking with a two-feature Naive Bayes model.

Each candidate phrase is described by two features in the KEA tradition:
its tf-idf (mean of member-word tf-idf) and the relative position of its
first occurrence. Both are discretized with equal-frequency binning fitted
on the pooled training values; conditional tables use add-one smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import normalize_phrase
from .preprocess import PipelineConfig, Token
from .rank import CandidatePhrase, DfIndex, tfidf_scores

__all__ = [
    "KeaFeatures",
    "NbModel",
    "FEATURE_NAMES",
    "equal_frequency_boundaries",
    "bucket_index",
    "compute_kea_features",
    "label_candidates",
    "train_nb",
    "posterior",
    "rank_candidates",
    "save_nb",
    "load_nb",
]

FEATURE_NAMES = ("tfidf", "first_occurrence")

_MODEL_HEADER = "kex-nb 1"


@dataclass(frozen=True)
class KeaFeatures:
    tfidf: float
    first_occurrence: float


@dataclass(frozen=True)
class NbModel:
    """Binned two-class Naive Bayes: priors, bin boundaries, conditionals.

    ``boundaries[f]`` holds the inner bin edges (length bins - 1) for feature
    ``f``; ``cond[(label, f)]`` holds P(bin | label) for each of the bins.
    Labels are True (keyphrase) and False.
    """

    bins: int
    prior_key: float
    prior_not: float
    boundaries: Mapping[str, tuple[float, ...]]
    cond: Mapping[tuple[bool, str], tuple[float, ...]]


def equal_frequency_boundaries(values: Sequence[float], bins: int) -> tuple[float, ...]:
    """Inner quantile boundaries that split ``values`` into ``bins`` groups.

    Boundaries are the k/bins quantiles for k = 1 .. bins-1. Duplicate
    boundaries are allowed (heavily tied data simply leaves some bins empty).
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if len(values) == 0:
        raise ValueError("cannot fit bin boundaries on no values")
    qs = [k / bins for k in range(1, bins)]
    return tuple(float(b) for b in np.quantile(np.asarray(values, dtype=float), qs))


def bucket_index(x: float, boundaries: Sequence[float]) -> int:
    """Bin index of ``x``: the number of boundaries it exceeds or equals."""
    return int(np.searchsorted(np.asarray(boundaries, dtype=float), x, side="right"))


def compute_kea_features(
    tokens: Sequence[Token],
    candidates: Sequence[CandidatePhrase],
    index: DfIndex,
) -> list[tuple[CandidatePhrase, KeaFeatures]]:
    """Features for every candidate of one document.

    The tf-idf feature is the mean member-word tf-idf. First occurrence is
    the number of word tokens before the candidate's first token divided by
    the document's word-token count, so it always lands in [0, 1).
    """
    word_scores = tfidf_scores(tokens, index)
    word_ordinal: dict[int, int] = {}
    n_words = 0
    for tok in tokens:
        if not tok.is_symbol:
            word_ordinal[tok.index] = n_words
            n_words += 1
    if n_words == 0:
        raise ValueError("document has no word tokens")
    out = []
    for cand in candidates:
        tf = sum(word_scores.get(w, 0.0) for w in cand.lemmas) / len(cand.lemmas)
        first = word_ordinal[cand.span[0]] / n_words
        out.append((cand, KeaFeatures(tfidf=tf, first_occurrence=first)))
    return out


def label_candidates(
    candidates: Sequence[CandidatePhrase],
    gold: Iterable[str],
    config: PipelineConfig | None = None,
) -> list[bool]:
    """True for candidates whose lemma sequence equals a normalized gold phrase."""
    config = config or PipelineConfig.default()
    gold_set = {normalize_phrase(g, config) for g in gold}
    gold_set.discard(())
    return [c.lemmas in gold_set for c in candidates]


def train_nb(labeled: Sequence[tuple[KeaFeatures, bool]], bins: int = 5) -> NbModel:
    """Fit priors, bin boundaries and smoothed conditional tables.

    Boundaries come from the pooled feature values of both classes. Counts
    get add-one smoothing, so every conditional row sums to one and no
    posterior is ever exactly 0 or 1. Training data must contain both classes.
    """
    if not labeled:
        raise ValueError("no training examples")
    n_key = sum(1 for _, y in labeled if y)
    n_not = len(labeled) - n_key
    if n_key == 0 or n_not == 0:
        raise ValueError(
            f"training data must contain both classes (positives={n_key}, negatives={n_not})"
        )

    boundaries: dict[str, tuple[float, ...]] = {}
    for name in FEATURE_NAMES:
        values = [getattr(f, name) for f, _ in labeled]
        boundaries[name] = equal_frequency_boundaries(values, bins)

    counts: dict[tuple[bool, str], list[int]] = {
        (y, name): [0] * bins for y in (True, False) for name in FEATURE_NAMES
    }
    for feats, y in labeled:
        for name in FEATURE_NAMES:
            b = bucket_index(getattr(feats, name), boundaries[name])
            counts[(y, name)][b] += 1

    cond: dict[tuple[bool, str], tuple[float, ...]] = {}
    for y, n_y in ((True, n_key), (False, n_not)):
        for name in FEATURE_NAMES:
            row = counts[(y, name)]
            cond[(y, name)] = tuple((c + 1) / (n_y + bins) for c in row)

    return NbModel(
        bins=bins,
        prior_key=n_key / len(labeled),
        prior_not=n_not / len(labeled),
        boundaries=boundaries,
        cond=cond,
    )


def posterior(model: NbModel, feats: KeaFeatures) -> float:
    """P(keyphrase | features) with both features assumed class-conditionally independent."""
    log_key = math.log(model.prior_key)
    log_not = math.log(model.prior_not)
    for name in FEATURE_NAMES:
        b = bucket_index(getattr(feats, name), model.boundaries[name])
        log_key += math.log(model.cond[(True, name)][b])
        log_not += math.log(model.cond[(False, name)][b])
    # Normalize in probability space; the joint values are tiny but safe here.
    m = max(log_key, log_not)
    pk = math.exp(log_key - m)
    pn = math.exp(log_not - m)
    return pk / (pk + pn)


def rank_candidates(
    model: NbModel,
    scored: Sequence[tuple[CandidatePhrase, KeaFeatures]],
) -> list[tuple[CandidatePhrase, float]]:
    """Candidates sorted by posterior, ties broken by earlier first occurrence."""
    with_post = [(cand, posterior(model, feats)) for cand, feats in scored]
    with_post.sort(key=lambda cf: (-cf[1], cf[0].span[0], cf[0].span[1], cf[0].lemmas))
    return with_post


def save_nb(model: NbModel, path) -> None:
    """Write the model in a versioned line-oriented text format."""
    lines = [_MODEL_HEADER, f"bins\t{model.bins}"]
    lines.append(f"prior\tkey\t{model.prior_key!r}")
    lines.append(f"prior\tnot_key\t{model.prior_not!r}")
    for name in FEATURE_NAMES:
        vals = "\t".join(repr(b) for b in model.boundaries[name])
        lines.append(f"boundaries\t{name}\t{vals}" if vals else f"boundaries\t{name}")
    for y, label in ((True, "key"), (False, "not_key")):
        for name in FEATURE_NAMES:
            vals = "\t".join(repr(p) for p in model.cond[(y, name)])
            lines.append(f"cond\t{label}\t{name}\t{vals}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_nb(path) -> NbModel:
    """Read a model written by save_nb, validating the version header."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _MODEL_HEADER:
        head = lines[0] if lines else "<empty>"
        raise ValueError(f"not a kex-nb model file (header {head!r})")
    bins = None
    priors: dict[str, float] = {}
    boundaries: dict[str, tuple[float, ...]] = {}
    cond: dict[tuple[bool, str], tuple[float, ...]] = {}
    for ln in lines[1:]:
        parts = ln.split("\t")
        kind = parts[0]
        if kind == "bins":
            bins = int(parts[1])
        elif kind == "prior":
            priors[parts[1]] = float(parts[2])
        elif kind == "boundaries":
            boundaries[parts[1]] = tuple(float(x) for x in parts[2:])
        elif kind == "cond":
            label = parts[1] == "key"
            cond[(label, parts[2])] = tuple(float(x) for x in parts[3:])
        else:
            raise ValueError(f"unknown record kind {kind!r} in model file")
    if bins is None or "key" not in priors or "not_key" not in priors:
        raise ValueError("incomplete model file")
    for name in FEATURE_NAMES:
        if name not in boundaries or (True, name) not in cond or (False, name) not in cond:
            raise ValueError(f"model file missing tables for feature {name!r}")
    return NbModel(
        bins=bins,
        prior_key=priors["key"],
        prior_not=priors["not_key"],
        boundaries=boundaries,
        cond=cond,
    )
