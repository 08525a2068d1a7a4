"""Linear-chain CRF for keyphrase sequence labelling.

Tokens of each sentence are tagged with a five-tag scheme: key_S (single-word
keyphrase), key_B / key_M / key_E (begin / middle / end of a multi-word
keyphrase) and key_N (not part of a keyphrase). The model scores per-position
observation features crossed with tags, plus tag-bigram transitions; pairs of
tags that cannot occur in a well-formed run are structurally masked.

Nine observation features describe each token:

  F1 pos                   POS class of the token
  F2 word_length           character count, capped at 20
  F3 first_occurrence      relative position of the lemma's first occurrence
  F4 freq_fulltext         lemma count in the document's full text
  F5 freq_reftitle         lemma count in the document's reference titles
  F6 in_title              enclosing noun phrase occurs in the title
  F7 in_reftitle           enclosing noun phrase occurs in a reference title
  F8 tfidf                 tf-idf of the lemma in the corpus variant
  F9 textrank              TextRank score of the lemma in the document graph

Continuous features are discretized (equal-frequency for F3/F8/F9,
logarithmic count buckets for F4/F5), so every observation is categorical.
Training minimizes the L2-regularized negative log-likelihood with full-batch
gradient descent and a backtracking line search; everything is deterministic.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document, assemble_variant
from .metrics import EvalCounts, contains_subsequence, normalize_phrase, normalize_tokens, prf
from .preprocess import PipelineConfig, Token, preprocess, sentence_spans, word_tokens
from .rank import DfIndex, build_word_graph, maximal_phrase_spans, textrank_scores, tfidf_scores

__all__ = [
    "TAGS",
    "FEATURE_IDS",
    "MANDATORY_FEATURES",
    "FeatureVector",
    "LabeledSequence",
    "FeatureBucketizer",
    "CrfModel",
    "CrfConfig",
    "AblationReport",
    "legal_transition_mask",
    "encode_tags",
    "decode_spans",
    "extract_features",
    "build_sequences",
    "nll_and_gradient",
    "train_crf",
    "viterbi_decode",
    "document_phrases",
    "sequence_f1",
    "select_positive_features",
    "ablate_features",
    "save_crf",
    "load_crf",
]

TAGS = ("key_S", "key_B", "key_M", "key_E", "key_N")
_S, _B, _M, _E, _N = range(5)
_TAG_INDEX = {t: i for i, t in enumerate(TAGS)}

FEATURE_IDS = ("F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9")
MANDATORY_FEATURES = ("F8", "F9")

_FIELD_OF = {
    "F1": "pos",
    "F2": "word_length",
    "F3": "first_occurrence",
    "F4": "freq_fulltext",
    "F5": "freq_reftitle",
    "F6": "in_title",
    "F7": "in_reftitle",
    "F8": "tfidf",
    "F9": "textrank",
}

_QUANTILE_FEATURES = ("F3", "F8", "F9")
_COUNT_FEATURES = ("F4", "F5")

_MODEL_HEADER = "kex-crf 1"

_NEG_INF = -np.inf


def legal_transition_mask() -> np.ndarray:
    """Boolean [5, 5] matrix of tag pairs that can be adjacent in a legal run.

    key_B and key_M must be followed by key_M or key_E; everything else may
    be followed by key_S, key_B or key_N. Sequence boundaries are not masked:
    strict span decoding discards malformed runs instead.
    """
    mask = np.zeros((5, 5), dtype=bool)
    for s in (_S, _E, _N):
        for t in (_S, _B, _N):
            mask[s, t] = True
    for s in (_B, _M):
        for t in (_M, _E):
            mask[s, t] = True
    return mask

_LEGAL = legal_transition_mask()
LEGAL_PAIRS: tuple[tuple[int, int], ...] = tuple(
    (s, t) for s in range(5) for t in range(5) if _LEGAL[s, t]
)
_PAIR_SLOT = {st: k for k, st in enumerate(LEGAL_PAIRS)}


# ---------------------------------------------------------------------------
# Tag encoding / decoding
# ---------------------------------------------------------------------------

def encode_tags(
    tokens: Sequence[Token],
    gold: Iterable[str],
    config: PipelineConfig | None = None,
) -> tuple[int, ...]:
    """Tag a word-token sequence against the document's gold keyphrases.

    Gold phrases are normalized to lemma sequences and matched against the
    token lemmas; overlaps resolve leftmost-longest. Matched spans become
    key_S or key_B key_M* key_E; everything else is key_N.
    """
    config = config or PipelineConfig.default()
    gold_set = {normalize_phrase(g, config) for g in gold}
    gold_set.discard(())
    lengths = sorted({len(g) for g in gold_set}, reverse=True)
    lemmas = [t.lemma for t in tokens]
    n = len(lemmas)
    tags = [_N] * n
    i = 0
    while i < n:
        matched = 0
        for m in lengths:
            if m <= n - i and tuple(lemmas[i : i + m]) in gold_set:
                matched = m
                break
        if matched == 0:
            i += 1
            continue
        if matched == 1:
            tags[i] = _S
        else:
            tags[i] = _B
            for k in range(i + 1, i + matched - 1):
                tags[k] = _M
            tags[i + matched - 1] = _E
        i += matched
    return tuple(tags)


def decode_spans(tags: Sequence[int | str], tokens: Sequence[Token]) -> set[tuple[str, ...]]:
    """Strictly decode tagged spans into a set of lemma sequences.

    Only well-formed runs count: key_S alone, or key_B key_M* key_E. Any
    malformed run (dangling key_B, key_M without key_E, ...) is dropped
    entirely rather than repaired.
    """
    idx = [(_TAG_INDEX[t] if isinstance(t, str) else int(t)) for t in tags]
    if len(idx) != len(tokens):
        raise ValueError(f"{len(idx)} tags for {len(tokens)} tokens")
    phrases: set[tuple[str, ...]] = set()
    i = 0
    n = len(idx)
    while i < n:
        t = idx[i]
        if t == _S:
            phrases.add((tokens[i].lemma,))
            i += 1
        elif t == _B:
            j = i + 1
            while j < n and idx[j] == _M:
                j += 1
            if j < n and idx[j] == _E:
                phrases.add(tuple(tok.lemma for tok in tokens[i : j + 1]))
                i = j + 1
            else:  # malformed: skip the dangling begin token
                i += 1
        else:
            i += 1
    return phrases


# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureVector:
    """Raw observation features of one token; None marks an inactive feature."""

    pos: str | None = None
    word_length: int | None = None
    first_occurrence: float | None = None
    freq_fulltext: int | None = None
    freq_reftitle: int | None = None
    in_title: int | None = None
    in_reftitle: int | None = None
    tfidf: float | None = None
    textrank: float | None = None


@dataclass
class LabeledSequence:
    """One sentence of word tokens with features and (optionally) gold tags."""

    doc_id: str
    sent_index: int
    tokens: list[Token]
    features: list[FeatureVector]
    tags: tuple[int, ...] | None = None


class _DocContext:
    """Per-document feature context shared by all of the document's tokens."""

    def __init__(
        self,
        doc: Document,
        tokens: Sequence[Token],
        df_index: DfIndex,
        config: PipelineConfig,
        window: int = 2,
        damping: float = 0.85,
    ):
        self.words = word_tokens(tokens)
        self.n_words = max(len(self.words), 1)
        self.first_ordinal: dict[str, int] = {}
        for ordinal, tok in enumerate(self.words):
            self.first_ordinal.setdefault(tok.lemma, ordinal)
        self.full_counts = Counter(
            t.lemma for t in word_tokens(preprocess(doc.full_text, config))
        )
        ref_text = ". ".join(rt for rt in doc.reference_titles if rt)
        self.ref_counts = Counter(
            t.lemma for t in word_tokens(preprocess(ref_text, config))
        )
        self.title_lemmas = normalize_tokens(preprocess(doc.title, config))
        self.ref_title_seqs = [
            normalize_tokens(preprocess(rt, config)) for rt in doc.reference_titles if rt
        ]
        self.tfidf = tfidf_scores(tokens, df_index)
        self.textrank = textrank_scores(build_word_graph(tokens, window, damping))
        self.span_of: dict[int, tuple[str, ...]] = {}
        toks = list(tokens)
        for start, end in maximal_phrase_spans(toks):
            lemmas = tuple(t.lemma for t in toks[start:end])
            for k in range(start, end):
                self.span_of[toks[k].index] = lemmas

    def feature_vector(self, tok: Token, active: Sequence[str]) -> FeatureVector:
        values: dict[str, object] = {}
        active_set = set(active)
        if "F1" in active_set:
            values["pos"] = tok.pos
        if "F2" in active_set:
            values["word_length"] = min(len(tok.surface), 20)
        if "F3" in active_set:
            ordinal = self.first_ordinal.get(tok.lemma, 0)
            values["first_occurrence"] = ordinal / self.n_words
        if "F4" in active_set:
            values["freq_fulltext"] = self.full_counts.get(tok.lemma, 0)
        if "F5" in active_set:
            values["freq_reftitle"] = self.ref_counts.get(tok.lemma, 0)
        span = self.span_of.get(tok.index)
        if "F6" in active_set:
            values["in_title"] = int(
                span is not None and contains_subsequence(self.title_lemmas, span)
            )
        if "F7" in active_set:
            values["in_reftitle"] = int(
                span is not None
                and any(contains_subsequence(rt, span) for rt in self.ref_title_seqs)
            )
        if "F8" in active_set:
            values["tfidf"] = self.tfidf.get(tok.lemma, 0.0)
        if "F9" in active_set:
            values["textrank"] = self.textrank.get(tok.lemma, 0.0)
        return FeatureVector(**values)


def extract_features(
    doc: Document,
    variant: str,
    tokens: Sequence[Token],
    active: Sequence[str] = FEATURE_IDS,
    df_index: DfIndex | None = None,
    config: PipelineConfig | None = None,
) -> list[FeatureVector]:
    """Raw feature vectors for every token of the document's variant text.

    ``tokens`` must be the preprocessed tokens of ``assemble_variant(doc,
    variant)``. Features outside ``active`` are left absent (None). Features
    F8/F3 need corpus context: ``df_index`` is required whenever F8 is active.
    """
    bad = [f for f in active if f not in FEATURE_IDS]
    if bad:
        raise ValueError(f"unknown feature ids {bad}")
    config = config or PipelineConfig.default()
    if df_index is None:
        if "F8" in active:
            raise ValueError("feature F8 (tfidf) requires a df_index")
        df_index = DfIndex(n_docs=1, df={})
    ctx = _DocContext(doc, tokens, df_index, config)
    return [ctx.feature_vector(tok, active) for tok in tokens]


def build_sequences(
    doc: Document,
    variant: str,
    df_index: DfIndex,
    config: PipelineConfig | None = None,
    labeled: bool = True,
    active: Sequence[str] = FEATURE_IDS,
) -> list[LabeledSequence]:
    """Sentence-per-sequence training or decoding input for one document.

    The variant text is preprocessed once; each sentence contributes its
    word tokens (symbols are dropped from sequences). With ``labeled`` the
    gold keyphrases are encoded into tags.
    """
    config = config or PipelineConfig.default()
    text = assemble_variant(doc, variant)
    tokens = preprocess(text, config)
    features = extract_features(doc, variant, tokens, active, df_index, config)
    by_index = {tok.index: fv for tok, fv in zip(tokens, features)}
    sequences: list[LabeledSequence] = []
    for s_idx, sentence in enumerate(sentence_spans(tokens)):
        words = word_tokens(sentence)
        if not words:
            continue
        seq = LabeledSequence(
            doc_id=doc.id,
            sent_index=s_idx,
            tokens=words,
            features=[by_index[t.index] for t in words],
            tags=encode_tags(words, doc.gold_keyphrases, config) if labeled else None,
        )
        sequences.append(seq)
    return sequences


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

def _count_bucket(v: int) -> str:
    if v <= 0:
        return "0"
    if v == 1:
        return "1"
    if v == 2:
        return "2"
    if v <= 4:
        return "3-4"
    if v <= 8:
        return "5-8"
    return "9+"


@dataclass
class FeatureBucketizer:
    """Maps raw feature values to categorical bucket labels.

    F3/F8/F9 use equal-frequency quantile bins fitted on training data;
    F4/F5 use fixed logarithmic count buckets; F1/F2/F6/F7 are categorical
    as-is (F2 already capped at extraction).
    """

    quantile_bins: int = 8
    boundaries: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def fit(self, sequences: Iterable[LabeledSequence]) -> "FeatureBucketizer":
        from .nb import equal_frequency_boundaries  # shared binning helper

        values: dict[str, list[float]] = {f: [] for f in _QUANTILE_FEATURES}
        for seq in sequences:
            for fv in seq.features:
                for fid in _QUANTILE_FEATURES:
                    v = getattr(fv, _FIELD_OF[fid])
                    if v is not None:
                        values[fid].append(float(v))
        for fid, vals in values.items():
            if vals:
                self.boundaries[fid] = equal_frequency_boundaries(vals, self.quantile_bins)
        return self

    def bucket(self, fid: str, value) -> str:
        if value is None:
            raise ValueError(f"feature {fid} has no value")
        if fid in _QUANTILE_FEATURES:
            from .nb import bucket_index

            bounds = self.boundaries.get(fid)
            if bounds is None:
                raise ValueError(f"bucketizer was not fitted for feature {fid}")
            return f"q{bucket_index(float(value), bounds)}"
        if fid in _COUNT_FEATURES:
            return _count_bucket(int(value))
        return str(value)

    def observation_keys(self, fv: FeatureVector, active: Sequence[str]) -> list[str]:
        keys = []
        for fid in active:
            v = getattr(fv, _FIELD_OF[fid])
            if v is None:
                continue
            keys.append(f"{fid}={self.bucket(fid, v)}")
        return keys


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class CrfModel:
    active: tuple[str, ...]
    bucketizer: FeatureBucketizer
    obs_keys: tuple[str, ...]
    weights: np.ndarray  # length n_obs * 5 + len(LEGAL_PAIRS)
    l2: float
    epochs_run: int = 0
    converged: bool = False
    final_nll: float = math.nan

    def __post_init__(self):
        self._key_slot = {k: i for i, k in enumerate(self.obs_keys)}
        expected = len(self.obs_keys) * 5 + len(LEGAL_PAIRS)
        if self.weights.shape != (expected,):
            raise ValueError(
                f"weight vector has shape {self.weights.shape}, expected ({expected},)"
            )

    @property
    def n_obs(self) -> int:
        return len(self.obs_keys)

    def transition_matrix(self) -> np.ndarray:
        """[5, 5] log-potential matrix with illegal transitions at -inf."""
        T = np.full((5, 5), _NEG_INF)
        tw = self.weights[self.n_obs * 5 :]
        for k, (s, t) in enumerate(LEGAL_PAIRS):
            T[s, t] = tw[k]
        return T

    def position_columns(self, seq: LabeledSequence) -> list[list[int]]:
        """Registry columns active at each position; unseen keys are dropped."""
        cols = []
        for fv in seq.features:
            keys = self.bucketizer.observation_keys(fv, self.active)
            cols.append([self._key_slot[k] for k in keys if k in self._key_slot])
        return cols


@dataclass(frozen=True)
class CrfConfig:
    l2: float = 1.0
    max_epochs: int = 200
    grad_tol: float = 1e-4
    quantile_bins: int = 8
    active: tuple[str, ...] = FEATURE_IDS
    seed: int | None = None  # recorded for provenance; training is deterministic


# ---------------------------------------------------------------------------
# Likelihood and gradient
# ---------------------------------------------------------------------------

class _EncodedGroup:
    """All sequences of one length, encoded to flat index arrays."""

    __slots__ = ("length", "n_seqs", "b_idx", "t_idx", "cols", "tags")

    def __init__(self, length: int, seqs: list[tuple[list[list[int]], tuple[int, ...] | None]]):
        self.length = length
        self.n_seqs = len(seqs)
        b_list, t_list, c_list = [], [], []
        tag_rows = []
        for b, (cols, tags) in enumerate(seqs):
            for t, cc in enumerate(cols):
                for c in cc:
                    b_list.append(b)
                    t_list.append(t)
                    c_list.append(c)
            if tags is not None:
                tag_rows.append(tags)
        self.b_idx = np.asarray(b_list, dtype=np.intp)
        self.t_idx = np.asarray(t_list, dtype=np.intp)
        self.cols = np.asarray(c_list, dtype=np.intp)
        self.tags = np.asarray(tag_rows, dtype=np.intp) if len(tag_rows) == self.n_seqs else None


def _encode_groups(model: CrfModel, batch: Sequence[LabeledSequence], need_tags: bool) -> list[_EncodedGroup]:
    by_len: dict[int, list[tuple[list[list[int]], tuple[int, ...] | None]]] = {}
    for seq in batch:
        if not seq.tokens:
            raise ValueError(f"empty sequence in document {seq.doc_id!r}")
        if need_tags:
            if seq.tags is None:
                raise ValueError(f"sequence {seq.doc_id!r}/{seq.sent_index} has no gold tags")
            _validate_tags(seq)
        by_len.setdefault(len(seq.tokens), []).append((model.position_columns(seq), seq.tags))
    return [_EncodedGroup(length, seqs) for length, seqs in sorted(by_len.items())]


def _validate_tags(seq: LabeledSequence) -> None:
    tags = seq.tags
    if len(tags) != len(seq.tokens):
        raise ValueError(f"sequence {seq.doc_id!r}/{seq.sent_index}: tag/token length mismatch")
    for a, b in zip(tags, tags[1:]):
        if not _LEGAL[a, b]:
            raise ValueError(
                f"sequence {seq.doc_id!r}/{seq.sent_index}: illegal transition "
                f"{TAGS[a]} -> {TAGS[b]}"
            )


def _emissions(group: _EncodedGroup, W2: np.ndarray) -> np.ndarray:
    emis = np.zeros((group.n_seqs, group.length, 5))
    if len(group.cols):
        np.add.at(emis, (group.b_idx, group.t_idx), W2[group.cols])
    return emis


def _forward(emis: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    B, L, _ = emis.shape
    alpha = np.empty_like(emis)
    alpha[:, 0] = emis[:, 0]
    for t in range(1, L):
        x = alpha[:, t - 1][:, :, None] + T[None, :, :]
        alpha[:, t] = np.logaddexp.reduce(x, axis=1) + emis[:, t]
    log_z = np.logaddexp.reduce(alpha[:, L - 1], axis=1)
    return alpha, log_z


def _backward(emis: np.ndarray, T: np.ndarray) -> np.ndarray:
    B, L, _ = emis.shape
    beta = np.zeros_like(emis)
    for t in range(L - 2, -1, -1):
        x = T[None, :, :] + (emis[:, t + 1] + beta[:, t + 1])[:, None, :]
        beta[:, t] = np.logaddexp.reduce(x, axis=2)
    return beta


def _group_nll_grad(
    group: _EncodedGroup,
    W2: np.ndarray,
    T: np.ndarray,
    grad_obs: np.ndarray,
    grad_trans: np.ndarray,
) -> float:
    """Accumulate one length-group's data NLL and gradient (expected - empirical)."""
    emis = _emissions(group, W2)
    alpha, log_z = _forward(emis, T)
    beta = _backward(emis, T)
    if not np.all(np.isfinite(log_z)):
        raise ArithmeticError("non-finite partition function in forward pass")

    tags = group.tags
    B, L = group.n_seqs, group.length
    rows = np.arange(B)

    # Gold path score.
    gold = emis[rows[:, None], np.arange(L)[None, :], tags].sum()
    if L > 1:
        gold += T[tags[:, :-1], tags[:, 1:]].sum()
    nll = float(log_z.sum() - gold)

    # Expected unigram counts from unary marginals.
    marg = np.exp(alpha + beta - log_z[:, None, None])
    if len(group.cols):
        np.add.at(grad_obs, group.cols, marg[group.b_idx, group.t_idx])
        # Empirical unigram counts.
        np.add.at(grad_obs, (group.cols, tags[group.b_idx, group.t_idx]), -1.0)

    # Expected and empirical transition counts.
    if L > 1:
        for t in range(1, L):
            x = (
                alpha[:, t - 1][:, :, None]
                + T[None, :, :]
                + (emis[:, t] + beta[:, t])[:, None, :]
                - log_z[:, None, None]
            )
            grad_trans += np.exp(x).sum(axis=0)
        np.add.at(grad_trans, (tags[:, :-1].ravel(), tags[:, 1:].ravel()), -1.0)
    return nll


def _data_nll_grad(groups: Sequence[_EncodedGroup], weights: np.ndarray, n_obs: int) -> tuple[float, np.ndarray]:
    W2 = weights[: n_obs * 5].reshape(n_obs, 5)
    T = np.full((5, 5), _NEG_INF)
    tw = weights[n_obs * 5 :]
    for k, (s, t) in enumerate(LEGAL_PAIRS):
        T[s, t] = tw[k]
    grad_obs = np.zeros((n_obs, 5))
    grad_trans = np.zeros((5, 5))
    nll = 0.0
    for group in groups:
        nll += _group_nll_grad(group, W2, T, grad_obs, grad_trans)
    grad = np.concatenate(
        [grad_obs.ravel(), np.array([grad_trans[s, t] for s, t in LEGAL_PAIRS])]
    )
    return nll, grad


def _data_nll(groups: Sequence[_EncodedGroup], weights: np.ndarray, n_obs: int) -> float:
    W2 = weights[: n_obs * 5].reshape(n_obs, 5)
    T = np.full((5, 5), _NEG_INF)
    tw = weights[n_obs * 5 :]
    for k, (s, t) in enumerate(LEGAL_PAIRS):
        T[s, t] = tw[k]
    nll = 0.0
    for group in groups:
        emis = _emissions(group, W2)
        _, log_z = _forward(emis, T)
        tags = group.tags
        B, L = group.n_seqs, group.length
        gold = emis[np.arange(B)[:, None], np.arange(L)[None, :], tags].sum()
        if L > 1:
            gold += T[tags[:, :-1], tags[:, 1:]].sum()
        nll += float(log_z.sum() - gold)
    return nll


def nll_and_gradient(model: CrfModel, batch: Sequence[LabeledSequence]) -> tuple[float, np.ndarray]:
    """L2-regularized negative log-likelihood of the batch and its gradient.

    NLL = sum over sequences of (log Z - score of the gold path)
          + l2/2 * ||w||^2;
    the gradient is (expected - empirical feature counts) + l2 * w.
    """
    if not batch:
        raise ValueError("empty batch")
    groups = _encode_groups(model, batch, need_tags=True)
    nll, grad = _data_nll_grad(groups, model.weights, model.n_obs)
    nll += 0.5 * model.l2 * float(model.weights @ model.weights)
    grad = grad + model.l2 * model.weights
    return nll, grad


def train_crf(sequences: Sequence[LabeledSequence], config: CrfConfig = CrfConfig()) -> CrfModel:
    """Fit a CRF with full-batch gradient descent and backtracking line search.

    The objective is the mean per-sequence NLL plus l2/2 * ||w||^2, which
    makes the optimum invariant to duplicating the training set. Weights
    start at zero; training stops when the gradient's max-norm drops below
    ``grad_tol`` or after ``max_epochs`` epochs. Fully deterministic.
    """
    if not sequences:
        raise ValueError("no training sequences")
    if not config.active:
        raise ValueError("no active features")
    bad = [f for f in config.active if f not in FEATURE_IDS]
    if bad:
        raise ValueError(f"unknown feature ids {bad}")

    bucketizer = FeatureBucketizer(quantile_bins=config.quantile_bins).fit(sequences)
    key_set: set[str] = set()
    for seq in sequences:
        for fv in seq.features:
            key_set.update(bucketizer.observation_keys(fv, config.active))
    obs_keys = tuple(sorted(key_set))

    model = CrfModel(
        active=tuple(config.active),
        bucketizer=bucketizer,
        obs_keys=obs_keys,
        weights=np.zeros(len(obs_keys) * 5 + len(LEGAL_PAIRS)),
        l2=config.l2,
    )
    groups = _encode_groups(model, sequences, need_tags=True)
    n_obs = model.n_obs
    m = float(len(sequences))

    def objective_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        nll, grad = _data_nll_grad(groups, w, n_obs)
        f = nll / m + 0.5 * config.l2 * float(w @ w)
        g = grad / m + config.l2 * w
        return f, g

    def objective(w: np.ndarray) -> float:
        return _data_nll(groups, w, n_obs) / m + 0.5 * config.l2 * float(w @ w)

    w = model.weights
    step = 1.0
    converged = False
    epochs = 0
    f, g = objective_grad(w)
    for epoch in range(config.max_epochs):
        g_inf = float(np.max(np.abs(g))) if g.size else 0.0
        if g_inf < config.grad_tol:
            converged = True
            break
        epochs = epoch + 1
        # Backtracking line search on the steepest-descent direction.
        gg = float(g @ g)
        s = min(step * 2.0, 16.0)
        accepted = False
        for _ in range(60):
            w_try = w - s * g
            f_try = objective(w_try)
            if f_try <= f - 1e-4 * s * gg:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break  # no step reduces the objective: numerically at the floor
        w = w_try
        step = s
        f, g = objective_grad(w)
    else:
        g_inf = float(np.max(np.abs(g))) if g.size else 0.0
        converged = g_inf < config.grad_tol

    model.weights = w
    model.epochs_run = epochs
    model.converged = converged
    model.final_nll = f * m  # report the sum-form NLL (without changing the optimum)
    return model


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def viterbi_decode(model: CrfModel, seq: LabeledSequence) -> list[str]:
    """Most probable legal tag sequence; ties break to the lowest tag index."""
    cols = model.position_columns(seq)
    W2 = model.weights[: model.n_obs * 5].reshape(model.n_obs, 5)
    T = model.transition_matrix()
    L = len(seq.tokens)
    emis = np.zeros((L, 5))
    for t, cc in enumerate(cols):
        for c in cc:
            emis[t] += W2[c]
    delta = emis[0].copy()
    back = np.zeros((L, 5), dtype=np.intp)
    for t in range(1, L):
        scores = delta[:, None] + T
        back[t] = np.argmax(scores, axis=0)  # first max <=> lowest tag index
        delta = scores[back[t], np.arange(5)] + emis[t]
    path = [int(np.argmax(delta))]
    for t in range(L - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return [TAGS[i] for i in path]


def document_phrases(
    model: CrfModel,
    doc: Document,
    variant: str,
    df_index: DfIndex,
    config: PipelineConfig | None = None,
) -> set[tuple[str, ...]]:
    """Decode every sentence of the document and pool the extracted phrases."""
    phrases: set[tuple[str, ...]] = set()
    for seq in build_sequences(doc, variant, df_index, config, labeled=False, active=model.active):
        tags = viterbi_decode(model, seq)
        phrases |= decode_spans(tags, seq.tokens)
    return phrases


def sequence_f1(model: CrfModel, sequences: Sequence[LabeledSequence]) -> float:
    """Micro-F1 of decoded spans against the encoded gold spans, pooled per doc."""
    by_doc: dict[str, tuple[set, set]] = {}
    for seq in sequences:
        if seq.tags is None:
            raise ValueError("sequence_f1 needs labeled sequences")
        got, want = by_doc.setdefault(seq.doc_id, (set(), set()))
        got |= decode_spans(viterbi_decode(model, seq), seq.tokens)
        want |= decode_spans(seq.tags, seq.tokens)
    counts = EvalCounts()
    for got, want in by_doc.values():
        if not want:
            continue
        counts = counts + EvalCounts(tp=len(got & want), te=len(got), ta=len(want))
    if counts.ta == 0:
        raise ValueError("no gold spans in the evaluation sequences")
    return prf(counts)[2]


# ---------------------------------------------------------------------------
# Feature ablation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationReport:
    baseline_f1: float
    removal_f1: Mapping[str, float]
    positive: tuple[str, ...]
    final: tuple[str, ...]

    def to_tsv(self) -> str:
        lines = ["features\tf1"]
        lines.append(f"all\t{self.baseline_f1:.6f}")
        for fid in FEATURE_IDS:
            if fid in self.removal_f1:
                lines.append(f"-{fid}\t{self.removal_f1[fid]:.6f}")
        lines.append("positive\t" + ",".join(self.positive))
        lines.append("final\t" + ",".join(self.final))
        return "\n".join(lines) + "\n"


def select_positive_features(
    baseline_f1: float,
    removal_f1: Mapping[str, float],
    mandatory: Sequence[str] = MANDATORY_FEATURES,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Features whose removal strictly hurts, and the final set with mandatory added.

    A feature has a positive effect exactly when leaving it out lowers F1
    below the all-features baseline. The final set is the positive set plus
    the mandatory features, in canonical order.
    """
    positive = tuple(
        fid for fid in FEATURE_IDS if fid in removal_f1 and removal_f1[fid] < baseline_f1
    )
    final_set = set(positive) | set(mandatory)
    final = tuple(fid for fid in FEATURE_IDS if fid in final_set)
    return positive, final


def ablate_features(
    train_seqs: Sequence[LabeledSequence],
    dev_seqs: Sequence[LabeledSequence],
    all_features: Sequence[str] = FEATURE_IDS,
    config: CrfConfig = CrfConfig(),
) -> AblationReport:
    """Leave-one-out feature ablation on a held-out development set.

    Trains one model on all features and one per left-out feature, measuring
    span micro-F1 on ``dev_seqs`` each time. Sequences must carry full
    feature vectors so subsets can be re-encoded without re-extraction.
    """
    all_features = tuple(all_features)
    if len(all_features) < 2:
        raise ValueError("ablation needs at least two features")
    base_model = train_crf(train_seqs, replace(config, active=all_features))
    baseline = sequence_f1(base_model, dev_seqs)
    removal: dict[str, float] = {}
    for fid in all_features:
        subset = tuple(f for f in all_features if f != fid)
        model = train_crf(train_seqs, replace(config, active=subset))
        removal[fid] = sequence_f1(model, dev_seqs)
    positive, final = select_positive_features(baseline, removal)
    return AblationReport(
        baseline_f1=baseline,
        removal_f1=removal,
        positive=positive,
        final=final,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_crf(model: CrfModel, path) -> None:
    """Versioned line-oriented text format; floats round-trip exactly via repr."""
    lines = [_MODEL_HEADER]
    lines.append(f"l2\t{model.l2!r}")
    lines.append("active\t" + "\t".join(model.active))
    lines.append(f"quantile_bins\t{model.bucketizer.quantile_bins}")
    lines.append(f"epochs\t{model.epochs_run}")
    lines.append(f"converged\t{int(model.converged)}")
    lines.append(f"final_nll\t{model.final_nll!r}")
    for fid in sorted(model.bucketizer.boundaries):
        vals = "\t".join(repr(b) for b in model.bucketizer.boundaries[fid])
        lines.append(f"boundary\t{fid}\t{vals}")
    W2 = model.weights[: model.n_obs * 5].reshape(model.n_obs, 5)
    for i, key in enumerate(model.obs_keys):
        vals = "\t".join(repr(float(x)) for x in W2[i])
        lines.append(f"wobs\t{key}\t{vals}")
    tw = model.weights[model.n_obs * 5 :]
    for k, (s, t) in enumerate(LEGAL_PAIRS):
        lines.append(f"wtrans\t{TAGS[s]}\t{TAGS[t]}\t{float(tw[k])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_crf(path) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _MODEL_HEADER:
        head = lines[0] if lines else "<empty>"
        raise ValueError(f"not a kex-crf model file (header {head!r})")
    l2 = 1.0
    active: tuple[str, ...] = ()
    quantile_bins = 8
    epochs = 0
    converged = False
    final_nll = math.nan
    boundaries: dict[str, tuple[float, ...]] = {}
    obs_keys: list[str] = []
    obs_weights: list[list[float]] = []
    trans: dict[tuple[int, int], float] = {}
    for ln in lines[1:]:
        parts = ln.split("\t")
        kind = parts[0]
        if kind == "l2":
            l2 = float(parts[1])
        elif kind == "active":
            active = tuple(parts[1:])
        elif kind == "quantile_bins":
            quantile_bins = int(parts[1])
        elif kind == "epochs":
            epochs = int(parts[1])
        elif kind == "converged":
            converged = bool(int(parts[1]))
        elif kind == "final_nll":
            final_nll = float(parts[1])
        elif kind == "boundary":
            boundaries[parts[1]] = tuple(float(x) for x in parts[2:])
        elif kind == "wobs":
            obs_keys.append(parts[1])
            obs_weights.append([float(x) for x in parts[2:]])
        elif kind == "wtrans":
            trans[(_TAG_INDEX[parts[1]], _TAG_INDEX[parts[2]])] = float(parts[3])
        else:
            raise ValueError(f"unknown record kind {kind!r} in model file")
    if set(trans) != set(LEGAL_PAIRS):
        raise ValueError("model file transition table does not match the legal pairs")
    weights = np.concatenate(
        [
            np.asarray(obs_weights, dtype=float).reshape(len(obs_keys) * 5)
            if obs_keys
            else np.zeros(0),
            np.asarray([trans[st] for st in LEGAL_PAIRS], dtype=float),
        ]
    )
    bucketizer = FeatureBucketizer(quantile_bins=quantile_bins, boundaries=boundaries)
    model = CrfModel(
        active=active,
        bucketizer=bucketizer,
        obs_keys=tuple(obs_keys),
        weights=weights,
        l2=l2,
        epochs_run=epochs,
        converged=converged,
        final_nll=final_nll,
    )
    return model
