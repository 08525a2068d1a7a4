"""Reference-aware keyphrase extraction toolkit and benchmark harness.

The package is organized by pipeline stage:

* :mod:`kex.corpus`     dataset loading, corpus variants, splits, coverage
* :mod:`kex.preprocess` tokenization, POS tagging, lemmatization, stopwords
* :mod:`kex.rank`       tf-idf and TextRank word scoring, candidate phrases
* :mod:`kex.nb`         binned Naive Bayes ranking over candidate features
* :mod:`kex.crf`        linear-chain CRF sequence labelling with ablation
* :mod:`kex.metrics`    exact-match evaluation, reports, paired t-test
* :mod:`kex.fixture`    bundled synthetic dataset and training fixtures
* :mod:`kex.cli`        the ``kex`` command line
"""

from .corpus import (
    CorpusVariant,
    CoverageReport,
    DatasetError,
    DatasetSplit,
    Document,
    SECTION_ORDER,
    VARIANT_CODES,
    assemble_variant,
    custom_variant,
    keyphrase_coverage,
    load_dataset,
    save_dataset,
    split_dataset,
    variant,
)
from .crf import (
    FEATURE_IDS,
    MANDATORY_FEATURES,
    TAGS,
    AblationReport,
    CrfConfig,
    CrfModel,
    FeatureVector,
    LabeledSequence,
    ablate_features,
    build_sequences,
    decode_spans,
    document_phrases,
    encode_tags,
    extract_features,
    legal_transition_mask,
    load_crf,
    nll_and_gradient,
    save_crf,
    select_positive_features,
    sequence_f1,
    train_crf,
    viterbi_decode,
)
from .fixture import build_synthetic_dataset, bundled_fixture_path, separable_sequences
from .metrics import (
    EvalCounts,
    EvalReport,
    ResultRow,
    TimingReport,
    TTestResult,
    match_phrases,
    normalize_phrase,
    paired_t_test,
    prf,
    regularized_incomplete_beta,
    render_report,
    student_t_sf,
    timing_ratios,
)
from .nb import (
    KeaFeatures,
    NbModel,
    compute_kea_features,
    label_candidates,
    load_nb,
    posterior,
    rank_candidates,
    save_nb,
    train_nb,
)
from .preprocess import (
    PipelineConfig,
    Token,
    lemmatize_word,
    pos_tag,
    preprocess,
    sentence_spans,
    tokenize,
)
from .rank import (
    CandidatePhrase,
    DfIndex,
    WordGraph,
    build_df_index,
    build_word_graph,
    extract_candidates,
    maximal_phrase_spans,
    phrase_weight,
    score_candidates,
    textrank_scores,
    tfidf_score,
    tfidf_scores,
    top_n_phrases,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # corpus
    "CorpusVariant", "CoverageReport", "DatasetError", "DatasetSplit", "Document",
    "SECTION_ORDER", "VARIANT_CODES", "assemble_variant", "custom_variant",
    "keyphrase_coverage", "load_dataset", "save_dataset", "split_dataset", "variant",
    # preprocess
    "PipelineConfig", "Token", "lemmatize_word", "pos_tag", "preprocess",
    "sentence_spans", "tokenize",
    # rank
    "CandidatePhrase", "DfIndex", "WordGraph", "build_df_index", "build_word_graph",
    "extract_candidates", "maximal_phrase_spans", "phrase_weight", "score_candidates",
    "textrank_scores", "tfidf_score", "tfidf_scores", "top_n_phrases",
    # nb
    "KeaFeatures", "NbModel", "compute_kea_features", "label_candidates", "load_nb",
    "posterior", "rank_candidates", "save_nb", "train_nb",
    # crf
    "FEATURE_IDS", "MANDATORY_FEATURES", "TAGS", "AblationReport", "CrfConfig",
    "CrfModel", "FeatureVector", "LabeledSequence", "ablate_features",
    "build_sequences", "decode_spans", "document_phrases", "encode_tags",
    "extract_features", "legal_transition_mask", "load_crf", "nll_and_gradient",
    "save_crf", "select_positive_features", "sequence_f1", "train_crf",
    "viterbi_decode",
    # metrics
    "EvalCounts", "EvalReport", "ResultRow", "TimingReport", "TTestResult",
    "match_phrases", "normalize_phrase", "paired_t_test", "prf",
    "regularized_incomplete_beta", "render_report", "student_t_sf", "timing_ratios",
    # fixture
    "build_synthetic_dataset", "bundled_fixture_path", "separable_sequences",
]
