"""Text preprocessing pipeline: tokenize, POS-tag, flag stopwords and symbols, lemmatize.

The pipeline is self-contained and rule-based so that results are fully
deterministic and reproducible without external model downloads. Stages flag
tokens instead of deleting them, which keeps token indices stable for
downstream span arithmetic; consumers decide what to skip.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

__all__ = [
    "Token",
    "PipelineConfig",
    "tokenize",
    "pos_tag",
    "filter_stopwords",
    "remove_symbols",
    "lemmatize",
    "lemmatize_word",
    "preprocess",
    "sentence_spans",
    "word_tokens",
    "SENTENCE_END",
]

# A word is a maximal run of letters/digits, allowing internal hyphens and
# apostrophes ("state-of-the-art", "don't"). Underscore is excluded from \w.
_WORD_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*", re.UNICODE)

SENTENCE_END = frozenset({".", "!", "?"})

_POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "OTHER")

# Suffix rules applied after lexicon lookup fails; first match wins.
_SUFFIX_RULES = (
    ("tion", "NOUN"),
    ("ment", "NOUN"),
    ("ness", "NOUN"),
    ("ity", "NOUN"),
    ("ous", "ADJ"),
    ("ful", "ADJ"),
    ("ive", "ADJ"),
    ("al", "ADJ"),
    ("ly", "ADV"),
    ("ize", "VERB"),
    ("ate", "VERB"),
)


@dataclass
class Token:
    """One token of a document with its analysis flags.

    ``index`` is the position in the full token sequence, symbols included,
    so spans computed on any downstream view can always be mapped back.
    """

    surface: str
    index: int
    lemma: str = ""
    pos: str = ""
    is_stopword: bool = False
    is_symbol: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    """Immutable lexicon bundle shared by all pipeline stages."""

    stopwords: frozenset[str]
    pos_lexicon: Mapping[str, str]
    lemma_exceptions: Mapping[str, str]

    @staticmethod
    def default() -> "PipelineConfig":
        return _default_config()

    @staticmethod
    def from_files(stopwords_path, pos_lexicon_path, lemma_exceptions_path) -> "PipelineConfig":
        return PipelineConfig(
            stopwords=frozenset(_read_list(open(stopwords_path, encoding="utf-8").read())),
            pos_lexicon=_read_tsv(open(pos_lexicon_path, encoding="utf-8").read(), "pos lexicon"),
            lemma_exceptions=_read_tsv(
                open(lemma_exceptions_path, encoding="utf-8").read(), "lemma exceptions"
            ),
        )


def _read_list(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(line.lower())
    return out


def _read_tsv(text: str, what: str) -> dict[str, str]:
    table: dict[str, str] = {}
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{what}: line {i} is not 'key<TAB>value': {line!r}")
        table[parts[0].strip().lower()] = parts[1].strip()
    return table


def _data_text(name: str) -> str:
    return resources.files("kex.data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _default_config() -> PipelineConfig:
    pos = _read_tsv(_data_text("pos_lexicon.tsv"), "pos lexicon")
    bad = {w: t for w, t in pos.items() if t not in _POS_TAGS}
    if bad:
        raise ValueError(f"pos lexicon: unknown tags {bad}")
    return PipelineConfig(
        stopwords=frozenset(_read_list(_data_text("stopwords.txt"))),
        pos_lexicon=pos,
        lemma_exceptions=_read_tsv(_data_text("lemma_exceptions.tsv"), "lemma exceptions"),
    )


def tokenize(text: str) -> list[Token]:
    """Split text into word and symbol tokens.

    Words are maximal runs of letters/digits with internal hyphens or
    apostrophes; every other non-space character becomes a single-character
    symbol token. Whitespace only separates.
    """
    tokens: list[Token] = []
    pos = 0

    def emit_symbols(chunk: str) -> None:
        for ch in chunk:
            if not ch.isspace():
                tokens.append(Token(surface=ch, index=len(tokens)))

    for m in _WORD_RE.finditer(text):
        emit_symbols(text[pos : m.start()])
        tokens.append(Token(surface=m.group(), index=len(tokens)))
        pos = m.end()
    emit_symbols(text[pos:])
    return tokens


def _is_word(surface: str) -> bool:
    return _WORD_RE.fullmatch(surface) is not None


def lemmatize_word(word: str, config: PipelineConfig | None = None) -> str:
    """Lemmatize a single word: lowercase, exception map, then suffix stripping.

    Rules are applied until a fixed point so the function is idempotent:
    lemmatize_word(lemmatize_word(w)) == lemmatize_word(w). The exception map
    is consulted on every iteration and its value is final.
    """
    config = config or PipelineConfig.default()
    w = word.lower()
    exceptions = config.lemma_exceptions
    while True:
        if w in exceptions:
            return exceptions[w]
        if w.endswith("ies") and len(w) >= 4:
            nxt = w[:-3] + "y"
        elif w.endswith("sses"):
            nxt = w[:-2]
        elif w.endswith("es") and len(w) - 2 >= 3:
            nxt = w[:-2]
        elif w.endswith("s") and not w.endswith("ss") and len(w) - 1 >= 3:
            nxt = w[:-1]
        else:
            return w
        if nxt == w:  # cannot happen with the rules above, but stay safe
            return w
        w = nxt


def _suffix_tag(word: str) -> str | None:
    for suffix, tag in _SUFFIX_RULES:
        if word.endswith(suffix) and len(word) >= len(suffix) + 2:
            return tag
    return None


def pos_tag(tokens: Iterable[Token], config: PipelineConfig | None = None) -> list[Token]:
    """Assign one of NOUN/VERB/ADJ/ADV/OTHER to every token.

    Symbols get OTHER. Words are looked up in the lexicon by their lemma
    candidate, then suffix rules fire on the lowercase surface, and anything
    still unknown defaults to NOUN (the most conservative choice for
    candidate-phrase recall).
    """
    config = config or PipelineConfig.default()
    out = []
    for tok in tokens:
        if not _is_word(tok.surface):
            tag = "OTHER"
        else:
            candidate = lemmatize_word(tok.surface, config)
            tag = config.pos_lexicon.get(candidate)
            if tag is None:
                tag = _suffix_tag(tok.surface.lower()) or "NOUN"
        out.append(dataclasses.replace(tok, pos=tag))
    return out


def filter_stopwords(tokens: Iterable[Token], config: PipelineConfig | None = None) -> list[Token]:
    """Flag stopwords by lowercase surface. Tokens are kept, not removed."""
    config = config or PipelineConfig.default()
    return [
        dataclasses.replace(tok, is_stopword=tok.surface.lower() in config.stopwords)
        for tok in tokens
    ]


def remove_symbols(tokens: Iterable[Token]) -> list[Token]:
    """Flag symbol tokens. Tokens are kept so indices stay stable."""
    return [dataclasses.replace(tok, is_symbol=not _is_word(tok.surface)) for tok in tokens]


def lemmatize(tokens: Iterable[Token], config: PipelineConfig | None = None) -> list[Token]:
    """Fill the lemma of every token (symbols keep their surface).

    The lemma is always computed from the surface form, so re-running this
    stage on its own output changes nothing.
    """
    config = config or PipelineConfig.default()
    out = []
    for tok in tokens:
        if _is_word(tok.surface):
            lemma = lemmatize_word(tok.surface, config)
        else:
            lemma = tok.surface
        out.append(dataclasses.replace(tok, lemma=lemma))
    return out


def preprocess(text: str, config: PipelineConfig | None = None) -> list[Token]:
    """Run the full pipeline: tokenize, tag, flag stopwords/symbols, lemmatize."""
    config = config or PipelineConfig.default()
    tokens = tokenize(text)
    tokens = pos_tag(tokens, config)
    tokens = filter_stopwords(tokens, config)
    tokens = remove_symbols(tokens)
    tokens = lemmatize(tokens, config)
    return tokens


def sentence_spans(tokens: list[Token]) -> list[list[Token]]:
    """Split a token list into sentences at '.', '!' and '?' symbol tokens.

    The boundary token closes its sentence. Empty sentences are dropped.
    """
    sentences: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        current.append(tok)
        if tok.surface in SENTENCE_END and not _is_word(tok.surface):
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return [s for s in sentences if s]


def word_tokens(tokens: Iterable[Token]) -> list[Token]:
    """All non-symbol tokens, in order."""
    return [t for t in tokens if _is_word(t.surface)]
