"""Datasets of structured documents and their corpus variants.

A document carries its logical sections (title, abstract, introduction,
conclusion, first/last sentences of body paragraphs, reference titles, full
text) plus author-assigned gold keyphrases. A corpus variant selects a subset
of sections and concatenates them in a fixed order, which is how the toolkit
measures what each section contributes to keyphrase extraction.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .metrics import contains_subsequence, normalize_phrase, normalize_tokens
from .preprocess import PipelineConfig, preprocess

__all__ = [
    "Document",
    "CorpusVariant",
    "DatasetSplit",
    "CoverageReport",
    "DatasetError",
    "SECTION_ORDER",
    "VARIANT_CODES",
    "load_dataset",
    "save_dataset",
    "variant",
    "custom_variant",
    "assemble_variant",
    "split_dataset",
    "keyphrase_coverage",
]


class DatasetError(ValueError):
    """Raised when a dataset file violates the schema."""


# Section codes in their fixed assembly order.
SECTION_ORDER = ("T", "A", "I", "C", "Fp", "Lp", "R", "F")

_SECTION_FIELD = {
    "T": "title",
    "A": "abstract",
    "I": "introduction",
    "C": "conclusion",
    "Fp": "first_sentences",
    "Lp": "last_sentences",
    "R": "reference_titles",
    "F": "full_text",
}

_STR_FIELDS = ("id", "title", "abstract", "introduction", "conclusion", "full_text")
_LIST_FIELDS = ("first_sentences", "last_sentences", "reference_titles", "keyphrases")
_ALL_FIELDS = (
    "id",
    "title",
    "abstract",
    "introduction",
    "conclusion",
    "first_sentences",
    "last_sentences",
    "reference_titles",
    "full_text",
    "keyphrases",
)

# The canonical variant codes, keyed by code, valued by the ordered sections.
_CANONICAL: dict[str, tuple[str, ...]] = {
    "TA": ("T", "A"),
    "TAI": ("T", "A", "I"),
    "TAC": ("T", "A", "C"),
    "TAFp": ("T", "A", "Fp"),
    "TALp": ("T", "A", "Lp"),
    "TAR": ("T", "A", "R"),
    "TAF": ("T", "A", "F"),
    "TAFR": ("T", "A", "R", "F"),
    "TAICFpLp": ("T", "A", "I", "C", "Fp", "Lp"),
    "TAICFpLpR": ("T", "A", "I", "C", "Fp", "Lp", "R"),
}

VARIANT_CODES = tuple(_CANONICAL)


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    abstract: str
    introduction: str
    conclusion: str
    first_sentences: tuple[str, ...]
    last_sentences: tuple[str, ...]
    reference_titles: tuple[str, ...]
    full_text: str
    gold_keyphrases: tuple[str, ...]


@dataclass(frozen=True)
class CorpusVariant:
    code: str
    sections: tuple[str, ...]
    canonical: bool


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int


@dataclass(frozen=True)
class CoverageReport:
    """Coverage of gold keyphrases by section sets, counted per (doc, phrase)."""

    coverage: dict[str, float]
    covered: dict[str, int]
    reference_only_covered: int
    reference_only_coverage: float
    total_gold: int
    n_docs: int
    avg_gold_per_doc: float
    length_distribution: dict[int, tuple[int, float]]

    def to_tsv(self) -> str:
        lines = ["sections\tcovered\ttotal\tfraction"]
        for key in self.coverage:
            lines.append(f"{key}\t{self.covered[key]}\t{self.total_gold}\t{self.coverage[key]:.6f}")
        return "\n".join(lines) + "\n"


def load_dataset(path, format: str = "jsonl") -> list[Document]:
    """Load and validate a dataset file: one JSON object per line.

    Every field must be present (possibly empty), ids must be unique, and
    every document needs at least one gold keyphrase. Errors name the
    offending line and field.
    """
    if format != "jsonl":
        raise DatasetError(f"unsupported dataset format {format!r}")
    docs: list[Document] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise DatasetError(f"line {lineno}: expected a JSON object")
            for name in _ALL_FIELDS:
                if name not in obj:
                    raise DatasetError(f"missing field {name} at line {lineno}")
            unknown = set(obj) - set(_ALL_FIELDS)
            if unknown:
                raise DatasetError(f"line {lineno}: unknown fields {sorted(unknown)}")
            for name in _STR_FIELDS:
                if not isinstance(obj[name], str):
                    raise DatasetError(f"line {lineno}: field {name} must be a string")
            for name in _LIST_FIELDS:
                value = obj[name]
                if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
                    raise DatasetError(f"line {lineno}: field {name} must be a list of strings")
            if not obj["id"]:
                raise DatasetError(f"line {lineno}: empty id")
            if obj["id"] in seen_ids:
                raise DatasetError(f"duplicate id {obj['id']!r} at line {lineno}")
            if not obj["keyphrases"]:
                raise DatasetError(f"line {lineno}: document {obj['id']!r} has no keyphrases")
            seen_ids.add(obj["id"])
            docs.append(
                Document(
                    id=obj["id"],
                    title=obj["title"],
                    abstract=obj["abstract"],
                    introduction=obj["introduction"],
                    conclusion=obj["conclusion"],
                    first_sentences=tuple(obj["first_sentences"]),
                    last_sentences=tuple(obj["last_sentences"]),
                    reference_titles=tuple(obj["reference_titles"]),
                    full_text=obj["full_text"],
                    gold_keyphrases=tuple(obj["keyphrases"]),
                )
            )
    return docs


def save_dataset(docs: Iterable[Document], path) -> None:
    """Write documents back to the line-oriented JSON format."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            obj = {
                "id": d.id,
                "title": d.title,
                "abstract": d.abstract,
                "introduction": d.introduction,
                "conclusion": d.conclusion,
                "first_sentences": list(d.first_sentences),
                "last_sentences": list(d.last_sentences),
                "reference_titles": list(d.reference_titles),
                "full_text": d.full_text,
                "keyphrases": list(d.gold_keyphrases),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def variant(code: str) -> CorpusVariant:
    """Look up one of the canonical corpus variants by its code."""
    if code not in _CANONICAL:
        raise ValueError(f"unknown corpus variant {code!r}; known: {', '.join(VARIANT_CODES)}")
    return CorpusVariant(code=code, sections=_CANONICAL[code], canonical=True)


def custom_variant(code: str, sections: Sequence[str]) -> CorpusVariant:
    """Build a non-canonical variant from an explicit section subset.

    Sections are reordered into the fixed assembly order. Title and abstract
    are mandatory in every variant.
    """
    bad = [s for s in sections if s not in SECTION_ORDER]
    if bad:
        raise ValueError(f"unknown section codes {bad}; known: {', '.join(SECTION_ORDER)}")
    ordered = tuple(s for s in SECTION_ORDER if s in set(sections))
    if "T" not in ordered or "A" not in ordered:
        raise ValueError("every corpus variant must include sections T and A")
    return CorpusVariant(code=code, sections=ordered, canonical=False)


def _section_pieces(doc: Document, section: str) -> list[str]:
    value = getattr(doc, _SECTION_FIELD[section])
    if isinstance(value, tuple):
        return [x for x in value if x]
    return [value] if value else []


def assemble_variant(doc: Document, var: CorpusVariant | str) -> str:
    """Concatenate the variant's sections in fixed order, joined by '. '.

    List-valued sections contribute one piece per element. Empty sections
    contribute nothing, so they never inject separators.
    """
    if isinstance(var, str):
        var = variant(var)
    pieces: list[str] = []
    for section in var.sections:
        pieces.extend(_section_pieces(doc, section))
    return ". ".join(pieces)


def split_dataset(docs: Sequence[Document], seed: int) -> DatasetSplit:
    """Deterministic 8:2 train/test split of document ids.

    Ids are shuffled with a seeded Fisher-Yates shuffle; the test set size is
    round(0.2 * N) and the remainder trains. Same seed, same split.
    """
    n = len(docs)
    if n < 5:
        raise ValueError(f"dataset too small to split: {n} documents (need at least 5)")
    ids = [d.id for d in docs]
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_test = round(0.2 * n)
    return DatasetSplit(
        train_ids=tuple(ids[: n - n_test]),
        test_ids=tuple(ids[n - n_test :]),
        seed=seed,
    )


def _variant_key(sections: Sequence[str]) -> str:
    return "+".join(sections)


def keyphrase_coverage(
    docs: Sequence[Document],
    section_sets: Sequence[Sequence[str]],
    config: PipelineConfig | None = None,
) -> CoverageReport:
    """Fraction of gold keyphrases findable in each requested section set.

    A gold phrase counts as covered when its normalized lemma sequence occurs
    contiguously in the normalized text assembled from the sections. Counting
    is per (document, phrase) pair; gold phrases are deduplicated per document
    after normalization. The report always includes the share of phrases
    covered by the reference titles but not by title+abstract.
    """
    if not docs:
        raise ValueError("coverage needs at least one document")
    config = config or PipelineConfig.default()

    requested = [tuple(s) for s in section_sets]
    for sections in requested:
        bad = [s for s in sections if s not in SECTION_ORDER]
        if bad:
            raise ValueError(f"unknown section codes {bad}")

    # Haystacks that are always needed for the reference-only statistic.
    needed: list[tuple[str, ...]] = list(dict.fromkeys(requested + [("T", "A"), ("R",)]))

    total_gold = 0
    covered = {(_variant_key(s)): 0 for s in requested}
    ref_only = 0
    length_counter: Counter[int] = Counter()

    for doc in docs:
        gold = {normalize_phrase(g, config) for g in doc.gold_keyphrases}
        gold.discard(())
        total_gold += len(gold)
        for g in gold:
            length_counter[len(g)] += 1

        haystacks: dict[tuple[str, ...], tuple[str, ...]] = {}
        for sections in needed:
            ordered = tuple(s for s in SECTION_ORDER if s in set(sections))
            var = CorpusVariant(code=_variant_key(sections), sections=ordered, canonical=False)
            text = assemble_variant(doc, var)
            haystacks[sections] = normalize_tokens(preprocess(text, config))

        for g in gold:
            for sections in requested:
                if contains_subsequence(haystacks[sections], g):
                    covered[_variant_key(sections)] += 1
            in_ta = contains_subsequence(haystacks[("T", "A")], g)
            in_r = contains_subsequence(haystacks[("R",)], g)
            if in_r and not in_ta:
                ref_only += 1

    if total_gold == 0:
        raise ValueError("no usable gold keyphrases after normalization")

    coverage = {k: covered[k] / total_gold for k in covered}
    length_distribution = {
        length: (count, count / total_gold) for length, count in sorted(length_counter.items())
    }
    return CoverageReport(
        coverage=coverage,
        covered=covered,
        reference_only_covered=ref_only,
        reference_only_coverage=ref_only / total_gold,
        total_gold=total_gold,
        n_docs=len(docs),
        avg_gold_per_doc=total_gold / len(docs),
        length_distribution=length_distribution,
    )
