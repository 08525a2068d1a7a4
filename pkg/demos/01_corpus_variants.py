"""Tour of corpus variants: what each section set makes reachable.

Every document carries its logical sections (title, abstract, introduction,
conclusion, paragraph first/last sentences, reference titles, full text).
A variant code picks which sections become the extraction text. This demo
shows the assembly on one document, then measures, across the whole bundled
dataset, how gold-keyphrase coverage grows as sections are added.

Run with: python3 demos/01_corpus_variants.py
"""

from kex.corpus import VARIANT_CODES, assemble_variant, keyphrase_coverage, load_dataset, variant
from kex.fixture import bundled_fixture_path


def shorten(text, limit=110):
    return text if len(text) <= limit else text[: limit - 3] + "..."


def main():
    docs = load_dataset(bundled_fixture_path())
    doc = docs[0]

    print("= one document, three variants =")
    print(f"id:    {doc.id}")
    print(f"title: {doc.title}")
    print(f"gold:  {', '.join(doc.gold_keyphrases)}")
    print()
    for code in ("TA", "TAI", "TAR"):
        sections = variant(code).sections
        print(f"{code:4} sections {'+'.join(sections):12} -> {shorten(assemble_variant(doc, code))}")
    print()

    print("= coverage: which gold phrases occur in the assembled text =")
    section_sets = [("T",), ("T", "A"), ("T", "A", "I"), ("T", "A", "R"), ("T", "A", "F")]
    report = keyphrase_coverage(docs, section_sets)
    print(f"{'sections':12} {'covered':>7} {'of':>4} {'fraction':>9}")
    for key, frac in report.coverage.items():
        print(f"{key:12} {report.covered[key]:7d} {report.total_gold:4d} {frac:9.3f}")
    print()
    print(
        f"reference-only phrases (in R, absent from T+A): "
        f"{report.reference_only_covered} of {report.total_gold} "
        f"({report.reference_only_coverage:.3f})"
    )
    print()

    print("= gold phrase length profile =")
    for length, (count, prop) in sorted(report.length_distribution.items()):
        print(f"{length}-word: {count:3d} ({prop:.2%})")
    print()
    print(f"all variant codes: {', '.join(VARIANT_CODES)}")


if __name__ == "__main__":
    main()
