"""Synthetic fixtures: a 20-document dataset and a separable CRF training set.

The bundled dataset is small enough for the whole benchmark matrix to run in
continuous integration, yet structured like the real thing: every document
has gold phrases that appear in its title/abstract and gold phrases findable
only in its reference titles, so reference-aware corpus variants measurably
beat title+abstract alone.

Construction notes, because the ranking argument is delicate:

* Topic words are unique across documents, so they share one idf level and
  rank purely by frequency; filler words recur in every document and score
  near zero.
* Multi-word gold phrases start with an adjective that also occurs once on
  its own. The phrase mean therefore strictly exceeds the weight of its
  noun sub-span, which otherwise ties with the full phrase and crowds the
  top ranks.
* The reference-only phrase is mentioned in three reference titles, one more
  than the abstract-only phrase's two mentions, so on reference-aware
  variants it lands above the abstract phrase but below the title phrase.
"""

from __future__ import annotations

import argparse
import random
from importlib import resources

from .corpus import Document, save_dataset
from .crf import FeatureVector, LabeledSequence, encode_tags
from .preprocess import PipelineConfig, Token

__all__ = [
    "build_synthetic_dataset",
    "bundled_fixture_path",
    "separable_sequences",
    "FIXTURE_SEED",
]

FIXTURE_SEED = 20210
_FIXTURE_NAME = "synthetic20.jsonl"

# Adjectives end in -ive/-al so the suffix tagger marks them ADJ, and none
# end in -s so lemmatization leaves them alone.
_ADJS = [
    "adaptive", "recursive", "generative", "discriminative", "declarative",
    "iterative", "predictive", "selective", "additive", "transitive",
    "associative", "cumulative", "interactive", "inductive", "deductive",
    "attentive", "expressive", "progressive", "collective", "primitive",
    "intuitive", "exhaustive", "adhesive", "cohesive", "passive",
    "spectral", "relational", "contextual", "hierarchical", "differential",
    "combinatorial", "adversarial", "orthogonal", "polynomial", "incremental",
    "compositional", "statistical", "categorical", "numerical", "topological",
    "logical", "marginal", "thermal", "seasonal", "regional",
    "diagonal", "minimal", "maximal", "optimal", "fractal",
    "modal", "causal", "spatial", "temporal", "lexical",
    "radial", "axial", "focal", "nominal", "ordinal",
    "cardinal", "integral", "structural", "procedural",
]

_NOUNS = [
    "quantization", "percolation", "kernel", "manifold", "entropy", "wavelet",
    "curvature", "automaton", "ontology", "lattice", "tensor", "gradient",
    "embedding", "annotation", "segmentation", "taxonomy", "topology",
    "recursion", "inference", "alignment", "compression", "encryption",
    "morphology", "lexicon", "parser", "grammar", "pipeline", "scheduler",
    "compiler", "allocator", "predictor", "sampler", "encoder", "decoder",
    "interpolation", "extrapolation", "convolution", "factorization",
    "regression", "simulation", "triangulation", "hashing", "caching",
    "tokenization", "normalization", "calibration", "propagation",
    "attenuation", "resonance", "diffusion", "turbulence", "viscosity",
    "elasticity", "homology", "isomorphism", "bisection", "projection",
    "rotation", "permutation", "summarization", "indexing", "ranking",
    "retrieval", "crawling", "deduplication", "stemming", "smoothing",
    "pruning", "batching", "sharding", "distillation", "vectorization",
    "tessellation", "annealing", "backtracking", "memoization", "parallax",
    "refraction", "oscillation", "modulation", "demodulation", "equalization",
    "filtration", "sedimentation", "coagulation", "reverberation",
    "polarization", "collimation", "levitation", "percussion", "absorption",
    "adsorption", "convection", "advection", "attenuator",
]

# Small pool so fillers recur across documents and their idf stays near zero.
_FILLERS = [
    "system", "method", "approach", "result", "experiment", "evaluation",
    "framework", "process", "information", "design", "model", "feature",
]


def _cap(phrase: str) -> str:
    return phrase[0].upper() + phrase[1:]


def build_synthetic_dataset(n_docs: int = 20, seed: int = FIXTURE_SEED) -> list[Document]:
    """Generate the deterministic synthetic dataset.

    Each document gets four gold phrases: two findable in title+abstract,
    and two that occur only in the reference titles and the full text.
    """
    rng = random.Random(seed)
    adjs = _ADJS.copy()
    nouns = _NOUNS.copy()
    rng.shuffle(adjs)
    rng.shuffle(nouns)

    def take(pool: list[str], k: int) -> list[str]:
        if len(pool) < k:  # only reachable for n_docs beyond the bundled 20
            pool.extend(rng.sample(_ADJS if pool is adjs else _NOUNS, 10))
        return [pool.pop() for _ in range(k)]

    docs = []
    for i in range(1, n_docs + 1):
        a1, a2, a3 = take(adjs, 3)
        three_word = i % 4 == 0
        ns = take(nouns, 4 + three_word)
        n1, n2, n4, n5 = ns[0], ns[1], ns[2], ns[3]
        g1 = f"{a1} {n1}"                                  # title + abstract
        g2 = f"{a3} {n2} {ns[4]}" if three_word else f"{a3} {n2}"  # abstract only
        g3 = f"{a2} {n4}"                                  # reference titles only
        g4 = n5                                            # reference titles only

        f = rng.sample(_FILLERS, 8)
        title = f"{_cap(g1)} for {f[0]} {f[1]} {f[2]}"
        abstract = " ".join(
            [
                f"This {f[0]} studies {g1} in a {f[1]} {f[2]}.",
                f"We describe {g2} and compare it with a {f[3]} {f[4]}.",
                f"The {g1} {f[5]} improves the {f[6]} of the {f[7]}.",
                f"Experiments with {g2} show strong {f[6]} on every {f[2]}.",
                f"The {f[3]} remains {a1} and keeps the {f[5]} {a3} in practice.",
            ]
        )
        introduction = " ".join(
            [
                f"The {f[1]} {f[2]} has become a central {f[5]} in recent years.",
                f"Prior work on {g2} leaves the {f[6]} {f[3]} open.",
                f"We revisit {g1} and give a simple {f[4]}.",
            ]
        )
        conclusion = " ".join(
            [
                f"We presented {g2} together with a practical {f[4]}.",
                f"Future work will extend the {f[0]} to a larger {f[2]}.",
            ]
        )
        first_sentences = [
            f"The {f[3]} begins with a review of the {f[1]} {f[2]}.",
            f"We then define {g2} and its main {f[5]}.",
            f"A {f[4]} based on {g1} follows.",
        ]
        last_sentences = [
            f"This completes the {f[5]} of the {f[0]}.",
            f"The {f[6]} of {g2} is summarized above.",
            f"Limitations of the {f[4]} are discussed next.",
        ]
        reference_titles = [
            f"A survey of {g3}",
            f"{_cap(g3)} methods for large {f[2]} collections",
            f"Improving {g3} in the modern {f[0]}",
            f"Understanding {g4} in {f[1]} {f[2]} design",
            f"On {g4} and the {f[3]} {f[4]}",
        ]
        body = " ".join(
            [
                f"The core of the {f[0]} is a {g3} stage.",
                f"A dedicated {g4} module handles the {f[6]} {f[3]}.",
                f"Both {g3} and {g4} interact with the {g1} {f[5]}.",
                f"We tune the {g3} stage on a held-out {f[2]}.",
            ]
        )
        full_text = " ".join([title + ".", abstract, introduction, body, conclusion])
        docs.append(
            Document(
                id=f"d{i:02d}",
                title=title,
                abstract=abstract,
                introduction=introduction,
                conclusion=conclusion,
                first_sentences=tuple(first_sentences),
                last_sentences=tuple(last_sentences),
                reference_titles=tuple(reference_titles),
                full_text=full_text,
                gold_keyphrases=(g1, g2, g3, g4),
            )
        )
    return docs


def bundled_fixture_path() -> str:
    """Filesystem path of the packaged 20-document dataset."""
    return str(resources.files("kex.data").joinpath(_FIXTURE_NAME))


def separable_sequences(
    n_seqs: int = 60,
    seed: int = 7,
    config: PipelineConfig | None = None,
) -> list[LabeledSequence]:
    """Labeled sequences where an in-title flag perfectly marks keyphrase tokens.

    Key spans are either one noun (tagged key_S) or an adjective-noun pair
    (key_B key_E); the in_title feature is 1 exactly on key tokens and the
    POS feature separates pair starts from singletons, so a CRF that learns
    must reach (near-)perfect training F1.
    """
    config = config or PipelineConfig.default()
    rng = random.Random(seed)
    sequences = []
    for s in range(n_seqs):
        words: list[tuple[str, str, int]] = []  # (surface, pos, in_title)
        gold: list[str] = []
        n_chunks = rng.randint(2, 4)
        for c in range(n_chunks):
            for _ in range(rng.randint(1, 3)):
                words.append((f"fill{rng.randint(0, 5)}", "NOUN", 0))
            key_noun = f"key{s}x{c}"
            if rng.random() < 0.5:
                words.append((key_noun, "NOUN", 1))
                gold.append(key_noun)
            else:
                key_adj = f"adj{s}x{c}"
                words.append((key_adj, "ADJ", 1))
                words.append((key_noun, "NOUN", 1))
                gold.append(f"{key_adj} {key_noun}")
        words.append((f"fill{rng.randint(0, 5)}", "NOUN", 0))

        tokens = [
            Token(surface=w, index=k, lemma=w, pos=p) for k, (w, p, _) in enumerate(words)
        ]
        features = [FeatureVector(pos=p, in_title=flag) for (_, p, flag) in words]
        tags = encode_tags(tokens, gold, config)
        sequences.append(
            LabeledSequence(
                doc_id=f"synth{s:02d}",
                sent_index=0,
                tokens=tokens,
                features=features,
                tags=tags,
            )
        )
    return sequences


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="regenerate the bundled synthetic dataset")
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--docs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=FIXTURE_SEED)
    args = parser.parse_args(argv)
    save_dataset(build_synthetic_dataset(args.docs, args.seed), args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
