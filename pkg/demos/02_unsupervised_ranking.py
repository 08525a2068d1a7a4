"""Unsupervised ranking: tfidf and graph scores turned into phrases.

Both extractors share the same skeleton: preprocess the variant text, score
individual words, collect (adjective)*(noun)+ candidate spans, weight each
span by the mean of its member word scores, and keep the top n. They differ
only in the word scorer, so this demo runs them side by side on one document
and shows where the rankings disagree.

Run with: python3 demos/02_unsupervised_ranking.py
"""

from kex.corpus import assemble_variant, load_dataset
from kex.fixture import bundled_fixture_path
from kex.preprocess import preprocess
from kex.rank import (
    build_df_index,
    build_word_graph,
    extract_candidates,
    score_candidates,
    textrank_scores,
    tfidf_scores,
    top_n_phrases,
)

VARIANT = "TAR"
TOP_N = 5


def main():
    docs = load_dataset(bundled_fixture_path())
    tokens = {d.id: preprocess(assemble_variant(d, VARIANT)) for d in docs}
    df_index = build_df_index(list(tokens.values()))

    doc = docs[0]
    doc_tokens = tokens[doc.id]
    print(f"document {doc.id}: {doc.title}")
    print(f"gold: {', '.join(doc.gold_keyphrases)}")
    print()

    tfidf = tfidf_scores(doc_tokens, df_index)
    print("= highest-weight words (tfidf: relative frequency x smoothed idf) =")
    for word, w in sorted(tfidf.items(), key=lambda kv: -kv[1])[:8]:
        print(f"  {word:16} {w:.4f}")
    print()

    graph = build_word_graph(doc_tokens)
    pagerank = textrank_scores(graph)
    print(f"= co-occurrence graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges =")
    for word, w in sorted(pagerank.items(), key=lambda kv: -kv[1])[:8]:
        print(f"  {word:16} {w:.4f}")
    print()

    candidates = extract_candidates(doc_tokens)
    print(f"{len(candidates)} candidate spans match (adjective)*(noun)+")
    print()

    for name, weights in (("tfidf", tfidf), ("textrank", pagerank)):
        top = top_n_phrases(score_candidates(candidates, weights, source=name), TOP_N)
        print(f"= top {TOP_N} phrases by {name} =")
        for rank, cand in enumerate(top, start=1):
            hit = " ".join(cand.lemmas) in {g.lower() for g in doc.gold_keyphrases}
            marker = "*" if hit else " "
            print(f" {marker}{rank}. {' '.join(cand.lemmas):28} {cand.weight:.4f}")
        print()
    print("starred rows are gold keyphrases")


if __name__ == "__main__":
    main()
