"""Supervised extraction: a discretized naive Bayes ranker and a tag-sequence CRF.

The naive Bayes model scores each candidate from two features (mean member
tfidf and relative first occurrence), discretized into equal-frequency bins.
The CRF instead labels every word token with one of five tags (single /
begin / middle / end / none) and reads phrases off the decoded tag runs,
which lets it use per-token evidence such as "this token's phrase occurs in
a reference title".

Run with: python3 demos/03_supervised_models.py
"""

from kex.corpus import assemble_variant, load_dataset, split_dataset
from kex.crf import CrfConfig, build_sequences, document_phrases, sequence_f1, train_crf
from kex.fixture import bundled_fixture_path
from kex.metrics import EvalCounts, match_phrases, prf
from kex.nb import compute_kea_features, label_candidates, rank_candidates, train_nb
from kex.preprocess import preprocess
from kex.rank import build_df_index, extract_candidates

VARIANT = "TAR"
SEED = 42


def split_docs(docs, seed):
    split = split_dataset(docs, seed)
    by_id = {d.id: d for d in docs}
    return [by_id[i] for i in split.train_ids], [by_id[i] for i in split.test_ids]


def main():
    docs = load_dataset(bundled_fixture_path())
    train_docs, test_docs = split_docs(docs, SEED)
    print(f"{len(train_docs)} training documents, {len(test_docs)} held out (seed {SEED})")
    print()

    tokens = {d.id: preprocess(assemble_variant(d, VARIANT)) for d in train_docs}
    df_train = build_df_index(list(tokens.values()))

    print("= naive Bayes ranker =")
    labeled = []
    for d in train_docs:
        cands = extract_candidates(tokens[d.id])
        feats = compute_kea_features(tokens[d.id], cands, df_train)
        labels = label_candidates(cands, d.gold_keyphrases)
        labeled.extend((kf, y) for (_c, kf), y in zip(feats, labels))
    nb = train_nb(labeled)
    n_pos = sum(1 for _f, y in labeled if y)
    print(f"fit on {len(labeled)} candidates, {n_pos} of them gold (prior {nb.prior_key:.3f})")

    test_tokens = {d.id: preprocess(assemble_variant(d, VARIANT)) for d in test_docs}
    df_test = build_df_index(list(test_tokens.values()))
    doc = test_docs[0]
    cands = extract_candidates(test_tokens[doc.id])
    ranked = rank_candidates(nb, compute_kea_features(test_tokens[doc.id], cands, df_test))
    print(f"top 5 for held-out {doc.id} (gold: {', '.join(doc.gold_keyphrases)}):")
    for cand, posterior in ranked[:5]:
        print(f"  {' '.join(cand.lemmas):28} p(key) = {posterior:.3f}")
    print()

    print("= five-tag CRF =")
    seqs = [
        s
        for d in train_docs
        for s in build_sequences(d, VARIANT, df_train, labeled=True)
    ]
    crf = train_crf(seqs, CrfConfig(l2=1.0, max_epochs=150))
    state = "converged" if crf.converged else "stopped"
    print(f"{len(seqs)} training sentences; {state} after {crf.epochs_run} epochs")
    print(f"tagging F1 on its own training sentences: {sequence_f1(crf, seqs):.3f}")

    counts = EvalCounts()
    for d in test_docs:
        phrases = document_phrases(crf, d, VARIANT, df_test)
        counts = counts + match_phrases(phrases, d.gold_keyphrases)
    p, r, f1 = prf(counts)
    print(f"held-out phrase extraction: precision {p:.3f}, recall {r:.3f}, F1 {f1:.3f}")
    print(f"decoded phrases for {doc.id}:")
    for phrase in sorted(document_phrases(crf, doc, VARIANT, df_test)):
        print(f"  {' '.join(phrase)}")


if __name__ == "__main__":
    main()
