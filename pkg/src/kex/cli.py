"""Command line interface.

Subcommands:

* ``prepare``     split a dataset and write coverage reports into a run directory
* ``extract``     print ranked keyphrases for each document
* ``train``       fit a supervised model (nb or crf) on the training split
* ``ablate``      leave-one-out CRF feature ablation on the held-out split
* ``eval``        evaluate one method on one corpus variant
* ``ttest``       paired significance test on score pairs or result tables
* ``report``      render a results table as aligned text
* ``run-matrix``  run every method on every variant and write all reports

``--config FILE`` reads ``key = value`` lines as defaults for any option;
explicit command-line flags win. ``--dataset bundled`` selects the packaged
synthetic dataset. Exit codes: 0 success, 1 failed cells or degenerate
statistics, 2 bad invocation or missing input file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import (
    VARIANT_CODES,
    DatasetError,
    Document,
    assemble_variant,
    keyphrase_coverage,
    load_dataset,
    split_dataset,
    variant,
)
from .crf import (
    FEATURE_IDS,
    CrfConfig,
    ablate_features,
    build_sequences,
    document_phrases,
    load_crf,
    save_crf,
    train_crf,
)
from .fixture import bundled_fixture_path
from .metrics import (
    EvalCounts,
    EvalReport,
    TimingReport,
    match_phrases,
    paired_t_test,
    render_report,
    timing_ratios,
)
from .nb import (
    compute_kea_features,
    label_candidates,
    load_nb,
    rank_candidates,
    save_nb,
    train_nb,
)
from .preprocess import PipelineConfig, preprocess
from .rank import (
    build_df_index,
    build_word_graph,
    extract_candidates,
    score_candidates,
    textrank_scores,
    tfidf_scores,
    top_n_phrases,
)

__all__ = ["main"]

_METHODS = ("tfidf", "textrank", "nb", "crf")
_DEFAULT_TOP_NS = "3,5,7,10"


class CliError(Exception):
    """Command failure with a process exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail(code: int, message: str) -> None:
    raise CliError(code, message)


# ---------------------------------------------------------------------------
# Small file helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


def _resolve_dataset(arg: str) -> str:
    path = bundled_fixture_path() if arg == "bundled" else arg
    if not os.path.isfile(path):
        _fail(2, f"dataset file not found: {path}")
    return path


def _load_docs(arg: str) -> list[Document]:
    path = _resolve_dataset(arg)
    try:
        return load_dataset(path)
    except DatasetError as e:
        _fail(2, f"invalid dataset {path}: {e}")


def _comma_list(raw: str, what: str, allowed: tuple[str, ...] | None = None) -> list[str]:
    items = [piece.strip() for piece in raw.split(",") if piece.strip()]
    if not items:
        _fail(2, f"empty {what} list: {raw!r}")
    if allowed is not None:
        bad = [it for it in items if it not in allowed]
        if bad:
            _fail(2, f"unknown {what} {bad}; choose from {', '.join(allowed)}")
    return items


def _int_list(raw: str, what: str) -> list[int]:
    try:
        values = [int(piece) for piece in raw.split(",") if piece.strip()]
    except ValueError:
        _fail(2, f"{what} must be comma-separated integers, got {raw!r}")
    if not values or any(v < 1 for v in values):
        _fail(2, f"{what} must be positive integers, got {raw!r}")
    return values


def _require(args: argparse.Namespace, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) is None]
    if missing:
        flags = ", ".join(f"--{n}" for n in missing)
        _fail(2, f"{args.command}: {flags} {'is' if len(missing) == 1 else 'are'} required")


# ---------------------------------------------------------------------------
# Config file defaults
# ---------------------------------------------------------------------------

def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_CASTS = {
    "seed": int,
    "top_n": int,
    "jobs": int,
    "bins": int,
    "quantile_bins": int,
    "max_epochs": int,
    "max_phrase_len": int,
    "window": int,
    "l2": float,
    "alpha": float,
    "damping": float,
    "maximal_only": _parse_bool,
}


def _read_config_file(path: str) -> dict[str, object]:
    if not os.path.isfile(path):
        _fail(2, f"config file not found: {path}")
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                _fail(2, f"{path}:{lineno}: expected key = value, got {s!r}")
            key, _, raw = s.partition("=")
            dest = key.strip().replace("-", "_")
            raw = raw.strip()
            try:
                values[dest] = _CASTS.get(dest, str)(raw)
            except ValueError as e:
                _fail(2, f"{path}:{lineno}: bad value for {dest}: {e}")
    return values


# ---------------------------------------------------------------------------
# Shared evaluation machinery
# ---------------------------------------------------------------------------

def _split_docs(docs: list[Document], seed: int) -> tuple[list[Document], list[Document]]:
    split = split_dataset(docs, seed)
    by_id = {d.id: d for d in docs}
    train = [by_id[i] for i in split.train_ids]
    test = [by_id[i] for i in split.test_ids]
    return train, test


def _select_split(docs: list[Document], args: argparse.Namespace) -> list[Document]:
    if args.split == "all":
        return docs
    if args.seed is None:
        _fail(2, f"--split {args.split} needs --seed to reproduce the split")
    train, test = _split_docs(docs, args.seed)
    chosen = {d.id for d in (train if args.split == "train" else test)}
    return [d for d in docs if d.id in chosen]


def _variant_tokens(docs: list[Document], vcode: str, pipeline: PipelineConfig) -> dict[str, list]:
    return {d.id: preprocess(assemble_variant(d, vcode), pipeline) for d in docs}


def _word_weights(method: str, tokens, df_index, args: argparse.Namespace) -> dict[str, float]:
    if method == "tfidf":
        return tfidf_scores(tokens, df_index)
    graph = build_word_graph(tokens, window=args.window, damping=args.damping)
    return textrank_scores(graph)


def _ranked_phrases(
    method: str,
    doc: Document,
    tokens,
    df_index,
    model,
    args: argparse.Namespace,
    n: int,
) -> list[tuple[tuple[str, ...], float | None]]:
    """Top-n (lemma tuple, weight) pairs for one document; CRF returns all, unweighted."""
    if method == "crf":
        phrases = document_phrases(model, doc, args.variant, df_index)
        return [(p, None) for p in sorted(phrases)]
    cands = extract_candidates(tokens, args.max_phrase_len, args.maximal_only)
    if method == "nb":
        scored = compute_kea_features(tokens, cands, df_index)
        ranked = rank_candidates(model, scored)
        return [(c.lemmas, post) for c, post in ranked[:n]]
    weights = _word_weights(method, tokens, df_index, args)
    top = top_n_phrases(score_candidates(cands, weights, source=method), n) if cands else []
    return [(c.lemmas, c.weight) for c in top]


def _train_model(
    method: str,
    vcode: str,
    train_docs: list[Document],
    args: argparse.Namespace,
    pipeline: PipelineConfig,
    features: tuple[str, ...] = FEATURE_IDS,
):
    tokens = _variant_tokens(train_docs, vcode, pipeline)
    df_train = build_df_index(list(tokens.values()))
    if method == "nb":
        labeled = []
        for d in train_docs:
            toks = tokens[d.id]
            cands = extract_candidates(toks, args.max_phrase_len, args.maximal_only)
            feats = compute_kea_features(toks, cands, df_train)
            labels = label_candidates(cands, d.gold_keyphrases, pipeline)
            labeled.extend((kf, y) for (_c, kf), y in zip(feats, labels))
        return train_nb(labeled, bins=args.bins)
    seqs = [
        s
        for d in train_docs
        for s in build_sequences(d, vcode, df_train, pipeline, labeled=True, active=features)
    ]
    cfg = CrfConfig(
        l2=args.l2,
        max_epochs=args.max_epochs,
        quantile_bins=args.quantile_bins,
        active=features,
        seed=args.seed,
    )
    return train_crf(seqs, cfg)


def _evaluate_method(
    method: str,
    test_docs: list[Document],
    model,
    args: argparse.Namespace,
    pipeline: PipelineConfig,
    top_ns: list[int],
) -> list[tuple[int | None, EvalCounts]]:
    """Pooled counts for one method on the evaluation documents."""
    tokens = _variant_tokens(test_docs, args.variant, pipeline)
    df_test = build_df_index(list(tokens.values()))
    if method == "crf":
        counts = EvalCounts()
        for d in test_docs:
            phrases = document_phrases(model, d, args.variant, df_test)
            counts = counts + match_phrases(phrases, d.gold_keyphrases, pipeline)
        return [(None, counts)]
    by_n = {n: EvalCounts() for n in top_ns}
    biggest = max(top_ns)
    for d in test_docs:
        ranked = _ranked_phrases(method, d, tokens[d.id], df_test, model, args, biggest)
        for n in top_ns:
            predicted = [lemmas for lemmas, _w in ranked[:n]]
            by_n[n] = by_n[n] + match_phrases(predicted, d.gold_keyphrases, pipeline)
    return [(n, by_n[n]) for n in top_ns]


# ---------------------------------------------------------------------------
# Run directory artifacts
# ---------------------------------------------------------------------------

def _write_manifest(path: str, entries: dict[str, object]) -> None:
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    _atomic_write(path, "\n".join(lines) + "\n")


def _base_manifest(dataset_path: str, docs, seed: int) -> dict[str, object]:
    split = split_dataset(docs, seed)
    return {
        "dataset_path": dataset_path,
        "dataset_sha256": _sha256_file(dataset_path),
        "kex_version": _package_version(),
        "n_docs": len(docs),
        "n_test": len(split.test_ids),
        "n_train": len(split.train_ids),
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "seed": seed,
    }


def _package_version() -> str:
    from . import __version__

    return __version__


def _write_split(path: str, docs, seed: int) -> None:
    split = split_dataset(docs, seed)
    lines = ["doc_id\tsplit"]
    lines.extend(f"{i}\ttrain" for i in split.train_ids)
    lines.extend(f"{i}\ttest" for i in split.test_ids)
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_coverage(report_dir: str, docs, pipeline: PipelineConfig) -> None:
    section_sets = [variant(code).sections for code in VARIANT_CODES]
    cov = keyphrase_coverage(docs, section_sets, pipeline)
    _atomic_write(os.path.join(report_dir, "coverage.tsv"), cov.to_tsv())
    lines = [
        f"total_gold\t{cov.total_gold}",
        f"n_docs\t{cov.n_docs}",
        f"avg_gold_per_doc\t{cov.avg_gold_per_doc:.6f}",
        f"reference_only_covered\t{cov.reference_only_covered}",
        f"reference_only_coverage\t{cov.reference_only_coverage:.6f}",
    ]
    for length, (count, prop) in cov.length_distribution.items():
        lines.append(f"length_{length}\t{count}\t{prop:.6f}")
    _atomic_write(os.path.join(report_dir, "coverage_stats.txt"), "\n".join(lines) + "\n")


def _make_run_dir(run: str) -> dict[str, str]:
    paths = {
        "run": run,
        "splits": os.path.join(run, "splits"),
        "models": os.path.join(run, "models"),
        "reports": os.path.join(run, "reports"),
    }
    for p in paths.values():
        os.makedirs(p, exist_ok=True)
    return paths


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_prepare(args: argparse.Namespace) -> int:
    _require(args, ["out", "seed"])
    dataset_path = _resolve_dataset(args.dataset)
    docs = _load_docs(args.dataset)
    pipeline = PipelineConfig.default()
    paths = _make_run_dir(args.out)
    _write_manifest(
        os.path.join(paths["run"], "manifest.txt"),
        _base_manifest(dataset_path, docs, args.seed),
    )
    _write_split(os.path.join(paths["splits"], "split.tsv"), docs, args.seed)
    _write_coverage(paths["reports"], docs, pipeline)
    print(f"prepared run directory {args.out} ({len(docs)} documents, seed {args.seed})")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    _require(args, ["method", "variant"])
    docs = _select_split(_load_docs(args.dataset), args)
    pipeline = PipelineConfig.default()
    model = _load_model_arg(args)
    tokens = _variant_tokens(docs, args.variant, pipeline)
    df_index = build_df_index(list(tokens.values()))
    lines = ["doc_id\trank\tphrase\tweight"]
    for d in docs:
        ranked = _ranked_phrases(args.method, d, tokens[d.id], df_index, model, args, args.top_n)
        for rank, (lemmas, weight) in enumerate(ranked, start=1):
            w = "NA" if weight is None else f"{weight:.6f}"
            lines.append(f"{d.id}\t{rank}\t{' '.join(lemmas)}\t{w}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _load_model_arg(args: argparse.Namespace):
    if args.method in ("tfidf", "textrank"):
        return None
    _require(args, ["model"])
    if not os.path.isfile(args.model):
        _fail(2, f"model file not found: {args.model}")
    return load_nb(args.model) if args.method == "nb" else load_crf(args.model)


def _cmd_train(args: argparse.Namespace) -> int:
    _require(args, ["method", "variant", "seed", "out"])
    if args.method not in ("nb", "crf"):
        _fail(2, f"train supports nb and crf, not {args.method!r}")
    features = _parse_features(args)
    docs = _load_docs(args.dataset)
    train_docs, _test_docs = _split_docs(docs, args.seed)
    pipeline = PipelineConfig.default()
    model = _train_model(args.method, args.variant, train_docs, args, pipeline, features)
    if args.method == "nb":
        save_nb(model, args.out)
        print(f"trained nb on {len(train_docs)} documents -> {args.out}")
    else:
        save_crf(model, args.out)
        state = "converged" if model.converged else "stopped"
        print(
            f"trained crf on {len(train_docs)} documents -> {args.out} "
            f"({state} after {model.epochs_run} epochs, nll {model.final_nll:.6f})"
        )
    return 0


def _parse_features(args: argparse.Namespace) -> tuple[str, ...]:
    if getattr(args, "features", None) is None:
        return FEATURE_IDS
    if args.method != "crf" and args.command == "train":
        _fail(2, "--features only applies to the crf method")
    chosen = _comma_list(args.features, "feature", FEATURE_IDS)
    return tuple(f for f in FEATURE_IDS if f in set(chosen))


def _cmd_ablate(args: argparse.Namespace) -> int:
    _require(args, ["variant", "seed"])
    features = _parse_features(args)
    if len(features) < 2:
        _fail(2, "ablation needs at least two features")
    docs = _load_docs(args.dataset)
    train_docs, test_docs = _split_docs(docs, args.seed)
    pipeline = PipelineConfig.default()

    def sequences(split_docs):
        tokens = _variant_tokens(split_docs, args.variant, pipeline)
        df = build_df_index(list(tokens.values()))
        return [
            s
            for d in split_docs
            for s in build_sequences(d, args.variant, df, pipeline, labeled=True)
        ]

    cfg = CrfConfig(
        l2=args.l2,
        max_epochs=args.max_epochs,
        quantile_bins=args.quantile_bins,
        seed=args.seed,
    )
    report = ablate_features(sequences(train_docs), sequences(test_docs), features, cfg)
    _emit(report.to_tsv(), args.out)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    _require(args, ["method", "variant", "seed"])
    docs = _load_docs(args.dataset)
    train_docs, test_docs = _split_docs(docs, args.seed)
    pipeline = PipelineConfig.default()
    top_ns = _int_list(args.top_ns, "top-ns")
    if args.model is not None:
        model = _load_model_arg(args)
    elif args.method in ("nb", "crf"):
        model = _train_model(args.method, args.variant, train_docs, args, pipeline)
    else:
        model = None
    report = EvalReport()
    for top_n, counts in _evaluate_method(args.method, test_docs, model, args, pipeline, top_ns):
        report.add(args.method, args.variant, top_n, counts)
    _emit(report.to_tsv(variant_order=list(VARIANT_CODES)), args.out)
    return 0


def _cmd_ttest(args: argparse.Namespace) -> int:
    if (args.pairs is None) == (args.results is None):
        _fail(2, "ttest needs exactly one of --pairs or --results")
    meta: dict[str, object] = {}
    if args.pairs is not None:
        pairs = _read_pairs_file(args.pairs)
    else:
        _require(args, ["variant-a", "variant-b"])
        pairs, keys = _pairs_from_results(args)
        meta = {
            "variant_a": args.variant_a,
            "variant_b": args.variant_b,
            "metric": args.metric,
            "paired_on": keys,
        }
    try:
        result = paired_t_test(pairs, alpha=args.alpha, sided=args.sided)
    except ValueError as e:
        _fail(1, f"ttest: {e}")
    payload = {**result.to_dict(), **meta}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _read_pairs_file(path: str) -> list[tuple[float, float]]:
    if not os.path.isfile(path):
        _fail(2, f"pairs file not found: {path}")
    pairs: list[tuple[float, float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                _fail(2, f"{path}:{lineno}: expected two columns, got {len(parts)}")
            try:
                pairs.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if lineno == 1:  # tolerate a header line
                    continue
                _fail(2, f"{path}:{lineno}: not numeric: {s!r}")
    if len(pairs) < 2:
        _fail(2, f"{path}: need at least 2 numeric pairs, found {len(pairs)}")
    return pairs


def _pairs_from_results(args: argparse.Namespace) -> tuple[list[tuple[float, float]], list[str]]:
    if not os.path.isfile(args.results):
        _fail(2, f"results file not found: {args.results}")
    with open(args.results, encoding="utf-8") as fh:
        report = EvalReport.from_tsv(fh.read())
    methods = _comma_list(args.methods, "method", _METHODS) if args.methods else list(_METHODS)

    def side(code: str) -> dict[tuple[str, int | None], float]:
        return {
            (r.method, r.top_n): getattr(r, args.metric)
            for r in report.rows
            if r.variant == code and r.method in methods
        }

    a, b = side(args.variant_a), side(args.variant_b)
    if not a and not b:
        _fail(1, f"no rows for either variant {args.variant_a!r} or {args.variant_b!r}")
    if set(a) != set(b):
        def fmt(keys):
            return ", ".join(f"{m}@{'-' if n is None else n}" for m, n in sorted(
                keys, key=lambda k: (k[0], k[1] is None, k[1] or 0)))
        missing_b = set(a) - set(b)
        missing_a = set(b) - set(a)
        parts = []
        if missing_b:
            parts.append(f"rows missing for {args.variant_b}: {fmt(missing_b)}")
        if missing_a:
            parts.append(f"rows missing for {args.variant_a}: {fmt(missing_a)}")
        _fail(1, "ttest: unpaired result rows; " + "; ".join(parts))
    keys = sorted(a, key=lambda k: (k[0], k[1] is None, k[1] or 0))
    pairs = [(a[k], b[k]) for k in keys]
    return pairs, [f"{m}@{'-' if n is None else n}" for m, n in keys]


def _cmd_report(args: argparse.Namespace) -> int:
    if not os.path.isfile(args.results):
        _fail(2, f"results file not found: {args.results}")
    with open(args.results, encoding="utf-8") as fh:
        report = EvalReport.from_tsv(fh.read())
    if args.variants:
        order = _comma_list(args.variants, "variant")
    else:
        present = {r.variant for r in report.rows}
        order = [v for v in VARIANT_CODES if v in present]
        order.extend(sorted(present - set(order)))
    _emit(render_report(report, order), args.out)
    return 0


# ---------------------------------------------------------------------------
# The full benchmark matrix
# ---------------------------------------------------------------------------

@dataclass
class _CellResult:
    method: str
    variant: str
    rows: list[tuple[int | None, EvalCounts]]
    train_s: float | None
    test_s: float
    error: str | None = None


def _run_cell(
    method: str,
    vcode: str,
    train_docs: list[Document],
    test_docs: list[Document],
    args: argparse.Namespace,
    pipeline: PipelineConfig,
    models_dir: str,
) -> _CellResult:
    cell_args = argparse.Namespace(**vars(args))
    cell_args.variant = vcode
    try:
        train_s = None
        model = None
        if method in ("nb", "crf"):
            t0 = time.perf_counter()
            model = _train_model(method, vcode, train_docs, cell_args, pipeline)
            train_s = max(time.perf_counter() - t0, 1e-9)
            saver = save_nb if method == "nb" else save_crf
            saver(model, os.path.join(models_dir, f"{method}_{vcode}.txt"))
        t1 = time.perf_counter()
        top_ns = _int_list(args.top_ns, "top-ns")
        rows = _evaluate_method(method, test_docs, model, cell_args, pipeline, top_ns)
        test_s = max(time.perf_counter() - t1, 1e-9)
        return _CellResult(method, vcode, rows, train_s, test_s)
    except Exception as e:  # pragma: no cover - exercised via the error report
        return _CellResult(method, vcode, [], None, 0.0, error=f"{type(e).__name__}: {e}")


def _cmd_run_matrix(args: argparse.Namespace) -> int:
    _require(args, ["out", "seed"])
    dataset_path = _resolve_dataset(args.dataset)
    docs = _load_docs(args.dataset)
    methods = _comma_list(args.methods, "method", _METHODS)
    variants = _comma_list(args.variants, "variant", VARIANT_CODES)
    top_ns = _int_list(args.top_ns, "top-ns")
    pipeline = PipelineConfig.default()
    paths = _make_run_dir(args.out)

    manifest = _base_manifest(dataset_path, docs, args.seed)
    manifest.update(
        {
            "bins": args.bins,
            "damping": args.damping,
            "l2": args.l2,
            "max_epochs": args.max_epochs,
            "max_phrase_len": args.max_phrase_len,
            "maximal_only": args.maximal_only,
            "methods": ",".join(methods),
            "quantile_bins": args.quantile_bins,
            "top_ns": ",".join(str(n) for n in top_ns),
            "variants": ",".join(variants),
            "window": args.window,
        }
    )
    _write_manifest(os.path.join(paths["run"], "manifest.txt"), manifest)
    _write_split(os.path.join(paths["splits"], "split.tsv"), docs, args.seed)
    _write_coverage(paths["reports"], docs, pipeline)

    train_docs, test_docs = _split_docs(docs, args.seed)
    cells = [(m, v) for m in methods for v in variants]

    def run(cell: tuple[str, str]) -> _CellResult:
        return _run_cell(cell[0], cell[1], train_docs, test_docs, args, pipeline, paths["models"])

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    by_cell = {(r.method, r.variant): r for r in results}

    report = EvalReport()
    raw_timing: dict[tuple[str, str], tuple[float | None, float]] = {}
    failures: list[_CellResult] = []
    for method, vcode in cells:
        res = by_cell[(method, vcode)]
        if res.error is not None:
            failures.append(res)
            continue
        for top_n, counts in res.rows:
            report.add(method, vcode, top_n, counts)
        raw_timing[(method, vcode)] = (res.train_s, res.test_s)

    reports_dir = paths["reports"]
    _atomic_write(os.path.join(reports_dir, "results.tsv"), report.to_tsv(variants))
    _atomic_write(os.path.join(reports_dir, "results.txt"), render_report(report, variants))
    timed_methods = {m for m, _v in raw_timing}
    baseline = variants[0]
    usable = {
        (m, v): t for (m, v), t in raw_timing.items() if (m, baseline) in raw_timing
    }
    timing = timing_ratios(usable, baseline, variants) if usable else TimingReport()
    if timed_methods and not usable:
        print(f"warning: no {baseline} timings; timing.csv left empty", file=sys.stderr)
    _atomic_write(os.path.join(reports_dir, "timing.csv"), timing.to_csv())

    if failures:
        lines = ["method\tvariant\terror"]
        lines.extend(f"{r.method}\t{r.variant}\t{r.error}" for r in failures)
        _atomic_write(os.path.join(reports_dir, "errors.txt"), "\n".join(lines) + "\n")
        for r in failures:
            print(f"cell failed: {r.method}/{r.variant}: {r.error}", file=sys.stderr)
        print(f"{len(failures)} of {len(cells)} cells failed; see reports/errors.txt")
        return 1
    print(
        f"ran {len(cells)} cells ({len(methods)} methods x {len(variants)} variants) "
        f"-> {reports_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, *, dataset: bool = True) -> None:
    if dataset:
        sub.add_argument("--dataset", default="bundled", help="dataset JSONL path, or 'bundled'")
    sub.add_argument("--config", help="key = value file supplying option defaults")
    sub.add_argument("--seed", type=int, help="split/shuffle seed")
    sub.add_argument("--out", help="output path ('-' for stdout where applicable)")


def _add_extraction_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--max-phrase-len", type=int, default=4)
    sub.add_argument("--maximal-only", action="store_true",
                     help="keep only maximal candidate spans")
    sub.add_argument("--window", type=int, default=2, help="co-occurrence window")
    sub.add_argument("--damping", type=float, default=0.85)


def _add_crf_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--l2", type=float, default=1.0, help="CRF L2 penalty strength")
    sub.add_argument("--max-epochs", type=int, default=200)
    sub.add_argument("--quantile-bins", type=int, default=8)


def build_parser(defaults: dict[str, object] | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kex",
        description="Reference-aware keyphrase extraction toolkit and benchmark harness.",
    )
    parser.add_argument("--version", action="version", version=f"kex {_package_version()}")
    subs = parser.add_subparsers(dest="command", required=True)
    commands: list[argparse.ArgumentParser] = []

    p = subs.add_parser("prepare", help="create a run directory with split and coverage")
    commands.append(p)
    _add_common(p)

    p = subs.add_parser("extract", help="print ranked keyphrases per document")
    commands.append(p)
    _add_common(p)
    p.add_argument("--method", choices=_METHODS)
    p.add_argument("--variant", choices=VARIANT_CODES)
    p.add_argument("--model", help="trained model file (nb/crf)")
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    _add_extraction_options(p)

    p = subs.add_parser("train", help="fit a supervised model on the training split")
    commands.append(p)
    _add_common(p)
    p.add_argument("--method", choices=("nb", "crf"))
    p.add_argument("--variant", choices=VARIANT_CODES)
    p.add_argument("--bins", type=int, default=5, help="NB discretization bins")
    p.add_argument("--features", help="comma-separated CRF feature ids (default: all)")
    _add_extraction_options(p)
    _add_crf_options(p)

    p = subs.add_parser("ablate", help="leave-one-out CRF feature ablation")
    commands.append(p)
    _add_common(p)
    p.add_argument("--variant", choices=VARIANT_CODES)
    p.add_argument("--features", help="feature ids to ablate over (default: all)")
    p.set_defaults(method="crf")
    _add_extraction_options(p)
    _add_crf_options(p)

    p = subs.add_parser("eval", help="evaluate one method on one variant")
    commands.append(p)
    _add_common(p)
    p.add_argument("--method", choices=_METHODS)
    p.add_argument("--variant", choices=VARIANT_CODES)
    p.add_argument("--model", help="reuse a trained model instead of refitting")
    p.add_argument("--top-ns", default=_DEFAULT_TOP_NS)
    p.add_argument("--bins", type=int, default=5)
    _add_extraction_options(p)
    _add_crf_options(p)

    p = subs.add_parser("ttest", help="paired t-test on scores")
    commands.append(p)
    _add_common(p, dataset=False)
    p.add_argument("--pairs", help="two-column numeric file, one pair per line")
    p.add_argument("--results", help="results.tsv to pair by (method, top_n)")
    p.add_argument("--variant-a", help="baseline variant code")
    p.add_argument("--variant-b", help="comparison variant code")
    p.add_argument("--metric", choices=("precision", "recall", "f1"), default="f1")
    p.add_argument("--methods", help="restrict pairing to these methods")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sided", choices=("two", "one"), default="two")

    p = subs.add_parser("report", help="render results.tsv as an aligned text table")
    commands.append(p)
    _add_common(p, dataset=False)
    p.add_argument("--results", required=True)
    p.add_argument("--variants", help="column order (comma-separated)")

    p = subs.add_parser("run-matrix", help="run all methods on all variants")
    commands.append(p)
    _add_common(p)
    p.add_argument("--methods", default=",".join(_METHODS))
    p.add_argument("--variants", default=",".join(VARIANT_CODES))
    p.add_argument("--top-ns", default=_DEFAULT_TOP_NS)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    _add_extraction_options(p)
    _add_crf_options(p)

    # Subcommands parse into a fresh namespace, so file-supplied defaults
    # must land on each subparser, filtered to the options it defines.
    if defaults:
        for sub in commands:
            dests = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in defaults.items() if k in dests})

    return parser


_COMMANDS = {
    "prepare": _cmd_prepare,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "ttest": _cmd_ttest,
    "report": _cmd_report,
    "run-matrix": _cmd_run_matrix,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _rest = pre.parse_known_args(argv)
    try:
        defaults = _read_config_file(known.config) if known.config else None
        parser = build_parser(defaults)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as e:
        print(f"kex: error: {e}", file=sys.stderr)
        return e.code
    except BrokenPipeError:  # e.g. kex extract | head
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
