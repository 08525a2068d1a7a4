"""Evaluation layer: phrase matching, micro P/R/F1, paired t-test, timing, reports.

Matching is exact on normalized lemma sequences. Both the gold phrases and the
extracted phrases pass through the same normalizer, so the comparison is
symmetric: lemmatize each word, lowercase, collapse whitespace, strip symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .preprocess import PipelineConfig, Token, lemmatize_word, tokenize, word_tokens

__all__ = [
    "EvalCounts",
    "ResultRow",
    "EvalReport",
    "TTestResult",
    "TimingRow",
    "TimingReport",
    "normalize_phrase",
    "normalize_tokens",
    "contains_subsequence",
    "match_phrases",
    "prf",
    "paired_t_test",
    "student_t_sf",
    "regularized_incomplete_beta",
    "timing_ratios",
    "render_report",
    "METHOD_ORDER",
]

METHOD_ORDER = ("tfidf", "textrank", "nb", "crf")


# ---------------------------------------------------------------------------
# Phrase normalization and matching
# ---------------------------------------------------------------------------

def normalize_phrase(phrase: str | Sequence[str], config: PipelineConfig | None = None) -> tuple[str, ...]:
    """Normalize a phrase to its lemma sequence.

    Accepts a raw string or a pre-split word sequence. Symbols are stripped,
    each word is lowercased and lemmatized. Normalization is idempotent.
    """
    config = config or PipelineConfig.default()
    if isinstance(phrase, str):
        words = [t.surface for t in word_tokens(tokenize(phrase))]
    else:
        words = []
        for part in phrase:
            words.extend(t.surface for t in word_tokens(tokenize(part)))
    return tuple(lemmatize_word(w, config) for w in words)


def normalize_tokens(tokens: Iterable[Token]) -> tuple[str, ...]:
    """Lemma sequence of the non-symbol tokens: the haystack for matching."""
    return tuple(t.lemma for t in tokens if not t.is_symbol)


def contains_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    """True if ``needle`` occurs as a contiguous run inside ``haystack``."""
    n, m = len(haystack), len(needle)
    if m == 0 or m > n:
        return False
    first = needle[0]
    for i in range(n - m + 1):
        if haystack[i] == first and tuple(haystack[i : i + m]) == tuple(needle):
            return True
    return False


@dataclass(frozen=True)
class EvalCounts:
    """Pooled matching counts: true positives, total extracted, total assigned."""

    tp: int = 0
    te: int = 0
    ta: int = 0

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.te + other.te, self.ta + other.ta)


def match_phrases(
    extracted: Iterable[str | Sequence[str]],
    gold: Iterable[str | Sequence[str]],
    config: PipelineConfig | None = None,
) -> EvalCounts:
    """Count exact matches between normalized extracted and gold phrases.

    Both sides are deduplicated after normalization, so a gold phrase is
    creditable at most once per document and repeated extractions of one
    phrase count once. Phrases that normalize to nothing are dropped.
    """
    config = config or PipelineConfig.default()
    ext = {normalize_phrase(p, config) for p in extracted}
    ext.discard(())
    gld = {normalize_phrase(p, config) for p in gold}
    gld.discard(())
    return EvalCounts(tp=len(ext & gld), te=len(ext), ta=len(gld))


def prf(counts: EvalCounts) -> tuple[float, float, float]:
    """Micro precision, recall and F1 from pooled counts.

    Precision is 0 when nothing was extracted; recall requires at least one
    assigned phrase; F1 is 0 when both P and R are 0.
    """
    if counts.ta <= 0:
        raise ValueError("no assigned gold phrases: recall is undefined (ta=0)")
    if not (0 <= counts.tp <= min(counts.te, counts.ta)):
        raise ValueError(f"inconsistent counts: {counts}")
    p = counts.tp / counts.te if counts.te > 0 else 0.0
    r = counts.tp / counts.ta
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


# ---------------------------------------------------------------------------
# Paired t-test (self-contained Student-t tail probability)
# ---------------------------------------------------------------------------

def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    MAXIT = 300
    EPS = 1e-15
    FPMIN = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0, 0 <= x <= 1."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x < 0.0 or x > 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for a Student-t variable with df dof."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return half_tail if t > 0 else 1.0 - half_tail


@dataclass(frozen=True)
class TTestResult:
    n_pairs: int
    mean_diff: float
    std_diff: float
    t: float
    df: int
    p_two_tailed: float
    p_one_tailed: float
    alpha: float
    sided: str
    significant: bool

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "mean_diff": self.mean_diff,
            "std_diff": self.std_diff,
            "t": self.t,
            "df": self.df,
            "p_two_tailed": self.p_two_tailed,
            "p_one_tailed": self.p_one_tailed,
            "alpha": self.alpha,
            "sided": self.sided,
            "significant": self.significant,
        }


def paired_t_test(
    pairs: Sequence[tuple[float, float]],
    alpha: float = 0.05,
    sided: str = "two",
) -> TTestResult:
    """Paired Student t-test on (a, b) observations, differences taken as b - a.

    The one-tailed p-value tests the alternative "b exceeds a". Constant
    differences have zero variance and are rejected as degenerate.
    """
    if sided not in ("two", "one"):
        raise ValueError(f"sided must be 'two' or 'one', got {sided!r}")
    n = len(pairs)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = [b - a for a, b in pairs]
    mean = sum(diffs) / n
    ss = sum((d - mean) ** 2 for d in diffs)
    if ss == 0.0:
        raise ValueError("degenerate input: all differences are identical")
    sd = math.sqrt(ss / (n - 1))
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p_two = 2.0 * student_t_sf(abs(t), df)
    p_one = student_t_sf(t, df)
    p = p_two if sided == "two" else p_one
    return TTestResult(
        n_pairs=n,
        mean_diff=mean,
        std_diff=sd,
        t=t,
        df=df,
        p_two_tailed=p_two,
        p_one_tailed=p_one,
        alpha=alpha,
        sided=sided,
        significant=p < alpha,
    )


# ---------------------------------------------------------------------------
# Result tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    """One evaluation cell: a method on a corpus variant at one cutoff.

    ``top_n`` is None for extractors that return an unranked set (sequence
    labelling), rendered as '-'.
    """

    method: str
    variant: str
    top_n: int | None
    counts: EvalCounts
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, method: str, variant: str, top_n: int | None, counts: EvalCounts) -> ResultRow:
        p, r, f1 = prf(counts)
        row = ResultRow(method, variant, top_n, counts, p, r, f1)
        self.rows.append(row)
        return row

    def sorted_rows(self, variant_order: Sequence[str] = ()) -> list[ResultRow]:
        vorder = {v: i for i, v in enumerate(variant_order)}
        morder = {m: i for i, m in enumerate(METHOD_ORDER)}
        return sorted(
            self.rows,
            key=lambda r: (
                morder.get(r.method, len(morder)),
                r.method,
                (r.top_n is None, r.top_n if r.top_n is not None else 0),
                vorder.get(r.variant, len(vorder)),
                r.variant,
            ),
        )

    def to_tsv(self, variant_order: Sequence[str] = ()) -> str:
        lines = ["method\ttop_n\tvariant\ttp\tte\tta\tprecision\trecall\tf1"]
        for r in self.sorted_rows(variant_order):
            top = "-" if r.top_n is None else str(r.top_n)
            lines.append(
                f"{r.method}\t{top}\t{r.variant}\t{r.counts.tp}\t{r.counts.te}\t{r.counts.ta}"
                f"\t{r.precision:.6f}\t{r.recall:.6f}\t{r.f1:.6f}"
            )
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_tsv(text: str) -> "EvalReport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty report")
        header = lines[0].split("\t")
        expected = ["method", "top_n", "variant", "tp", "te", "ta", "precision", "recall", "f1"]
        if header != expected:
            raise ValueError(f"unexpected report header: {header}")
        report = EvalReport()
        for ln in lines[1:]:
            f = ln.split("\t")
            top_n = None if f[1] == "-" else int(f[1])
            counts = EvalCounts(int(f[3]), int(f[4]), int(f[5]))
            report.rows.append(
                ResultRow(f[0], f[2], top_n, counts, float(f[6]), float(f[7]), float(f[8]))
            )
        return report


def render_report(report: EvalReport, variant_order: Sequence[str]) -> str:
    """Aligned text table: one block per method, rows per cutoff, per-row maxima starred.

    Cells show P/R/F1 as percentages. The star marks the best variant in the
    row for each metric. Output is deterministic for identical inputs.
    """
    rows = report.sorted_rows(variant_order)
    variants = list(variant_order) if variant_order else sorted({r.variant for r in rows})
    groups: dict[tuple[str, int | None], dict[str, ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.top_n), {})[r.variant] = r

    width = max(9, max((len(v) for v in variants), default=0) + 2)
    out = []
    for (method, top_n), by_variant in groups.items():
        top = "all" if top_n is None else f"top {top_n}"
        out.append(f"== {method} ({top}) ==")
        header = f"{'metric':<8}" + "".join(f"{v:>{width}}" for v in variants)
        out.append(header)
        for metric, attr in (("P", "precision"), ("R", "recall"), ("F1", "f1")):
            vals = {
                v: getattr(by_variant[v], attr) for v in variants if v in by_variant
            }
            best = max(vals.values()) if vals else None
            cells = []
            for v in variants:
                if v not in vals:
                    cells.append(f"{'-':>{width}}")
                    continue
                mark = "*" if vals[v] == best else " "
                cells.append(f"{100 * vals[v]:>{width - 1}.2f}{mark}")
            out.append(f"{metric:<8}" + "".join(cells))
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimingRow:
    method: str
    variant: str
    train_s: float | None
    test_s: float
    train_ratio: float | None
    test_ratio: float


@dataclass
class TimingReport:
    rows: list[TimingRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["method,variant,train_s,test_s,train_ratio,test_ratio"]
        for r in self.rows:
            train_s = "" if r.train_s is None else f"{r.train_s:.6f}"
            train_ratio = "" if r.train_ratio is None else f"{r.train_ratio:.1f}"
            lines.append(
                f"{r.method},{r.variant},{train_s},{r.test_s:.6f},{train_ratio},{r.test_ratio:.1f}"
            )
        return "\n".join(lines) + "\n"


def timing_ratios(
    raw: dict[tuple[str, str], tuple[float | None, float]],
    baseline_variant: str = "TA",
    variant_order: Sequence[str] = (),
) -> TimingReport:
    """Per-method run times relative to the baseline variant.

    ``raw`` maps (method, variant) to (train seconds or None, test seconds).
    Every method must include the baseline variant, and baseline times must
    be positive; a zero baseline means the timer was too coarse to use.
    """
    methods = sorted({m for m, _ in raw}, key=lambda m: (METHOD_ORDER.index(m) if m in METHOD_ORDER else len(METHOD_ORDER), m))
    vorder = {v: i for i, v in enumerate(variant_order)}
    report = TimingReport()
    for method in methods:
        variants = sorted(
            (v for m, v in raw if m == method),
            key=lambda v: (vorder.get(v, len(vorder)), v),
        )
        if baseline_variant not in variants:
            raise ValueError(f"method {method!r} has no baseline variant {baseline_variant!r}")
        base_train, base_test = raw[(method, baseline_variant)]
        if base_test == 0.0 or (base_train is not None and base_train == 0.0):
            raise ValueError(f"degenerate timer: baseline time is zero for {method!r}")
        for v in variants:
            train_s, test_s = raw[(method, v)]
            train_ratio = None
            if train_s is not None and base_train is not None:
                train_ratio = train_s / base_train
            report.rows.append(
                TimingRow(method, v, train_s, test_s, train_ratio, test_s / base_test)
            )
    return report
