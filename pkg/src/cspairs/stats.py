"""Statistical analyses: permutation significance tests, chance-corrected
rater agreement, gold-standard accuracy, POS-stratified margin analysis and
margin-vs-agreement buckets."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .scoring import margin as pair_margin

EXACT_LIMIT = 2 ** 20
MIN_POS_GROUP = 10

CLOSED_CLASSES = frozenset({"ADP", "AUX", "CCONJ", "DET", "NUM", "PART", "PRON", "SCONJ"})
OPEN_CLASSES = frozenset({"ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"})

_EPS = 1e-12


@dataclass
class PermutationConfig:
    resamples: int = 10000
    alpha: float = 0.05
    seed: int = 0
    method: str = "auto"        # auto | exact | montecarlo

    def __post_init__(self):
        if self.resamples < 1:
            raise DataError("resamples must be >= 1")
        if not 0 < self.alpha < 1:
            raise DataError("alpha must be in (0, 1)")
        if self.method not in ("auto", "exact", "montecarlo"):
            raise DataError(f"unknown method {self.method!r}")


def paired_permutation_test(a, b, config: PermutationConfig | None = None) -> float:
    """Two-tailed test on the mean of paired differences.

    Exact mode enumerates every sign assignment of the differences whenever
    2^n fits the enumeration budget; otherwise each difference's sign is
    flipped with probability one half in R seeded resamples, and the p-value
    gets the (1 + hits) / (R + 1) correction so it is never zero.
    """
    config = config or PermutationConfig()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"paired vectors must have equal length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise DataError("empty paired vectors")
    d = a - b
    observed = abs(d.mean())
    n = d.size
    exact = config.method == "exact" or (config.method == "auto" and 2 ** n <= EXACT_LIMIT)
    if exact:
        if 2 ** n > EXACT_LIMIT:
            raise DataError(f"exact enumeration over 2^{n} sign patterns exceeds the budget")
        hits = 0
        total = 2 ** n
        chunk = 1 << 16
        powers = np.arange(n, dtype=np.uint32)
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total), dtype=np.uint32)
            bits = (idx[:, None] >> powers) & 1
            signs = 1.0 - 2.0 * bits
            stats = np.abs((signs * d).mean(axis=1))
            hits += int(np.count_nonzero(stats >= observed - _EPS))
        return hits / total
    rng = np.random.default_rng(config.seed)
    signs = rng.integers(0, 2, size=(config.resamples, n)) * 2 - 1
    stats = np.abs((signs * d).mean(axis=1))
    hits = int(np.count_nonzero(stats >= observed - _EPS))
    return (1 + hits) / (config.resamples + 1)


def _group_stat(values, statistic):
    if statistic == "mean":
        return np.mean(values, axis=-1)
    if statistic == "median":
        return np.median(values, axis=-1)
    raise DataError(f"unknown statistic {statistic!r}")


def unpaired_permutation_test(group_a, group_b, config: PermutationConfig | None = None,
                              statistic: str = "mean") -> float:
    """Two-tailed test on the difference of group statistics under random
    reassignment of group membership (sizes preserved).

    Exact mode enumerates all partitions when their count fits the budget;
    Monte-Carlo mode shuffles membership R times with the (1 + hits) / (R + 1)
    correction.
    """
    config = config or PermutationConfig()
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DataError("both groups must be non-empty")
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    observed = abs(_group_stat(a, statistic) - _group_stat(b, statistic))
    n_partitions = math.comb(n, na)
    exact = config.method == "exact" or (config.method == "auto" and n_partitions <= EXACT_LIMIT)
    if exact:
        if n_partitions > EXACT_LIMIT:
            raise DataError(f"exact enumeration over {n_partitions} partitions exceeds the budget")
        hits = 0
        chunk = 1 << 14
        combos = itertools.combinations(range(n), na)
        while True:
            block = list(itertools.islice(combos, chunk))
            if not block:
                break
            idx_a = np.array(block, dtype=np.intp)
            mask = np.zeros((len(block), n), dtype=bool)
            np.put_along_axis(mask, idx_a, True, axis=1)
            order = np.argsort(mask, axis=1, kind="stable")
            idx_b = order[:, :n - na]
            stats = np.abs(_group_stat(pooled[idx_a], statistic)
                           - _group_stat(pooled[idx_b], statistic))
            hits += int(np.count_nonzero(stats >= observed - _EPS))
        return hits / n_partitions
    rng = np.random.default_rng(config.seed)
    keys = rng.random((config.resamples, n))
    order = np.argsort(keys, axis=1)
    resampled = pooled[order]
    stats = np.abs(_group_stat(resampled[:, :na], statistic)
                   - _group_stat(resampled[:, na:], statistic))
    hits = int(np.count_nonzero(stats >= observed - _EPS))
    return (1 + hits) / (config.resamples + 1)


@dataclass
class JudgmentMatrix:
    """Per-item category counts: N items x k categories, n raters per item."""

    counts: list
    n_raters: int = 0
    n_categories: int = 0

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=int)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
            raise DataError("judgment matrix must be N x k with k >= 2")
        row_sums = arr.sum(axis=1)
        if not np.all(row_sums == row_sums[0]):
            raise DataError("every item must have the same number of ratings")
        n = int(row_sums[0])
        if self.n_raters and self.n_raters != n:
            raise DataError(f"declared {self.n_raters} raters but rows sum to {n}")
        if n < 2:
            raise DataError("agreement needs at least 2 raters per item")
        self.counts = arr
        self.n_raters = n
        self.n_categories = arr.shape[1]


def fleiss_kappa(matrix) -> float:
    """Chance-corrected agreement for a fixed number of raters per item.

    kappa = (P_bar - P_e_bar) / (1 - P_e_bar); perfect observed agreement
    returns exactly 1.0, including the degenerate single-category case where
    P_e_bar is also 1.
    """
    if not isinstance(matrix, JudgmentMatrix):
        matrix = JudgmentMatrix(matrix)
    counts = matrix.counts
    n = matrix.n_raters
    n_items = counts.shape[0]
    p_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * n)
    p_e = float(np.sum(p_j * p_j))
    if p_bar >= 1.0:
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


def resolve_choice(choice: str, observed_position: str) -> str:
    """Map a raw A/B choice through the randomized placement."""
    if choice not in ("A", "B") or observed_position not in ("A", "B"):
        raise DataError(f"invalid choice {choice!r} / placement {observed_position!r}")
    return "observed" if choice == observed_position else "manipulated"


@dataclass
class AgreementReport:
    per_annotator: dict
    pooled: float
    n_judgments: int

    def to_record(self):
        return {"per_annotator": dict(sorted(self.per_annotator.items())),
                "pooled": self.pooled, "n_judgments": self.n_judgments}


def gold_agreement(judgments, known_pair_ids) -> AgreementReport:
    """Accuracy against the gold standard: the fraction of judgments that
    picked the observed sentence, per annotator and pooled."""
    known = set(known_pair_ids)
    per = {}
    total = 0
    correct = 0
    for j in judgments:
        pair_id = j["pair_id"]
        if pair_id not in known:
            raise DataError(f"judgment references unknown pair {pair_id}")
        resolved = j.get("resolved_choice")
        if resolved is None:
            resolved = resolve_choice(j["choice"], j["observed_position"])
        hit = 1 if resolved == "observed" else 0
        bucket = per.setdefault(j["annotator_id"], [0, 0])
        bucket[0] += hit
        bucket[1] += 1
        correct += hit
        total += 1
    if total == 0:
        raise DataError("no judgments")
    return AgreementReport(
        per_annotator={a: hits / n for a, (hits, n) in per.items()},
        pooled=correct / total,
        n_judgments=total,
    )


def judgments_to_matrix(judgments) -> JudgmentMatrix:
    """Arrange resolved judgments as an items x {observed, manipulated}
    count matrix for agreement statistics."""
    by_pair = {}
    for j in judgments:
        resolved = j.get("resolved_choice") or resolve_choice(j["choice"], j["observed_position"])
        row = by_pair.setdefault(j["pair_id"], [0, 0])
        row[0 if resolved == "observed" else 1] += 1
    return JudgmentMatrix([by_pair[k] for k in sorted(by_pair)])


@dataclass
class PosGroupRow:
    pos: str
    word_class: str
    count: int
    mean: float
    median: float


@dataclass
class PosReport:
    groups: list
    closed_count: int
    open_count: int
    closed_mean: float | None
    open_mean: float | None
    p_value: float | None
    eligible_pairs: int

    def to_records(self):
        recs = [{"kind": "group", "pos": g.pos, "class": g.word_class,
                 "count": g.count, "mean": g.mean, "median": g.median}
                for g in self.groups]
        recs.append({"kind": "summary", "closed_count": self.closed_count,
                     "open_count": self.open_count, "closed_mean": self.closed_mean,
                     "open_mean": self.open_mean, "p_value": self.p_value,
                     "eligible_pairs": self.eligible_pairs})
        return recs

    def to_table(self):
        lines = [f"{'POS':<8}{'class':<8}{'count':>7}{'mean':>10}{'median':>10}"]
        for g in self.groups:
            lines.append(f"{g.pos:<8}{g.word_class:<8}{g.count:>7}{g.mean:>10.3f}{g.median:>10.3f}")
        closed = "-" if self.closed_mean is None else f"{self.closed_mean:.3f}"
        open_ = "-" if self.open_mean is None else f"{self.open_mean:.3f}"
        p = "-" if self.p_value is None else f"{self.p_value:.4f}"
        lines.append(f"closed mean {closed} (n={self.closed_count})  "
                     f"open mean {open_} (n={self.open_count})  p {p}")
        return "\n".join(lines)


def word_class(pos: str) -> str | None:
    if pos in CLOSED_CLASSES:
        return "closed"
    if pos in OPEN_CLASSES:
        return "open"
    return None


def pos_margin_analysis(pairs, scored_pairs, config: PermutationConfig | None = None,
                        min_group: int = MIN_POS_GROUP) -> PosReport:
    """Absolute margins grouped by the POS of the changed word.

    Only pairs whose changed word aligned to a single identical translation
    word participate; groups under `min_group` pairs are dropped, and the
    closed against open class comparison pools the surviving groups.
    """
    margins = {sp.pair_id: abs(pair_margin(sp)) for sp in scored_pairs}
    groups = {}
    eligible = 0
    for p in pairs:
        if not p.pos_source_eligible or not p.changed_word_pos:
            continue
        if p.pair_id not in margins:
            continue
        eligible += 1
        groups.setdefault(p.changed_word_pos, []).append(margins[p.pair_id])
    rows = []
    closed_pool = []
    open_pool = []
    for pos in sorted(groups):
        values = groups[pos]
        if len(values) < min_group:
            continue
        cls = word_class(pos)
        if cls == "closed":
            closed_pool.extend(values)
        elif cls == "open":
            open_pool.extend(values)
        rows.append(PosGroupRow(pos, cls or "other", len(values),
                                float(np.mean(values)), float(np.median(values))))
    p_value = None
    if closed_pool and open_pool:
        p_value = unpaired_permutation_test(closed_pool, open_pool, config)
    return PosReport(
        groups=rows,
        closed_count=len(closed_pool),
        open_count=len(open_pool),
        closed_mean=float(np.mean(closed_pool)) if closed_pool else None,
        open_mean=float(np.mean(open_pool)) if open_pool else None,
        p_value=p_value,
        eligible_pairs=eligible,
    )


def quartiles(values):
    """Q1, median, Q3 under the midpoint convention."""
    q1, q2, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75],
                               method="midpoint")
    return float(q1), float(q2), float(q3)


@dataclass
class BucketRow:
    agreement: int
    count: int
    mean: float | None = None
    median: float | None = None
    q1: float | None = None
    q3: float | None = None
    absent: bool = False


@dataclass
class BucketReport:
    buckets: list
    pairwise_p: dict = field(default_factory=dict)   # (lo, hi, statistic) -> p

    def to_records(self):
        recs = []
        for b in self.buckets:
            recs.append({"kind": "bucket", "agreement": b.agreement, "count": b.count,
                         "mean": b.mean, "median": b.median, "q1": b.q1, "q3": b.q3,
                         "absent": b.absent})
        for (lo, hi, stat), p in sorted(self.pairwise_p.items()):
            recs.append({"kind": "comparison", "bucket_a": lo, "bucket_b": hi,
                         "statistic": stat, "p_value": p})
        return recs

    def to_table(self):
        lines = [f"{'agree':>6}{'count':>7}{'mean':>10}{'median':>10}{'q1':>10}{'q3':>10}"]
        for b in self.buckets:
            if b.absent:
                lines.append(f"{b.agreement:>6}{0:>7}{'absent':>40}")
            else:
                lines.append(f"{b.agreement:>6}{b.count:>7}{b.mean:>10.3f}"
                             f"{b.median:>10.3f}{b.q1:>10.3f}{b.q3:>10.3f}")
        for (lo, hi, stat), p in sorted(self.pairwise_p.items()):
            lines.append(f"bucket {lo} vs {hi} ({stat}): p = {p:.4f}")
        return "\n".join(lines)


def margin_vs_agreement(judgments, scored_pairs, n_raters: int | None = None,
                        config: PermutationConfig | None = None) -> BucketReport:
    """Bucket pair margins by how many raters agreed with the gold standard;
    reports bucket statistics and pairwise permutation p-values for both the
    mean and the median statistic."""
    agree = {}
    raters = {}
    for j in judgments:
        resolved = j.get("resolved_choice") or resolve_choice(j["choice"], j["observed_position"])
        agree[j["pair_id"]] = agree.get(j["pair_id"], 0) + (1 if resolved == "observed" else 0)
        raters[j["pair_id"]] = raters.get(j["pair_id"], 0) + 1
    if not agree:
        raise DataError("no judgments")
    k = n_raters if n_raters is not None else max(raters.values())
    margins = {sp.pair_id: pair_margin(sp) for sp in scored_pairs}
    buckets = {c: [] for c in range(k + 1)}
    for pair_id, count in agree.items():
        if pair_id in margins:
            buckets[count].append(margins[pair_id])
    rows = []
    for c in range(k + 1):
        values = buckets[c]
        if not values:
            rows.append(BucketRow(agreement=c, count=0, absent=True))
            continue
        q1, q2, q3 = quartiles(values)
        rows.append(BucketRow(agreement=c, count=len(values), mean=float(np.mean(values)),
                              median=q2, q1=q1, q3=q3))
    pairwise = {}
    present = [c for c in range(k + 1) if buckets[c]]
    for i, lo in enumerate(present):
        for hi in present[i + 1:]:
            for stat in ("mean", "median"):
                pairwise[(lo, hi, stat)] = unpaired_permutation_test(
                    buckets[lo], buckets[hi], config, statistic=stat)
    return BucketReport(buckets=rows, pairwise_p=pairwise)
