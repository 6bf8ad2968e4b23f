import itertools
import math
import random

import numpy as np
import pytest

from cspairs.errors import DataError
from cspairs.scoring import ScoredPair
from cspairs.stats import (CLOSED_CLASSES, OPEN_CLASSES,
                           PermutationConfig, fleiss_kappa,
                           gold_agreement, judgments_to_matrix,
                           margin_vs_agreement, paired_permutation_test,
                           pos_margin_analysis, quartiles, resolve_choice,
                           unpaired_permutation_test, word_class)


def judgment(annotator, pair_id, resolved, choice="A", position="A", batch=0):
    return {"annotator_id": annotator, "pair_id": pair_id, "choice": choice,
            "observed_position": position, "resolved_choice": resolved,
            "batch_index": batch, "timestamp": 0.0}


def test_paired_equal_vectors_p_one():
    cfg = PermutationConfig(seed=1)
    assert paired_permutation_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], cfg) == 1.0


def test_paired_exact_ten_plus_ones():
    cfg = PermutationConfig(method="exact")
    p = paired_permutation_test([1.0] * 10, [0.0] * 10, cfg)
    assert p == 2 / 1024


def test_paired_exact_single_pair():
    cfg = PermutationConfig(method="exact")
    assert paired_permutation_test([1.0], [0.0], cfg) == 1.0


def test_paired_length_mismatch():
    with pytest.raises(DataError):
        paired_permutation_test([1.0, 2.0], [1.0], PermutationConfig())


def test_paired_negation_invariance():
    rng = random.Random(6)
    cfg = PermutationConfig(method="exact")
    for _ in range(20):
        n = rng.randint(2, 10)
        a = [rng.uniform(-3, 3) for _ in range(n)]
        b = [rng.uniform(-3, 3) for _ in range(n)]
        p_fwd = paired_permutation_test(a, b, cfg)
        p_rev = paired_permutation_test(b, a, cfg)
        assert p_fwd == pytest.approx(p_rev)


def test_paired_auto_uses_exact_up_to_twenty():
    cfg = PermutationConfig(seed=3)
    p = paired_permutation_test([1.0] * 20, [0.0] * 20, cfg)
    assert p == 2 / 2 ** 20


def test_paired_montecarlo_close_to_exact():
    cfg_mc = PermutationConfig(resamples=10000, seed=42, method="montecarlo")
    cfg_ex = PermutationConfig(method="exact")
    rng = random.Random(17)
    for n in (5, 8, 10, 12):
        a = [rng.uniform(0, 2) for _ in range(n)]
        b = [rng.uniform(0, 2) for _ in range(n)]
        p_ex = paired_permutation_test(a, b, cfg_ex)
        p_mc = paired_permutation_test(a, b, cfg_mc)
        tol = 3 * math.sqrt(p_ex * (1 - p_ex) / cfg_mc.resamples) + 2 / cfg_mc.resamples
        assert abs(p_mc - p_ex) <= tol


def test_unpaired_identical_groups():
    cfg = PermutationConfig(seed=2)
    assert unpaired_permutation_test([1.0, 2.0], [1.0, 2.0], cfg) == 1.0


def test_unpaired_exact_three_vs_three():
    cfg = PermutationConfig(method="exact")
    p = unpaired_permutation_test([0.0, 0.0, 0.0], [10.0, 10.0, 10.0], cfg)
    assert p == 2 / 20


def test_unpaired_empty_group():
    with pytest.raises(DataError):
        unpaired_permutation_test([], [1.0], PermutationConfig())


def brute_force_unpaired(a, b, statistic):
    import statistics

    stat = statistics.mean if statistic == "mean" else statistics.median
    pooled = list(a) + list(b)
    observed = abs(stat(a) - stat(b))
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), len(a)):
        chosen = set(idx)
        group_a = [pooled[i] for i in idx]
        group_b = [pooled[i] for i in range(len(pooled)) if i not in chosen]
        total += 1
        if abs(stat(group_a) - stat(group_b)) >= observed - 1e-12:
            hits += 1
    return hits / total


def test_unpaired_exact_matches_bruteforce_both_statistics():
    rng = random.Random(41)
    cfg = PermutationConfig(method="exact")
    for statistic in ("mean", "median"):
        for _ in range(10):
            a = [rng.uniform(0, 4) for _ in range(rng.randint(2, 5))]
            b = [rng.uniform(1, 5) for _ in range(rng.randint(2, 5))]
            got = unpaired_permutation_test(a, b, cfg, statistic=statistic)
            assert got == pytest.approx(brute_force_unpaired(a, b, statistic))


def test_unpaired_montecarlo_close_to_exact():
    cfg_mc = PermutationConfig(resamples=10000, seed=7, method="montecarlo")
    cfg_ex = PermutationConfig(method="exact")
    rng = random.Random(29)
    for na, nb in ((4, 4), (5, 6), (6, 6)):
        a = [rng.uniform(0, 2) for _ in range(na)]
        b = [rng.uniform(0.5, 2.5) for _ in range(nb)]
        p_ex = unpaired_permutation_test(a, b, cfg_ex)
        p_mc = unpaired_permutation_test(a, b, cfg_mc)
        tol = 3 * math.sqrt(p_ex * (1 - p_ex) / cfg_mc.resamples) + 2 / cfg_mc.resamples
        assert abs(p_mc - p_ex) <= tol


def test_p_values_in_half_open_interval():
    rng = random.Random(31)
    for method in ("exact", "montecarlo"):
        cfg = PermutationConfig(resamples=500, seed=5, method=method)
        for _ in range(20):
            n = rng.randint(1, 8)
            a = [rng.uniform(-1, 1) for _ in range(n)]
            b = [rng.uniform(-1, 1) for _ in range(n)]
            p = paired_permutation_test(a, b, cfg)
            assert 0 < p <= 1


def test_null_calibration_uniformity():
    # Under the null, Monte-Carlo p-values are uniform on a fine lattice; the
    # KS statistic over 200 trials must beat the 1% critical value.
    rng = np.random.default_rng(2024)
    cfg = PermutationConfig(resamples=999, method="montecarlo")
    p_values = []
    for trial in range(200):
        data = rng.normal(size=24)
        cfg.seed = 10_000 + trial
        p_values.append(unpaired_permutation_test(data[:12], data[12:], cfg))
    p_values = np.sort(p_values)
    n = len(p_values)
    grid = np.arange(1, n + 1) / n
    ks = max(np.max(np.abs(grid - p_values)),
             np.max(np.abs(p_values - (np.arange(n) / n))))
    critical_1pct = 1.628 / math.sqrt(n)
    assert ks < critical_1pct


def test_fleiss_kappa_perfect_agreement():
    assert fleiss_kappa([[3, 0], [0, 3], [3, 0]]) == 1.0


def test_fleiss_kappa_single_category_degenerate():
    assert fleiss_kappa([[3, 0], [3, 0]]) == 1.0


def test_fleiss_kappa_hand_derived():
    assert fleiss_kappa([[2, 1], [1, 2]]) == pytest.approx(-1 / 3)


def test_fleiss_kappa_needs_two_raters():
    with pytest.raises(DataError):
        fleiss_kappa([[1, 0], [0, 1]])


def test_fleiss_kappa_invariances():
    rng = random.Random(8)
    for _ in range(50):
        n_items, n_raters, k = rng.randint(2, 12), rng.randint(2, 5), rng.randint(2, 4)
        rows = []
        for _ in range(n_items):
            counts = [0] * k
            for _ in range(n_raters):
                counts[rng.randrange(k)] += 1
            rows.append(counts)
        base = fleiss_kappa(rows)
        shuffled = list(rows)
        rng.shuffle(shuffled)
        assert fleiss_kappa(shuffled) == pytest.approx(base)
        perm = list(range(k))
        rng.shuffle(perm)
        relabeled = [[row[perm[j]] for j in range(k)] for row in rows]
        assert fleiss_kappa(relabeled) == pytest.approx(base)


def test_resolve_choice():
    assert resolve_choice("A", "A") == "observed"
    assert resolve_choice("A", "B") == "manipulated"
    assert resolve_choice("B", "B") == "observed"
    with pytest.raises(DataError):
        resolve_choice("C", "A")


def test_gold_agreement_always_observed():
    judgments = [judgment("a1", f"p{i}", "observed") for i in range(10)]
    report = gold_agreement(judgments, [f"p{i}" for i in range(10)])
    assert report.per_annotator == {"a1": 1.0}
    assert report.pooled == 1.0


def test_gold_agreement_unknown_pair():
    with pytest.raises(DataError, match="unknown pair"):
        gold_agreement([judgment("a1", "nope", "observed")], ["p0"])


def test_gold_agreement_resolves_through_placement():
    judgments = [
        {"annotator_id": "a1", "pair_id": "p0", "choice": "A",
         "observed_position": "B", "batch_index": 0, "timestamp": 0.0},
        {"annotator_id": "a1", "pair_id": "p1", "choice": "B",
         "observed_position": "B", "batch_index": 0, "timestamp": 0.0},
    ]
    report = gold_agreement(judgments, ["p0", "p1"])
    assert report.per_annotator == {"a1": 0.5}


def test_gold_agreement_random_choices_near_half():
    rng = random.Random(99)
    judgments = []
    for i in range(1000):
        choice = rng.choice(["A", "B"])
        position = rng.choice(["A", "B"])
        judgments.append({"annotator_id": "a1", "pair_id": f"p{i}",
                          "choice": choice, "observed_position": position,
                          "batch_index": 0, "timestamp": 0.0})
    report = gold_agreement(judgments, [f"p{i}" for i in range(1000)])
    assert 0.45 <= report.pooled <= 0.55


def test_judgments_to_matrix():
    judgments = [judgment("a1", "p0", "observed"),
                 judgment("a2", "p0", "observed"),
                 judgment("a3", "p0", "manipulated"),
                 judgment("a1", "p1", "manipulated"),
                 judgment("a2", "p1", "manipulated"),
                 judgment("a3", "p1", "observed")]
    matrix = judgments_to_matrix(judgments)
    assert matrix.counts.tolist() == [[2, 1], [1, 2]]
    assert fleiss_kappa(matrix) == pytest.approx(-1 / 3)


def test_quartiles_midpoint_convention():
    assert quartiles([1, 2, 3, 4]) == (1.5, 2.5, 3.5)
    assert quartiles([1, 2, 3]) == (1.5, 2.0, 2.5)


def test_word_class_partition():
    assert word_class("DET") == "closed"
    assert word_class("VERB") == "open"
    assert word_class("PUNCT") is None
    assert CLOSED_CLASSES == {"ADP", "AUX", "CCONJ", "DET", "NUM", "PART",
                              "PRON", "SCONJ"}
    assert OPEN_CLASSES == {"ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"}


def make_pos_pairs(spec):
    """spec: list of (pos, margin, eligible); returns (pairs, scored)."""
    from types import SimpleNamespace

    pairs, scored = [], []
    for i, (pos, m, eligible) in enumerate(spec):
        pid = f"p{i:03d}"
        pairs.append(SimpleNamespace(pair_id=pid, changed_word_pos=pos,
                                     pos_source_eligible=eligible))
        scored.append(ScoredPair(pid, -10.0 + m, -10.0))
    return pairs, scored


def test_pos_margin_analysis_group_threshold_and_pools():
    spec = [("DET", 2.0, True)] * 12 + [("VERB", 4.0, True)] * 11 + \
        [("ADJ", 1.0, True)] * 9 + [("PRON", 3.0, False)] * 20
    pairs, scored = make_pos_pairs(spec)
    report = pos_margin_analysis(pairs, scored, PermutationConfig(seed=1))
    by_pos = {g.pos: g for g in report.groups}
    assert set(by_pos) == {"DET", "VERB"}          # ADJ under 10, PRON ineligible
    assert by_pos["DET"].count == 12 and by_pos["DET"].word_class == "closed"
    assert by_pos["VERB"].count == 11 and by_pos["VERB"].word_class == "open"
    assert report.closed_count == 12 and report.open_count == 11
    assert report.closed_mean == pytest.approx(2.0)
    assert report.open_mean == pytest.approx(4.0)
    assert report.eligible_pairs == 32


def test_pos_margin_analysis_uses_absolute_margins():
    spec = [("DET", -2.0, True)] * 10
    pairs, scored = make_pos_pairs(spec)
    report = pos_margin_analysis(pairs, scored, PermutationConfig(seed=1))
    assert report.groups[0].mean == pytest.approx(2.0)


def test_pos_margin_analysis_equal_margins_p_one():
    spec = [("DET", 3.0, True)] * 10 + [("VERB", 3.0, True)] * 10
    pairs, scored = make_pos_pairs(spec)
    report = pos_margin_analysis(pairs, scored, PermutationConfig(seed=1))
    assert report.p_value == 1.0


def test_margin_vs_agreement_buckets():
    rng = random.Random(12)
    judgments = []
    scored = []
    # agreement count c in 0..3 gets margins centred on c
    idx = 0
    for c in range(4):
        for _ in range(12):
            pid = f"p{idx:03d}"
            idx += 1
            for a in range(3):
                judgments.append(judgment(f"a{a}", pid,
                                          "observed" if a < c else "manipulated"))
            scored.append(ScoredPair(pid, -10.0 + c + rng.uniform(-0.3, 0.3), -10.0))
    report = margin_vs_agreement(judgments, scored,
                                 config=PermutationConfig(seed=4, resamples=400))
    medians = [b.median for b in report.buckets]
    assert len(report.buckets) == 4
    assert medians == sorted(medians)
    assert all(not b.absent for b in report.buckets)
    assert ((0, 3, "median") in report.pairwise_p
            and (0, 3, "mean") in report.pairwise_p)
    assert report.pairwise_p[(0, 3, "median")] < 0.05


def test_margin_vs_agreement_marks_absent_buckets():
    judgments = []
    scored = []
    for i in range(5):
        pid = f"p{i}"
        for a in range(3):
            judgments.append(judgment(f"a{a}", pid, "observed"))
        scored.append(ScoredPair(pid, -9.0, -10.0))
    report = margin_vs_agreement(judgments, scored,
                                 config=PermutationConfig(seed=4, resamples=100))
    assert [b.absent for b in report.buckets] == [True, True, True, False]
    assert report.pairwise_p == {}
