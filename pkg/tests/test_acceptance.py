"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line (visible with -rA or -s) and
asserts the same condition, so the -v report carries one verdict per
criterion.  Criteria 3-5 share one corpus of random generic pairs built
once per module.
"""

import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import pytest
import scipy.stats

from tropline import (
    TurningPointClass,
    UltraVector,
    analyze_segment,
    enumerate_labeled_topologies,
    enumerate_planar_trees,
    essential_pairs_experiment,
    essential_rate_bound,
    expected_essential_pairs_exact,
    marked_planar_tree_count,
    marked_planar_tree_count_by_split,
    nni_distance_exact,
    planar_tree_count,
    projective_equal,
    sample_topology_uniform,
    segment_class_counts,
    tropical_nni_number,
    tropical_segment,
    ultrametric_to_tree,
    worst_case_pair,
)
from tropline.ensembles import SeededStream, _split_types, sample_generic_pair
from tropline.segment import SegmentAnalysis

CORPUS_SEED = 31_337
CORPUS_SIZE = 1020  # 60 pairs per n in {4..20}


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@dataclass
class CorpusEntry:
    n: int
    analysis: SegmentAnalysis


@pytest.fixture(scope="module")
def corpus() -> List[CorpusEntry]:
    entries = []
    for k in range(CORPUS_SIZE):
        n = 4 + k % 17
        t1, t2 = sample_generic_pair(n, SeededStream(CORPUS_SEED, k))
        a = analyze_segment(t1.to_ultrametric(), t2.to_ultrametric())
        assert a.generic_pair
        entries.append(CorpusEntry(n=n, analysis=a))
    return entries


def test_criterion_1_worked_example_exact_and_fast():
    u = UltraVector(3, [3, 3, 1])
    v = UltraVector(3, [3, 2, 3])
    tropical_segment(u, v)  # warm caches; the budget is for the computation
    start = time.perf_counter()
    seg = tropical_segment(u, v)
    elapsed = time.perf_counter() - start
    scalars = [tp.scalar for tp in seg.points]
    expected = [
        UltraVector(3, [3, 3, 1]),
        UltraVector(3, [0, 0, 0]),
        UltraVector(3, [1, 0, 1]),
    ]
    ok = (
        scalars == [-2, 0, 1]
        and len(seg.points) == 3
        and all(
            projective_equal(tp.point.rep, want)
            for tp, want in zip(seg.points, expected)
        )
        and seg.points[1].tree.child_count_profile() == (3,)
        and elapsed < 1e-3
    )
    verdict(1, ok, f"scalars {scalars}, middle is star, {elapsed * 1000:.3f} ms")


def test_criterion_2_worst_case_family_sweep():
    start = time.perf_counter()
    ok = True
    for n in range(3, 61):
        u, v = worst_case_pair(n)
        counts = segment_class_counts(u, v)
        ok = (
            ok
            and sum(counts.values()) == math.comb(n, 2)
            and counts[TurningPointClass.SINGLE_NNI] == math.comb(n - 1, 2)
            and counts[TurningPointClass.FOUR_CLADE] == 0
        )
        if not ok:
            break
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 60
    verdict(
        2,
        ok,
        f"n=3..60: C(n,2) points, C(n-1,2) SingleNNI, 0 FourClade in {elapsed:.1f} s",
    )


def test_criterion_3_classification_trichotomy(corpus):
    points = 0
    bad: Optional[Tuple[int, tuple]] = None
    for e in corpus:
        for klass, profile in zip(e.analysis.classes, e.analysis.profiles):
            points += 1
            big = [c for c in profile if c >= 3]
            if (
                klass is None
                or max(profile) >= 5
                or len(big) >= 2
            ):
                bad = (e.n, profile)
                break
        if bad:
            break
    ok = bad is None
    verdict(
        3,
        ok,
        f"{len(corpus)} generic pairs, {points} turning points, "
        f"all classified, no >=5-child vertex, no two >=3-child vertices"
        + ("" if ok else f"; first offender {bad}"),
    )


def test_criterion_4_tropical_convexity(corpus):
    ok = all(e.analysis.convexity_ok for e in corpus)
    verdict(
        4,
        ok,
        "every turning point and 3 interior samples per piece pass the "
        "three-point condition exactly",
    )


def test_criterion_5_move_consistency(corpus):
    ok = all(
        e.analysis.moves_ok and e.analysis.piece_constancy_ok for e in corpus
    )
    verdict(
        5,
        ok,
        "flanking topologies equal at NoChange, NNI-adjacent at SingleNNI, "
        "NNI distance 3 at FourClade (BFS for n<=7, collapsed-quartet for n>7)",
    )


def test_criterion_6_counting_oracle_equivalence():
    start = time.perf_counter()
    ok = True
    for n in range(1, 11):
        total, marked, by_ab = enumerate_planar_trees(n)
        ok = ok and total == planar_tree_count(n)
        if n >= 2:
            ok = ok and marked == marked_planar_tree_count(n)
            for a, b in _split_types(n):
                ok = ok and by_ab.get((a, b), 0) == marked_planar_tree_count_by_split(
                    n, a, b
                )
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30
    verdict(6, ok, f"all counting formulas match enumeration for n<=10 in {elapsed:.1f} s")


def test_criterion_7_expectation_bound():
    start = time.perf_counter()
    ok = True
    details = []
    for n in (8, 16, 32, 64):
        r = essential_pairs_experiment(n, 2000, seed=CORPUS_SEED)
        ok = ok and r.mean <= float(r.bound_exact)
        details.append(f"n={n}: {r.mean:.1f} <= {float(r.bound_exact):.1f}")
    for n in (4, 5):
        exact = float(expected_essential_pairs_exact(n))
        r = essential_pairs_experiment(n, 2000, seed=CORPUS_SEED + 1)
        ok = ok and abs(r.mean - exact) <= r.ci99
        details.append(f"n={n}: |{r.mean:.3f}-{exact:.3f}| <= {r.ci99:.3f}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 300
    verdict(7, ok, "; ".join(details) + f"; {elapsed:.0f} s")


def test_criterion_8_rate_sum_asymptotics():
    sizes = [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096]
    gs = {}
    for n in sizes:
        s = essential_rate_bound(n)
        gs[n] = math.sqrt(float(s)) * math.sqrt(n) / math.log(n) ** 2
    cap = 3 * gs[64]
    ok = all(g <= cap for g in gs.values())
    verdict(
        8,
        ok,
        "sqrt(rate bound)*sqrt(n)/log(n)^2 peaks at "
        f"{max(gs.values()):.4f} <= {cap:.4f} (3x value at n=64)",
    )


def test_criterion_9_non_metricity_exhibit():
    u, v = worst_case_pair(5)
    t1, t2 = ultrametric_to_tree(u), ultrametric_to_tree(v)
    tnni = tropical_nni_number(t1, t2)
    dist = nni_distance_exact(t1.topology(), t2.topology())
    ok = tnni == 6 and dist == 3
    verdict(9, ok, f"n=5: tropical NNI number {tnni} vs NNI graph distance {dist}")


def test_criterion_10_sampler_uniformity():
    ok = True
    details = []
    for n in (4, 5):
        tops = enumerate_labeled_topologies(n)
        index = {t: k for k, t in enumerate(tops)}
        counts = [0] * len(tops)
        stream = SeededStream(CORPUS_SEED + 2)
        for _ in range(100_000):
            counts[index[sample_topology_uniform(n, stream)]] += 1
        p = scipy.stats.chisquare(counts).pvalue
        ok = ok and p >= 1e-3
        details.append(f"n={n}: chi-square p={p:.3f} over {len(tops)} topologies")
    verdict(10, ok, "; ".join(details))
