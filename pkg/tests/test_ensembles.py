import itertools
import math
import os
from fractions import Fraction

import pytest

from tropline import (
    SeededStream,
    enumerate_labeled_topologies,
    enumerate_planar_trees,
    essential_pairs_experiment,
    essential_rate_bound,
    essential_rate_bound_geometric,
    essential_rate_exact,
    expected_essential_pairs_exact,
    is_generic_pair,
    marked_planar_tree_count,
    marked_planar_tree_count_by_split,
    overlap_probability,
    overlap_probability_bound,
    overlap_probability_geometric_bound,
    planar_tree_count,
    sample_generic_pair,
    sample_topology_uniform,
    split_size_probability,
    split_size_probability_bound,
    three_point_check,
    worst_case_pair,
)
from tropline.ensembles import _split_types


class TestStreams:
    def test_same_seed_same_draws(self):
        a = SeededStream(9).rng.random()
        b = SeededStream(9).rng.random()
        assert a == b

    def test_indices_decorrelate(self):
        assert SeededStream(9, 0).rng.random() != SeededStream(9, 1).rng.random()

    def test_substream(self):
        s = SeededStream(9)
        assert s.substream(5).rng.random() == SeededStream(9, 5).rng.random()


class TestSampling:
    def test_topologies_are_valid_and_binary(self):
        for k in range(20):
            t = sample_topology_uniform(6, SeededStream(1, k))
            assert t.n == 6 and t.is_binary()
            assert frozenset(range(1, 7)) in t.clades

    def test_n3_every_topology_reachable(self):
        seen = {sample_topology_uniform(3, SeededStream(2, k)) for k in range(200)}
        assert len(seen) == 3

    def test_generic_pair_properties(self):
        for k in range(20):
            t1, t2 = sample_generic_pair(5, SeededStream(3, k))
            assert is_generic_pair(t1, t2)
            assert three_point_check(t1.to_ultrametric())

    def test_reproducible(self):
        p1 = sample_generic_pair(7, SeededStream(4, 2))
        p2 = sample_generic_pair(7, SeededStream(4, 2))
        assert p1 == p2

    def test_height_budget_guard(self):
        from tropline import assign_generic_heights

        t = sample_topology_uniform(6, SeededStream(5))
        with pytest.raises(ValueError):
            assign_generic_heights(t, SeededStream(5), M=3)


class TestEnumeration:
    def test_labeled_counts_match_double_factorial(self):
        for n in range(2, 7):
            got = enumerate_labeled_topologies(n)
            want = math.prod(range(1, 2 * n - 2, 2))  # (2n-3)!!
            assert len(got) == len(set(got)) == want

    def test_planar_counts_match_formulas(self):
        for n in range(1, 9):
            total, marked, by_ab = enumerate_planar_trees(n)
            assert total == planar_tree_count(n)
            if n >= 2:
                assert marked == marked_planar_tree_count(n)
                for (a, b), c in by_ab.items():
                    assert c == marked_planar_tree_count_by_split(n, a, b)

    def test_split_counts_cover_everything(self):
        for n in range(2, 11):
            total = sum(
                marked_planar_tree_count_by_split(n, a, b)
                for a, b in _split_types(n)
            )
            assert total == marked_planar_tree_count(n)


class TestSplitProbability:
    def test_total_probability(self):
        for n in range(2, 11):
            assert sum(split_size_probability(a, b, n) for a, b in _split_types(n)) == 1

    def test_single_cherry(self):
        assert split_size_probability(1, 1, 2) == 1

    def test_bound_dominates(self):
        for n in (4, 9, 17, 33, 64):
            for a, b in _split_types(n):
                assert float(split_size_probability(a, b, n)) <= (
                    split_size_probability_bound(a, b, n) * (1 + 1e-12)
                )


def brute_overlap_probability(a1, b1, a2, b2, n):
    """Exhaustive enumeration over all ordered disjoint subset pairs."""
    ground = range(1, n + 1)

    def pairs(a, b):
        out = []
        for A in itertools.combinations(ground, a):
            rest = [x for x in ground if x not in A]
            for B in itertools.combinations(rest, b):
                out.append((set(A), set(B)))
        return out

    ones = pairs(a1, b1)
    twos = pairs(a2, b2)
    hits = sum(
        1
        for A1, B1 in ones
        for A2, B2 in twos
        if A1 & A2 and B1 & B2
    )
    return Fraction(hits, len(ones) * len(twos))


class TestOverlapProbability:
    def test_tiny_case(self):
        assert overlap_probability(1, 1, 1, 1, 2) == Fraction(1, 2)

    @pytest.mark.parametrize(
        "a1,b1,a2,b2,n",
        [
            (1, 1, 1, 1, 3),
            (1, 2, 2, 1, 4),
            (2, 2, 1, 3, 5),
            (2, 1, 2, 2, 5),
            (1, 3, 2, 2, 6),
            (3, 2, 2, 3, 6),
        ],
    )
    def test_matches_exhaustive_enumeration(self, a1, b1, a2, b2, n):
        assert overlap_probability(a1, b1, a2, b2, n) == brute_overlap_probability(
            a1, b1, a2, b2, n
        )

    def test_forced_intersection_reduces(self):
        # a1 + a2 > n with B sets exhausting the complement: the A parts
        # always intersect, so only the B condition matters
        n, a1, a2 = 6, 4, 3
        b1, b2 = n - a1, n - a2
        got = overlap_probability(a1, b1, a2, b2, n)
        assert got == brute_overlap_probability(a1, b1, a2, b2, n)

    def test_size_validation(self):
        with pytest.raises(ValueError):
            overlap_probability(3, 3, 1, 1, 5)

    def test_bound_chain(self):
        import random

        rng = random.Random(0)
        for _ in range(300):
            n = rng.randint(2, 30)
            a1 = rng.randint(1, n - 1)
            b1 = rng.randint(1, n - a1)
            a2 = rng.randint(1, n - 1)
            b2 = rng.randint(1, n - a2)
            q = overlap_probability(a1, b1, a2, b2, n)
            tight = overlap_probability_bound(a1, b1, a2, b2, n)
            loose = overlap_probability_geometric_bound(a1, b1, a2, b2, n)
            assert q <= tight
            assert float(tight) <= loose * (1 + 1e-12)

    def test_bound_symmetry(self):
        assert overlap_probability_bound(2, 3, 4, 5, 9) == overlap_probability_bound(
            4, 5, 2, 3, 9
        )


class TestRateSum:
    def test_sweep_matches_direct_double_sum(self):
        for n in (3, 5, 8, 11):
            direct = sum(
                overlap_probability_bound(a1, b1, a2, b2, n)
                * split_size_probability(a1, b1, n)
                * split_size_probability(a2, b2, n)
                for a1, b1 in _split_types(n)
                for a2, b2 in _split_types(n)
            )
            assert essential_rate_bound(n) == direct

    def test_exact_sum_is_below_bound(self):
        for n in range(3, 15):
            assert essential_rate_exact(n) <= essential_rate_bound(n)

    def test_min_form_below_geometric_form(self):
        for n in (6, 12, 24, 48):
            assert float(essential_rate_bound(n)) <= essential_rate_bound_geometric(
                n
            ) * (1 + 1e-9)

    def test_positive_and_decaying(self):
        values = [essential_rate_bound(n) for n in (8, 16, 32, 64)]
        assert all(v > 0 for v in values)
        assert values == sorted(values, reverse=True)


class TestExpectation:
    def test_three_leaves_by_hand(self):
        # 3 topologies: equal pairs share 2 vertex pairs, unequal pairs 3,
        # so the mean is (3*2 + 6*3) / 9
        assert expected_essential_pairs_exact(3) == Fraction(8, 3)

    def test_four_leaves_regression(self):
        value = expected_essential_pairs_exact(4)
        assert value == Fraction(361, 75)
        assert value <= 6

    def test_relabeling_invariance_via_symmetry(self):
        # the mean over all ordered pairs counts each unordered pair twice,
        # so it equals its own transpose; spot-check the sampler agrees
        exact = expected_essential_pairs_exact(4)
        report = essential_pairs_experiment(4, 400, seed=77)
        assert abs(report.mean - float(exact)) <= 3 * report.ci99 + 0.2


class TestExperiment:
    def test_report_invariants(self):
        r = essential_pairs_experiment(6, 50, seed=5)
        assert r.trials == 50
        assert 1 <= r.mean <= math.comb(6, 2)
        assert r.ci99 >= 0
        assert r.bound == float(r.bound_exact)

    def test_bit_reproducible(self):
        r1 = essential_pairs_experiment(5, 60, seed=8)
        r2 = essential_pairs_experiment(5, 60, seed=8)
        assert (r1.mean, r1.variance, r1.ci99, r1.bound_exact) == (
            r2.mean,
            r2.variance,
            r2.ci99,
            r2.bound_exact,
        )

    def test_parallel_equals_serial(self):
        serial = essential_pairs_experiment(5, 40, seed=13)
        os.environ["TROPLINE_THREADS"] = "2"
        try:
            parallel = essential_pairs_experiment(5, 40, seed=13)
        finally:
            del os.environ["TROPLINE_THREADS"]
        assert (serial.mean, serial.variance) == (parallel.mean, parallel.variance)


class TestWorstCasePair:
    def test_formulas(self):
        u, v = worst_case_pair(4)
        # u_ij = n(n - min(i,j)), v_ij = max(i,j) - 1
        assert list(u.entries) == [12, 12, 12, 8, 8, 4]
        assert list(v.entries) == [1, 2, 3, 2, 3, 3]

    def test_is_generic_ultrametric_pair(self):
        from tropline import ultrametric_to_tree

        for n in (3, 6, 10):
            u, v = worst_case_pair(n)
            assert three_point_check(u) and three_point_check(v)
            assert is_generic_pair(ultrametric_to_tree(u), ultrametric_to_tree(v))
