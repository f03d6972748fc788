"""Random tree ensembles, counting formulas, and the expectation bound.

Provides uniform sampling of labeled binary topologies, exhaustive small-n
enumerations used as oracles, exact Catalan-style counts of planar rooted
binary trees, the exact and bounded pairwise-overlap probabilities, the
bounding sum that controls the expected number of turning points, and a
reproducible Monte-Carlo experiment runner.
"""

from __future__ import annotations

import hashlib
import math
import os
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Tuple

import gmpy2

from .metric import UltraVector
from .segment import _essential_pair_count
from .trees import (
    Clade,
    EquidistantTree,
    Topology,
    _topology_structure,
    is_generic_pair,
)

CI99_Z = 2.5758293035489004  # two-sided 99% normal quantile


# ---------------------------------------------------------------------------
# deterministic randomness


class SeededStream:
    """Counter-based deterministic randomness.

    Stream (seed, index) is derived by hashing, so any trial can be
    regenerated in isolation and results never depend on scheduling order.
    """

    __slots__ = ("seed", "index", "rng")

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        key = hashlib.blake2b(
            f"{self.seed}:{self.index}".encode(), digest_size=16
        ).digest()
        self.rng = random.Random(int.from_bytes(key, "big"))

    def substream(self, index: int) -> "SeededStream":
        return SeededStream(self.seed, index)


# ---------------------------------------------------------------------------
# random trees


def sample_topology_uniform(n: int, stream: SeededStream) -> Topology:
    """Uniform random binary topology on leaves 1..n.

    Leaves are attached one at a time to an edge chosen uniformly among the
    2k-1 edges of the current k-leaf tree (counting the edge above the
    root), which makes every one of the (2n-3)!! topologies equally likely.
    """
    if n < 2:
        raise ValueError("need at least 2 leaves")
    rng = stream.rng
    # nodes: 1..n are leaves, n+1.. are internal; children maps internal
    # nodes to their two children, parent is the inverse.
    children: Dict[int, List[int]] = {}
    parent: Dict[int, int] = {}
    root = 1
    next_id = n + 1
    # edges are identified by their lower endpoint; the edge above the root
    # is identified by the root itself
    edges = [1]
    for leaf in range(2, n + 1):
        below = edges[rng.randrange(len(edges))]
        mid = next_id
        next_id += 1
        if below == root:
            children[mid] = [below, leaf]
            parent[below] = mid
            parent[leaf] = mid
            root = mid
        else:
            p = parent[below]
            children[p][children[p].index(below)] = mid
            children[mid] = [below, leaf]
            parent[below] = mid
            parent[leaf] = mid
            parent[mid] = p
        edges.append(leaf)
        edges.append(mid)

    clades: Dict[int, FrozenSet[int]] = {}

    def fill(node: int) -> FrozenSet[int]:
        if node <= n:
            return frozenset((node,))
        c = frozenset().union(*(fill(ch) for ch in children[node]))
        clades[node] = c
        return c

    fill(root)
    return Topology(n, frozenset(clades.values()))


def tree_from_topology(
    t: Topology, heights: Dict[Clade, Fraction]
) -> EquidistantTree:
    """Equidistant tree over a known topology with the given vertex heights."""
    units, _ = _topology_structure(t)
    clades = sorted(t.clades, key=len)
    return EquidistantTree._from_structure(
        t.n,
        clades,
        [heights[c] for c in clades],
        [units[c] for c in clades],
    )


def assign_generic_heights(
    t: Topology, stream: SeededStream, M: int
) -> EquidistantTree:
    """Give a binary topology distinct integer heights drawn from {1..M}.

    Heights are sorted descending and assigned along a root-first linear
    extension, so every parent is strictly higher than its descendants and
    the resulting tree is generic.
    """
    if not t.is_binary():
        raise ValueError("generic heights require a binary topology")
    m = len(t.clades)
    if M < m:
        raise ValueError(f"M={M} too small for {m} distinct heights")
    draws = sorted(stream.rng.sample(range(1, M + 1), m), reverse=True)
    order = sorted(t.clades, key=lambda c: (-len(c), sorted(c)))
    heights = {c: Fraction(h) for c, h in zip(order, draws)}
    return tree_from_topology(t, heights)


def sample_generic_pair(
    n: int,
    stream: SeededStream,
    M: Optional[int] = None,
    *,
    resample_limit: int = 1000,
) -> Tuple[EquidistantTree, EquidistantTree]:
    """Two independent uniform topologies with generic integer heights.

    Heights (never topologies) are redrawn until the pair is generic, so the
    topology marginals stay exactly uniform.
    """
    if n < 3:
        raise ValueError("need at least 3 leaves")
    if M is None:
        M = n**4
    rng = stream.rng
    top1 = sample_topology_uniform(n, stream)
    top2 = sample_topology_uniform(n, stream)
    for _ in range(resample_limit):
        t1 = assign_generic_heights(top1, stream, M)
        t2 = assign_generic_heights(top2, stream, M)
        if is_generic_pair(t1, t2):
            return t1, t2
    raise RuntimeError(
        f"no generic pair in {resample_limit} height draws; increase M (={M})"
    )


# ---------------------------------------------------------------------------
# exhaustive enumerations (small-n oracles)


def enumerate_labeled_topologies(n: int, *, max_n: int = 7) -> List[Topology]:
    """All (2n-3)!! binary topologies on leaves 1..n."""
    if n > max_n:
        raise ValueError(f"exhaustive enumeration is limited to n <= {max_n}")
    if n < 2:
        raise ValueError("need at least 2 leaves")

    def shapes(leaves: FrozenSet[int]) -> List[FrozenSet[Clade]]:
        if len(leaves) == 1:
            return [frozenset()]
        first = min(leaves)
        rest = sorted(leaves - {first})
        out = []
        # every split is counted once by putting the smallest leaf left
        for mask in range(2 ** len(rest) - 1):
            left = frozenset(
                {first} | {x for k, x in enumerate(rest) if mask >> k & 1}
            )
            right = leaves - left
            for ls in shapes(left):
                for rs in shapes(right):
                    out.append(ls | rs | frozenset((leaves,)))
        return out

    leaves = frozenset(range(1, n + 1))
    return [Topology(n, s) for s in shapes(leaves)]


PlanarShape = object  # leaf count (int) or (left, right) tuple


@lru_cache(maxsize=None)
def _planar_shapes(n: int) -> Tuple[PlanarShape, ...]:
    """All ordered (left/right) rooted binary tree shapes with n leaves."""
    if n == 1:
        return (1,)
    out = []
    for a in range(1, n):
        for left in _planar_shapes(a):
            for right in _planar_shapes(n - a):
                out.append((left, right))
    return tuple(out)


def _leaf_count(shape: PlanarShape) -> int:
    return shape if isinstance(shape, int) else _leaf_count(shape[0]) + _leaf_count(shape[1])


def enumerate_planar_trees(n: int, *, max_n: int = 10):
    """Exhaustive census of planar rooted binary trees with n leaves.

    Returns (tree count, marked count, marked count per (a, b)) where a and
    b are the left and right leaf counts of the marked internal vertex.
    """
    if n > max_n:
        raise ValueError(f"planar enumeration is limited to n <= {max_n}")
    if n < 1:
        raise ValueError("need at least 1 leaf")
    by_ab: Dict[Tuple[int, int], int] = {}
    marked = 0
    shapes = _planar_shapes(n)
    for shape in shapes:
        stack = [shape]
        while stack:
            node = stack.pop()
            if isinstance(node, int):
                continue
            left, right = node
            key = (_leaf_count(left), _leaf_count(right))
            by_ab[key] = by_ab.get(key, 0) + 1
            marked += 1
            stack.append(left)
            stack.append(right)
    return len(shapes), marked, by_ab


# ---------------------------------------------------------------------------
# closed-form counts


def planar_tree_count(n: int) -> int:
    """Number of planar rooted binary trees with n leaves: C(2n-2, n-1)/n."""
    if n < 1:
        raise ValueError("need at least 1 leaf")
    return math.comb(2 * n - 2, n - 1) // n


def marked_planar_tree_count(n: int) -> int:
    """Planar trees with one marked internal vertex: (n-1)/n * C(2n-2, n-1)."""
    if n < 2:
        raise ValueError("need at least 2 leaves")
    return (n - 1) * math.comb(2 * n - 2, n - 1) // n


def marked_planar_tree_count_by_split(n: int, a: int, b: int) -> int:
    """Marked planar trees whose marked vertex has a left leaves, b right."""
    if a < 1 or b < 1 or a + b > n:
        raise ValueError(f"invalid split sizes a={a}, b={b} for n={n}")
    c = n - a - b
    return (
        math.comb(2 * a - 2, a - 1)
        * math.comb(2 * b - 2, b - 1)
        * math.comb(2 * c, c)
        // (a * b)
    )


def split_size_probability(a: int, b: int, n: int) -> Fraction:
    """Probability that a uniform marked vertex has the split sizes (a, b)."""
    return Fraction(
        marked_planar_tree_count_by_split(n, a, b), marked_planar_tree_count(n)
    )


def split_size_probability_bound(a: int, b: int, n: int) -> float:
    """Closed-form upper bound on split_size_probability."""
    c = n - a - b
    return (
        math.sqrt(n)
        / (2 * math.pi)
        / (a * math.sqrt(a - 0.75) * b * math.sqrt(b - 0.75) * math.sqrt(c + 0.25))
    )


# ---------------------------------------------------------------------------
# overlap probabilities


@lru_cache(maxsize=None)
def overlap_probability(a1: int, b1: int, a2: int, b2: int, n: int) -> Fraction:
    """P(A1 meets A2 and B1 meets B2) for independent uniform disjoint pairs.

    (A_i, B_i) is drawn uniformly among pairs of disjoint subsets of [n]
    with |A_i| = a_i and |B_i| = b_i.  Computed exactly by inclusion-
    exclusion over the size of the overlap of A2 with B1.
    """
    for a, b in ((a1, b1), (a2, b2)):
        if a < 1 or b < 1 or a + b > n:
            raise ValueError(f"invalid sizes a={a}, b={b} for n={n}")
    total_a2 = math.comb(n, a2)

    def comb(x: int, y: int) -> int:
        return math.comb(x, y) if 0 <= y <= x else 0

    p_a_empty = Fraction(comb(n - a1, a2), total_a2)
    p_b_empty = Fraction(0)
    p_both_empty = Fraction(0)
    for k in range(0, min(a2, b1) + 1):
        # B2 is drawn from the n - a2 points outside A2, of which b1 - k
        # still belong to B1
        avoid = Fraction(comb(n - a2 - (b1 - k), b2), math.comb(n - a2, b2))
        p_b_empty += Fraction(comb(b1, k) * comb(n - b1, a2 - k), total_a2) * avoid
        p_both_empty += (
            Fraction(comb(b1, k) * comb(n - a1 - b1, a2 - k), total_a2) * avoid
        )
    return 1 - p_a_empty - p_b_empty + p_both_empty


def overlap_probability_bound(
    a1: int, b1: int, a2: int, b2: int, n: int
) -> Fraction:
    """The exact-rational majorant min(a1*a2, b1*b2)/n of overlap_probability."""
    return Fraction(min(a1 * a2, b1 * b2), n)


def overlap_probability_geometric_bound(
    a1: int, b1: int, a2: int, b2: int, n: int
) -> float:
    """The weaker product-form majorant sqrt(a1*a2*b1*b2)/n."""
    return math.sqrt(a1 * a2 * b1 * b2) / n


# ---------------------------------------------------------------------------
# the bounding sum


def _split_types(n: int) -> List[Tuple[int, int]]:
    return [(a, b) for a in range(1, n) for b in range(1, n - a + 1)]


@lru_cache(maxsize=None)
def essential_rate_bound(n: int) -> Fraction:
    """Upper bound on the expected per-vertex-pair overlap rate.

    Exactly sums min(a1*a2, b1*b2)/n weighted by the two independent split
    size distributions, over all split types of both trees.  The min() is
    resolved by sorting one side by a/b and the other by b/a and sweeping,
    so the cost is near-linear in the number of split types instead of
    quadratic.
    """
    if n < 2:
        raise ValueError("need at least 2 leaves")
    import numpy as np

    cat = [gmpy2.mpz(math.comb(2 * k, k) // (k + 1)) for k in range(n + 1)]
    cb = [gmpy2.mpz(math.comb(2 * k, k)) for k in range(n + 1)]

    # all split types (a, b) as flat arrays; big-integer weights are never
    # stored per type, only recomputed inside the sweep
    av = np.concatenate([np.full(n - a, a, dtype=np.int32) for a in range(1, n)])
    bv = np.concatenate([np.arange(1, n - a + 1, dtype=np.int32) for a in range(1, n)])
    # side 1 ascending by a/b, side 2 ascending by b/a; float division is
    # exact enough to order ratios of integers of this size
    order1 = np.argsort(av / bv, kind="stable")
    order2 = np.argsort(bv / av, kind="stable")
    a1s = av[order1].tolist()
    b1s = bv[order1].tolist()
    a2s = av[order2].tolist()
    b2s = bv[order2].tolist()
    count = len(a1s)

    total_b = gmpy2.mpz(0)
    for a, b in zip(a1s, b1s):
        total_b += b * (cat[a - 1] * cat[b - 1] * cb[n - a - b])

    numer = gmpy2.mpz(0)
    sa = gmpy2.mpz(0)  # sum of a1*w1 over side-1 types with a1/b1 <= b2/a2
    sc = total_b  # sum of b1*w1 over the complementary side-1 types
    ptr = 0
    for a2, b2 in zip(a2s, b2s):
        while ptr < count:
            a1 = a1s[ptr]
            b1 = b1s[ptr]
            if a1 * a2 > b1 * b2:
                break
            w1 = cat[a1 - 1] * cat[b1 - 1] * cb[n - a1 - b1]
            sa += a1 * w1
            sc -= b1 * w1
            ptr += 1
        w2 = cat[a2 - 1] * cat[b2 - 1] * cb[n - a2 - b2]
        numer += w2 * (a2 * sa + b2 * sc)

    denom = (n - 1) * cat[n - 1]
    return Fraction(int(numer), int(n * denom * denom))


def essential_rate_bound_geometric(n: int) -> float:
    """The product-form variant, which factors into a perfect square."""
    lg = math.lgamma

    def log_comb(x: int, y: int) -> float:
        return lg(x + 1) - lg(y + 1) - lg(x - y + 1)

    log_d = math.log(n - 1) + log_comb(2 * n - 2, n - 1) - math.log(n)
    s = 0.0
    for a, b in _split_types(n):
        c = n - a - b
        log_w = (
            log_comb(2 * a - 2, a - 1)
            + log_comb(2 * b - 2, b - 1)
            + log_comb(2 * c, c)
            - math.log(a * b)
        )
        s += math.sqrt(a * b) * math.exp(log_w - log_d)
    return s * s / n


def essential_rate_exact(n: int, *, max_n: int = 40) -> Fraction:
    """The fully exact double sum, with the true overlap probability."""
    if n > max_n:
        raise ValueError(f"exact rate sum is limited to n <= {max_n}")
    types = _split_types(n)
    probs = {t: split_size_probability(t[0], t[1], n) for t in types}
    total = Fraction(0)
    for a1, b1 in types:
        p1 = probs[(a1, b1)]
        for a2, b2 in types:
            total += overlap_probability(a1, b1, a2, b2, n) * p1 * probs[(a2, b2)]
    return total


# ---------------------------------------------------------------------------
# expectations


def expected_essential_pairs_exact(n: int, *, max_n: int = 6) -> Fraction:
    """Exact mean number of shared-vertex pairs over uniform topology pairs.

    The count depends only on the two topologies, so averaging over all
    ordered pairs of labeled binary topologies gives the exact expectation
    for any generic metrics.
    """
    if n > max_n:
        raise ValueError(f"exact expectation is limited to n <= {max_n}")
    tops = enumerate_labeled_topologies(n, max_n=max_n)

    def any_heights(t: Topology) -> Dict[Clade, Fraction]:
        order = sorted(t.clades, key=lambda c: (len(c), sorted(c)))
        return {c: Fraction(k + 1) for k, c in enumerate(order)}

    arrays = [tuple(tree_from_topology(t, any_heights(t))._lca_array()) for t in tops]
    total = 0
    for x in arrays:
        for y in arrays:
            total += len(set(zip(x, y)))
    return Fraction(total, len(arrays) ** 2)


@dataclass(frozen=True)
class ExperimentReport:
    """One Monte-Carlo run: empirical turning-point counts against the bound."""

    n: int
    trials: int
    seed: int
    mean: float
    variance: float
    ci99: float
    bound_exact: Fraction
    seconds: float

    @property
    def bound(self) -> float:
        return float(self.bound_exact)

    def csv_row(self) -> List[str]:
        return [
            str(self.n),
            str(self.trials),
            repr(self.mean),
            repr(self.variance),
            repr(self.ci99),
            repr(self.bound),
            repr(self.seconds),
        ]


EXPERIMENT_CSV_COLUMNS = ["n", "trials", "mean_pi", "var", "ci99", "bound", "seconds"]


def _trial_value(args: Tuple[int, int, int]) -> int:
    n, seed, index = args
    t1, t2 = sample_generic_pair(n, SeededStream(seed, index))
    return _essential_pair_count(t1, t2)


def _thread_budget() -> int:
    raw = os.environ.get("TROPLINE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def essential_pairs_experiment(
    n: int, trials: int, seed: int, *, index_base: int = 0
) -> ExperimentReport:
    """Monte-Carlo estimate of the mean turning-point count at size n.

    Trial k draws its randomness from (seed, index_base + k), so reruns and
    parallel schedules reproduce identical values.  TROPLINE_THREADS > 1
    spreads trials over processes.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    start = time.perf_counter()
    jobs = [(n, seed, index_base + k) for k in range(trials)]
    workers = min(_thread_budget(), trials)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(
                pool.map(_trial_value, jobs, chunksize=max(1, trials // (4 * workers)))
            )
    else:
        values = [_trial_value(j) for j in jobs]
    mean = sum(values) / trials
    if trials > 1:
        variance = sum((v - mean) ** 2 for v in values) / (trials - 1)
    else:
        variance = 0.0
    ci99 = CI99_Z * math.sqrt(variance / trials)
    bound_exact = 2 * (n - 1) ** 2 * essential_rate_bound(n)
    return ExperimentReport(
        n=n,
        trials=trials,
        seed=seed,
        mean=mean,
        variance=variance,
        ci99=ci99,
        bound_exact=bound_exact,
        seconds=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# the worst-case family


def worst_case_pair(n: int) -> Tuple[UltraVector, UltraVector]:
    """The caterpillar pair whose segment has C(n,2) turning points."""
    if n < 3:
        raise ValueError("need at least 3 leaves")
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    u = UltraVector(n, (Fraction(n * (n - min(i, j))) for i, j in pairs))
    v = UltraVector(n, (Fraction(max(i, j) - 1) for i, j in pairs))
    return u, v
