"""Tropical line segments between ultrametrics and their turning points.

The segment between u and v is the concatenation of Euclidean pieces that
join the points max(u, lambda + v) for lambda ranging over the sorted
distinct entrywise differences u - v.  Between a generic pair of trees each
junction tree is binary, has one vertex with three children, or has one
vertex with four children; anything else signals a bug or a non-generic
input.
"""

from __future__ import annotations

import enum
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .metric import (
    DimensionMismatch,
    ProjectivePoint,
    UltraVector,
    _three_point_violation_ints,
    first_three_point_violation,
    integerize,
    pair_list,
)
from .trees import (
    Clade,
    EquidistantTree,
    NotUltrametricError,
    Topology,
    _merge_profile_from_scaled_ints,
    _tree_from_scaled_ints,
    is_generic_pair,
    nni_distance_exact,
    nni_neighbors,
    ultrametric_to_tree,
)


class TheoremViolation(RuntimeError):
    """A turning point tree fell outside the three admissible forms."""


class NonGenericPairError(ValueError):
    """An operation that requires a generic pair received a degenerate one."""


class TurningPointClass(enum.Enum):
    NO_CHANGE = "NoChange"
    SINGLE_NNI = "SingleNNI"
    FOUR_CLADE = "FourClade"


NNI_WEIGHT = {
    TurningPointClass.NO_CHANGE: 0,
    TurningPointClass.SINGLE_NNI: 1,
    TurningPointClass.FOUR_CLADE: 3,
}


@dataclass(frozen=True)
class TurningPoint:
    scalar: Fraction
    point: ProjectivePoint
    tree: EquidistantTree
    klass: Optional[TurningPointClass]
    witness: Optional[Tuple[Clade, Clade]] = None


@dataclass(frozen=True)
class TropicalSegment:
    u: UltraVector
    v: UltraVector
    points: Tuple[TurningPoint, ...]
    generic_pair: bool


# ---------------------------------------------------------------------------
# scalars and essential pairs


def turning_scalars(u: UltraVector, v: UltraVector) -> List[Fraction]:
    """Sorted distinct values of u_k - v_k over all pair indices."""
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    return sorted({a - b for a, b in zip(u.entries, v.entries)})


def essential_pairs(
    t1: EquidistantTree, t2: EquidistantTree
) -> Set[Tuple[Clade, Clade]]:
    """All vertex pairs that are both the lca of some common leaf pair."""
    if t1.n != t2.n:
        raise DimensionMismatch(f"n={t1.n} vs n={t2.n}")
    a1 = t1._lca_array()
    a2 = t2._lca_array()
    return {
        (t1.internal_vertices[x], t2.internal_vertices[y]) for x, y in zip(a1, a2)
    }


def _essential_pair_count(t1: EquidistantTree, t2: EquidistantTree) -> int:
    return len(set(zip(t1._lca_array(), t2._lca_array())))


def lambda_from_heights(
    t1: EquidistantTree, x1: Clade, t2: EquidistantTree, x2: Clade
) -> Fraction:
    """The segment scalar 2*(height of x1 in t1 - height of x2 in t2)."""
    return 2 * (t1.height(x1) - t2.height(x2))


def tropical_interchange_number(t1: EquidistantTree, t2: EquidistantTree) -> int:
    """Number of turning points between two topologies under generic metrics."""
    if not is_generic_pair(t1, t2):
        raise NonGenericPairError(
            "tropical interchange number requires a generic pair"
        )
    return _essential_pair_count(t1, t2)


# ---------------------------------------------------------------------------
# classification


def _classify_profile(profile: Sequence[int]) -> Optional[TurningPointClass]:
    big = [c for c in profile if c >= 3]
    if not big:
        return TurningPointClass.NO_CHANGE
    if len(big) == 1 and big[0] == 3:
        return TurningPointClass.SINGLE_NNI
    if len(big) == 1 and big[0] == 4:
        return TurningPointClass.FOUR_CLADE
    return None


def classify_turning_point(w: UltraVector, context: str = "") -> TurningPointClass:
    """Classify a junction point by the child counts of its tree.

    Raises :class:`TheoremViolation` if the tree has a vertex with five or
    more children, or two vertices with three or more children each; between
    a generic pair of trees this must never happen.
    """
    bad = first_three_point_violation(w)
    if bad is not None:
        raise NotUltrametricError(f"turning point fails three-point at {bad}")
    scale, (vals,) = integerize(w)
    profile = _merge_profile_from_scaled_ints(vals, w.n)
    klass = _classify_profile(profile)
    if klass is None:
        raise TheoremViolation(
            f"child-count profile {tuple(profile)} is outside the trichotomy"
            + (f" ({context})" if context else "")
        )
    return klass


# ---------------------------------------------------------------------------
# the segment itself


def tropical_segment(u: UltraVector, v: UltraVector) -> TropicalSegment:
    """All turning points of the segment from u to v, as trees, classified.

    Both inputs must be certified ultrametrics.  For a generic endpoint
    pair every turning point is classified; a classification failure raises
    :class:`TheoremViolation`.  For a non-generic pair the segment is still
    computed, with out-of-trichotomy points left unclassified.
    """
    for name, w in (("u", u), ("v", v)):
        bad = first_three_point_violation(w)
        if bad is not None:
            raise NotUltrametricError(
                f"{name} fails the three-point condition at triple {bad}"
            )
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")

    t1 = ultrametric_to_tree(u)
    t2 = ultrametric_to_tree(v)
    generic = is_generic_pair(t1, t2)

    scale, (uu, vv) = integerize(u, v)
    diffs = [a - b for a, b in zip(uu, vv)]

    # witness vertices: pair index -> (lca in t1, lca in t2)
    witness_by_diff: Dict[int, Tuple[Clade, Clade]] = {}
    a1, a2 = t1._lca_array(), t2._lca_array()
    for k, d in enumerate(diffs):
        witness_by_diff.setdefault(d, (t1.internal_vertices[a1[k]], t2.internal_vertices[a2[k]]))

    points = []
    for lam in sorted(set(diffs)):
        w = [max(a, lam + b) for a, b in zip(uu, vv)]
        tree = _tree_from_scaled_ints(w, u.n, scale)
        klass = _classify_profile(tree.child_count_profile())
        if klass is None and generic:
            raise TheoremViolation(
                f"profile {tree.child_count_profile()} at scalar "
                f"{Fraction(lam, scale)} between a generic pair"
            )
        point = ProjectivePoint(UltraVector(u.n, (Fraction(x, scale) for x in w)))
        points.append(
            TurningPoint(
                scalar=Fraction(lam, scale),
                point=point,
                tree=tree,
                klass=klass,
                witness=witness_by_diff.get(lam),
            )
        )
    return TropicalSegment(u=u, v=v, points=tuple(points), generic_pair=generic)


def _classify_event_stats(n: int, events: int, max_children: int):
    """Class from (number of merge events, largest child count).

    Child counts k over all vertices satisfy sum(k - 1) = n - 1, so the
    event count pins down the total excess over binary.
    """
    if events == n - 1:
        return TurningPointClass.NO_CHANGE
    if events == n - 2 and max_children == 3:
        return TurningPointClass.SINGLE_NNI
    if events == n - 3 and max_children == 4:
        return TurningPointClass.FOUR_CLADE
    return None


def _class_counts_int64(uu, vv, n: int) -> Counter:
    """Tally turning-point classes on the int64 grid, one union-find sweep
    per scalar; avoids building any tree objects."""
    import numpy as np

    ij = np.array(pair_list(n), dtype=np.int64)
    iv, jv = ij[:, 0], ij[:, 1]
    ua = np.asarray(uu, dtype=np.int64)
    va = np.asarray(vv, dtype=np.int64)
    counts: Counter = Counter()
    for lam in np.unique(ua - va).tolist():
        w = np.maximum(ua, va + lam)
        order = np.argsort(w, kind="stable")
        wi = w[order].tolist()
        ii = iv[order].tolist()
        jj = jv[order].tolist()

        parent = list(range(n + 1))
        cnt = [1] * (n + 1)  # pre-run components inside a current-run group
        stamp = [-1] * (n + 1)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        events = 0
        max_children = 2
        pos = 0
        total = len(wi)
        run = 0
        while pos < total:
            val = wi[pos]
            touched = []
            while pos < total and wi[pos] == val:
                ri = find(ii[pos])
                rj = find(jj[pos])
                pos += 1
                if ri == rj:
                    continue
                ci = cnt[ri] if stamp[ri] == run else 1
                cj = cnt[rj] if stamp[rj] == run else 1
                parent[ri] = rj
                cnt[rj] = ci + cj
                stamp[rj] = run
                touched.append(rj)
            for r in touched:
                if parent[r] == r and stamp[r] == run:
                    events += 1
                    if cnt[r] > max_children:
                        max_children = cnt[r]
                    stamp[r] = -1
            run += 1
        counts[_classify_event_stats(n, events, max_children)] += 1
    return counts


def segment_class_counts(
    u: UltraVector, v: UltraVector, *, require_trichotomy: bool = True
) -> Counter:
    """Class counts over all turning points, without materializing trees.

    Runs on the common integer grid of u and v; used by the worst-case
    sweeps where only the classification tally matters.
    """
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    scale, (uu, vv) = integerize(u, v)
    if max(max(map(abs, uu), default=0), max(map(abs, vv), default=0)) < 2**61:
        counts = _class_counts_int64(uu, vv, u.n)
    else:
        counts = Counter()
        for lam in sorted({a - b for a, b in zip(uu, vv)}):
            w = [max(a, lam + b) for a, b in zip(uu, vv)]
            profile = _merge_profile_from_scaled_ints(w, u.n)
            counts[_classify_profile(profile)] += 1
    if counts.get(None):
        if require_trichotomy:
            raise TheoremViolation(
                f"{counts[None]} turning point(s) fall outside the trichotomy"
            )
    else:
        counts.pop(None, None)
    return counts


def tropical_nni_number(t1: EquidistantTree, t2: EquidistantTree) -> int:
    """Total NNI moves along the segment: 1 per three-child junction, 3 per
    four-child junction."""
    if not is_generic_pair(t1, t2):
        raise NonGenericPairError("tropical NNI number requires a generic pair")
    counts = segment_class_counts(t1.to_ultrametric(), t2.to_ultrametric())
    return sum(NNI_WEIGHT[k] * c for k, c in counts.items())


# ---------------------------------------------------------------------------
# comparison graph


def comparison_graph(u: UltraVector, v: UltraVector) -> Set[Tuple[int, int]]:
    """Edges (i, j) on vertex set [n] with u_ij >= v_ij."""
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    return {
        pair
        for pair, a, b in zip(pair_list(u.n), u.entries, v.entries)
        if a >= b
    }


def has_odd_cycle(n: int, edges: Set[Tuple[int, int]]) -> bool:
    """True iff the graph on [n] with the given edges is not bipartite."""
    adj: Dict[int, List[int]] = {i: [] for i in range(1, n + 1)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    color: Dict[int, int] = {}
    for start in range(1, n + 1):
        if start in color:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in color:
                    color[y] = 1 - color[x]
                    queue.append(y)
                elif color[y] == color[x]:
                    return True
    return False


# ---------------------------------------------------------------------------
# whole-segment analysis (used by the verification suite and `classify`)


@dataclass
class SegmentAnalysis:
    """Cross-validated account of one segment between certified ultrametrics.

    ``classes[i]`` may be None when the junction tree falls outside the
    three admissible forms (possible only for non-generic input).
    """

    n: int
    generic_pair: bool
    scalars: List[Fraction]
    classes: List[Optional[TurningPointClass]]
    profiles: List[Tuple[int, ...]]
    convexity_ok: bool
    piece_constancy_ok: bool
    moves_ok: bool
    endpoints_ok: bool
    problems: List[str] = field(default_factory=list)


def _meta_topology(units: Sequence[Clade], extras: Sequence[Clade]) -> Optional[Topology]:
    """Collapse the child units of a four-child vertex to meta-leaves 1..4.

    ``extras`` are the clades a binary refinement adds under that vertex;
    each must be an exact union of units.  Returns None if it is not.
    """
    meta_clades = {frozenset(range(1, len(units) + 1))}
    for e in extras:
        members = frozenset(k + 1 for k, un in enumerate(units) if un <= e)
        if frozenset().union(*(units[m - 1] for m in members)) != e:
            return None
        meta_clades.add(members)
    return Topology(len(units), frozenset(meta_clades))


def analyze_segment(
    u: UltraVector,
    v: UltraVector,
    *,
    bfs_cross_check: bool = True,
) -> SegmentAnalysis:
    """Compute the segment and verify its structural claims point by point.

    Checks, exactly:
      - every turning point and three interior samples per Euclidean piece
        satisfy the three-point condition;
      - the topology at each piece's midpoint matches the topology at the
        quarter points of the same piece;
      - across a binary junction the flanking topologies are equal, across a
        three-child junction they are NNI-adjacent, and across a four-child
        junction they are three NNI moves apart (verified by breadth-first
        search on the four collapsed child subtrees, and additionally by a
        full search when n <= 7 and ``bfs_cross_check``);
      - the outermost turning points projectively equal the endpoints.
    """
    for name, w in (("u", u), ("v", v)):
        bad = first_three_point_violation(w)
        if bad is not None:
            raise NotUltrametricError(
                f"{name} fails the three-point condition at triple {bad}"
            )
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    n = u.n

    t1 = ultrametric_to_tree(u)
    t2 = ultrametric_to_tree(v)
    generic = is_generic_pair(t1, t2)

    scale, (uu, vv) = integerize(u, v)
    # work on a x4 grid so quarter points of each piece stay integral
    uu = [4 * x for x in uu]
    vv = [4 * x for x in vv]
    scale *= 4
    lams = sorted({a - b for a, b in zip(uu, vv)})

    problems: List[str] = []
    points = [[max(a, lam + b) for a, b in zip(uu, vv)] for lam in lams]
    trees = [_tree_from_scaled_ints(w, n, scale) for w in points]
    profiles = [t.child_count_profile() for t in trees]
    classes = [_classify_profile(p) for p in profiles]
    for lam, p, k in zip(lams, profiles, classes):
        if k is None:
            problems.append(f"profile {p} at scalar {Fraction(lam, scale)}")

    # convexity along every Euclidean piece, sampled at quarters
    convexity_ok = True
    piece_constancy_ok = True
    mid_topologies: List[Topology] = []
    for a, b in zip(points, points[1:]):
        samples = []
        for q in (1, 2, 3):
            samples.append([(4 - q) * x + q * y for x, y in zip(a, b)])
        mid_tree = _tree_from_scaled_ints(samples[1], n, 4 * scale)
        mid_topologies.append(mid_tree.topology())
        for s in samples:
            if _three_point_violation_ints(s, n) is not None:
                convexity_ok = False
        for s in (samples[0], samples[2]):
            if _tree_from_scaled_ints(s, n, 4 * scale).topology() != mid_topologies[-1]:
                piece_constancy_ok = False
    for w in points:
        if _three_point_violation_ints(w, n) is not None:
            convexity_ok = False

    # move consistency at interior turning points
    moves_ok = True
    for i in range(1, len(points) - 1):
        prev_t, next_t = mid_topologies[i - 1], mid_topologies[i]
        klass = classes[i]
        if klass is TurningPointClass.NO_CHANGE:
            if prev_t != next_t:
                moves_ok = False
                problems.append(f"topology changed across a binary junction #{i}")
        elif klass is TurningPointClass.SINGLE_NNI:
            if next_t == prev_t or next_t not in nni_neighbors(prev_t):
                moves_ok = False
                problems.append(f"flanks of three-child junction #{i} not NNI-adjacent")
        elif klass is TurningPointClass.FOUR_CLADE:
            ok = _check_four_clade_crossing(trees[i], prev_t, next_t)
            if ok and bfs_cross_check and n <= 7:
                ok = nni_distance_exact(prev_t, next_t) == 3
            if not ok:
                moves_ok = False
                problems.append(f"four-child junction #{i} is not three moves wide")
        else:
            moves_ok = False

    endpoints_ok = True
    if points:
        lo, hi = points[0], points[-1]
        du = lo[0] - uu[0]
        if any(x - y != du for x, y in zip(lo, uu)):
            endpoints_ok = False
        dv = hi[0] - vv[0]
        if any(x - y != dv for x, y in zip(hi, vv)):
            endpoints_ok = False

    return SegmentAnalysis(
        n=n,
        generic_pair=generic,
        scalars=[Fraction(lam, scale) for lam in lams],
        classes=classes,
        profiles=profiles,
        convexity_ok=convexity_ok,
        piece_constancy_ok=piece_constancy_ok,
        moves_ok=moves_ok,
        endpoints_ok=endpoints_ok,
        problems=problems,
    )


def _check_four_clade_crossing(
    junction: EquidistantTree, prev_t: Topology, next_t: Topology
) -> bool:
    """The flanks of a four-child junction must be binary refinements of it
    that sit three NNI moves apart, with all moves local to that vertex."""
    base = junction.topology().clades
    special = [c for c in junction.internal_vertices if junction.child_count(c) == 4]
    if len(special) != 1:
        return False
    units = junction.children_units(special[0])
    metas = []
    for t in (prev_t, next_t):
        if not (t.is_binary() and base <= t.clades):
            return False
        extras = t.clades - base
        if len(extras) != 2:
            return False
        meta = _meta_topology(units, sorted(extras, key=min))
        if meta is None:
            return False
        metas.append(meta)
    return nni_distance_exact(metas[0], metas[1]) == 3


# ---------------------------------------------------------------------------
# JSON report


def segment_report_dict(seg: TropicalSegment, *, decimal: bool = False) -> dict:
    """Serializable report: endpoints plus one record per turning point."""

    def vec(u: UltraVector):
        out = [str(e) for e in u.entries]
        return out

    report = {
        "n": seg.u.n,
        "u": vec(seg.u),
        "v": vec(seg.v),
        "generic_pair": seg.generic_pair,
        "points": [],
    }
    for tp in seg.points:
        rec = {
            "lambda": str(tp.scalar),
            "point": vec(tp.point.rep),
            "class": tp.klass.value if tp.klass is not None else None,
            "witness": (
                [sorted(tp.witness[0]), sorted(tp.witness[1])]
                if tp.witness is not None
                else None
            ),
            "newick": tp.tree.newick(),
        }
        if decimal:
            rec["lambda_decimal"] = float(tp.scalar)
            rec["point_decimal"] = [float(e) for e in tp.point.rep.entries]
        report["points"].append(rec)
    if not seg.generic_pair:
        report["note"] = "non-generic; classification trichotomy not guaranteed"
    return report
