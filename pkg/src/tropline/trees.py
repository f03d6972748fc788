"""Rooted equidistant trees with exact heights, topologies, and NNI moves.

A tree is stored as its laminar family of internal-vertex clades together
with an exact height per clade.  Leaves are labeled 1..n and sit at height
0; the clade of an internal vertex is the set of leaves below it.  This
representation makes the tree <-> ultrametric correspondence direct:
d(i, j) = 2 * height(smallest clade containing i and j).
"""

from __future__ import annotations

import itertools
import json
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .metric import (
    DimensionMismatch,
    UltraVector,
    as_scalar,
    first_three_point_violation,
    integerize,
    pair_count,
    pair_list,
    three_point_check,
)

Clade = FrozenSet[int]

_INT64_SAFE = 2**62


class NotUltrametricError(ValueError):
    """A vector failed the three-point condition where a tree was required."""


class NewickError(ValueError):
    """Malformed or non-equidistant Newick input."""


def _row_offsets(n: int) -> List[int]:
    return [0] + [(i - 1) * (2 * n - i) // 2 for i in range(1, n + 1)]


class EquidistantTree:
    """Rooted tree with leaves 1..n, exact heights on internal vertices.

    Internal vertices are identified with their clades (frozensets of leaf
    labels).  Heights strictly increase from children to parents, and every
    internal vertex has at least two children.
    """

    __slots__ = ("n", "_clades", "_heights", "_units", "_index", "_root", "_lca")

    def __init__(
        self,
        n: int,
        clade_heights: Mapping[Clade, Fraction] | Iterable[Tuple[Iterable[int], object]],
        *,
        validate: bool = True,
    ):
        if isinstance(clade_heights, Mapping):
            items = list(clade_heights.items())
        else:
            items = list(clade_heights)
        clades = [frozenset(c) for c, _ in items]
        heights = [as_scalar(h) for _, h in items]
        order = sorted(range(len(clades)), key=lambda t: (len(clades[t]), sorted(clades[t])))
        clades = [clades[t] for t in order]
        heights = [heights[t] for t in order]
        units, parent = _derive_structure(n, clades, validate=validate)
        if validate:
            _validate_tree(n, clades, heights, parent)
        self._init_fields(n, clades, heights, units)

    def _init_fields(self, n, clades, heights, units):
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_clades", tuple(clades))
        object.__setattr__(self, "_heights", tuple(heights))
        object.__setattr__(self, "_units", tuple(tuple(u) for u in units))
        object.__setattr__(self, "_index", {c: k for k, c in enumerate(clades)})
        object.__setattr__(self, "_root", self._index[frozenset(range(1, n + 1))])
        object.__setattr__(self, "_lca", None)

    @classmethod
    def _from_structure(
        cls,
        n: int,
        clades: Sequence[Clade],
        heights: Sequence[Fraction],
        units: Sequence[Sequence[Clade]],
    ) -> "EquidistantTree":
        """Trusted constructor for callers that already know the structure."""
        tree = cls.__new__(cls)
        tree._init_fields(n, list(clades), list(heights), list(units))
        return tree

    def __setattr__(self, name, value):
        raise AttributeError("EquidistantTree is immutable")

    # -- basic queries ------------------------------------------------------

    @property
    def internal_vertices(self) -> Tuple[Clade, ...]:
        return self._clades

    @property
    def root_clade(self) -> Clade:
        return self._clades[self._root]

    def height(self, clade: Clade) -> Fraction:
        return self._heights[self._index[frozenset(clade)]]

    def root_height(self) -> Fraction:
        return self._heights[self._root]

    def children_units(self, clade: Clade) -> Tuple[Clade, ...]:
        """Child subtrees of this vertex, as leaf sets (singletons for leaves)."""
        return self._units[self._index[frozenset(clade)]]

    def child_count(self, clade: Clade) -> int:
        return len(self.children_units(clade))

    def child_count_profile(self) -> Tuple[int, ...]:
        return tuple(len(u) for u in self._units)

    def _lca_array(self) -> List[int]:
        if self._lca is None:
            n = self.n
            offs = _row_offsets(n)
            arr = [-1] * pair_count(n)
            for idx, units in enumerate(self._units):
                for ua, ub in itertools.combinations(units, 2):
                    for i in ua:
                        for j in ub:
                            if i < j:
                                arr[offs[i] + j - i - 1] = idx
                            else:
                                arr[offs[j] + i - j - 1] = idx
            object.__setattr__(self, "_lca", arr)
        return self._lca

    def lca(self, i: int, j: int) -> Clade:
        """The least common ancestor of leaves i and j, as a clade."""
        if i == j:
            raise ValueError("lca needs two distinct leaves")
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError(f"unknown leaf label in ({i}, {j}) for n={self.n}")
        if i > j:
            i, j = j, i
        offs = _row_offsets(self.n)
        return self._clades[self._lca_array()[offs[i] + j - i - 1]]

    # -- conversions --------------------------------------------------------

    def to_ultrametric(self) -> UltraVector:
        lca = self._lca_array()
        return UltraVector(self.n, (2 * self._heights[k] for k in lca))

    def topology(self) -> "Topology":
        return Topology(self.n, frozenset(self._clades))

    def is_generic(self) -> bool:
        """True iff every internal vertex has exactly two children."""
        return all(len(u) == 2 for u in self._units)

    def newick(self) -> str:
        return write_newick(self)

    # -- equality -----------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EquidistantTree)
            and self.n == other.n
            and frozenset(zip(self._clades, self._heights))
            == frozenset(zip(other._clades, other._heights))
        )

    def __hash__(self) -> int:
        return hash((self.n, frozenset(zip(self._clades, self._heights))))

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{sorted(c)}@{h}" for c, h in zip(self._clades, self._heights)
        )
        return f"EquidistantTree(n={self.n}, {parts})"


def _derive_structure(n: int, clades: Sequence[Clade], *, validate: bool):
    """Parent indices and child units for a laminar family sorted by size."""
    m = len(clades)
    parent: List[Optional[int]] = [None] * m
    for a in range(m):
        for b in range(a + 1, m):
            if clades[a] < clades[b]:
                parent[a] = b
                break
    child_clades: List[List[Clade]] = [[] for _ in range(m)]
    for a, p in enumerate(parent):
        if p is not None:
            child_clades[p].append(clades[a])
    units: List[List[Clade]] = []
    for idx in range(m):
        covered = set()
        u = []
        for c in child_clades[idx]:
            covered |= c
            u.append(c)
        for leaf in sorted(clades[idx] - covered):
            u.append(frozenset((leaf,)))
        units.append(sorted(u, key=min))
    return units, parent


def _validate_tree(n, clades, heights, parent):
    if n < 2:
        raise ValueError("need at least 2 leaves")
    full = frozenset(range(1, n + 1))
    seen = set()
    for c in clades:
        if len(c) < 2:
            raise ValueError(f"clade {sorted(c)} has fewer than 2 leaves")
        if not c <= full:
            raise ValueError(f"clade {sorted(c)} contains unknown leaves")
        if c in seen:
            raise ValueError(f"duplicate clade {sorted(c)}")
        seen.add(c)
    if full not in seen:
        raise ValueError("root clade [n] missing")
    for a, b in itertools.combinations(range(len(clades)), 2):
        x, y = clades[a], clades[b]
        if x & y and not (x <= y or y <= x):
            raise ValueError(f"clades {sorted(x)} and {sorted(y)} cross")
    for k, h in enumerate(heights):
        if h <= 0:
            raise ValueError(f"non-positive height {h} at {sorted(clades[k])}")
        p = parent[k]
        if p is not None and not heights[p] > h:
            raise ValueError(
                f"height of {sorted(clades[k])} is not below its parent's"
            )


# ---------------------------------------------------------------------------
# tree <-> ultrametric


def tree_to_ultrametric(tree: EquidistantTree) -> UltraVector:
    """Leaf distance vector d(i,j) = 2 * height(lca(i,j))."""
    return tree.to_ultrametric()


def ultrametric_to_tree(u: UltraVector) -> EquidistantTree:
    """Reconstruct the equidistant tree of a certified ultrametric.

    Exact single-linkage clustering on the distinct values of u/2; ties
    (non-generic vectors) deliberately produce multifurcations.
    """
    bad = first_three_point_violation(u)
    if bad is not None:
        raise NotUltrametricError(f"three-point condition fails at triple {bad}")
    scale, (vals,) = integerize(u)
    return _tree_from_scaled_ints(vals, u.n, scale)


def _value_order(vals: Sequence[int]) -> Sequence[int]:
    if max(abs(x) for x in vals) < _INT64_SAFE:
        return np.argsort(np.asarray(vals, dtype=np.int64), kind="stable")
    return sorted(range(len(vals)), key=vals.__getitem__)


def _merge_groups(vals: Sequence[int], n: int):
    """Yield (value, [list of merged component ids]) per new internal vertex.

    Components are tracked by a union-find over leaves; the caller sees, for
    each merge event, the integer scaled distance value and the roots that
    fuse into one new vertex.  Roots are prior event indices or -leaf for
    original leaves.
    """
    pl = pair_list(n)
    uf = list(range(n + 1))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    # tag[root] = component id: -leaf for singletons, event index for merged
    tag = {i: -i for i in range(1, n + 1)}
    order = _value_order(vals)
    pos = 0
    total = len(order)
    event = 0
    while pos < total:
        val = vals[order[pos]]
        run = []
        while pos < total and vals[order[pos]] == val:
            run.append(order[pos])
            pos += 1
        adj: Dict[int, set] = {}
        for k in run:
            i, j = pl[k]
            ri, rj = find(i), find(j)
            if ri != rj:
                adj.setdefault(ri, set()).add(rj)
                adj.setdefault(rj, set()).add(ri)
        seen = set()
        for start in adj:
            if start in seen:
                continue
            comp = []
            queue = deque([start])
            seen.add(start)
            while queue:
                r = queue.popleft()
                comp.append(r)
                for s in adj[r]:
                    if s not in seen:
                        seen.add(s)
                        queue.append(s)
            ids = [tag[r] for r in comp]
            # union all roots in comp
            base = comp[0]
            for r in comp[1:]:
                uf[find(r)] = find(base)
            tag[find(base)] = event
            yield val, ids
            event += 1


def _tree_from_scaled_ints(vals: Sequence[int], n: int, scale: int) -> EquidistantTree:
    clades: List[Clade] = []
    heights: List[Fraction] = []
    units: List[List[Clade]] = []
    denom = 2 * scale
    for val, ids in _merge_groups(vals, n):
        us = [
            frozenset((-cid,)) if cid < 0 else clades[cid]
            for cid in ids
        ]
        clade = frozenset().union(*us)
        clades.append(clade)
        heights.append(Fraction(val, denom))
        units.append(sorted(us, key=min))
    if not clades or len(clades[-1]) != n:
        raise NotUltrametricError("vector does not merge all leaves")
    return EquidistantTree._from_structure(n, clades, heights, units)


def _merge_profile_from_scaled_ints(vals: Sequence[int], n: int) -> List[int]:
    """Child counts of each internal vertex, without building the tree."""
    return [len(ids) for _, ids in _merge_groups(vals, n)]


# ---------------------------------------------------------------------------
# topologies


@dataclass(frozen=True)
class Topology:
    """The clade set of a tree: one leaf subset per internal vertex."""

    n: int
    clades: FrozenSet[Clade]

    def is_binary(self) -> bool:
        return len(self.clades) == self.n - 1

    def sorted_clades(self) -> List[List[int]]:
        return sorted((sorted(c) for c in self.clades), key=lambda c: (len(c), c))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "clades": self.sorted_clades()})

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        data = json.loads(text)
        return cls(int(data["n"]), frozenset(frozenset(c) for c in data["clades"]))


def topology_of(tree: EquidistantTree) -> Topology:
    return tree.topology()


def topology_equal_splits(t1: Topology, t2: Topology) -> bool:
    if t1.n != t2.n:
        raise DimensionMismatch(f"n={t1.n} vs n={t2.n}")
    return t1.clades == t2.clades


def topology_equal_argmax(u: UltraVector, v: UltraVector) -> bool:
    """True iff argmax over {ij, ik, jk} agrees on every triple i < j < k."""
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    for w in (u, v):
        if not three_point_check(w):
            raise NotUltrametricError("topology_equal_argmax needs certified ultrametrics")
    return _argmax_signature(u) == _argmax_signature(v)


def _argmax_signature(u: UltraVector):
    from .metric import _triple_arrays

    scale, (vals,) = integerize(u)
    triples, ij, ik, jk = _triple_arrays(u.n)
    if max(abs(x) for x in vals) < _INT64_SAFE:
        arr = np.asarray(vals, dtype=np.int64)
        a, b, c = arr[ij], arr[ik], arr[jk]
        hi = np.maximum(a, np.maximum(b, c))
        sig = (a == hi).astype(np.int8) * 4 + (b == hi) * 2 + (c == hi)
        return sig.tobytes()
    out = []
    for ka, kb, kc in zip(ij, ik, jk):
        a, b, c = vals[ka], vals[kb], vals[kc]
        hi = max(a, b, c)
        out.append((a == hi) * 4 + (b == hi) * 2 + (c == hi))
    return bytes(out)


# ---------------------------------------------------------------------------
# genericity


def is_generic(tree: EquidistantTree) -> bool:
    return tree.is_generic()


def is_generic_pair(t1: EquidistantTree, t2: EquidistantTree) -> bool:
    """Both trees binary, and all cross-tree height differences distinct."""
    if t1.n != t2.n:
        raise DimensionMismatch(f"n={t1.n} vs n={t2.n}")
    if not (t1.is_generic() and t2.is_generic()):
        return False
    h1 = t1._heights
    h2 = t2._heights
    diffs = {a - b for a in h1 for b in h2}
    return len(diffs) == len(h1) * len(h2)


# ---------------------------------------------------------------------------
# NNI moves


def _topology_structure(t: Topology):
    """units per clade (child clades and singleton leaves) and parent map."""
    clades = sorted(t.clades, key=len)
    parent: Dict[Clade, Optional[Clade]] = {}
    for a, x in enumerate(clades):
        parent[x] = None
        for y in clades[a + 1 :]:
            if x < y:
                parent[x] = y
                break
    child_clades: Dict[Clade, List[Clade]] = {c: [] for c in clades}
    for x, p in parent.items():
        if p is not None:
            child_clades[p].append(x)
    units: Dict[Clade, List[Clade]] = {}
    for c in clades:
        covered = set().union(*child_clades[c]) if child_clades[c] else set()
        u = list(child_clades[c]) + [frozenset((leaf,)) for leaf in c - covered]
        units[c] = sorted(u, key=min)
    return units, parent


def nni_neighbors(t: Topology) -> FrozenSet[Topology]:
    """All topologies one nearest-neighbor interchange away from t."""
    if not t.is_binary():
        raise ValueError("NNI moves are defined on binary topologies only")
    units, parent = _topology_structure(t)
    root = frozenset(range(1, t.n + 1))
    out = set()
    for x in t.clades:
        if x == root:
            continue
        p = parent[x]
        (b,) = [u for u in units[p] if u != x]
        c, d = units[x]
        for keep in (c, d):
            new_clade = b | keep
            out.add(Topology(t.n, (t.clades - {x}) | {new_clade}))
    out.discard(t)
    return frozenset(out)


def nni_distance_exact(t1: Topology, t2: Topology, *, max_n: int = 7) -> int:
    """Graph distance in the NNI graph, by breadth-first search.

    Guarded to small n: the number of binary topologies is (2n-3)!!.
    """
    if t1.n != t2.n:
        raise DimensionMismatch(f"n={t1.n} vs n={t2.n}")
    if t1.n > max_n:
        raise ValueError(f"NNI distance search is limited to n <= {max_n}")
    if not (t1.is_binary() and t2.is_binary()):
        raise ValueError("NNI distance is defined between binary topologies")
    if t1 == t2:
        return 0
    dist = {t1: 0}
    queue = deque([t1])
    while queue:
        cur = queue.popleft()
        d = dist[cur]
        for nb in nni_neighbors(cur):
            if nb not in dist:
                if nb == t2:
                    return d + 1
                dist[nb] = d + 1
                queue.append(nb)
    raise RuntimeError("NNI graph unexpectedly disconnected")


# ---------------------------------------------------------------------------
# Newick I/O

_TOKEN = re.compile(r"\s*([(),;:]|[^\s(),;:]+)")


def parse_newick(text: str) -> EquidistantTree:
    """Parse a Newick string into an equidistant tree.

    Leaf labels must be the integers 1..n; all leaves must be exactly the
    same distance from the root and internal edges strictly positive.
    Branch lengths may be decimals ("0.5") or rationals ("1/2"); both are
    read exactly.
    """
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise NewickError("empty Newick input")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_length() -> Optional[Fraction]:
        nonlocal pos
        if peek() == ":":
            take()
            tok = take()
            if tok is None or tok in "(),;:":
                raise NewickError("missing branch length after ':'")
            try:
                return Fraction(tok)
            except (ValueError, ZeroDivisionError) as exc:
                raise NewickError(f"bad branch length {tok!r}") from exc
        return None

    def parse_node():
        if peek() == "(":
            take()
            children = [parse_node()]
            while peek() == ",":
                take()
                children.append(parse_node())
            if take() != ")":
                raise NewickError("expected ')'")
            if peek() not in ("(", ")", ",", ";", ":", None):
                take()  # optional internal label, ignored
            length = parse_length()
            return ("internal", children, length)
        tok = take()
        if tok is None or tok in "(),;:":
            raise NewickError(f"unexpected token {tok!r}")
        try:
            leaf = int(tok)
        except ValueError as exc:
            raise NewickError(f"leaf label {tok!r} is not a positive integer") from exc
        if leaf < 1:
            raise NewickError(f"leaf label {leaf} is not positive")
        length = parse_length()
        return ("leaf", leaf, length)

    root = parse_node()
    if take() != ";":
        raise NewickError("expected ';' at end of Newick input")
    if pos != len(tokens):
        raise NewickError("trailing content after ';'")
    if root[0] != "internal":
        raise NewickError("a single leaf is not a tree")

    depths: Dict[int, Fraction] = {}
    node_depth: Dict[int, Fraction] = {}
    node_clade: Dict[int, Clade] = {}
    counter = itertools.count()

    def walk(node, depth: Fraction) -> Clade:
        if node[0] == "leaf":
            _, leaf, length = node
            if length is None:
                raise NewickError(f"leaf {leaf} has no branch length")
            if length <= 0:
                raise NewickError(f"non-positive branch length at leaf {leaf}")
            if leaf in depths:
                raise NewickError(f"duplicate leaf label {leaf}")
            depths[leaf] = depth + length
            return frozenset((leaf,))
        _, children, _ = node
        if len(children) < 2:
            raise NewickError("internal vertex with fewer than 2 children")
        nid = next(counter)
        node_depth[nid] = depth
        clade = frozenset()
        for ch in children:
            length = ch[2]
            if ch[0] == "internal":
                if length is None:
                    raise NewickError("internal edge without branch length")
                if length <= 0:
                    raise NewickError(f"non-positive internal edge length {length}")
                clade |= walk(ch, depth + length)
            else:
                clade |= walk(ch, depth)
        node_clade[nid] = clade
        return clade

    walk(root, Fraction(0))
    n = len(depths)
    if set(depths) != set(range(1, n + 1)):
        raise NewickError(f"leaf labels must be exactly 1..{n}, got {sorted(depths)}")
    total = next(iter(depths.values()))
    for leaf, d in depths.items():
        if d != total:
            raise NewickError(
                f"tree is not equidistant: leaf {leaf} at depth {d}, expected {total}"
            )
    clade_heights = {}
    for nid, clade in node_clade.items():
        h = total - node_depth[nid]
        prev = clade_heights.get(clade)
        if prev is not None and prev != h:
            raise NewickError(f"conflicting heights for clade {sorted(clade)}")
        clade_heights[clade] = h
    return EquidistantTree(n, clade_heights)


def write_newick(tree: EquidistantTree) -> str:
    """Serialize with rational branch lengths; children ordered by least leaf."""

    def render(clade: Clade) -> str:
        h = tree.height(clade)
        parts = []
        for unit in tree.children_units(clade):
            if len(unit) == 1:
                (leaf,) = unit
                parts.append(f"{leaf}:{h}")
            else:
                parts.append(f"{render(unit)}:{h - tree.height(unit)}")
        return "(" + ",".join(parts) + ")"

    return render(tree.root_clade) + ";"
