"""Compilers from weighted max-cut into triplet problems, canonical configurations and cut decoders.

Every compiled instance lists the graph vertices first (point i is vertex i)
followed by its gadget points, so search movers and flip movers share ids.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import comb
from typing import Optional, Tuple

from getconfig import logger
from contralocal.cut import CutState, total_weight
from contralocal.tree import TreeLayout
from contralocal.utils import (
    DecodeError,
    InputError,
    InvariantViolation,
    ProvenanceError,
    format_rational,
    parse_rational,
    parse_triplet_text,
    write_triplet_text,
)


class Semantics(Enum):
    CONTRASTIVE = "contrastive"
    BETWEENNESS = "betweenness"
    NONBETWEENNESS = "non-betweenness"
    TREE = "tree"


CTR1D = "ctr1d"
BTW1D = "btw1d"
BTW1D_SINGLE = "btw1d-single"
NBTW1D = "nbtw1d"
BTWD = "btwd"
CTRD = "ctrd"
TREE = "tree"

LINE_KINDS = (CTR1D, BTW1D, BTW1D_SINGLE, NBTW1D)


@dataclass(frozen=True)
class ReductionWeights:
    W: Fraction
    M: Optional[Fraction] = None
    M_prime: Optional[Fraction] = None
    hierarchy: Tuple[Fraction, ...] = ()
    M_segment: Optional[Fraction] = None
    M_top: Optional[Fraction] = None
    tree_a: Optional[Fraction] = None
    tree_b: Optional[Fraction] = None
    tree_c: Optional[Fraction] = None

    def level(self, k):
        """M_k of the betweenness-d hierarchy, k >= 3."""
        return self.hierarchy[k - 3]


@dataclass(frozen=True)
class TripletInstance:
    names: Tuple[str, ...]
    semantics: Semantics
    triplets: Tuple[Tuple[int, int, int, Fraction], ...]
    dim: int = 1
    kind: Optional[str] = None
    source_n: Optional[int] = None
    weights: Optional[ReductionWeights] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "triplets", tuple((a, b, c, Fraction(w)) for a, b, c, w in self.triplets))
        if self.dim < 1:
            raise InputError("dimension must be at least 1")
        _check_triplets(len(self.names), self.triplets)

    @property
    def point_count(self):
        return len(self.names)

    def point(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError("no point named {!r}".format(name))

    @cached_property
    def incidence(self):
        rows = [[] for _ in self.names]
        for index, (a, b, c, _) in enumerate(self.triplets):
            for p in (a, b, c):
                rows[p].append(index)
        return tuple(tuple(r) for r in rows)

    def to_text(self):
        header = [
            ("semantics", self.semantics.value),
            ("dim", self.dim),
            ("kind", self.kind),
            ("source-n", self.source_n),
        ]
        rows = [(a, b, c, format_rational(w)) for a, b, c, w in self.triplets]
        return write_triplet_text(header, self.names, rows)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as file:
            file.write(self.to_text())


class TreeTripletInstance(TripletInstance):
    """Triplets read as ab|c over the leaves of a rooted binary tree."""


def _check_triplets(count, triplets):
    for a, b, c, w in triplets:
        if not all(0 <= p < count for p in (a, b, c)):
            raise InputError("triplet ({}, {}, {}) refers to a missing point".format(a, b, c))
        if len({a, b, c}) != 3:
            raise InputError("triplet ({}, {}, {}) repeats a point".format(a, b, c))
        if w < 0:
            raise InputError("triplet ({}, {}, {}) has negative weight".format(a, b, c))


def instance_from_text(text):
    header, names, rows = parse_triplet_text(text)
    try:
        semantics = Semantics(header.get("semantics"))
    except ValueError:
        raise InputError("unknown semantics {!r}".format(header.get("semantics")))
    triplets = [(a, b, c, parse_rational(w, "line {}: ".format(n))) for n, a, b, c, w in rows]
    source_n = int(header["source-n"]) if "source-n" in header else None
    cls = TreeTripletInstance if semantics is Semantics.TREE else TripletInstance
    return cls(
        names,
        semantics,
        tuple(triplets),
        dim=int(header.get("dim", 1)),
        kind=header.get("kind"),
        source_n=source_n,
    )


def load_instance(path):
    with open(path, "r", encoding="utf-8") as file:
        return instance_from_text(file.read())


def vertex_names(g):
    return tuple("v{}".format(i) for i in range(g.n))


def reduce_contrastive_1d(g):
    n = g.n
    X, Y, Z = n, n + 1, n + 2
    W = total_weight(g)
    M = W + 1
    M_prime = (2 * n + 1) * M
    triplets = [(u, X, v, w) for u, v, w in g.edges]
    for v in range(n):
        triplets += [(X, Y, v, M), (X, v, Z, M)]
    triplets += [(Y, Z, X, M_prime), (X, Y, Z, M_prime)]
    weights = ReductionWeights(W, M=M, M_prime=M_prime)
    t = TripletInstance(
        vertex_names(g) + ("X", "Y", "Z"), Semantics.CONTRASTIVE, tuple(triplets), 1, CTR1D, n, weights
    )
    return _checked(t)


def reduce_betweenness_1d(g, single_special=False):
    """Line betweenness. single_special keeps only X and the edge triplets."""
    n = g.n
    W = total_weight(g)
    X = n
    triplets = [(u, X, v, w) for u, v, w in g.edges]
    if single_special:
        t = TripletInstance(
            vertex_names(g) + ("X",), Semantics.BETWEENNESS, tuple(triplets), 1, BTW1D_SINGLE, n,
            ReductionWeights(W),
        )
        return _checked(t)
    Y = n + 1
    M = W + 1
    for v in range(n):
        triplets += [(X, Y, v, M), (Y, X, v, M)]
    t = TripletInstance(
        vertex_names(g) + ("X", "Y"), Semantics.BETWEENNESS, tuple(triplets), 1, BTW1D, n,
        ReductionWeights(W, M=M),
    )
    return _checked(t)


def betweenness_hierarchy(n, d, W, M):
    """M_3..M_d, each strictly above everything a heavier level must override."""
    base = 2 * n * comb(d, 2) * M + W + 1
    levels = {}
    for k in range(d, 2, -1):
        levels[k] = sum((3 * comb(j - 1, 2) * levels[j] for j in range(k + 1, d + 1)), Fraction(0)) + base
    return tuple(levels[k] for k in range(3, d + 1))


def _betweenness_d_triplets(g, d):
    n = g.n
    W = total_weight(g)
    M = W + 1
    hierarchy = betweenness_hierarchy(n, d, W, M)
    xs = [n + k for k in range(d)]
    triplets = [(u, xs[0], v, w) for u, v, w in g.edges]
    for v in range(n):
        for k, l in combinations(range(d), 2):
            triplets += [(xs[k], xs[l], v, M), (xs[l], xs[k], v, M)]
    for j, k, l in combinations(range(d), 3):
        level = hierarchy[l + 1 - 3]
        a, b, c = xs[j], xs[k], xs[l]
        triplets += [(a, b, c, level), (b, c, a, level), (c, a, b, level)]
    return triplets, ReductionWeights(W, M=M, hierarchy=hierarchy)


def _simplex_names(d):
    return tuple("X{}".format(k) for k in range(1, d + 1))


def reduce_betweenness_d(g, d):
    if d < 2:
        raise InputError("reduce_betweenness_d needs d >= 2, use reduce_betweenness_1d for the line")
    triplets, weights = _betweenness_d_triplets(g, d)
    t = TripletInstance(
        vertex_names(g) + _simplex_names(d), Semantics.BETWEENNESS, tuple(triplets), d, BTWD, g.n, weights
    )
    return _checked(t)


def reduce_contrastive_d(g, d):
    if d < 2:
        raise InputError("reduce_contrastive_d needs d >= 2, use reduce_contrastive_1d for the line")
    n = g.n
    between, weights = _betweenness_d_triplets(g, d)
    triplets = []
    for x, y, z, w in between:
        triplets += [(x, y, z, w), (z, y, x, w)]
    converted = sum((w for _, _, _, w in triplets), Fraction(0))
    M_segment = converted + 1
    M_top = 2 * n * M_segment + converted + 1
    X1, Y, Z = n, n + d, n + d + 1
    triplets.append((Y, Z, X1, M_top))
    for v in range(n):
        triplets += [(X1, Y, v, M_segment), (X1, v, Z, M_segment)]
    weights = ReductionWeights(
        weights.W, M=weights.M, hierarchy=weights.hierarchy, M_segment=M_segment, M_top=M_top
    )
    t = TripletInstance(
        vertex_names(g) + _simplex_names(d) + ("Y", "Z"), Semantics.CONTRASTIVE, tuple(triplets), d, CTRD, n,
        weights,
    )
    return _checked(t)


def reduce_nonbetweenness_1d(g):
    n = g.n
    X, Y = n, n + 1
    W = total_weight(g)
    triplets = [(X, v, Y, W) for v in range(n)]
    for u, v, w in g.edges:
        triplets += [(u, v, X, w), (v, u, X, w)]
    t = TripletInstance(
        vertex_names(g) + ("X", "Y"), Semantics.NONBETWEENNESS, tuple(triplets), 1, NBTW1D, n,
        ReductionWeights(W),
    )
    return _checked(t)


def reduce_tree(g):
    n = g.n
    X, Xp, Y, Z = n, n + 1, n + 2, n + 3
    W = total_weight(g)
    a, b, c = W, n * W + n + 1, W + 1
    triplets = [(X, Xp, Y, a), (X, Xp, Z, a)]
    triplets += [(X, Xp, v, a) for v in range(n)]
    triplets.append((X, Y, Z, b))
    for v in range(n):
        triplets += [(Y, v, X, c), (Z, v, X, c)]
    for u, v, w in g.edges:
        triplets += [(u, X, v, w / 2), (v, X, u, w / 2)]
    t = TreeTripletInstance(
        vertex_names(g) + ("X", "X'", "Y", "Z"), Semantics.TREE, tuple(triplets), 1, TREE, n,
        ReductionWeights(W, tree_a=a, tree_b=b, tree_c=c),
    )
    return _checked(t)


REDUCERS = {
    CTR1D: reduce_contrastive_1d,
    BTW1D: reduce_betweenness_1d,
    BTW1D_SINGLE: lambda g: reduce_betweenness_1d(g, single_special=True),
    NBTW1D: reduce_nonbetweenness_1d,
    TREE: reduce_tree,
}


def reduce(g, kind, d=None):
    """Dispatch by kind name, d is only read by btwd and ctrd."""
    if kind == BTWD:
        return reduce_betweenness_d(g, d or 2)
    if kind == CTRD:
        return reduce_contrastive_d(g, d or 2)
    reducer = REDUCERS.get(kind)
    if reducer is None:
        raise InputError("unknown reduction {!r}".format(kind))
    return reducer(g)


def weight_violations(t):
    """Dominance inequalities that fail on a compiled instance, as messages."""
    w = t.weights
    n = t.source_n
    failures = []
    if w is None:
        return ["instance carries no reduction weights"]
    if w.M is not None and not w.M > w.W:
        failures.append("M > W")
    if t.kind == CTR1D and not w.M_prime > 2 * n * w.M + w.W:
        failures.append("M' > 2|V|M + W")
    if t.kind in (BTWD, CTRD):
        d = t.dim
        floor = 2 * n * comb(d, 2) * w.M + w.W
        for k in range(3, d + 1):
            heavier = sum((3 * comb(j - 1, 2) * w.level(j) for j in range(k + 1, d + 1)), Fraction(0))
            if not w.level(k) > heavier + floor:
                failures.append("M_{} hierarchy".format(k))
    if t.kind == CTRD:
        others = sum((tw for a, b, c, tw in t.triplets if tw not in (w.M_segment, w.M_top)), Fraction(0))
        if not w.M_segment > others:
            failures.append("M_segment above converted weights")
        if not w.M_top > 2 * n * w.M_segment + others:
            failures.append("M_top above every other weight")
    if t.kind == TREE:
        if not w.tree_b > n * w.tree_c:
            failures.append("type B above the type C weights")
        incident = [Fraction(0)] * n
        X = n
        for a, b, c, tw in t.triplets:
            if b == X and a < n and c < n:
                incident[a] += tw
                incident[c] += tw
        if any(not w.tree_c > s for s in incident):
            failures.append("type C above incident type D weights")
    return failures


def _checked(t):
    failures = weight_violations(t)
    if failures:
        raise InvariantViolation("weight dominance fails: " + ", ".join(failures))
    logger.debug("compiled %s: %d points, %d triplets", t.kind, t.point_count, len(t.triplets))
    return t


def linkage(t):
    """(constant, factor) with objective = constant + factor * cut on canonical configurations."""
    n, w = t.source_n, t.weights
    if t.kind == CTR1D:
        return 2 * n * w.M + 2 * w.M_prime, Fraction(1)
    if t.kind == BTW1D:
        # (X, Y, v) and (Y, X, v) can't both hold on a line
        return n * w.M, Fraction(1)
    if t.kind == BTW1D_SINGLE:
        return Fraction(0), Fraction(1)
    if t.kind == NBTW1D:
        return (n + 1) * w.W, Fraction(1)
    if t.kind == TREE:
        return (n + 2) * w.tree_a + w.tree_b + n * w.tree_c, Fraction(1, 2)
    if t.kind in (BTWD, CTRD):
        # everything except the edge triplets (u, X1, v) holds on the frame
        gadget = sum((tw for a, b, c, tw in t.triplets if not (a < n and c < n)), Fraction(0))
        return gadget, Fraction(1 if t.kind == BTWD else 2)
    raise ProvenanceError("instance has no reduction kind")


# --- gadget geometry for d >= 2 ------------------------------------------------


def _det(rows):
    """Exact determinant by fraction-valued Gaussian elimination."""
    m = [list(map(Fraction, r)) for r in rows]
    size = len(m)
    det = Fraction(1)
    for col in range(size):
        pivot = next((r for r in range(col, size) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        for r in range(col + 1, size):
            factor = m[r][col] / m[col][col]
            if factor:
                for c in range(col, size):
                    m[r][c] -= factor * m[col][c]
    return det


def _dot(p, q):
    return sum((a * b for a, b in zip(p, q)), Fraction(0))


def _sub(p, q):
    return tuple(a - b for a, b in zip(p, q))


@dataclass(frozen=True)
class GadgetFrame:
    """Regular simplex X_1..X_d with its axis through the centroid.

    Lengths are kept squared so every comparison stays rational: the axis is
    an unnormalized normal vector and axial(p) is its dot product with p - C.
    """

    simplex: Tuple[Tuple[Fraction, ...], ...]
    centroid: Tuple[Fraction, ...]
    normal: Tuple[Fraction, ...]
    ell_sq: Fraction
    t0_sq: Fraction
    Y: Optional[Tuple[Fraction, ...]] = None
    Z: Optional[Tuple[Fraction, ...]] = None

    @property
    def dim(self):
        return len(self.centroid)

    def axial(self, p):
        return _dot(self.normal, _sub(p, self.centroid))

    def axial_sq(self, p):
        """Squared signed axial coordinate t(p)^2 in true length units."""
        return self.axial(p) ** 2 / _dot(self.normal, self.normal)

    def on_axis(self, s):
        """Point at signed offset s along the (1, .., 1) axis of the standard frame."""
        return tuple(c + s for c in self.centroid)

    def mirror(self, p):
        """Reflection through the simplex hyperplane."""
        scale = 2 * self.axial(p) / _dot(self.normal, self.normal)
        return tuple(a - scale * b for a, b in zip(p, self.normal))


def simplex_normal(points):
    """Normal of the hyperplane through d points of R^d by cofactor expansion."""
    d = len(points)
    edges = [_sub(p, points[0]) for p in points[1:]]
    normal = []
    for k in range(d):
        minor = [[e[c] for c in range(d) if c != k] for e in edges]
        normal.append((-1) ** k * _det(minor) if minor else Fraction(1))
    return tuple(normal)


def gadget_frame(d, with_segment=False):
    """The frame used by canonical configurations: X_k = e_k, so ell^2 = 2."""
    simplex = tuple(tuple(Fraction(int(i == k)) for i in range(d)) for k in range(d))
    centroid = tuple(Fraction(1, d) for _ in range(d))
    ell_sq = Fraction(2)
    frame = GadgetFrame(simplex, centroid, (Fraction(1),) * d, ell_sq, ell_sq * (d + 1) / (2 * d))
    if with_segment:
        frame = GadgetFrame(
            simplex, centroid, frame.normal, ell_sq, frame.t0_sq, frame.on_axis(Fraction(2)), frame.on_axis(Fraction(3))
        )
    return frame


def frame_of(t, e):
    """Recovers the gadget frame from an embedding of a btwd or ctrd instance."""
    n, d = t.source_n, t.dim
    simplex = tuple(e.position(n + k) for k in range(d))
    centroid = tuple(sum(p[i] for p in simplex) / d for i in range(d))
    normal = simplex_normal(simplex)
    if not any(normal):
        raise DecodeError("gadget points X1..X{} are degenerate".format(d))
    Y = Z = None
    if t.kind == CTRD:
        Y, Z = e.position(n + d), e.position(n + d + 1)
        flip = _dot(normal, _sub(Y, centroid)) < 0
    else:
        flip = next(c for c in normal if c != 0) < 0
    if flip:
        normal = tuple(-c for c in normal)
    ell_sq = _dot(_sub(simplex[0], simplex[1]), _sub(simplex[0], simplex[1]))
    return GadgetFrame(simplex, centroid, normal, ell_sq, ell_sq * (d + 1) / (2 * d), Y, Z)


def verify_frame(t, e):
    """Names the gadget conditions an embedding breaks, empty when it is a clean frame."""
    from contralocal.embedding import satisfied

    n, d = t.source_n, t.dim
    frame = frame_of(t, e)
    problems = []
    for j, k in combinations(range(d), 2):
        diff = _sub(frame.simplex[j], frame.simplex[k])
        if _dot(diff, diff) != frame.ell_sq:
            problems.append("X{} X{} not at the common edge length".format(j + 1, k + 1))
    for v in range(n):
        if frame.axial_sq(e.position(v)) < frame.t0_sq:
            problems.append("{} closer to the simplex than t0".format(t.names[v]))
    for a, b, c, w in t.triplets:
        if not (a < n and c < n) and not satisfied(t.semantics, e.position(a), e.position(b), e.position(c)):
            problems.append("gadget triplet {} {} {} unsatisfied".format(t.names[a], t.names[b], t.names[c]))
    return problems


# --- canonical configurations and decoders --------------------------------------


def _offset(i, n):
    return Fraction(i + 1, n + 1)


def canonical_configuration(t, s):
    """The configuration realizing cut s inside instance t, without the graph."""
    from contralocal.embedding import Embedding

    n = t.source_n
    if t.kind is None or n is None:
        raise ProvenanceError("instance carries no reduction provenance")
    if len(s.side) != n:
        raise ProvenanceError("cut has {} vertices but the instance came from {}".format(len(s.side), n))
    side = s.side
    if t.kind == TREE:
        return canonical_tree(t, s)
    if t.kind == CTR1D:
        line = [(2 + _offset(i, n)) * (1 if side[i] else -1) for i in range(n)]
        line += [Fraction(0), Fraction(2), Fraction(3)]
        return Embedding.from_line(line)
    if t.kind in (BTW1D, NBTW1D):
        line = [1 + _offset(i, n) if side[i] else -_offset(i, n) for i in range(n)]
        line += [Fraction(0), Fraction(1)]
        return Embedding.from_line(line)
    if t.kind == BTW1D_SINGLE:
        line = [_offset(i, n) * (1 if side[i] else -1) for i in range(n)]
        return Embedding.from_line(line + [Fraction(0)])
    if t.kind in (BTWD, CTRD):
        frame = gadget_frame(t.dim, with_segment=t.kind == CTRD)
        points = [frame.on_axis((2 + _offset(i, n)) * (1 if side[i] else -1)) for i in range(n)]
        points += list(frame.simplex)
        if t.kind == CTRD:
            points += [frame.Y, frame.Z]
        return Embedding(tuple(points))
    raise ProvenanceError("unknown reduction kind {!r}".format(t.kind))


def canonical_tree(t, s):
    """Root over (((X, X'), T_Y), T_Z); T_Y holds Y and side-S vertices as a caterpillar."""
    n = t.source_n
    X, Xp, Y, Z = n, n + 1, n + 2, n + 3

    def caterpillar(first, rest):
        tree = first
        for v in rest:
            tree = (tree, v)
        return tree

    t_y = caterpillar(Y, [v for v in range(n) if s.side[v]])
    t_z = caterpillar(Z, [v for v in range(n) if not s.side[v]])
    return TreeLayout.from_nested(t.names, (((X, Xp), t_y), t_z))


def canonical_embedding(g, s, target):
    if target.source_n != g.n or target.kind is None:
        raise ProvenanceError("instance was not compiled from this graph")
    expected = reduce(g, target.kind, target.dim if target.kind in (BTWD, CTRD) else None)
    if expected.triplets != target.triplets:
        raise ProvenanceError("instance triplets don't match a {} reduction of this graph".format(target.kind))
    return canonical_configuration(target, s)


def decode_cut_embedding(t, e):
    n = t.source_n
    if t.kind in LINE_KINDS:
        x = e.position(t.point("X"))[0]
        side = []
        for v in range(n):
            p = e.position(v)[0]
            if p == x:
                raise DecodeError("vertex {} sits on X".format(t.names[v]))
            side.append(p > x)
        return CutState(tuple(side))
    if t.kind in (BTWD, CTRD):
        frame = frame_of(t, e)
        side = []
        for v in range(n):
            a = frame.axial(e.position(v))
            if a == 0:
                raise DecodeError("vertex {} lies on the simplex hyperplane".format(t.names[v]))
            side.append(a > 0)
        return CutState(tuple(side))
    raise DecodeError("cannot decode a {!r} instance as an embedding".format(t.kind))


def decode_cut_tree(t, layout):
    n = t.source_n
    X, Y, Z = t.names.index("X"), t.names.index("Y"), t.names.index("Z")
    at_y, at_z = layout.lca_nodes(X, Y), layout.lca_nodes(X, Z)
    if at_y == at_z:
        raise DecodeError("Y and Z attach to X's root path at the same node")
    y_lower = layout.depth(at_y) > layout.depth(at_z)
    lower = at_y if y_lower else at_z
    depth = layout.depth(lower)
    side = []
    for v in range(n):
        below = layout.depth(layout.lca_nodes(X, v)) >= depth
        side.append(below == y_lower)
    return CutState(tuple(side))


def decode(t, configuration):
    if isinstance(configuration, TreeLayout):
        return decode_cut_tree(t, configuration)
    return decode_cut_embedding(t, configuration)
