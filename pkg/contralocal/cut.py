"""Weighted max-cut instances, the flip neighborhood and flip local search."""
import heapq
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple

from getconfig import logger, settings
from contralocal.utils import (
    InputError,
    MoveTrace,
    PivotRule,
    Termination,
    format_rational,
    parse_rational,
)


@dataclass(frozen=True)
class CutInstance:
    n: int
    edges: Tuple[Tuple[int, int, Fraction], ...]
    adjacency: Tuple[Tuple[Tuple[int, Fraction], ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise InputError("vertex count must be a positive integer, got {!r}".format(self.n))
        edges = []
        seen = set()
        adjacency = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            w = Fraction(w)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InputError("edge ({}, {}) has a vertex outside [0, {})".format(u, v, self.n))
            if u == v:
                raise InputError("self-loop at vertex {}".format(u))
            if w < 0:
                raise InputError("edge ({}, {}) has negative weight {}".format(u, v, w))
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError("duplicate edge ({}, {})".format(u, v))
            seen.add(key)
            edges.append((u, v, w))
            adjacency[u].append((v, w))
            adjacency[v].append((u, w))
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "adjacency", tuple(tuple(a) for a in adjacency))

    @property
    def m(self):
        return len(self.edges)

    def degree(self, v):
        return len(self.adjacency[v])

    def max_degree(self):
        return max(len(a) for a in self.adjacency)

    def to_text(self):
        lines = ["{} {}".format(self.n, self.m)]
        lines += ["{} {} {}".format(u, v, format_rational(w)) for u, v, w in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [
            (number, line.split())
            for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
        if not rows:
            raise InputError("empty graph file")
        number, header = rows[0]
        if len(header) != 2:
            raise InputError("line {}: expected \"n m\", got {!r}".format(number, " ".join(header)))
        try:
            n, m = int(header[0]), int(header[1])
        except ValueError:
            raise InputError("line {}: n and m must be integers".format(number))
        if len(rows) - 1 != m:
            raise InputError("header declares {} edges but the file has {}".format(m, len(rows) - 1))
        edges = []
        for number, parts in rows[1:]:
            if len(parts) != 3:
                raise InputError("line {}: expected \"u v w\"".format(number))
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise InputError("line {}: vertex ids must be integers".format(number))
            edges.append((u, v, parse_rational(parts[2], "line {}: ".format(number))))
        try:
            return cls(n, tuple(edges))
        except InputError as e:
            raise InputError("invalid graph: {}".format(e))

    @classmethod
    def load(cls, path):
        with open(path, "r") as file:
            return cls.from_text(file.read())


@dataclass(frozen=True)
class CutState:
    side: Tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "side", tuple(bool(s) for s in self.side))

    def __len__(self):
        return len(self.side)

    def flip(self, v):
        side = list(self.side)
        side[v] = not side[v]
        return CutState(tuple(side))

    def to_bits(self):
        return "".join("1" if s else "0" for s in self.side)

    @classmethod
    def from_bits(cls, bits):
        bits = bits.strip()
        if not bits or any(c not in "01" for c in bits):
            raise InputError("a cut is a bitstring of 0s and 1s, got {!r}".format(bits[:40]))
        return cls(tuple(c == "1" for c in bits))

    @classmethod
    def all_one_side(cls, n):
        return cls((False,) * n)


def _check_state(g, s):
    if len(s.side) != g.n:
        raise InputError("cut has {} sides for a graph with {} vertices".format(len(s.side), g.n))


def total_weight(g):
    return sum((w for _, _, w in g.edges), Fraction(0))


def cut_value(g, s):
    _check_state(g, s)
    return sum((w for u, v, w in g.edges if s.side[u] != s.side[v]), Fraction(0))


def flip_gain(g, s, v):
    _check_state(g, s)
    if not 0 <= v < g.n:
        raise InputError("no vertex {} in a graph with {} vertices".format(v, g.n))
    gain = Fraction(0)
    for u, w in g.adjacency[v]:
        gain += w if s.side[u] == s.side[v] else -w
    return gain


def is_local_max_cut(g, s):
    return all(flip_gain(g, s, v) <= 0 for v in range(g.n))


def default_rule():
    return PivotRule.parse(settings.get("pivot-rule"))


def _integral(g):
    """Weights scaled by their common denominator, so the engine runs on ints."""
    scale = 1
    for _, _, w in g.edges:
        scale = scale * w.denominator // math.gcd(scale, w.denominator)
    adjacency = [[(u, int(w * scale)) for u, w in a] for a in g.adjacency]
    return scale, adjacency


def flip_local_search(g, s0, rule=None, cap=None, trace=None):
    """Flips single vertices until no flip strictly increases the cut.

    Gains are kept incrementally and candidates sit in a lazily invalidated
    heap keyed by (-gain, index) for the best rule and by index for the first
    rule, so both rules pick the lowest index among their candidates.
    """
    _check_state(g, s0)
    rule = rule or default_rule()
    cap = settings.getint("iteration-cap") if cap is None else cap
    trace = trace if trace is not None else MoveTrace()
    scale, adjacency = _integral(g)
    side = list(s0.side)
    gain = [sum(w if side[u] == side[v] else -w for u, w in adjacency[v]) for v in range(g.n)]
    value = sum(int(w * scale) for u, v, w in g.edges if side[u] != side[v])

    def key(v):
        return (-gain[v], v) if rule is PivotRule.BEST else (v,)

    heap = [key(v) for v in range(g.n) if gain[v] > 0]
    heapq.heapify(heap)
    logger.debug("flip search on n=%d m=%d with rule %s", g.n, g.m, rule.value)

    while True:
        mover = None
        while heap:
            entry = heap[0]
            v = entry[-1]
            if gain[v] > 0 and (rule is PivotRule.FIRST or -entry[0] == gain[v]):
                mover = v
                break
            heapq.heappop(heap)
        if mover is None:
            trace.finish(Termination.LOCAL_OPTIMUM)
            break
        if trace.iterations >= cap:
            trace.finish(Termination.CAP)
            break
        heapq.heappop(heap)
        before = value
        value += gain[mover]
        side[mover] = not side[mover]
        gain[mover] = -gain[mover]
        for u, w in adjacency[mover]:
            # the edge is now uncut iff u sits on mover's new side
            gain[u] += 2 * w if side[u] == side[mover] else -2 * w
            if gain[u] > 0:
                heapq.heappush(heap, key(u))
        if trace.wants_steps:
            trace.record(
                mover, not side[mover], side[mover], Fraction(before, scale), Fraction(value, scale)
            )
        else:
            trace.record(mover)
    return CutState(tuple(side)), trace


def random_cut_instance(n, seed, density=0.4, max_weight=9):
    """A random graph with random rational weights p/q, q in 1..4."""
    rng = random.Random(seed)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                edges.append((u, v, Fraction(rng.randint(0, max_weight * 4), rng.randint(1, 4))))
    return CutInstance(n, tuple(edges))


def random_cut_state(n, seed):
    rng = random.Random(seed)
    return CutState(tuple(rng.random() < 0.5 for _ in range(n)))
