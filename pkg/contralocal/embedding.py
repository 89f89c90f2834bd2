"""Triplet satisfaction in R^d and single-point local search on the line.

On the line the objective, as a function of one point's position, only
changes at finitely many breakpoints and is constant on the open intervals
between them. A move lands strictly inside one of those intervals (or one
step past either end), never on a breakpoint, so no triplet incident to
the mover is left on the boundary of its satisfaction set.
"""
import heapq
import random
from fractions import Fraction
from itertools import accumulate
from typing import Tuple

from getconfig import logger, settings
from contralocal.reductions import Semantics
from contralocal.utils import (
    InputError,
    MoveTrace,
    PivotRule,
    Termination,
    format_rational,
    parse_rational,
)


class Embedding:
    def __init__(self, positions: Tuple[Tuple[Fraction, ...], ...]):
        self.positions = tuple(tuple(Fraction(c) for c in p) for p in positions)
        dims = {len(p) for p in self.positions}
        if len(dims) > 1:
            raise InputError("positions have mixed dimensions {}".format(sorted(dims)))
        if len(set(self.positions)) != len(self.positions):
            raise InputError("two points share a position")

    @classmethod
    def from_line(cls, values):
        return cls(tuple((Fraction(v),) for v in values))

    @property
    def dim(self):
        return len(self.positions[0]) if self.positions else 0

    def position(self, point):
        try:
            return self.positions[point]
        except IndexError:
            raise InputError("no position for point {}".format(point))

    def line(self):
        if self.dim != 1:
            raise InputError("embedding is {}-dimensional, not a line".format(self.dim))
        return [p[0] for p in self.positions]

    def moved(self, point, position):
        positions = list(self.positions)
        positions[point] = tuple(position) if isinstance(position, tuple) else (Fraction(position),)
        return Embedding(tuple(positions))

    def to_text(self, names):
        return "".join(
            "{} {}\n".format(name, " ".join(format_rational(c) for c in p)) for name, p in zip(names, self.positions)
        )

    @classmethod
    def from_text(cls, text, names):
        found = {}
        for number, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] not in names:
                raise InputError("line {}: unknown point {!r}".format(number, parts[0]))
            found[parts[0]] = tuple(parse_rational(c, "line {}: ".format(number)) for c in parts[1:])
        missing = [n for n in names if n not in found]
        if missing:
            raise InputError("no position for {}".format(", ".join(missing[:5])))
        return cls(tuple(found[n] for n in names))


def _sq(p, q):
    return sum(((a - b) ** 2 for a, b in zip(p, q)), Fraction(0))


def satisfied(semantics, a, b, c):
    if not isinstance(a, tuple):
        a, b, c = (a,), (b,), (c,)
    ab, ac, bc = _sq(a, b), _sq(a, c), _sq(b, c)
    if semantics is Semantics.CONTRASTIVE:
        return ab <= ac
    if semantics is Semantics.BETWEENNESS:
        return ac >= max(ab, bc)
    if semantics is Semantics.NONBETWEENNESS:
        return ac <= max(ab, bc)
    raise InputError("no geometric satisfaction rule for {}".format(semantics))


def _sat_line(semantics, a, b, c):
    ab, ac, bc = abs(a - b), abs(a - c), abs(b - c)
    if semantics is Semantics.CONTRASTIVE:
        return ab <= ac
    if semantics is Semantics.BETWEENNESS:
        return ac >= ab and ac >= bc
    return ac <= ab or ac <= bc


def objective(t, e):
    if len(e.positions) != t.point_count:
        raise InputError("embedding has {} points, instance has {}".format(len(e.positions), t.point_count))
    p = e.positions
    return sum((w for a, b, c, w in t.triplets if satisfied(t.semantics, p[a], p[b], p[c])), Fraction(0))


def _triplet_breakpoints(semantics, role, px, py, pz):
    if semantics is Semantics.CONTRASTIVE:
        if role == 0:
            return [(py + pz) / 2]
        if role == 1:
            r = abs(px - pz)
            return [px - r, px + r]
        r = abs(px - py)
        return [px - r, px + r]
    if role == 1:
        return [px, pz]
    if role == 0:
        return [(py + pz) / 2, py, 2 * pz - py]
    return [(py + px) / 2, py, 2 * px - py]


def _breakpoints(t, line, v):
    points = set()
    for index in t.incidence[v]:
        a, b, c, _ = t.triplets[index]
        role = (a, b, c).index(v)
        points.update(_triplet_breakpoints(t.semantics, role, line[a], line[b], line[c]))
    return sorted(points)


def move_breakpoints_1d(t, e, v):
    _require_line(t)
    return _breakpoints(t, e.line(), v)


def _inner(low, high):
    if low is None and high is None:
        return Fraction(0)
    if low is None:
        return high - 1
    if high is None:
        return low + 1
    return (low + high) / 2


def _interval_values(t, line, v):
    """Breakpoints of v and the value of v's triplets on each open interval between them.

    Interval k is (breaks[k-1], breaks[k]) with unbounded ends at 0 and len(breaks).
    """
    rows = []
    points = set()
    for index in t.incidence[v]:
        a, b, c, w = t.triplets[index]
        role = (a, b, c).index(v)
        own = sorted(set(_triplet_breakpoints(t.semantics, role, line[a], line[b], line[c])))
        rows.append((a, b, c, w, own))
        points.update(own)
    breaks = sorted(points)
    if not breaks:
        return breaks, []
    where = {p: i for i, p in enumerate(breaks)}
    diff = [Fraction(0)] * (len(breaks) + 2)
    sem = t.semantics
    for a, b, c, w, own in rows:
        for low, high in zip([None] + own, own + [None]):
            x = _inner(low, high)
            pa = x if a == v else line[a]
            pb = x if b == v else line[b]
            pc = x if c == v else line[c]
            if _sat_line(sem, pa, pb, pc):
                first = 0 if low is None else where[low] + 1
                last = len(breaks) if high is None else where[high]
                diff[first] += w
                diff[last + 1] -= w
    return breaks, list(accumulate(diff[: len(breaks) + 1]))


def _free_position(breaks, k, occupied, here):
    """A position strictly inside interval k that no other point holds."""
    low = breaks[k - 1] if k > 0 else None
    high = breaks[k] if k < len(breaks) else None
    c = _inner(low, high)
    while c in occupied and c != here:
        c = (low + c) / 2 if low is not None else c - Fraction(1, 2)
    return c


def candidate_positions_1d(t, e, v):
    """One free position inside every interval between consecutive breakpoints, plus both ends."""
    _require_line(t)
    line = e.line()
    breaks = _breakpoints(t, line, v)
    if not breaks:
        return []
    occupied = set(line)
    return [_free_position(breaks, k, occupied, line[v]) for k in range(len(breaks) + 1)]


def _value_at(t, line, v, p):
    total = Fraction(0)
    sem = t.semantics
    for index in t.incidence[v]:
        a, b, c, w = t.triplets[index]
        pa = p if a == v else line[a]
        pb = p if b == v else line[b]
        pc = p if c == v else line[c]
        if _sat_line(sem, pa, pb, pc):
            total += w
    return total


def _best_move(t, line, v, occupied):
    breaks, values = _interval_values(t, line, v)
    if not breaks:
        return None
    gain = max(values) - _value_at(t, line, v, line[v])
    if gain <= 0:
        return None
    # lowest interval wins ties, i.e. the smallest position
    k = values.index(max(values))
    return _free_position(breaks, k, occupied, line[v]), gain


def _require_line(t):
    if t.dim != 1 or t.semantics is Semantics.TREE:
        raise InputError("line search needs a 1-dimensional triplet instance")


def best_move_1d(t, e, v):
    _require_line(t)
    line = e.line()
    return _best_move(t, line, v, set(line))


def is_local_opt_1d(t, e):
    _require_line(t)
    line = e.line()
    occupied = set(line)
    return all(_best_move(t, line, v, occupied) is None for v in range(t.point_count))


def _partners(t):
    partners = [set() for _ in range(t.point_count)]
    for a, b, c, _ in t.triplets:
        partners[a].update((b, c))
        partners[b].update((a, c))
        partners[c].update((a, b))
    return partners


def local_search_1d(t, e0, rule=None, cap=None, trace=None):
    """Single-point moves until none strictly improves.

    Every point's best move is cached. A move only changes the moves of the
    mover's triplet partners and of points whose cached target it now holds,
    so only those are recomputed; the heap is invalidated lazily by version.
    """
    _require_line(t)
    rule = rule or PivotRule.parse(settings.get("pivot-rule"))
    cap = settings.getint("iteration-cap") if cap is None else cap
    trace = trace if trace is not None else MoveTrace(names=t.names)
    line = e0.line()
    occupied = set(line)
    partners = _partners(t)
    count = t.point_count
    best = [_best_move(t, line, v, occupied) for v in range(count)]
    version = [0] * count
    value = objective(t, e0) if trace.wants_steps else None

    def key(v):
        return (-best[v][1], v, version[v]) if rule is PivotRule.BEST else (v, version[v])

    heap = [key(v) for v in range(count) if best[v] is not None]
    heapq.heapify(heap)

    while True:
        mover = None
        while heap:
            v, seen = heap[0][-2:]
            if seen == version[v] and best[v] is not None:
                mover = v
                break
            heapq.heappop(heap)
        if mover is None:
            trace.finish(Termination.LOCAL_OPTIMUM)
            break
        if trace.iterations >= cap:
            trace.finish(Termination.CAP)
            break
        position, gain = best[mover]
        old = line[mover]
        occupied.discard(old)
        occupied.add(position)
        line[mover] = position
        logger.debug("moved %s from %s to %s, gain %s", t.names[mover], old, position, gain)
        if trace.wants_steps:
            trace.record(mover, old, position, value, value + gain)
            value += gain
        else:
            trace.record(mover)
        stale = partners[mover] | {mover}
        stale.update(u for u in range(count) if best[u] is not None and best[u][0] == position)
        for u in stale:
            version[u] += 1
            best[u] = _best_move(t, line, u, occupied)
            if best[u] is not None:
                heapq.heappush(heap, key(u))
    return Embedding.from_line(line), trace


def best_candidate_move(t, e, moves):
    """Best strictly improving (point, position, gain) among caller-supplied moves, any dimension."""
    base = objective(t, e)
    taken = set(e.positions)
    best = None
    for point, position in moves:
        position = tuple(Fraction(c) for c in position)
        if position in taken and position != e.position(point):
            continue
        gain = objective(t, e.moved(point, position)) - base
        if gain > 0 and (best is None or gain > best[2]):
            best = (point, position, gain)
    return best


def is_local_opt_candidates(t, e, moves):
    return best_candidate_move(t, e, moves) is None


def random_embedding_1d(t, seed):
    """Distinct random rationals, jittered so no triplet starts exactly on a boundary."""
    rng = random.Random(seed)
    count = t.point_count
    slots = rng.sample(range(8 * count), count)
    return Embedding.from_line(
        [Fraction(k - 4 * count, 4) + Fraction(rng.randrange(1, 10 ** 6), 8 * 10 ** 6) for k in slots]
    )
