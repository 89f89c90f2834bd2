"""Brute force checkers. Nothing here calls the engines it is used to check."""
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product

import torch

from getconfig import settings
from contralocal.cut import CutState
from contralocal.reductions import Semantics
from contralocal.utils import BudgetExceeded, InputError


@dataclass(frozen=True)
class OracleBudget:
    max_cut_n: int = settings.getint("max-cut-enumeration")
    max_permutation_points: int = settings.getint("max-permutation-points")
    max_tree_leaves: int = settings.getint("max-tree-leaves")

    def __post_init__(self):
        if min(self.max_cut_n, self.max_permutation_points, self.max_tree_leaves) < 1:
            raise InputError("oracle budgets must be positive")


def _cut(g, side):
    total = Fraction(0)
    for u, v, w in g.edges:
        if side[u] != side[v]:
            total += w
    return total


def enumerate_local_max_cuts(g, budget=None):
    """Every single-flip optimum, with vertex 0 pinned to the False side."""
    budget = budget or OracleBudget()
    if g.n > budget.max_cut_n:
        raise BudgetExceeded("cut enumeration allows n <= {}, got {}".format(budget.max_cut_n, g.n))
    found = []
    for bits in product((False, True), repeat=g.n - 1):
        side = (False,) + bits
        value = _cut(g, side)
        optimal = True
        for v in range(g.n):
            flipped = list(side)
            flipped[v] = not flipped[v]
            if _cut(g, flipped) > value:
                optimal = False
                break
        if optimal:
            found.append(CutState(side))
    return found


def max_cut_value(g, budget=None):
    budget = budget or OracleBudget()
    if g.n > budget.max_cut_n:
        raise BudgetExceeded("cut enumeration allows n <= {}, got {}".format(budget.max_cut_n, g.n))
    return max(_cut(g, (False,) + bits) for bits in product((False, True), repeat=g.n - 1))


def enumerate_orderings_1d(t, budget=None):
    """Best objective over all orderings of the points on a line."""
    budget = budget or OracleBudget()
    if t.semantics not in (Semantics.BETWEENNESS, Semantics.NONBETWEENNESS):
        raise InputError("only order-determined semantics can be enumerated, got {}".format(t.semantics.value))
    if t.point_count > budget.max_permutation_points:
        raise BudgetExceeded(
            "permutation scan allows {} points, got {}".format(budget.max_permutation_points, t.point_count)
        )
    want_between = t.semantics is Semantics.BETWEENNESS
    best = None
    for order in permutations(range(t.point_count)):
        rank = [0] * t.point_count
        for r, p in enumerate(order):
            rank[p] = r
        total = Fraction(0)
        for a, b, c, w in t.triplets:
            between = min(rank[a], rank[c]) < rank[b] < max(rank[a], rank[c])
            if between == want_between:
                total += w
        if best is None or total > best:
            best = total
    return best


def _insertions(tree, leaf):
    yield (tree, leaf)
    if isinstance(tree, tuple):
        left, right = tree
        for sub in _insertions(left, leaf):
            yield (sub, right)
        for sub in _insertions(right, leaf):
            yield (left, sub)


def enumerate_trees(leaf_names, budget=None):
    """Every rooted binary topology once, as nested pairs of leaf names."""
    budget = budget or OracleBudget()
    names = list(leaf_names)
    if len(names) > budget.max_tree_leaves:
        raise BudgetExceeded("tree enumeration allows {} leaves, got {}".format(budget.max_tree_leaves, len(names)))
    if not names:
        return

    def grow(tree, rest):
        if not rest:
            yield tree
            return
        for bigger in _insertions(tree, rest[0]):
            yield from grow(bigger, rest[1:])

    yield from grow(names[0], names[1:])


def _clades(tree):
    out = []

    def walk(node):
        if isinstance(node, tuple):
            leaves = walk(node[0]) | walk(node[1])
            out.append(leaves)
            return leaves
        return frozenset([node])

    walk(tree)
    return out


def nested_objective(tree, names, triplets):
    clades = _clades(tree)
    total = Fraction(0)
    for a, b, c, w in triplets:
        x, y, z = names[a], names[b], names[c]
        if any(x in k and y in k and z not in k for k in clades):
            total += w
    return total


def _prune(tree, leaf):
    if not isinstance(tree, tuple):
        return None if tree == leaf else tree
    left, right = _prune(tree[0], leaf), _prune(tree[1], leaf)
    if left is None:
        return right
    if right is None:
        return left
    return (left, right)


def nested_is_local_opt(tree, names, triplets):
    """No prune-and-regraft of a single leaf strictly improves the objective."""
    base = nested_objective(tree, names, triplets)
    for leaf in names:
        pruned = _prune(tree, leaf)
        for neighbor in _insertions(pruned, leaf):
            if nested_objective(neighbor, names, triplets) > base:
                return False
    return True


def finite_difference_gradient(f, p, h=None):
    """Central differences of f at p, which must keep a margin h inside [0, 1]."""
    h = settings.getfloat("fd-step") if h is None else h
    p = torch.as_tensor(p, dtype=torch.float64)
    if (p - h < 0).any() or (p + h > 1).any():
        raise InputError("point is within {} of the box boundary".format(h))
    grad = torch.zeros_like(p)
    flat = grad.view(-1)
    for i in range(p.numel()):
        up, down = p.clone(), p.clone()
        up.view(-1)[i] += h
        down.view(-1)[i] -= h
        flat[i] = (float(f(up)) - float(f(down))) / (2 * h)
    return grad
