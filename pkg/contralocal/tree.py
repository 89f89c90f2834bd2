"""Rooted binary tree layouts and leaf-relocation local search for ab|c triplets.

Leaves are nodes 0..L-1 in instance order and internal nodes are L..2L-2.
A relocation site is a node of the pruned tree: regrafting at site c makes
the leaf the sibling of c, and c = the pruned root means above the root.
"""
import random
from fractions import Fraction

from getconfig import logger, settings
from contralocal.utils import InputError, MoveTrace, PivotRule, Termination


class TreeLayout:
    def __init__(self, names, parent, children, root):
        self.names = tuple(names)
        self.parent = tuple(parent)
        self.children = tuple(None if c is None else tuple(c) for c in children)
        self.root = root
        self._check()

    @property
    def leaf_count(self):
        return len(self.names)

    def _check(self):
        leaves = self.leaf_count
        if len(self.parent) != 2 * leaves - 1 or len(self.children) != 2 * leaves - 1:
            raise InputError("a binary tree on {} leaves has {} nodes".format(leaves, 2 * leaves - 1))
        if self.parent[self.root] is not None:
            raise InputError("root has a parent")
        for node, kids in enumerate(self.children):
            if node < leaves:
                if kids is not None:
                    raise InputError("leaf {} has children".format(self.names[node]))
                continue
            if kids is None or len(kids) != 2:
                raise InputError("internal node {} must have exactly two children".format(node))
            for kid in kids:
                if self.parent[kid] != node:
                    raise InputError("parent link of node {} is broken".format(kid))
        seen = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            seen += 1
            if seen > len(self.parent):
                raise InputError("tree has a cycle")
            if node >= leaves:
                stack.extend(self.children[node])
        if seen != len(self.parent):
            raise InputError("tree is not connected")

    def leaf(self, name_or_id):
        if isinstance(name_or_id, int):
            if 0 <= name_or_id < self.leaf_count:
                return name_or_id
        elif name_or_id in self.names:
            return self.names.index(name_or_id)
        raise InputError("unknown leaf {!r}".format(name_or_id))

    def depth(self, node):
        d = 0
        while self.parent[node] is not None:
            node = self.parent[node]
            d += 1
        return d

    def lca_nodes(self, x, y):
        dx, dy = self.depth(x), self.depth(y)
        while dx > dy:
            x, dx = self.parent[x], dx - 1
        while dy > dx:
            y, dy = self.parent[y], dy - 1
        while x != y:
            x, y = self.parent[x], self.parent[y]
        return x

    def canonical_form(self):
        """Topology key insensitive to child order."""

        def form(node):
            if node < self.leaf_count:
                return self.names[node]
            return "(" + ",".join(sorted(form(k) for k in self.children[node])) + ")"

        return form(self.root)

    def same_topology(self, other):
        return self.canonical_form() == other.canonical_form()

    def to_nested(self, node=None):
        node = self.root if node is None else node
        if node < self.leaf_count:
            return self.names[node]
        a, b = self.children[node]
        return (self.to_nested(a), self.to_nested(b))

    @classmethod
    def from_nested(cls, names, nested):
        """Builds a layout from nested pairs of leaf names or leaf ids."""
        names = tuple(names)
        index = {name: i for i, name in enumerate(names)}
        leaves = len(names)
        parent = [None] * (2 * leaves - 1)
        children = [None] * (2 * leaves - 1)
        used = set()
        next_id = [leaves]

        def build(item):
            if isinstance(item, tuple):
                if len(item) != 2:
                    raise InputError("every internal node needs exactly two children")
                left, right = build(item[0]), build(item[1])
                node = next_id[0]
                if node >= len(parent):
                    raise InputError("too many internal nodes")
                next_id[0] += 1
                children[node] = (left, right)
                parent[left] = parent[right] = node
                return node
            leaf = item if isinstance(item, int) else index.get(item)
            if leaf is None or not 0 <= leaf < leaves:
                raise InputError("unknown leaf {!r}".format(item))
            if leaf in used:
                raise InputError("leaf {!r} appears twice".format(item))
            used.add(leaf)
            return leaf

        root = build(nested)
        if len(used) != leaves:
            raise InputError("tree has {} of {} leaves".format(len(used), leaves))
        return cls(names, parent, children, root)

    def to_newick(self):
        def form(node):
            if node < self.leaf_count:
                return self.names[node]
            return "(" + ",".join(form(k) for k in self.children[node]) + ")"

        return form(self.root) + ";"

    @classmethod
    def from_newick(cls, text, names=None):
        text = "".join(text.split())
        if not text.endswith(";"):
            raise InputError("newick text must end with ';'")
        text = text[:-1]
        position = [0]
        order = []

        def parse():
            if position[0] < len(text) and text[position[0]] == "(":
                position[0] += 1
                kids = [parse()]
                while position[0] < len(text) and text[position[0]] == ",":
                    position[0] += 1
                    kids.append(parse())
                if position[0] >= len(text) or text[position[0]] != ")":
                    raise InputError("unbalanced parentheses in newick text")
                position[0] += 1
                if len(kids) != 2:
                    raise InputError("non-binary node with {} children".format(len(kids)))
                return tuple(kids)
            start = position[0]
            while position[0] < len(text) and text[position[0]] not in "(),":
                position[0] += 1
            name = text[start : position[0]]
            if not name:
                raise InputError("empty leaf name at offset {}".format(start))
            order.append(name)
            return name

        nested = parse()
        if position[0] != len(text):
            raise InputError("trailing text after the tree")
        if names is None:
            names = order
        elif sorted(names) != sorted(order):
            raise InputError("newick leaves don't match the instance leaves")
        return cls.from_nested(names, nested)


def lca(t, a, b):
    a, b = t.leaf(a), t.leaf(b)
    if a == b:
        raise InputError("lca needs two distinct leaves")
    return t.lca_nodes(a, b)


def triplet_satisfied_tree(t, a, b, c):
    """ab|c: lca(a, b) lies strictly below lca(a, b, c)."""
    ab = lca(t, a, b)
    return ab != t.lca_nodes(ab, t.leaf(c))


def tree_objective(instance, t):
    return sum((w for a, b, c, w in instance.triplets if triplet_satisfied_tree(t, a, b, c)), Fraction(0))


def _prune(t, leaf):
    parent = list(t.parent)
    children = [None if c is None else list(c) for c in t.children]
    p = parent[leaf]
    if p is None:
        raise InputError("cannot prune the root")
    sibling = children[p][0] if children[p][1] == leaf else children[p][1]
    grand = parent[p]
    root = t.root
    parent[sibling] = grand
    if grand is None:
        root = sibling
    else:
        children[grand][children[grand].index(p)] = sibling
    parent[leaf] = parent[p] = None
    children[p] = None
    return parent, children, root, p, sibling


def relocation_sites(t, leaf):
    leaf = t.leaf(leaf)
    if t.leaf_count < 3:
        raise InputError("relocation needs at least 3 leaves")
    p = t.parent[leaf]
    return [node for node in range(len(t.parent)) if node != leaf and node != p]


def relocate(t, leaf, site):
    leaf = t.leaf(leaf)
    if site not in relocation_sites(t, leaf):
        raise InputError("node {} is not a relocation site for leaf {}".format(site, t.names[leaf]))
    parent, children, root, p, _ = _prune(t, leaf)
    above = parent[site]
    children[p] = [site, leaf]
    parent[site] = parent[leaf] = p
    parent[p] = above
    if above is None:
        root = p
    else:
        children[above][children[above].index(site)] = p
    return TreeLayout(t.names, parent, children, root)


class _Pruned:
    """The tree without one leaf, with subtree intervals for O(1) clade tests."""

    def __init__(self, t, leaf):
        self.parent, self.children, self.root, self.freed, self.sibling = _prune(t, leaf)
        self.leaves = t.leaf_count
        self.tin = [0] * len(self.parent)
        self.tout = [0] * len(self.parent)
        clock = 0
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                self.tout[node] = clock - 1
                continue
            self.tin[node] = clock
            clock += 1
            stack.append((node, True))
            if node >= self.leaves:
                stack.extend((k, False) for k in reversed(self.children[node]))

    def contains(self, u, x):
        return self.tin[u] <= self.tin[x] <= self.tout[u]

    def up_to(self, u, x):
        while not self.contains(u, x):
            u = self.parent[u]
        return u


def _site_values(instance, t, leaf):
    """Weighted satisfaction of leaf's triplets for every regraft site."""
    pruned = _Pruned(t, leaf)
    sites = [n for n in range(len(t.parent)) if n != leaf and n != pruned.freed]
    fixed = []
    moving = []
    for index in instance.incidence[leaf]:
        a, b, c, w = instance.triplets[index]
        if c == leaf:
            fixed.append((pruned.up_to(a, b), w))
        else:
            moving.append((b if a == leaf else a, c, w))
    values = {}
    for site in sites:
        value = Fraction(0)
        for top, w in fixed:
            if site == top or not pruned.contains(top, site):
                value += w
        for x, y, w in moving:
            if pruned.contains(site, x):
                ok = not pruned.contains(site, y)
            else:
                ok = not pruned.contains(pruned.up_to(site, x), y)
            if ok:
                value += w
        values[site] = value
    return values, pruned.sibling


def best_relocation(instance, t, leaf):
    """(site, gain) of the strictly improving relocation with the largest gain, lowest site on ties."""
    values, current = _site_values(instance, t, leaf)
    base = values[current]
    best = None
    for site in sorted(values):
        gain = values[site] - base
        if gain > 0 and (best is None or gain > best[1]):
            best = (site, gain)
    return best


def is_local_opt_tree(instance, t):
    return all(best_relocation(instance, t, leaf) is None for leaf in range(t.leaf_count))


def tree_local_search(instance, t0, rule=None, cap=None, trace=None):
    rule = rule or PivotRule.parse(settings.get("pivot-rule"))
    cap = settings.getint("iteration-cap") if cap is None else cap
    trace = trace if trace is not None else MoveTrace(names=t0.names)
    t = t0
    value = tree_objective(instance, t) if trace.wants_steps else None
    while True:
        choice = None
        for leaf in range(t.leaf_count):
            move = best_relocation(instance, t, leaf)
            if move is None:
                continue
            if choice is None or move[1] > choice[1]:
                choice = (leaf, move[1], move[0])
            if rule is PivotRule.FIRST:
                break
        if choice is None:
            trace.finish(Termination.LOCAL_OPTIMUM)
            break
        if trace.iterations >= cap:
            trace.finish(Termination.CAP)
            break
        leaf, gain, site = choice
        old = next(k for k in t.children[t.parent[leaf]] if k != leaf)
        t = relocate(t, leaf, site)
        logger.debug("moved leaf %s next to node %d, gain %s", t.names[leaf], site, gain)
        if trace.wants_steps:
            trace.record(leaf, old, site, value, value + gain)
            value += gain
        else:
            trace.record(leaf)
    return t, trace


def random_tree(names, seed):
    """Uniform random topology by inserting leaves one at a time."""
    rng = random.Random(seed)
    names = tuple(names)
    if len(names) == 1:
        return TreeLayout(names, [None], [None], 0)
    tree = (names[0], names[1])

    def nodes(item):
        out = [item]
        if isinstance(item, tuple):
            out += nodes(item[0]) + nodes(item[1])
        return out

    def graft(item, target, name):
        if item is target:
            return (item, name)
        if isinstance(item, tuple):
            return (graft(item[0], target, name), graft(item[1], target, name))
        return item

    for name in names[2:]:
        candidates = nodes(tree)
        tree = graft(tree, candidates[rng.randrange(len(candidates))], name)
    return TreeLayout.from_nested(names, tree)
