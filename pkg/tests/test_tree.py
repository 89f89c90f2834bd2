from itertools import combinations, permutations

import pytest

from contralocal.cut import CutState, flip_local_search, random_cut_state
from contralocal.oracles import nested_is_local_opt
from contralocal.reductions import TREE, TripletInstance, Semantics, canonical_configuration, reduce
from contralocal.tree import (
    TreeLayout,
    best_relocation,
    is_local_opt_tree,
    lca,
    random_tree,
    relocate,
    relocation_sites,
    tree_local_search,
    tree_objective,
    triplet_satisfied_tree,
)
from contralocal.utils import InputError, MoveTrace, PivotRule

ABC = ("a", "b", "c")
ABCD = ("a", "b", "c", "d")


def test_newick_round_trip():
    t = TreeLayout.from_nested(ABCD, (("a", "b"), ("c", "d")))
    assert t.to_newick() == "((a,b),(c,d));"
    back = TreeLayout.from_newick(" ((a, b), (c,d));\n", ABCD)
    assert back.same_topology(t)
    assert back.to_nested() == (("a", "b"), ("c", "d"))


@pytest.mark.parametrize("text", ["(a,b,c);", "((a,b),c)", "((a,b),c));", "((a,),c);"])
def test_newick_rejects(text):
    with pytest.raises(InputError):
        TreeLayout.from_newick(text, ABC)


def test_newick_leaves_must_match():
    with pytest.raises(InputError):
        TreeLayout.from_newick("((a,b),d);", ABC)


def test_nested_rejects():
    with pytest.raises(InputError):
        TreeLayout.from_nested(ABC, (("a", "b"), "a"))
    with pytest.raises(InputError):
        TreeLayout.from_nested(ABC, ("a", "b"))
    with pytest.raises(InputError):
        TreeLayout.from_nested(ABC, (("a", "b"), "e"))


def test_broken_links_are_rejected():
    with pytest.raises(InputError):
        TreeLayout(ABC, [3, 3, 4, None, None], [None, None, None, (0, 1), (3, 2)], 4)


def test_canonical_form_ignores_child_order():
    t = TreeLayout.from_nested(ABC, (("a", "b"), "c"))
    u = TreeLayout.from_nested(ABC, ("c", ("b", "a")))
    assert t.same_topology(u)
    assert not t.same_topology(TreeLayout.from_nested(ABC, (("a", "c"), "b")))


def test_triplet_satisfaction():
    t = TreeLayout.from_nested(ABCD, (("a", "b"), ("c", "d")))
    assert triplet_satisfied_tree(t, "a", "b", "c")
    assert triplet_satisfied_tree(t, "d", "c", "a")
    assert not triplet_satisfied_tree(t, "a", "c", "b")
    assert lca(t, "a", "b") == t.parent[0]
    with pytest.raises(InputError):
        lca(t, "a", "a")


def test_relocation_site_count():
    names = ["leaf{}".format(i) for i in range(41)]
    t = random_tree(names, 4)
    assert len(relocation_sites(t, 0)) == 79
    with pytest.raises(InputError):
        relocation_sites(TreeLayout.from_nested(("a", "b"), ("a", "b")), 0)


def test_relocate():
    t = TreeLayout.from_nested(ABC, (("a", "b"), "c"))
    moved = relocate(t, "c", 0)
    assert moved.canonical_form() == "((a,c),b)"
    assert relocate(t, "c", t.parent[0]).same_topology(t)
    with pytest.raises(InputError):
        relocate(t, "c", t.root)


@pytest.mark.parametrize("seed", range(5))
def test_best_relocation_matches_brute_force(random_graph, seed):
    t = reduce(random_graph(seed, 4), TREE)
    layout = random_tree(t.names, seed)
    base = tree_objective(t, layout)
    for leaf in range(layout.leaf_count):
        gains = {site: tree_objective(t, relocate(layout, leaf, site)) - base
                 for site in relocation_sites(layout, leaf)}
        top = max(gains.values())
        expected = None
        if top > 0:
            expected = (min(site for site, gain in gains.items() if gain == top), top)
        assert best_relocation(t, layout, leaf) == expected


@pytest.mark.parametrize("rule", [PivotRule.BEST, PivotRule.FIRST])
@pytest.mark.parametrize("seed", range(3))
def test_search_from_random_tree(random_graph, rule, seed):
    t = reduce(random_graph(seed, 4), TREE)
    start = random_tree(t.names, seed + 10)
    final, trace = tree_local_search(t, start, rule, trace=MoveTrace(names=t.names))
    assert is_local_opt_tree(t, final)
    assert nested_is_local_opt(final.to_nested(), t.names, t.triplets)
    values = [tree_objective(t, start)] + [step.after for step in trace.steps]
    assert all(after > before for before, after in zip(values, values[1:]))
    assert values[-1] == tree_objective(t, final)


@pytest.mark.parametrize("rule", [PivotRule.BEST, PivotRule.FIRST])
@pytest.mark.parametrize("seed", range(4))
def test_tree_search_follows_flip_search(random_graph, rule, seed):
    g = random_graph(seed, 6)
    s0 = random_cut_state(6, seed)
    t = reduce(g, TREE)
    _, flips = flip_local_search(g, s0, rule)
    _, moves = tree_local_search(t, canonical_configuration(t, s0), rule)
    assert moves.movers == flips.movers


def test_local_max_cut_gives_a_local_tree(k3):
    t = reduce(k3, TREE)
    assert is_local_opt_tree(t, canonical_configuration(t, CutState((False, True, True))))
    assert not is_local_opt_tree(t, canonical_configuration(t, CutState.all_one_side(3)))


def test_plain_triplet_instance():
    t = TripletInstance(ABC, Semantics.TREE, ((0, 1, 2, 3), (0, 2, 1, 1)))
    start = TreeLayout.from_nested(ABC, (("a", "c"), "b"))
    final, trace = tree_local_search(t, start)
    assert final.canonical_form() == "((a,b),c)"
    assert trace.iterations == 1


def test_random_tree_is_seeded():
    names = ["p{}".format(i) for i in range(9)]
    assert random_tree(names, 2).same_topology(random_tree(names, 2))
    assert random_tree(["only"], 0).leaf_count == 1


def mirror(nested):
    if isinstance(nested, tuple):
        return (mirror(nested[1]), mirror(nested[0]))
    return nested


def names_for(leaves):
    return tuple("l{}".format(i) for i in range(leaves))


@pytest.mark.parametrize("leaves", [3, 5, 7])
@pytest.mark.parametrize("seed", range(3))
def test_satisfaction_ignores_child_order(leaves, seed):
    names = names_for(leaves)
    t = random_tree(names, seed)
    flipped = TreeLayout.from_nested(names, mirror(t.to_nested()))
    assert flipped.same_topology(t)
    assert flipped.to_nested() != t.to_nested()
    for a, b, c in permutations(range(leaves), 3):
        assert triplet_satisfied_tree(flipped, a, b, c) == triplet_satisfied_tree(t, a, b, c)


def path_to_root(t, node):
    path = [node]
    while t.parent[path[-1]] is not None:
        path.append(t.parent[path[-1]])
    return path


@pytest.mark.parametrize("seed", range(4))
def test_lca_is_the_lowest_shared_ancestor(seed):
    t = random_tree(names_for(9), seed)
    for a, b in combinations(range(9), 2):
        above_b = set(path_to_root(t, b))
        shared = next(node for node in path_to_root(t, a) if node in above_b)
        assert lca(t, a, b) == shared == lca(t, b, a)


def prune_nested(tree, leaf):
    if not isinstance(tree, tuple):
        return None if tree == leaf else tree
    left, right = prune_nested(tree[0], leaf), prune_nested(tree[1], leaf)
    if left is None or right is None:
        return right if left is None else left
    return (left, right)


def regrafts_nested(tree, leaf):
    """Every way to hang leaf off an edge of tree, or above its root."""
    found = [(tree, leaf)]
    if isinstance(tree, tuple):
        found += [(sub, tree[1]) for sub in regrafts_nested(tree[0], leaf)]
        found += [(tree[0], sub) for sub in regrafts_nested(tree[1], leaf)]
    return found


@pytest.mark.parametrize("leaves", [3, 4, 5, 6])
@pytest.mark.parametrize("seed", range(3))
def test_relocation_sites_are_every_distinct_regraft(leaves, seed):
    names = names_for(leaves)
    t = random_tree(names, seed)
    for leaf in range(leaves):
        sites = relocation_sites(t, leaf)
        moved = {relocate(t, leaf, site).canonical_form() for site in sites}
        pruned = prune_nested(t.to_nested(), names[leaf])
        exhaustive = {TreeLayout.from_nested(names, tree).canonical_form()
                      for tree in regrafts_nested(pruned, names[leaf])}
        assert len(sites) == 2 * leaves - 3 == len(moved)
        assert moved == exhaustive
        assert t.canonical_form() in moved
