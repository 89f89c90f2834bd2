"""Randomized property suites. Each returns a report dict; failures carry the seed that shows them."""
import random
from fractions import Fraction

import torch

from getconfig import logger
from contralocal import hard_family
from contralocal.cut import (
    cut_value,
    flip_local_search,
    is_local_max_cut,
    random_cut_instance,
    random_cut_state,
)
from contralocal.embedding import local_search_1d, objective, random_embedding_1d
from contralocal.oracles import finite_difference_gradient
from contralocal.reductions import (
    BTW1D,
    CTR1D,
    NBTW1D,
    TREE,
    canonical_configuration,
    decode,
    linkage,
    reduce,
    weight_violations,
)
from contralocal.tree import (
    best_relocation,
    random_tree,
    relocate,
    relocation_sites,
    tree_local_search,
    tree_objective,
)
from contralocal.triplet_loss import (
    DTYPE,
    QuadraticProgram,
    TripletLossInstance,
    encode_qp,
    gradient,
    hinge_arguments,
    loss,
)
from contralocal.utils import DecodeError, MoveTrace, PivotRule

SUITES = ("reductions", "dynamics", "decoding", "trees", "gradients", "encoder")
DEFAULT_SIZES = {
    "reductions": [3, 5, 8, 12],
    "dynamics": [5, 10, 15, 20, 25],
    "decoding": [4, 8, 12, 16, 20],
    "trees": [3, 5, 8, 13],
    "gradients": [2, 4, 6],
    "encoder": [1, 3, 6, 10],
}
# graphs per size: 50 for the mover identity, 200 for decoding from random starts
DEFAULT_TRIALS = {"reductions": 5, "dynamics": 10, "decoding": 40, "trees": 3, "gradients": 3, "encoder": 5}
# (extra points, per-edge triplets, per-vertex triplets, constant triplets)
REDUCTION_SHAPE = {CTR1D: (3, 1, 2, 2), BTW1D: (2, 1, 2, 0), NBTW1D: (2, 2, 1, 0), TREE: (4, 2, 3, 3)}


class _Report:
    def __init__(self, suite, seed):
        self.suite = suite
        self.seed = seed
        self.checks = 0
        self.failures = []

    def check(self, ok, prop, seed, detail=""):
        self.checks += 1
        if not ok:
            logger.warning("%s: %s failed for seed %s %s", self.suite, prop, seed, detail)
            self.failures.append({"property": prop, "seed": seed, "detail": str(detail)})

    def as_dict(self):
        return {"suite": self.suite, "seed": self.seed, "checks": self.checks,
                "passed": not self.failures, "failures": self.failures}


def _counts(kind, g):
    """(points, triplets) a reduction of g must have."""
    extra, per_edge, per_vertex, constant = REDUCTION_SHAPE[kind]
    return g.n + extra, per_edge * g.m + per_vertex * g.n + constant


def reductions_suite(seed, sizes, trials=5):
    report = _Report("reductions", seed)
    for n in sizes:
        for trial in range(trials):
            case = seed * 100003 + n * 101 + trial
            g = random_cut_instance(n, case)
            s = random_cut_state(n, case)
            for kind in (CTR1D, BTW1D, NBTW1D, TREE):
                t = reduce(g, kind)
                report.check((t.point_count, len(t.triplets)) == _counts(kind, g), kind + " counts", case)
                report.check(not weight_violations(t), kind + " weight dominance", case)
                config = canonical_configuration(t, s)
                report.check(decode(t, config) == s, kind + " round trip", case)
                value = tree_objective(t, config) if kind == TREE else objective(t, config)
                constant, factor = linkage(t)
                report.check(value == constant + factor * cut_value(g, s), kind + " objective linkage", case)
    return report.as_dict()


def _search(kind, t, start, rule, cap):
    trace = MoveTrace(keep_steps=False)
    if kind == TREE:
        return tree_local_search(t, start, rule, cap, trace)
    return local_search_1d(t, start, rule, cap, trace)


def dynamics_suite(seed, sizes, trials=10, rule=PivotRule.BEST):
    """Reduced searches from canonical starts repeat the flip search's movers."""
    report = _Report("dynamics", seed)
    for n in sizes:
        for trial in range(trials):
            case = seed * 100003 + n * 101 + trial
            g = random_cut_instance(n, case)
            s = random_cut_state(n, case)
            _, flip = flip_local_search(g, s, rule, trace=MoveTrace(keep_steps=False))
            for kind in (CTR1D, BTW1D, NBTW1D, TREE):
                t = reduce(g, kind)
                final, trace = _search(kind, t, canonical_configuration(t, s), rule, None)
                report.check(trace.movers == flip.movers, kind + " mover sequence", case,
                             "{} vs {} moves".format(trace.iterations, flip.iterations))
                report.check(is_local_max_cut(g, decode(t, final)), kind + " decoded local optimum", case)
    return report.as_dict()


def decoding_suite(seed, sizes, trials=40, rule=PivotRule.BEST):
    """Searches from random configurations end at optima that decode to local max cuts."""
    report = _Report("decoding", seed)
    for n in sizes:
        for trial in range(trials):
            case = seed * 100003 + n * 101 + trial
            g = random_cut_instance(n, case)
            for kind in (CTR1D, BTW1D, NBTW1D, TREE):
                t = reduce(g, kind)
                start = random_tree(t.names, case) if kind == TREE else random_embedding_1d(t, case)
                final, trace = _search(kind, t, start, rule, None)
                report.check(not trace.capped, kind + " reaches an optimum", case)
                try:
                    cut = decode(t, final)
                except DecodeError as e:
                    report.check(False, kind + " decodes", case, e)
                    continue
                report.check(is_local_max_cut(g, cut), kind + " decode from random start", case)
    return report.as_dict()


def hard_family_suite(seed=None, directory=None, problems=(CTR1D, BTW1D, TREE)):
    """Dynamics identity on every cached H_k."""
    report = _Report("hard-family", seed)
    for k in hard_family.available(directory):
        h = hard_family.generate(k, directory)
        _, flip = flip_local_search(h.graph, h.start, PivotRule.BEST, trace=MoveTrace(keep_steps=False))
        report.check(flip.iterations == h.expected_iterations, "H{} iterations".format(k), k)
        for kind in problems:
            t = reduce(h.graph, kind)
            _, trace = _search(kind, t, canonical_configuration(t, h.start), PivotRule.BEST, None)
            report.check(trace.movers == flip.movers, "H{} {} mover sequence".format(k, kind), k)
    return report.as_dict()


def trees_suite(seed, sizes, trials=3):
    report = _Report("trees", seed)
    for leaves in sizes:
        for trial in range(trials):
            case = seed * 100003 + leaves * 101 + trial
            rng = random.Random(case)
            names = ["l{}".format(i) for i in range(leaves)]
            t = random_tree(names, case)
            triplets = []
            for _ in range(3 * leaves):
                a, b, c = rng.sample(range(leaves), 3)
                triplets.append((a, b, c, Fraction(rng.randint(1, 5))))
            instance = _TreeInstance(names, triplets)
            base = tree_objective(instance, t)
            for leaf in range(leaves):
                sites = relocation_sites(t, leaf)
                report.check(len(sites) == 2 * leaves - 3, "site count", case)
                move = best_relocation(instance, t, leaf)
                best = max((tree_objective(instance, relocate(t, leaf, s)) - base for s in sites), default=0)
                expected = best if best > 0 else None
                report.check((move[1] if move else None) == expected, "best relocation gain", case)
    return report.as_dict()


class _TreeInstance:
    """Bare triplet holder for random tree checks."""

    def __init__(self, names, triplets):
        self.names = tuple(names)
        self.triplets = tuple(triplets)
        rows = [[] for _ in names]
        for index, (a, b, c, _) in enumerate(self.triplets):
            for p in (a, b, c):
                rows[p].append(index)
        self.incidence = rows


def _interior(generator, shape):
    return 0.05 + 0.9 * torch.rand(shape, generator=generator, dtype=DTYPE)


def gradients_suite(seed, sizes, trials=3, points=10):
    report = _Report("gradients", seed)
    for n in sizes:
        for trial in range(trials):
            case = seed * 100003 + n * 101 + trial
            rng = random.Random(case)
            generator = torch.Generator().manual_seed(case)
            dim = rng.randint(1, 3)
            triplets = []
            for _ in range(3 * n):
                a, b, c = rng.sample(range(n + 2), 3)
                triplets.append((a, b, c, rng.uniform(0, 3)))
            t = TripletLossInstance(n, triplets, dim=dim, margin=rng.uniform(0.05, 0.5))
            for _ in range(points):
                p = _interior(generator, (n, dim))
                if (hinge_arguments(t, p).abs() < 1e-4).any():
                    continue
                fd = finite_difference_gradient(lambda q: loss(t, q), p, 1e-6)
                g = gradient(t, p)
                error = ((g - fd).abs().max() / max(1.0, g.abs().max().item())).item()
                report.check(error <= 1e-6, "finite difference agreement", case, error)
    return report.as_dict()


def random_qp(n, seed):
    rng = random.Random(seed)
    Q = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            Q[i][j] = Q[j][i] = rng.uniform(-5, 5)
    return QuadraticProgram(Q, [rng.uniform(-5, 5) for _ in range(n)])


def encoder_suite(seed, sizes, trials=5, points=20):
    report = _Report("encoder", seed)
    for n in sizes:
        for trial in range(trials):
            case = seed * 100003 + n * 101 + trial
            qp = random_qp(n, case)
            generator = torch.Generator().manual_seed(case)
            for grouping in ("pairwise", "triples"):
                t, weights = encode_qp(qp, grouping=grouping)
                split_ok = all(
                    e.w >= 0 and e.w_dual >= 0 and e.w * e.w_dual == 0 and e.w - e.w_dual == e.target
                    for e in weights.entries
                )
                report.check(split_ok, grouping + " dual split", case)
                zero = torch.zeros(n, 1, dtype=DTYPE)
                for _ in range(points):
                    x = torch.rand(n, generator=generator, dtype=DTYPE)
                    g = gradient(t, x.reshape(-1, 1)).reshape(-1)
                    report.check((g - qp.grad(x)).abs().max().item() <= 1e-8, grouping + " gradient identity", case)
                    diff = loss(t, x) - loss(t, zero)
                    expected = qp.value(x) - qp.value(torch.zeros(n, dtype=DTYPE))
                    report.check(abs(diff - expected) <= 1e-8 * max(1.0, abs(diff)), grouping + " loss identity", case)
                    report.check((hinge_arguments(t, x) >= 0).all().item(), grouping + " hinge inactivity", case)
            for dim in (2, 3):
                t, _ = encode_qp(qp, dim=dim)
                p = torch.rand(n, dim, generator=generator, dtype=DTYPE)
                report.check((hinge_arguments(t, p) >= 0).all().item(), "hinge inactivity d={}".format(dim), case)
    return report.as_dict()


def run_suite(name, seed, sizes=None, trials=None):
    sizes = sizes or DEFAULT_SIZES[name]
    trials = trials or DEFAULT_TRIALS[name]
    runners = {
        "reductions": reductions_suite,
        "dynamics": dynamics_suite,
        "decoding": decoding_suite,
        "trees": trees_suite,
        "gradients": gradients_suite,
        "encoder": encoder_suite,
    }
    report = runners[name](seed, sizes, trials)
    logger.info("suite %s: %d checks, %d failures", name, report["checks"], len(report["failures"]))
    return report
