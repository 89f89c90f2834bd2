#!/usr/bin/env python3
"""Command line front end: reduce, search, encode-qp, kkt, experiment, verify.

Exit codes: 0 success, 2 a search stopped at its cap, 3 a verification
failed, 4 bad input.
"""
import argparse
import json
import sys
from pathlib import Path

import torch

from getconfig import settings, colors, logger
from interface import colPrint, instructions
from contralocal import suites
from contralocal.cut import CutInstance, CutState, cut_value, random_cut_state
from contralocal.embedding import Embedding, random_embedding_1d
from contralocal.experiment import ExperimentConfig, final_objective, run_experiment, run_search
from contralocal.oracles import finite_difference_gradient
from contralocal.reductions import (
    BTWD,
    CTRD,
    REDUCERS,
    Semantics,
    canonical_configuration,
    canonical_embedding,
    decode,
    instance_from_text,
    reduce,
)
from contralocal.tree import TreeLayout, random_tree
from contralocal.triplet_loss import (
    DTYPE,
    EncoderWeights,
    QuadraticProgram,
    TripletLossInstance,
    as_point,
    decode_kkt_highd,
    encode_qp,
    gradient,
    kkt_residual_qp,
    kkt_residual_tripletloss,
    loss,
    projected_gradient_descent,
)
from contralocal.utils import (
    BudgetExceeded,
    DecodeError,
    InputError,
    InvariantViolation,
    PivotRule,
    ProvenanceError,
    UnsupportedConstruction,
    format_rational,
    set_seed,
)

OK, CAPPED, FAILED, BAD_INPUT = 0, 2, 3, 4
TARGETS = sorted(set(REDUCERS) | {BTWD, CTRD})
INPUT_ERRORS = (
    InputError,
    InvariantViolation,
    ProvenanceError,
    DecodeError,
    UnsupportedConstruction,
    BudgetExceeded,
    OSError,
)


def _read(path):
    with open(path, "r", encoding="utf-8") as file:
        return file.read()


def _first_token(text):
    for line in text.splitlines():
        parts = line.split()
        if parts and not parts[0].startswith("#"):
            return parts[0]
    raise InputError("empty file")


def load_any(path):
    """A max-cut graph, a triplet instance or a triplet-loss instance, told apart by the first line."""
    text = _read(path)
    head = _first_token(text)
    if head.isdigit():
        return CutInstance.from_text(text)
    if "semantics triplet-loss" in text.split("\npoints", 1)[0]:
        return TripletLossInstance.from_text(text)
    return instance_from_text(text)


def read_point(path, n=None, dim=None):
    """One line per variable with its coordinates; '#' lines are skipped."""
    rows = []
    for number, line in enumerate(_read(path).splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise InputError("line {}: coordinates must be numbers".format(number))
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError("a point needs the same number of coordinates on every line")
    if n is not None and len(rows) != n:
        raise InputError("point has {} rows, expected {}".format(len(rows), n))
    if dim is not None and len(rows[0]) != dim:
        raise InputError("point has {} coordinates per row, expected {}".format(len(rows[0]), dim))
    return torch.tensor(rows, dtype=DTYPE)


def write_point(path, p):
    with open(path, "w") as file:
        for row in p.reshape(p.shape[0], -1).tolist():
            file.write(" ".join(repr(v) for v in row) + "\n")


def _summary(fields, col=None):
    line = " ".join("{}={}".format(key, value) for key, value in fields)
    colPrint(line, col or colors["summary"], wrap=False)
    return line


# --- reduce ---------------------------------------------------------------------------


def cmd_reduce(args):
    g = CutInstance.load(args.graph)
    t = reduce(g, args.target, args.dim)
    out = Path(args.out) if args.out else Path(args.graph).with_suffix("." + args.target)
    t.save(out)
    label = "leaves" if t.semantics is Semantics.TREE else "points"
    _summary([(label, t.point_count), ("triplets", len(t.triplets))])
    logger.info("wrote %s", out)
    return OK


# --- search ---------------------------------------------------------------------------


def _start_for(instance, args):
    """The start configuration the --start flag names."""
    if args.start == "random":
        if isinstance(instance, CutInstance):
            return random_cut_state(instance.n, args.seed)
        if instance.semantics is Semantics.TREE:
            return random_tree(instance.names, args.seed)
        return random_embedding_1d(instance, args.seed)
    text = _read(args.start)
    head = _first_token(text)
    if set(head) <= {"0", "1"} and len(text.split()) == 1:
        s = CutState.from_bits(head)
        if isinstance(instance, CutInstance):
            return s
        if args.graph:
            return canonical_embedding(CutInstance.load(args.graph), s, instance)
        return canonical_configuration(instance, s)
    if isinstance(instance, CutInstance):
        raise InputError("a max-cut search starts from a bitstring")
    if instance.semantics is Semantics.TREE:
        return TreeLayout.from_newick(text, instance.names)
    return Embedding.from_text(text, instance.names)


def _search_tripletloss(t, args):
    ledger = Path(str(args.instance) + ".weights")
    if ledger.exists():
        t.qp = EncoderWeights.from_json(_read(ledger), t.names).qp
    if args.start == "random":
        generator = torch.Generator().manual_seed(args.seed)
        p0 = torch.rand(t.n, t.dim, generator=generator, dtype=DTYPE)
    else:
        p0 = read_point(args.start, t.n, t.dim)
    maxit = args.cap if args.cap is not None else settings.getint("pgd-maxit")
    p, trace = projected_gradient_descent(t, p0, tol=args.tol, maxit=maxit, backtrack=args.backtrack)
    if args.out:
        write_point(args.out, p)
    _summary([
        ("iterations", trace.iterations),
        ("step", "{:.6g}".format(trace.step)),
        ("loss", "{:.12g}".format(trace.losses[-1])),
        ("residual", "{:.3g}".format(kkt_residual_tripletloss(t, p))),
        ("terminated", "kkt" if trace.converged else "cap"),
    ])
    return OK if trace.converged else CAPPED


def cmd_search(args):
    instance = load_any(args.instance)
    if isinstance(instance, TripletLossInstance):
        return _search_tripletloss(instance, args)
    start = _start_for(instance, args)
    trace_file = open(args.trace, "w") if args.trace else None

    def sink(step):
        trace_file.write(json.dumps(step) + "\n")

    try:
        final, trace = run_search(instance, start, args.rule, args.cap, sink if trace_file else None)
    finally:
        if trace_file:
            trace_file.close()
    if args.movers:
        with open(args.movers, "w") as file:
            file.writelines("{}\n".format(trace.names[m]) for m in trace.movers)
    fields = [
        ("iterations", trace.iterations),
        ("objective", format_rational(final_objective(instance, final))),
        ("terminated", trace.terminated.value),
    ]
    if isinstance(instance, CutInstance):
        fields.append(("cut", final.to_bits()))
    elif args.graph:
        s = decode(instance, final)
        fields.append(("cut_value", format_rational(cut_value(CutInstance.load(args.graph), s))))
    if args.out:
        with open(args.out, "w") as file:
            if isinstance(instance, CutInstance):
                file.write(final.to_bits() + "\n")
            elif isinstance(final, TreeLayout):
                file.write(final.to_newick() + "\n")
            else:
                file.write(final.to_text(instance.names))
    _summary(fields)
    return CAPPED if trace.capped else OK


# --- encode-qp and kkt -----------------------------------------------------------------


def cmd_encode_qp(args):
    qp = QuadraticProgram.load(args.qp)
    t, weights = encode_qp(qp, dim=args.dim, grouping=args.grouping)
    out = Path(args.out) if args.out else Path(args.qp).with_suffix(".tl")
    t.save(out)
    ledger = Path(str(out) + ".weights")
    with open(ledger, "w", encoding="utf-8") as file:
        file.write(weights.to_json(t.names))
    # self-check at a random interior point
    h = settings.getfloat("fd-step")
    generator = torch.Generator().manual_seed(args.seed)
    p = 0.1 + 0.8 * torch.rand(t.n, t.dim, generator=generator, dtype=DTYPE)
    fd = finite_difference_gradient(lambda q: loss(t, q), p, h)
    analytic = gradient(t, p)
    error = ((analytic - fd).abs().max() / max(1.0, analytic.abs().max().item())).item()
    passed = error <= 1e-6
    _summary([("variables", t.n), ("triplets", len(t.triplets)), ("grouping", args.grouping)])
    colPrint(
        "gradient check {} (max relative error {:.3g})".format("passed" if passed else "FAILED", error),
        colors["pass"] if passed else colors["fail"],
    )
    return OK if passed else FAILED


def cmd_kkt(args):
    t = TripletLossInstance.load(args.instance)
    p = as_point(t, read_point(args.point, t.n, t.dim))
    tol = args.tol if args.tol is not None else settings.getfloat("kkt-tol")
    residuals = [("tripletloss_residual", kkt_residual_tripletloss(t, p))]
    ledger = Path(args.weights) if args.weights else Path(str(args.instance) + ".weights")
    if ledger.exists():
        weights = EncoderWeights.from_json(_read(ledger), t.names)
        residuals.append(("qp_residual", kkt_residual_qp(weights.qp, decode_kkt_highd(p))))
    elif args.weights:
        raise InputError("no weight ledger at {}".format(ledger))
    passed = all(r <= tol for _, r in residuals)
    _summary([(k, "{:.3g}".format(r)) for k, r in residuals] + [("tol", tol)])
    colPrint("KKT point" if passed else "not a KKT point", colors["pass"] if passed else colors["fail"])
    return OK if passed else FAILED


# --- experiment and verify -------------------------------------------------------------


def cmd_experiment(args):
    config = ExperimentConfig.load(args.config)
    rows, errors = run_experiment(config)
    for row in rows:
        _summary([("instance", row.instance), ("vertices", row.maxcut_n), ("iterations", row.iterations)])
    for entry in errors:
        colPrint("{instance}: {kind}: {message}".format(**entry), colors["fail"])
    if any(e["kind"] != "cap" for e in errors):
        return FAILED
    return CAPPED if errors else OK


def cmd_verify(args):
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    if args.suite == "hard-family":
        report = suites.hard_family_suite(args.seed)
    else:
        report = suites.run_suite(args.suite, args.seed, sizes, args.trials)
    text = json.dumps(report, indent=1)
    if args.out:
        with open(args.out, "w") as file:
            file.write(text + "\n")
    print(text)
    if report["passed"]:
        colPrint("{}: {} checks passed".format(args.suite, report["checks"]), colors["pass"])
        return OK
    first = report["failures"][0]
    colPrint(
        "{}: {} failed (seed {})".format(args.suite, first["property"], first["seed"]), colors["fail"]
    )
    return FAILED


# --- parser ------------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(description="Local search on max-cut and its contrastive reductions.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("reduce", help="compile a max-cut graph into a triplet instance")
    p.add_argument("graph", help="graph file: \"n m\" then \"u v w\" lines")
    p.add_argument("target", choices=TARGETS)
    p.add_argument("--dim", type=int, default=None, help="dimension for btwd and ctrd")
    p.add_argument("--out", default=None)
    p.set_defaults(run=cmd_reduce)

    p = sub.add_parser("search", help="run local search to a local optimum")
    p.add_argument("instance")
    p.add_argument("--start", default="random", help="\"random\", a cut bitstring file or a configuration file")
    p.add_argument("--seed", type=int, default=settings.getint("seed"))
    p.add_argument("--rule", type=PivotRule.parse, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--trace", default=None, help="JSONL file, one improving move per line")
    p.add_argument("--movers", default=None, help="file with the mover of every move, one per line")
    p.add_argument("--graph", default=None, help="source graph, to report the decoded cut value")
    p.add_argument("--tol", type=float, default=None, help="KKT tolerance for triplet-loss instances")
    p.add_argument("--backtrack", action="store_true", help="halve the PGD step when the loss would rise")
    p.add_argument("--out", default=None, help="where to write the final configuration")
    p.set_defaults(run=cmd_search)

    p = sub.add_parser("encode-qp", help="encode a box QP as a triplet-loss instance")
    p.add_argument("qp", help="QP file: n, then n rows of Q, then b")
    p.add_argument("--out", default=None)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--grouping", choices=("pairwise", "triples"), default="pairwise")
    p.add_argument("--seed", type=int, default=settings.getint("seed"))
    p.set_defaults(run=cmd_encode_qp)

    p = sub.add_parser("kkt", help="KKT residuals of a point")
    p.add_argument("instance")
    p.add_argument("point")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--weights", default=None, help="encoder ledger, defaults to INSTANCE.weights")
    p.set_defaults(run=cmd_kkt)

    p = sub.add_parser("experiment", help="run the hard family and write the summary table")
    p.add_argument("config", help="ini file with an [Experiment] section")
    p.set_defaults(run=cmd_experiment)

    p = sub.add_parser("verify", help="run a randomized property suite")
    p.add_argument("suite", choices=suites.SUITES + ("hard-family",))
    p.add_argument("--seed", type=int, default=settings.getint("seed"))
    p.add_argument("--sizes", default=None, help="comma separated sizes")
    p.add_argument("--trials", type=int, default=None, help="random instances per size")
    p.add_argument("--out", default=None, help="write the JSON report here too")
    p.set_defaults(run=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return OK if e.code in (0, None) else BAD_INPUT
    if args.command is None:
        instructions()
        return OK
    set_seed(settings.getint("seed"))
    try:
        return args.run(args)
    except INPUT_ERRORS as e:
        colPrint("error: {}".format(e), colors["error"])
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
