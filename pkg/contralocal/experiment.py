"""Runs the hard family through flip search and the reduced searches, and writes the summary table."""
import configparser
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Tuple

from getconfig import logger, settings
from contralocal import hard_family
from contralocal.cut import CutInstance, cut_value, flip_local_search, is_local_max_cut, random_cut_state
from contralocal.embedding import local_search_1d, objective
from contralocal.reductions import BTW1D, CTR1D, NBTW1D, TREE, Semantics, canonical_configuration, decode, reduce
from contralocal.tree import tree_local_search, tree_objective
from contralocal.utils import (
    DecodeError,
    InputError,
    InvariantViolation,
    MoveTrace,
    PivotRule,
    UnsupportedConstruction,
)

MAXCUT = "maxcut"
PROBLEMS = (MAXCUT, CTR1D, BTW1D, NBTW1D, TREE)
DESIGNATED = "designated"
RANDOM = "random"


def run_search(instance, start, rule=None, cap=None, sink=None, keep_steps=False):
    """Runs whichever engine fits the instance; returns (final configuration, trace)."""
    if isinstance(instance, CutInstance):
        names = ["v{}".format(i) for i in range(instance.n)]
        trace = MoveTrace(keep_steps=keep_steps, sink=sink, names=names)
        return flip_local_search(instance, start, rule, cap, trace)
    trace = MoveTrace(keep_steps=keep_steps, sink=sink, names=instance.names)
    if instance.semantics is Semantics.TREE:
        return tree_local_search(instance, start, rule, cap, trace)
    return local_search_1d(instance, start, rule, cap, trace)


def final_objective(instance, final):
    if isinstance(instance, CutInstance):
        return cut_value(instance, final)
    if instance.semantics is Semantics.TREE:
        return tree_objective(instance, final)
    return objective(instance, final)


@dataclass(frozen=True)
class ExperimentConfig:
    problems: Tuple[str, ...] = PROBLEMS
    k_min: int = 1
    k_max: int = 1
    rule: PivotRule = PivotRule.BEST
    start: str = DESIGNATED
    seed: int = 7
    cap: int = 5000000
    csv: Path = Path("summary.csv")
    figure_data: Path = Path("iterations.dat")
    trace_dir: Optional[Path] = None
    workers: int = 1
    cache: Optional[Path] = None

    def __post_init__(self):
        unknown = [p for p in self.problems if p not in PROBLEMS]
        if unknown:
            raise InputError("unknown problems {}, choose from {}".format(", ".join(unknown), ", ".join(PROBLEMS)))
        if self.k_min < 1:
            raise InputError("k-min starts at 1")
        if self.start not in (DESIGNATED, RANDOM):
            raise InputError("start must be designated or random")
        if self.workers < 1:
            raise InputError("workers must be at least 1")
        if self.start == DESIGNATED and self.k_max >= self.k_min:
            needed = hard_family.expected_iterations(self.k_max)
            if self.cap < needed:
                raise InputError("cap {} is below the {} iterations H{} needs".format(self.cap, needed, self.k_max))

    @property
    def ks(self):
        return list(range(self.k_min, self.k_max + 1))

    @property
    def errors_path(self):
        return self.csv.with_suffix(".errors.jsonl")

    @classmethod
    def load(cls, path):
        """Reads the [Experiment] section; relative paths resolve against the file's directory."""
        path = Path(path)
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise InputError("cannot read experiment file {}".format(path))
        if "Experiment" not in parser:
            raise InputError("{} has no [Experiment] section".format(path))
        section = parser["Experiment"]
        base = path.resolve().parent

        def where(key, default=None):
            value = section.get(key, default)
            if not value:
                return None
            value = Path(value)
            return value if value.is_absolute() else base / value

        try:
            return cls(
                problems=tuple(p.strip() for p in section.get("problems", ",".join(PROBLEMS)).split(",") if p.strip()),
                k_min=section.getint("k-min", 1),
                k_max=section.getint("k-max", 1),
                rule=PivotRule.parse(section.get("pivot-rule", settings.get("pivot-rule"))),
                start=section.get("start", DESIGNATED),
                seed=section.getint("seed", settings.getint("seed")),
                cap=section.getint("cap", settings.getint("iteration-cap")),
                csv=where("csv", "summary.csv"),
                figure_data=where("figure-data", "iterations.dat"),
                trace_dir=where("trace-dir"),
                workers=section.getint("workers", settings.getint("workers")),
                cache=where("cache-dir"),
            )
        except ValueError as e:
            if isinstance(e, InputError):
                raise
            raise InputError("{}: {}".format(path, e))


@dataclass
class SummaryRow:
    instance: str
    maxcut_n: int
    maxcut_m: int
    btw1d_n: int
    btw1d_m: int
    ctr1d_n: int
    ctr1d_m: int
    tree_n: int
    tree_m: int
    iterations: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


def _trace_writer(directory, label, problem):
    if directory is None:
        return None, None
    directory.mkdir(parents=True, exist_ok=True)
    file = open(directory / "{}.{}.jsonl".format(label, problem), "w")

    def sink(step):
        file.write(json.dumps(step) + "\n")

    return file, sink


def _write_movers(directory, label, problem, trace):
    if directory is None:
        return
    names = trace.names
    with open(directory / "{}.{}.movers".format(label, problem), "w") as file:
        file.writelines("{}\n".format(names[m]) for m in trace.movers)


def _traced_search(config, label, problem, instance, start):
    file, sink = _trace_writer(config.trace_dir, label, problem)
    try:
        final, trace = run_search(instance, start, config.rule, config.cap, sink)
    finally:
        if file is not None:
            file.close()
    _write_movers(config.trace_dir, label, problem, trace)
    return final, trace


def run_row(k, config):
    """One family member. Returns (SummaryRow or None, list of error dicts)."""
    label = "H{}".format(k)
    errors = []

    def error(kind, message, **extra):
        logger.warning("%s: %s", label, message)
        errors.append(dict(instance=label, kind=kind, message=message, **extra))

    try:
        h = hard_family.generate(k, config.cache)
    except (UnsupportedConstruction, InputError, InvariantViolation, OSError) as e:
        error("missing-instance", str(e))
        return None, errors
    try:
        row = _measure(h, k, label, config, error)
    except Exception as e:
        logger.exception("%s failed", label)
        error("row-failed", "{}: {}".format(type(e).__name__, e))
        return None, errors
    return row, errors


def _measure(h, k, label, config, error):
    g = h.graph
    start = h.start if config.start == DESIGNATED else random_cut_state(g.n, config.seed + k)
    _, flip = _traced_search(config, label, MAXCUT, g, start)
    if flip.capped:
        error("cap", "flip search hit the cap of {}".format(config.cap))
    elif config.start == DESIGNATED and flip.iterations != h.expected_iterations:
        error("iteration-mismatch", "{} iterations, expected {}".format(flip.iterations, h.expected_iterations),
              found=flip.iterations, expected=h.expected_iterations)
    sizes = {}
    for kind in (BTW1D, CTR1D, TREE):
        t = reduce(g, kind)
        sizes[kind] = (t.point_count, len(t.triplets))
    for problem in config.problems:
        if problem == MAXCUT:
            continue
        t = reduce(g, problem)
        final, trace = _traced_search(config, label, problem, t, canonical_configuration(t, start))
        if trace.movers != flip.movers:
            error("dynamics-mismatch", "{} took {} moves, flip search took {}".format(
                problem, trace.iterations, flip.iterations), problem=problem)
        elif not trace.capped:
            try:
                if not is_local_max_cut(g, decode(t, final)):
                    error("decode", "{} optimum decodes to a cut that is not locally maximal".format(problem),
                          problem=problem)
            except DecodeError as e:
                error("decode", "{}: {}".format(problem, e), problem=problem)
    row = SummaryRow(
        label, g.n, g.m,
        sizes[BTW1D][0], sizes[BTW1D][1],
        sizes[CTR1D][0], sizes[CTR1D][1],
        sizes[TREE][0], sizes[TREE][1],
        flip.iterations,
    )
    logger.info("%s: %d vertices, %d iterations", label, g.n, flip.iterations)
    return row


def _run_row_args(args):
    return run_row(*args)


def write_outputs(config, rows, errors):
    config.csv.parent.mkdir(parents=True, exist_ok=True)
    with open(config.csv, "w", newline="") as file:
        writer = csv.DictWriter(file, fieldnames=SummaryRow.columns(), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
    config.figure_data.parent.mkdir(parents=True, exist_ok=True)
    with open(config.figure_data, "w") as file:
        file.write("vertices iterations\n")
        for row in rows:
            file.write("{} {}\n".format(row.maxcut_n, row.iterations))
    with open(config.errors_path, "w") as file:
        for entry in errors:
            file.write(json.dumps(entry) + "\n")


def run_experiment(config):
    """Every k in range; rows come back in k order whatever the worker count."""
    jobs = [(k, config) for k in config.ks]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_row_args, jobs))
    else:
        results = [_run_row_args(job) for job in jobs]
    rows = [row for row, _ in results if row is not None]
    errors = [e for _, found in results for e in found]
    write_outputs(config, rows, errors)
    logger.info("experiment wrote %d rows to %s, %d errors", len(rows), config.csv, len(errors))
    return rows, errors
