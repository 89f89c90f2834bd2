"""The degree-4 max-cut family H_k on which flip search takes exponentially many steps.

The gadget construction itself is external; instances enter through ingest()
and are kept in the cache directory as H{k}.graph plus H{k}.start.
"""
import re
from dataclasses import dataclass
from pathlib import Path

from getconfig import cache_dir, logger
from contralocal.cut import CutInstance, CutState
from contralocal.utils import InputError, InvariantViolation, UnsupportedConstruction

TABULATED = 15


def expected_vertices(k):
    return 28 * k + 9


def expected_edges(k):
    return 36 * k + 9


def expected_iterations(k):
    if k < 1:
        raise InputError("family index starts at 1")
    return 104 * 2 ** (k - 1) - 41


@dataclass(frozen=True)
class HardInstance:
    k: int
    graph: CutInstance
    start: CutState

    @property
    def expected_iterations(self):
        return expected_iterations(self.k)

    @property
    def label(self):
        return "H{}".format(self.k)


def violations(k, graph, start):
    """Names of the family invariants the pair breaks."""
    failures = []
    if graph.n != expected_vertices(k):
        failures.append("vertex count {} != 28k+9 = {}".format(graph.n, expected_vertices(k)))
    if graph.m != expected_edges(k):
        failures.append("edge count {} != 36k+9 = {}".format(graph.m, expected_edges(k)))
    if graph.max_degree() > 4:
        worst = max(range(graph.n), key=graph.degree)
        failures.append("vertex {} has degree {} > 4".format(worst, graph.degree(worst)))
    if len(start) != graph.n:
        failures.append("start cut has {} entries for {} vertices".format(len(start), graph.n))
    return failures


def _k_from_name(path):
    match = re.search(r"H_?(\d+)", Path(path).stem)
    if not match:
        raise InputError("cannot read the family index from {}, pass k".format(path))
    return int(match.group(1))


def ingest(path, start_path, k=None):
    k = _k_from_name(path) if k is None else k
    if k < 1:
        raise InputError("family index starts at 1")
    graph = CutInstance.load(path)
    with open(start_path, "r") as file:
        start = CutState.from_bits(file.read())
    failures = violations(k, graph, start)
    if failures:
        raise InvariantViolation("H{} invariant violated: {}".format(k, "; ".join(failures)))
    if k > TABULATED:
        logger.warning("H%d is beyond the tabulated family, iteration count is extrapolated", k)
    return HardInstance(k, graph, start)


def cache_paths(k, directory=None):
    directory = Path(directory) if directory else cache_dir()
    return directory / "H{}.graph".format(k), directory / "H{}.start".format(k)


def cache_store(instance, directory=None):
    graph_path, start_path = cache_paths(instance.k, directory)
    graph_path.parent.mkdir(parents=True, exist_ok=True)
    with open(graph_path, "w") as file:
        file.write(instance.graph.to_text())
    with open(start_path, "w") as file:
        file.write(instance.start.to_bits() + "\n")
    logger.info("cached %s in %s", instance.label, graph_path.parent)
    return graph_path, start_path


def available(directory=None):
    found = []
    for k in range(1, 64):
        graph_path, start_path = cache_paths(k, directory)
        if graph_path.exists() and start_path.exists():
            found.append(k)
    return found


def generate(k, directory=None):
    if k < 1:
        raise InputError("family index starts at 1")
    graph_path, start_path = cache_paths(k, directory)
    if graph_path.exists() and start_path.exists():
        return ingest(graph_path, start_path, k)
    raise UnsupportedConstruction(
        "H{0} is not in {1}; the gadget construction is external, ingest it with "
        "hard_family.ingest(graph, start, {0}) and cache_store() it".format(k, graph_path.parent)
    )
