from fractions import Fraction

import pytest

from contralocal.cut import CutInstance, CutState, random_cut_instance


def unit(n, pairs):
    return CutInstance(n, tuple((u, v, Fraction(1)) for u, v in pairs))


def h1_like():
    """37 vertices and 45 edges like H_1: a 37-cycle plus eight chords, max degree 3."""
    edges = [(i, (i + 1) % 37, Fraction(1 + (3 * i) % 5)) for i in range(37)]
    edges += [(i, i + 18, Fraction(2 * i + 1, 2)) for i in range(8)]
    return CutInstance(37, tuple(edges))


def h1_like_start():
    return CutState(tuple(i % 3 == 0 for i in range(37)))


@pytest.fixture
def k3():
    return unit(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def single_edge():
    return unit(2, [(0, 1)])


@pytest.fixture
def path():
    return unit(3, [(0, 1), (1, 2)])


@pytest.fixture
def star():
    return unit(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def h1_graph():
    return h1_like()


@pytest.fixture
def h1_files(tmp_path):
    """H1.graph and H1.start written to a fresh cache directory."""
    graph_path = tmp_path / "H1.graph"
    start_path = tmp_path / "H1.start"
    graph_path.write_text(h1_like().to_text())
    start_path.write_text(h1_like_start().to_bits() + "\n")
    return graph_path, start_path


@pytest.fixture
def random_graph():
    def make(seed, n):
        return random_cut_instance(n, seed)

    return make
