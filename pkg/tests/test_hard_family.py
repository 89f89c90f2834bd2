import pytest

from conftest import h1_like, h1_like_start
from contralocal import hard_family
from contralocal.cut import CutInstance, CutState
from contralocal.utils import InputError, InvariantViolation, UnsupportedConstruction


@pytest.mark.parametrize("k,iterations", [(1, 63), (2, 167), (3, 375), (8, 13271), (15, 1703895)])
def test_tabulated_iterations(k, iterations):
    assert hard_family.expected_iterations(k) == iterations


def test_iterations_double_plus_41():
    for k in range(1, hard_family.TABULATED):
        assert hard_family.expected_iterations(k + 1) == 2 * hard_family.expected_iterations(k) + 41
    with pytest.raises(InputError):
        hard_family.expected_iterations(0)


def test_sizes():
    assert (hard_family.expected_vertices(1), hard_family.expected_edges(1)) == (37, 45)
    assert (hard_family.expected_vertices(15), hard_family.expected_edges(15)) == (429, 549)


def test_ingest(h1_files):
    h = hard_family.ingest(*h1_files)
    assert (h.k, h.label, h.expected_iterations) == (1, "H1", 63)
    assert h.graph == h1_like()
    assert h.start == h1_like_start()


def test_ingest_rejects_wrong_sizes(h1_files):
    graph_path, start_path = h1_files
    with pytest.raises(InvariantViolation, match="28k"):
        hard_family.ingest(graph_path, start_path, k=2)


def test_ingest_rejects_high_degree(tmp_path):
    edges = list(h1_like().edges)
    # 0 already touches 1, 36 and 18
    edges[-1] = (0, 30, edges[-1][2])
    edges[-2] = (0, 31, edges[-2][2])
    graph_path = tmp_path / "H1.graph"
    start_path = tmp_path / "H1.start"
    graph_path.write_text(CutInstance(37, tuple(edges)).to_text())
    start_path.write_text(h1_like_start().to_bits())
    with pytest.raises(InvariantViolation, match="degree"):
        hard_family.ingest(graph_path, start_path)


def test_ingest_rejects_short_start(h1_files, tmp_path):
    graph_path, _ = h1_files
    short = tmp_path / "short.start"
    short.write_text("0101\n")
    with pytest.raises(InvariantViolation, match="start cut"):
        hard_family.ingest(graph_path, short, k=1)


def test_index_comes_from_the_name(tmp_path, h1_files):
    graph_path, start_path = h1_files
    renamed = tmp_path / "family.graph"
    renamed.write_text(graph_path.read_text())
    with pytest.raises(InputError):
        hard_family.ingest(renamed, start_path)
    assert hard_family.ingest(renamed, start_path, k=1).k == 1


def test_cache_round_trip(tmp_path, h1_files):
    h = hard_family.ingest(*h1_files)
    cache = tmp_path / "cache"
    assert hard_family.available(cache) == []
    hard_family.cache_store(h, cache)
    assert hard_family.available(cache) == [1]
    assert hard_family.generate(1, cache) == h


def test_generate_without_cache(tmp_path):
    with pytest.raises(UnsupportedConstruction, match="H3"):
        hard_family.generate(3, tmp_path)
    with pytest.raises(InputError):
        hard_family.generate(0, tmp_path)


def test_start_bits_match_the_graph():
    assert len(h1_like_start()) == 37
    assert CutState.from_bits(h1_like_start().to_bits()) == h1_like_start()
