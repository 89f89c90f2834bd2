import pytest

from conftest import h1_like, h1_like_start
from contralocal import hard_family, suites
from contralocal.cut import random_cut_instance
from contralocal.reductions import CTR1D, TREE, reduce


@pytest.mark.parametrize("name,sizes,trials", [
    ("reductions", [3, 5], None),
    ("dynamics", [3, 5], 3),
    ("decoding", [4, 6], 5),
    ("trees", [3, 6], None),
    ("gradients", [2, 3], None),
    ("encoder", [1, 3, 4], None),
])
def test_suite_passes(name, sizes, trials):
    report = suites.run_suite(name, 11, sizes, trials)
    assert report["suite"] == name and report["seed"] == 11
    assert report["checks"] > 0
    assert report["failures"] == []
    assert report["passed"]


def test_reduction_shape_matches_compiled_counts():
    g = random_cut_instance(6, 2)
    for kind in suites.REDUCTION_SHAPE:
        t = reduce(g, kind)
        assert suites._counts(kind, g) == (t.point_count, len(t.triplets))


def test_hard_family_suite_on_a_stand_in(tmp_path):
    hard_family.cache_store(hard_family.HardInstance(1, h1_like(), h1_like_start()), tmp_path)
    report = suites.hard_family_suite(directory=tmp_path, problems=(CTR1D, TREE))
    assert report["checks"] == 3
    # only the tabulated move count can disagree on a stand-in graph
    assert {f["property"] for f in report["failures"]} <= {"H1 iterations"}


def test_hard_family_suite_with_empty_cache(tmp_path):
    report = suites.hard_family_suite(directory=tmp_path)
    assert report["checks"] == 0 and report["passed"]


def test_random_qp_is_symmetric():
    qp = suites.random_qp(4, 9)
    assert (qp.Q == qp.Q.T).all()


def test_every_suite_has_defaults():
    assert set(suites.SUITES) == set(suites.DEFAULT_SIZES) == set(suites.DEFAULT_TRIALS)
    assert len(suites.DEFAULT_SIZES["dynamics"]) * suites.DEFAULT_TRIALS["dynamics"] == 50
    assert max(suites.DEFAULT_SIZES["dynamics"]) == 25
    assert len(suites.DEFAULT_SIZES["decoding"]) * suites.DEFAULT_TRIALS["decoding"] == 200
    assert max(suites.DEFAULT_SIZES["decoding"]) == 20


@pytest.mark.slow
@pytest.mark.parametrize("name", ["dynamics", "decoding"])
def test_suite_passes_at_full_scale(name):
    report = suites.run_suite(name, 1)
    assert report["failures"] == []
