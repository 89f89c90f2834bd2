import csv
import json

import pytest

from conftest import h1_like, h1_like_start
from contralocal import hard_family
from contralocal.cut import CutState
from contralocal.experiment import (
    MAXCUT,
    ExperimentConfig,
    SummaryRow,
    final_objective,
    run_experiment,
    run_row,
    run_search,
)
from contralocal.reductions import CTR1D, TREE, canonical_configuration, reduce
from contralocal.utils import InputError, PivotRule


@pytest.fixture
def cache(tmp_path):
    directory = tmp_path / "cache"
    hard_family.cache_store(hard_family.HardInstance(1, h1_like(), h1_like_start()), directory)
    return directory


def config_for(tmp_path, **overrides):
    settings = dict(
        problems=(MAXCUT, CTR1D, TREE),
        csv=tmp_path / "out" / "summary.csv",
        figure_data=tmp_path / "out" / "iterations.dat",
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_empty_range_writes_headers(tmp_path):
    config = config_for(tmp_path, k_min=2, k_max=1)
    rows, errors = run_experiment(config)
    assert rows == [] and errors == []
    assert config.csv.read_text() == ",".join(SummaryRow.columns()) + "\n"
    assert config.figure_data.read_text() == "vertices iterations\n"
    assert config.errors_path.read_text() == ""


def test_row_from_cached_instance(tmp_path, cache):
    config = config_for(tmp_path, cache=cache, trace_dir=tmp_path / "traces")
    rows, errors = run_experiment(config)
    (row,) = rows
    assert (row.instance, row.maxcut_n, row.maxcut_m) == ("H1", 37, 45)
    assert (row.btw1d_n, row.btw1d_m, row.ctr1d_n, row.ctr1d_m, row.tree_n, row.tree_m) == (39, 119, 40, 121, 41, 204)
    # a stand-in graph of the right size only disagrees on the move count
    assert all(e["kind"] == "iteration-mismatch" for e in errors)
    assert (row.iterations == 63) == (errors == [])
    for e in errors:
        assert (e["expected"], e["found"]) == (63, row.iterations)

    with open(config.csv) as file:
        table = list(csv.DictReader(file))
    assert table[0]["instance"] == "H1" and int(table[0]["iterations"]) == row.iterations
    assert config.figure_data.read_text().splitlines()[1] == "37 {}".format(row.iterations)
    assert len(config.errors_path.read_text().splitlines()) == len(errors)

    traces = tmp_path / "traces"
    movers = (traces / "H1.maxcut.movers").read_text()
    assert len(movers.splitlines()) == row.iterations
    assert (traces / "H1.ctr1d.movers").read_text() == movers
    assert (traces / "H1.tree.movers").read_text() == movers
    steps = (traces / "H1.ctr1d.jsonl").read_text().splitlines()
    assert len(steps) == row.iterations
    assert json.loads(steps[0])["step"] == 1


def test_random_start_has_no_designated_count(tmp_path, cache):
    config = config_for(tmp_path, cache=cache, start="random", problems=(MAXCUT, CTR1D), seed=3)
    row, errors = run_row(1, config)
    assert row is not None
    assert errors == []


def test_missing_instance_is_an_error_row(tmp_path):
    config = config_for(tmp_path, k_min=2, k_max=2, cache=tmp_path / "empty")
    rows, errors = run_experiment(config)
    assert rows == []
    assert [e["kind"] for e in errors] == ["missing-instance"]


def test_config_checks():
    with pytest.raises(InputError, match="63"):
        ExperimentConfig(cap=10)
    with pytest.raises(InputError):
        ExperimentConfig(problems=("maxcut", "ctr3d"))
    with pytest.raises(InputError):
        ExperimentConfig(start="sideways")
    with pytest.raises(InputError):
        ExperimentConfig(workers=0)
    assert ExperimentConfig(cap=10, start="random").cap == 10


def test_config_from_ini(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(
        "[Experiment]\n"
        "problems = maxcut, tree\n"
        "k-min = 1\n"
        "k-max = 3\n"
        "pivot-rule = first\n"
        "csv = out/summary.csv\n"
        "cache-dir = cache\n"
        "workers = 2\n"
    )
    config = ExperimentConfig.load(ini)
    assert config.problems == ("maxcut", "tree")
    assert config.ks == [1, 2, 3]
    assert config.rule is PivotRule.FIRST
    assert config.csv == tmp_path.resolve() / "out" / "summary.csv"
    assert config.errors_path == tmp_path.resolve() / "out" / "summary.errors.jsonl"
    assert config.cache == tmp_path.resolve() / "cache"
    assert config.trace_dir is None
    assert config.workers == 2


def test_bad_ini(tmp_path):
    with pytest.raises(InputError):
        ExperimentConfig.load(tmp_path / "missing.ini")
    ini = tmp_path / "bad.ini"
    ini.write_text("[Experiment]\nk-max = three\n")
    with pytest.raises(InputError):
        ExperimentConfig.load(ini)
    ini.write_text("[Other]\nk-max = 1\n")
    with pytest.raises(InputError, match="Experiment"):
        ExperimentConfig.load(ini)


def test_run_search_dispatches(k3):
    start = h1_like_start()
    final, trace = run_search(h1_like(), start, PivotRule.BEST)
    assert trace.names[0] == "v0"
    assert final_objective(h1_like(), final) > final_objective(h1_like(), start)
    t = reduce(k3, TREE)
    tree_start = canonical_configuration(t, CutState.all_one_side(3))
    tree_final, tree_trace = run_search(t, tree_start, PivotRule.BEST)
    assert tree_trace.movers == [0]
    assert final_objective(t, tree_final) == final_objective(t, tree_start) + 1


def test_failing_row_is_recorded_and_the_run_continues(tmp_path, cache, monkeypatch):
    calls = []

    def reduce_once_broken(g, kind):
        calls.append(kind)
        if len(calls) == 1:
            raise ValueError("reducer blew up")
        return reduce(g, kind)

    monkeypatch.setattr("contralocal.experiment.reduce", reduce_once_broken)
    config = config_for(tmp_path, cache=cache, k_max=2, problems=(MAXCUT, CTR1D))
    rows, errors = run_experiment(config)
    assert rows == []
    # H2 is not cached, so the run went past the failed H1
    found = [e for e in errors if e["kind"] != "iteration-mismatch"]
    assert [(e["instance"], e["kind"]) for e in found] == [("H1", "row-failed"), ("H2", "missing-instance")]
    failed = found[0]
    assert "ValueError: reducer blew up" in failed["message"]
    assert config.csv.read_text() == ",".join(SummaryRow.columns()) + "\n"
    logged = [json.loads(line) for line in config.errors_path.read_text().splitlines()]
    assert failed in logged
