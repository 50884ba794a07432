import json
import math
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from gebo_package.bench import Task
from gebo_package import engine
from gebo_package.engine import (
    ExhaustiveResult,
    RunConfig,
    Trace,
    run,
    run_exhaustive,
    run_gebo,
    run_prior_graph,
    run_random_search,
)
from gebo_package.errors import NotConnected, TooLarge
from gebo_package.graphmold import MoldedGraph, pagerank
from gebo_package.space import Configuration, MixedSpace, check_configuration, continuous, discrete

FAST = dict(
    n_initial=5,
    budget=3,
    n_slots=2,
    n_centered=1,
    warmup_epochs=1,
    retrain_epochs=1,
    gp_restarts=1,
    acq_starts=2,
)


def bowl(cfg: Configuration) -> float:
    level, x, y = cfg.values
    return -((level - 1) ** 2 + x ** 2 + (y - 0.5) ** 2)


@pytest.fixture
def task():
    space = MixedSpace((discrete("level", 3), continuous("x", -1, 1), continuous("y", -1, 1)))
    return Task(name="bowl", space=space, objective=bowl, known_optimum=0.0)


def wide_task(n):
    space = MixedSpace(tuple(continuous(f"x{i}", -1, 1) for i in range(n)))
    return Task(name=f"wide{n}", space=space, objective=lambda cfg: -sum(v * v for v in cfg.values))


def fast_config(**overrides):
    return RunConfig(task="bowl", **{**FAST, **overrides})


def test_run_gebo_records(task):
    cfg = fast_config(mode="gebo")
    trace = run_gebo(cfg, task)

    assert isinstance(trace, Trace)
    assert trace.n_evaluations == cfg.n_initial + cfg.budget
    init = [r for r in trace.records if r.phase == "init"]
    search = [r for r in trace.records if r.phase == "search"]
    assert [r.t for r in init] == [-5, -4, -3, -2, -1]
    assert [r.t for r in search] == [1, 2, 3]

    for r in trace.records:
        check_configuration(Configuration(tuple(r.values)), task.space)
        assert r.value == task(Configuration(tuple(r.values)))

    for r in search:
        assert 0 <= r.slot < cfg.n_slots
        assert 0.0 <= r.reward <= 1.0
        assert len(r.latent) == cfg.latent_dim
        assert set(r.theta) == {"signal_variance", "lengthscale", "noise_variance"}
        assert {"encode", "fit", "acquire", "decode", "train", "total"} <= set(r.timings)
        assert len(r.bandit["slots"]) == cfg.n_slots
        assert all(math.isfinite(w) for w in r.bandit["graph_log_weights"])
        assert r.centered == sorted(r.centered)

    assert trace.bandit is not None and trace.model is not None


def test_incumbent_is_running_max(task):
    trace = run_gebo(fast_config(), task)
    best = -np.inf
    for r in trace.records:
        best = max(best, r.value)
        assert r.incumbent == best
    assert trace.incumbent == best
    assert task(Configuration(tuple(trace.best_values))) == best


def test_run_gebo_is_reproducible(task):
    first = run_gebo(fast_config(seed=7), task).fingerprint()
    second = run_gebo(fast_config(seed=7), task).fingerprint()
    assert first == second
    assert run_gebo(fast_config(seed=8), task).fingerprint() != first


def test_failing_slots_are_replaced(task):
    trace = run_gebo(fast_config(failure_threshold=1, budget=4), task)
    previous = None
    for r in trace.records:
        if r.phase == "search":
            if r.value > previous:
                assert r.replaced == []
            else:
                assert r.replaced == [r.slot]
                assert r.bandit["slots"][r.slot]["fail_count"] == 0
                assert sum(math.exp(w) for w in r.bandit["graph_log_weights"]) == pytest.approx(2.0)
        previous = r.incumbent


def test_same_seed_shares_the_initial_design(task):
    gebo = run_gebo(fast_config(), task)
    baseline = run_random_search(fast_config(mode="random-search"), task)
    assert [r.values for r in gebo.records[:5]] == [r.values for r in baseline.records[:5]]


def test_random_search_counts(task):
    trace = run_random_search(fast_config(mode="random-search", budget=10), task)
    assert trace.n_evaluations == 15
    assert all(r.slot is None and r.reward is None for r in trace.records)


def test_prior_graph_with_zero_budget(task):
    cfg = fast_config(mode="prior-graph", budget=0)
    trace = run_prior_graph(cfg, MoldedGraph.complete(3), task)
    assert trace.n_evaluations == cfg.n_initial
    assert trace.incumbent == max(r.value for r in trace.records)


def test_prior_graph_search(task):
    graph = MoldedGraph(n=3, edges=frozenset({(0, 1), (1, 2)}))
    trace = run_prior_graph(fast_config(mode="prior-graph"), graph, task)
    assert [r.slot for r in trace.records if r.phase == "search"] == [0, 0, 0]
    assert trace.bandit is None


def test_prior_graph_rejects_bad_graphs(task):
    with pytest.raises(NotConnected):
        run_prior_graph(fast_config(mode="prior-graph"), MoldedGraph(n=3, edges=frozenset({(0, 1)})), task)
    with pytest.raises(ValueError):
        run_prior_graph(fast_config(mode="prior-graph"), MoldedGraph.complete(4), task)


def test_time_budget_stops_the_search(task):
    trace = run_gebo(fast_config(time_budget=0.0, budget=50), task)
    assert trace.n_evaluations == 5


def test_trace_serialization(task, tmp_path):
    trace = run_gebo(fast_config(), task)
    path = tmp_path / "trace.jsonl"
    trace.write_jsonl(str(path))

    lines = path.read_text().splitlines()
    assert len(lines) == trace.n_evaluations
    assert json.loads(lines[-1])["incumbent"] == trace.incumbent
    assert "timings" not in trace.fingerprint()

    frame = trace.to_frame()
    assert isinstance(frame, pd.DataFrame)
    assert "bandit" not in frame.columns
    assert "time_total" in frame.columns
    assert len(frame) == trace.n_evaluations


def test_run_exhaustive_three_variables(task):
    result = run_exhaustive(fast_config(mode="exhaustive", budget=1, repeats=1), task)

    assert isinstance(result, ExhaustiveResult)
    assert len(result.table) == 4
    assert list(result.table["graph_id"]) == [0, 1, 2, 3]
    assert sorted(result.table["n_edges"]) == [2, 2, 2, 3]
    pr = result.table[["pr_0", "pr_1", "pr_2"]].to_numpy()
    assert np.allclose(pr.sum(axis=1), 1.0)
    assert list(result.correlations["variable"]) == ["level", "x", "y"]
    assert result.correlations["pearson"].dropna().between(-1, 1).all()


def test_exhaustive_without_search_has_undefined_correlations(task):
    # with no search iterations every graph sees the same initial design
    result = run_exhaustive(fast_config(mode="exhaustive", budget=0, repeats=2), task)
    assert result.table["mean"].nunique() == 1
    assert result.correlations["pearson"].isna().all()


def test_exhaustive_limit():
    with pytest.raises(TooLarge):
        run_exhaustive(fast_config(mode="exhaustive"), wide_task(6))


def test_run_dispatch(task):
    assert isinstance(run(fast_config(mode="random-search"), task=task), Trace)
    assert run(fast_config(mode="prior-graph", budget=0), task=task).n_evaluations == 5


@pytest.mark.parametrize("overrides", [
    {"mode": "annealing"},
    {"budget": -1},
    {"n_initial": 1},
    {"n_slots": 0},
    {"gamma_graph": 0.0},
    {"gamma_node": 1.5},
    {"batch_size": 0},
])
def test_run_config_validation(overrides):
    with pytest.raises(ValueError):
        RunConfig(**overrides).validate()


def test_run_config_from_dict():
    cfg = RunConfig.from_dict({"task": "planted_hub", "budget": 12, "kappa": 1.0})
    assert cfg.budget == 12 and cfg.kappa == 1.0 and cfg.mode == "gebo"
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_dict({"budjet": 12})



def test_single_slot_gebo_reduces_to_prior_graph(task):
    # one slot centered on every variable and no replacement: selection is forced
    common = dict(n_slots=1, n_centered=task.space.dim, failure_threshold=10 ** 6, budget=4, seed=3)
    gebo = run_gebo(fast_config(mode="gebo", **common), task)
    graph = gebo.bandit.slots[0].graph
    assert all(r.replaced == [] for r in gebo.records)

    prior = run_prior_graph(fast_config(mode="prior-graph", **common), graph, task)

    assert [r.values for r in gebo.records] == [r.values for r in prior.records]
    assert [r.value for r in gebo.records] == [r.value for r in prior.records]
    assert [r.latent for r in gebo.records] == [r.latent for r in prior.records]


def _labeled_task(names):
    space = MixedSpace(tuple(continuous(name, -1, 1) for name in names))
    return Task(name="labeled", space=space, objective=lambda cfg: 0.0)


def _hub_pagerank_run(run_cfg, graph, task):
    # final incumbent equals the PageRank of the variable named "hub"
    names = [v.name for v in task.space.variables]
    return SimpleNamespace(incumbent=float(pagerank(graph).scores[names.index("hub")]))


def test_exhaustive_pairs_pagerank_with_graph_performance(monkeypatch):
    monkeypatch.setattr(engine, "run_prior_graph", _hub_pagerank_run)

    result = run_exhaustive(fast_config(mode="exhaustive", repeats=1), _labeled_task(["a", "hub", "b", "c"]))

    by_name = result.correlations.set_index("variable")["pearson"]
    assert len(result.table) == 38
    assert by_name["hub"] == pytest.approx(1.0)
    assert (by_name.drop("hub") < 1.0).all()


def test_exhaustive_is_invariant_under_variable_permutation(monkeypatch):
    monkeypatch.setattr(engine, "run_prior_graph", _hub_pagerank_run)
    cfg = fast_config(mode="exhaustive", repeats=1)

    original = run_exhaustive(cfg, _labeled_task(["hub", "a", "b", "c"]))
    permuted = run_exhaustive(cfg, _labeled_task(["b", "c", "hub", "a"]))

    left = original.correlations.set_index("variable")["pearson"].sort_index()
    right = permuted.correlations.set_index("variable")["pearson"].sort_index()
    pd.testing.assert_series_equal(left, right, check_exact=False, atol=1e-12)
    assert sorted(original.table["mean"]) == pytest.approx(sorted(permuted.table["mean"]))


@pytest.mark.slow
def test_prior_graph_reaches_the_corner_of_a_concave_toy():
    # linear in both variables, so the optimum 6 sits at level 4, x = 1
    space = MixedSpace((discrete("level", 5), continuous("x", 0, 1)))
    toy = Task(name="corner", space=space, objective=lambda cfg: float(cfg.values[0] + 2.0 * cfg.values[1]),
               known_optimum=6.0)
    finals = []
    for seed in range(10):
        cfg = RunConfig(task="corner", mode="prior-graph", budget=30, seed=seed)
        finals.append(run_prior_graph(cfg, MoldedGraph.complete(2), toy).incumbent)
    assert np.median(finals) >= 0.95 * toy.known_optimum


@pytest.mark.slow
def test_gebo_beats_the_initial_design_on_func2c():
    cfg = RunConfig(task="func2c", budget=30, n_initial=10, seed=0)
    trace = run(cfg)
    initial_best = max(r.value for r in trace.records if r.phase == "init")
    assert trace.incumbent >= initial_best
    assert trace.n_evaluations == 40
