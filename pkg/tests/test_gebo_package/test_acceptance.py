import pytest

from gebo_package.bench import get_task
from pipelines.benchmark_suite import ablation, compare_modes, exhaustive_study, hub_mass

# Estudos completos: budgets e sementes das verificações de desempenho relativo
pytestmark = pytest.mark.slow

SEEDS = list(range(10))


@pytest.mark.parametrize("task", ["func2c", "ackley20c"])
def test_gebo_median_matches_random_search(task):
    frame = compare_modes(task, SEEDS, budget=100, modes=("gebo", "random-search"))
    medians = frame.groupby("mode")["final_incumbent"].median()
    assert medians["gebo"] >= medians["random-search"]


def test_gebo_median_matches_complete_graph_on_ackley20c():
    frame = compare_modes("ackley20c", SEEDS, budget=100, modes=("gebo", "prior-graph"))
    medians = frame.groupby("mode")["final_incumbent"].median()
    assert medians["gebo"] >= medians["prior-graph"]


def test_hub_variables_gain_node_agent_mass():
    frame = hub_mass("planted_hub", list(range(20)), budget=100)

    # uniform mass on 2 of 10 nodes is 0.2
    assert (frame["uniform_mass"] == pytest.approx(0.2)).all()
    assert int((frame["hub_mass"] > 0.3).sum()) >= 14
    assert frame["recovered"].sum() == (frame["hub_mass"] > 0.3).sum()


def test_exhaustive_study_singles_out_the_hub():
    hubs = get_task("planted_hub4").metadata["hubs"]
    correlations = exhaustive_study("planted_hub4")

    by_node = correlations.set_index("node")["pearson"]
    assert all(by_node[h] > 0.4 for h in hubs)
    assert (by_node.drop(hubs) < 0).any()


def test_ablation_medians_stay_close():
    grid = ablation("func2c", SEEDS, budget=100)

    assert len(grid) == 9 * len(SEEDS)
    medians = grid.groupby(["n_centered", "n_slots"])["final_incumbent"].median()
    assert len(medians) == 9
    spread = (medians.max() - medians.min()) / abs(medians.max())
    assert spread < 0.2
