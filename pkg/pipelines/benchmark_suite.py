import argparse
import logging
from typing import Dict, List, Optional, Sequence

import mlflow
import pandas as pd

from gebo_package.bandit import exp3_probabilities
from gebo_package.config import load_settings
from gebo_package.engine import RunConfig, run, run_exhaustive
from gebo_package.utils import configure_logging

logger = logging.getLogger(__name__)

COMPARED_MODES = ("gebo", "random-search", "prior-graph")


def compare_modes(
    task: str,
    seeds: Sequence[int],
    budget: int = 100,
    modes: Sequence[str] = COMPARED_MODES,
    **overrides,
) -> pd.DataFrame:
    """
    Final incumbent of every (mode, seed) pair on one task.

    prior-graph mode runs with the complete graph as its fixed prior.
    """
    rows = []
    for mode in modes:
        for seed in seeds:
            cfg = RunConfig(task=task, mode=mode, budget=budget, seed=seed, **overrides)
            trace = run(cfg)
            rows.append({"task": task, "mode": mode, "seed": seed, "final_incumbent": trace.incumbent})
            logger.info("[%s] %s seed=%d incumbent=%.6g", task, mode, seed, trace.incumbent)
    return pd.DataFrame(rows)


def ablation(
    task: str,
    seeds: Sequence[int],
    budget: int = 100,
    centered_grid: Sequence[int] = (2, 3, 4),
    slots_grid: Sequence[int] = (3, 5, 7),
    **overrides,
) -> pd.DataFrame:
    """GEBO final incumbents over the c x K grid."""
    rows = []
    for c in centered_grid:
        for k in slots_grid:
            for seed in seeds:
                cfg = RunConfig(task=task, mode="gebo", budget=budget, seed=seed, n_centered=c, n_slots=k, **overrides)
                rows.append({"task": task, "n_centered": c, "n_slots": k, "seed": seed,
                             "final_incumbent": run(cfg).incumbent})
    return pd.DataFrame(rows)


def hub_mass(task: str, seeds: Sequence[int], budget: int = 100, **overrides) -> pd.DataFrame:
    """
    Terminal node-agent probability mass on the planted hub variables, one row per seed.
    """
    rows = []
    for seed in seeds:
        cfg = RunConfig(task=task, mode="gebo", budget=budget, seed=seed, **overrides)
        hubs = cfg.make_task().metadata["hubs"]
        trace = run(cfg)
        probs = exp3_probabilities(trace.bandit.node_agent)
        mass = float(probs[hubs].sum())
        rows.append({
            "task": task,
            "seed": seed,
            "hub_mass": mass,
            "uniform_mass": len(hubs) / len(probs),
            "recovered": mass > 1.5 * len(hubs) / len(probs),
        })
    return pd.DataFrame(rows)


def exhaustive_study(
    task: str = "planted_hub4", repeats: int = 10, budget: int = 30, n_initial: int = 10, **overrides
) -> pd.DataFrame:
    """
    Per-node PageRank/performance correlations over every connected graph,
    from a 10-point initial design unless overridden.
    """
    cfg = RunConfig(task=task, mode="exhaustive", budget=budget, repeats=repeats, n_initial=n_initial, **overrides)
    return run_exhaustive(cfg).correlations


def run_suite(
    tasks: Sequence[str] = ("func2c", "ackley20c"),
    n_seeds: int = 10,
    budget: int = 100,
    output_path: str = "./data/benchmark_suite.csv",
    experiment_name: Optional[str] = None,
    with_exhaustive: bool = False,
) -> pd.DataFrame:
    """
    Runs the mode comparison on every task, the c/K ablation on the first one and the
    planted-hub recovery study, logging medians to mlflow and writing all rows to CSV.
    `with_exhaustive` adds the planted_hub4 exhaustive correlations.
    """
    settings = load_settings()
    if settings.mlflow_tracking_uri:
        mlflow.set_tracking_uri(settings.mlflow_tracking_uri)
    mlflow.set_experiment(experiment_name or f"{settings.experiment_name}_benchmark_suite")

    seeds = list(range(n_seeds))
    frames: List[pd.DataFrame] = []

    with mlflow.start_run():
        mlflow.log_param("tasks", ",".join(tasks))
        mlflow.log_param("n_seeds", n_seeds)
        mlflow.log_param("budget", budget)

        for task in tasks:
            comparison = compare_modes(task, seeds, budget)
            medians: Dict[str, float] = comparison.groupby("mode")["final_incumbent"].median().to_dict()
            for mode, median in medians.items():
                mlflow.log_metric(f"{task}_{mode.replace('-', '_')}_median", median)
            frames.append(comparison.assign(study="comparison"))

        grid = ablation(tasks[0], seeds, budget)
        cell_medians = grid.groupby(["n_centered", "n_slots"])["final_incumbent"].median()
        spread = float((cell_medians.max() - cell_medians.min()) / max(abs(cell_medians.max()), 1e-12))
        mlflow.log_metric("ablation_relative_spread", spread)
        frames.append(grid.assign(study="ablation"))

        hubs = hub_mass("planted_hub", list(range(2 * n_seeds)), budget)
        mlflow.log_metric("hub_recovery_rate", float(hubs["recovered"].mean()))
        mlflow.log_metric("hub_mass_mean", float(hubs["hub_mass"].mean()))
        frames.append(hubs.assign(study="hub_recovery"))

        if with_exhaustive:
            correlations = exhaustive_study()
            for row in correlations.itertuples():
                mlflow.log_metric(f"exhaustive_pearson_{row.variable}", row.pearson)
            frames.append(correlations.assign(study="exhaustive", task="planted_hub4"))

    df = pd.concat(frames, ignore_index=True)
    df.to_csv(output_path, index=False)
    logger.info("Benchmark suite written to %s (%d rows)", output_path, len(df))
    for task in tasks:
        logger.info("%s medians: %s", task, df[(df["study"] == "comparison") & (df["task"] == task)]
                    .groupby("mode")["final_incumbent"].median().round(4).to_dict())
    return df


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Relative-performance, ablation and hub-recovery studies")
    parser.add_argument("--tasks", nargs="+", default=["func2c", "ackley20c"])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--budget", type=int, default=100)
    parser.add_argument("--out", default="./data/benchmark_suite.csv")
    parser.add_argument("--exhaustive", action="store_true", help="also run the planted_hub4 exhaustive study")
    args = parser.parse_args()

    configure_logging(load_settings().log_level)
    run_suite(args.tasks, args.seeds, args.budget, args.out, with_exhaustive=args.exhaustive)
