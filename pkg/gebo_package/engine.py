import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import torch

from gebo_package import gpbo, neural
from gebo_package.bandit import (
    NestedBanditState,
    RewardRecord,
    default_gamma,
    initialize_state,
    maybe_replace,
    normalize_reward,
    sample_centered_nodes,
    select_graph,
    update_rewards,
)
from gebo_package.bench import Task, get_task
from gebo_package.errors import DegenerateInput, NotConnected, TooLarge
from gebo_package.graphmold import (
    MoldedGraph,
    attach_global_node,
    ba_biased,
    enumerate_connected_graphs,
    is_connected,
    pagerank,
    pearson,
)
from gebo_package.space import Configuration, sample_uniform

logger = logging.getLogger(__name__)

MODES = ("gebo", "prior-graph", "exhaustive", "random-search")
TIMING_KEYS = ("encode", "fit", "acquire", "decode", "train")
MAX_EXHAUSTIVE_DIM = 5


@dataclass
class RunConfig:
    task: str = "func2c"
    mode: str = "gebo"
    budget: int = 100
    seed: int = 0
    n_slots: int = 5
    n_centered: int = 3
    n_initial: int = 40
    latent_dim: int = neural.DEFAULT_LATENT_DIM
    feature_dim: int = neural.DEFAULT_FEATURE_DIM
    hidden_dim: int = neural.DEFAULT_HIDDEN_DIM
    kappa: float = gpbo.DEFAULT_KAPPA
    gamma_graph: Optional[float] = None
    gamma_node: Optional[float] = None
    failure_threshold: int = 5
    ba_threshold: int = 2
    warmup_epochs: int = 5
    retrain_epochs: int = 1
    learning_rate: float = neural.DEFAULT_LEARNING_RATE
    batch_size: int = neural.DEFAULT_BATCH_SIZE
    alpha: float = neural.DEFAULT_ALPHA
    beta: float = neural.DEFAULT_BETA
    rank_k: float = neural.DEFAULT_RANK_K
    gp_restarts: int = gpbo.DEFAULT_RESTARTS
    acq_starts: int = gpbo.DEFAULT_ACQ_STARTS
    time_budget: Optional[float] = None
    repeats: int = 10
    space_path: Optional[str] = None
    minimize: bool = False
    external_timeout: float = 600.0

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.n_slots < 1 or self.n_centered < 1:
            raise ValueError("n_slots and n_centered must be >= 1")
        if self.n_initial < 2:
            raise ValueError("at least two initial points are needed to fit the surrogate")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for name in ("gamma_graph", "gamma_node"):
            gamma = getattr(self, name)
            if gamma is not None and not 0 < gamma <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {gamma}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown run options: {sorted(unknown)}")
        return cls(**payload).validate()

    def make_task(self) -> Task:
        return get_task(self.task, space_path=self.space_path, minimize=self.minimize, timeout=self.external_timeout)


@dataclass
class IterationRecord:
    t: int
    phase: str
    values: List[Any]
    value: float
    incumbent: float
    slot: Optional[int] = None
    centered: Optional[List[int]] = None
    latent: Optional[List[float]] = None
    reward: Optional[float] = None
    replaced: List[int] = field(default_factory=list)
    theta: Optional[Dict[str, float]] = None
    bandit: Optional[Dict[str, Any]] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> Dict[str, Any]:
        payload = asdict(self)
        if not include_timings:
            payload.pop("timings")
        return payload


@dataclass
class Trace:
    run_config: Dict[str, Any]
    task: str
    records: List[IterationRecord] = field(default_factory=list)
    bandit: Optional[NestedBanditState] = field(default=None, repr=False, compare=False)
    model: Optional[neural.VgaeModel] = field(default=None, repr=False, compare=False)

    @property
    def incumbent(self) -> float:
        return self.records[-1].incumbent if self.records else -np.inf

    @property
    def best_values(self) -> Optional[List[Any]]:
        if not self.records:
            return None
        return max(self.records, key=lambda r: r.value).values

    @property
    def n_evaluations(self) -> int:
        return len(self.records)

    def to_lines(self, include_timings: bool = True) -> List[str]:
        return [json.dumps(r.to_dict(include_timings), sort_keys=True) for r in self.records]

    def fingerprint(self) -> str:
        """Serialized trace without wall-clock fields; equal for equal (seed, config)."""
        return "\n".join(self.to_lines(include_timings=False))

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for line in self.to_lines():
                f.write(line + "\n")

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.records:
            row = r.to_dict(include_timings=False)
            row.pop("bandit")
            for key, value in r.timings.items():
                row[f"time_{key}"] = value
            rows.append(row)
        return pd.DataFrame(rows)


class _Recorder:
    """Keeps the evaluation history and the incumbent of a run."""

    def __init__(self, task: Task, run_config: "RunConfig"):
        self.task = task
        self.configs: List[Configuration] = []
        self.values: List[float] = []
        self.trace = Trace(run_config=run_config.to_dict(), task=task.name)

    @property
    def incumbent(self) -> float:
        return max(self.values) if self.values else -np.inf

    def evaluate(self, cfg: Configuration, phase: str, t: int, **extra) -> IterationRecord:
        value = self.task(cfg)
        self.configs.append(cfg)
        self.values.append(value)
        record = IterationRecord(t=t, phase=phase, values=list(cfg.values), value=value,
                                 incumbent=self.incumbent, **extra)
        self.trace.records.append(record)
        return record


def _initial_design(recorder: _Recorder, cfg: RunConfig, rng: np.random.Generator) -> None:
    for i in range(cfg.n_initial):
        recorder.evaluate(sample_uniform(recorder.task.space, rng), phase="init", t=-(cfg.n_initial - i))


def _suggest(
    model: neural.VgaeModel,
    slot: int,
    adjacency: np.ndarray,
    recorder: _Recorder,
    cfg: RunConfig,
    rng: np.random.Generator,
    previous_theta: Optional[Dict[str, float]],
) -> Tuple[Configuration, np.ndarray, Dict[str, float], Dict[str, float]]:
    """One latent-space BO proposal through a slot encoder."""
    timings = {}

    start = time.perf_counter()
    Z = neural.encode_configurations(model, recorder.configs, adjacency, slot)
    timings["encode"] = time.perf_counter() - start

    start = time.perf_counter()
    state = gpbo.fit(Z, np.asarray(recorder.values), restarts=cfg.gp_restarts, rng=rng,
                     previous_theta=previous_theta)
    timings["fit"] = time.perf_counter() - start

    start = time.perf_counter()
    box = gpbo.latent_box(Z)
    z = gpbo.optimize_acquisition(state, box, cfg.kappa, rng, n_starts=cfg.acq_starts)
    timings["acquire"] = time.perf_counter() - start

    start = time.perf_counter()
    x, _ = neural.decode(z, model)
    timings["decode"] = time.perf_counter() - start

    return x, z, state.theta, timings


def _out_of_time(cfg: RunConfig, started: float) -> bool:
    return cfg.time_budget is not None and time.perf_counter() - started > cfg.time_budget


def _setup(cfg: RunConfig, task: Optional[Task]) -> Tuple[Task, np.random.Generator, torch.Generator, int]:
    cfg.validate()
    task = task or cfg.make_task()
    rng = np.random.default_rng(cfg.seed)
    torch_seed = int(rng.integers(2 ** 31))
    return task, rng, torch.Generator().manual_seed(torch_seed), torch_seed


def _train_kwargs(cfg: RunConfig) -> Dict[str, float]:
    return {"learning_rate": cfg.learning_rate, "alpha": cfg.alpha, "beta": cfg.beta, "batch_size": cfg.batch_size}


def run_prior_graph(cfg: RunConfig, graph: MoldedGraph, task: Optional[Task] = None) -> Trace:
    """
    Latent space optimization with a single fixed graph.

    Warm-up trains the encoder, then every iteration embeds all observations,
    fits the GP, maximizes UCB in the latent box, decodes, evaluates and retrains.

    Args:
        cfg (RunConfig): Run settings.
        graph (MoldedGraph): Connected graph with one node per variable.
        task (Task, optional): Pre-built task; built from cfg.task otherwise.

    Returns:
        Trace: One record per evaluation.
    """
    task, rng, generator, torch_seed = _setup(cfg, task)
    if graph.n != task.space.dim:
        raise ValueError(f"graph has {graph.n} nodes, the space has {task.space.dim} variables")
    if not is_connected(graph):
        raise NotConnected("the prior graph must be connected")

    recorder = _Recorder(task, cfg)
    _initial_design(recorder, cfg, rng)

    adjacency = attach_global_node(graph)
    model = neural.VgaeModel(task.space, 1, cfg.feature_dim, cfg.hidden_dim, cfg.latent_dim, seed=torch_seed)
    batch = neural.make_batch(recorder.configs, recorder.values, task.space, [adjacency], cfg.rank_k)
    neural.warm_up(model, batch, cfg.warmup_epochs, generator, **_train_kwargs(cfg))

    started = time.perf_counter()
    theta = None
    for t in range(1, cfg.budget + 1):
        if _out_of_time(cfg, started):
            logger.info("Time budget reached after %d iterations", t - 1)
            break

        x, z, theta, timings = _suggest(model, 0, adjacency, recorder, cfg, rng, theta)
        record = recorder.evaluate(x, phase="search", t=t, slot=0, latent=z.tolist(), theta=theta)

        start = time.perf_counter()
        batch = neural.make_batch(recorder.configs, recorder.values, task.space, [adjacency], cfg.rank_k)
        neural.train(model, 0, batch, cfg.retrain_epochs, generator, **_train_kwargs(cfg))
        timings["train"] = time.perf_counter() - start
        timings["total"] = sum(timings[k] for k in TIMING_KEYS)
        record.timings = timings

        logger.info("[prior-graph] t=%d f=%.6g incumbent=%.6g (%.3fs)", t, record.value, record.incumbent, timings["total"])

    recorder.trace.model = model
    return recorder.trace


def run_gebo(cfg: RunConfig, task: Optional[Task] = None) -> Trace:
    """
    Latent space optimization over K candidate graphs chosen by the nested bandit.

    Each iteration selects a slot, proposes through that slot's encoder, rewards
    both agents with the normalized objective value, retrains the selected encoder
    and replaces slots that keep failing to improve the incumbent.

    Args:
        cfg (RunConfig): Run settings.
        task (Task, optional): Pre-built task; built from cfg.task otherwise.

    Returns:
        Trace: One record per evaluation, search records carry the bandit snapshot.
    """
    task, rng, generator, torch_seed = _setup(cfg, task)
    space = task.space
    # graph selection and generation draw from their own stream, so the BO stream
    # matches a single-graph run with the same seed
    bandit_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])

    recorder = _Recorder(task, cfg)
    _initial_design(recorder, cfg, rng)

    state = initialize_state(
        dim=space.dim,
        n_slots=cfg.n_slots,
        n_centered=cfg.n_centered,
        ba_threshold=cfg.ba_threshold,
        failure_threshold=cfg.failure_threshold,
        gamma_node=cfg.gamma_node or default_gamma(space.dim, cfg.budget),
        gamma_graph=cfg.gamma_graph or default_gamma(cfg.n_slots, cfg.budget),
        rng=bandit_rng,
    )
    adjacency = [attach_global_node(slot.graph) for slot in state.slots]

    model = neural.VgaeModel(space, cfg.n_slots, cfg.feature_dim, cfg.hidden_dim, cfg.latent_dim, seed=torch_seed)
    batch = neural.make_batch(recorder.configs, recorder.values, space, adjacency, cfg.rank_k)
    neural.warm_up(model, batch, cfg.warmup_epochs, generator, **_train_kwargs(cfg))

    def regenerate() -> MoldedGraph:
        centered = sample_centered_nodes(state, cfg.n_centered, bandit_rng)
        return ba_biased(space.dim, centered, cfg.ba_threshold, bandit_rng)

    previous_theta: List[Optional[Dict[str, float]]] = [None] * cfg.n_slots
    started = time.perf_counter()
    for t in range(1, cfg.budget + 1):
        if _out_of_time(cfg, started):
            logger.info("Time budget reached after %d iterations", t - 1)
            break

        slot, _ = select_graph(state, bandit_rng)
        centered = state.slots[slot].centered
        x, z, theta, timings = _suggest(model, slot, adjacency[slot], recorder, cfg, rng, previous_theta[slot])
        previous_theta[slot] = theta

        history = list(recorder.values)
        incumbent = recorder.incumbent
        record = recorder.evaluate(x, phase="search", t=t, slot=slot, centered=sorted(centered),
                                   latent=z.tolist(), theta=theta)
        record.reward = normalize_reward(history, record.value)
        improved = record.value > incumbent
        update_rewards(state, RewardRecord(record.value, record.reward, slot, centered))

        start = time.perf_counter()
        batch = neural.make_batch(recorder.configs, recorder.values, space, adjacency, cfg.rank_k)
        neural.train(model, slot, batch, cfg.retrain_epochs, generator, **_train_kwargs(cfg))
        timings["train"] = time.perf_counter() - start
        timings["total"] = sum(timings[k] for k in TIMING_KEYS)
        record.timings = timings

        state, replaced = maybe_replace(state, improved, regenerate)
        for j in replaced:
            model.reset_slot(j, seed=int(bandit_rng.integers(2 ** 31)))
            adjacency[j] = attach_global_node(state.slots[j].graph)
            previous_theta[j] = None
        if replaced:
            # a fresh encoder competes only after the same warm-up the initial slots had
            batch = neural.make_batch(recorder.configs, recorder.values, space, adjacency, cfg.rank_k)
            for j in replaced:
                neural.train(model, j, batch, cfg.warmup_epochs, generator, **_train_kwargs(cfg))
        record.replaced = replaced
        record.bandit = state.to_dict()

        logger.info("[gebo] t=%d slot=%d f=%.6g incumbent=%.6g (%.3fs)", t, slot, record.value, record.incumbent, timings["total"])

    recorder.trace.bandit = state
    recorder.trace.model = model
    return recorder.trace


def run_random_search(cfg: RunConfig, task: Optional[Task] = None) -> Trace:
    """Uniform sampling baseline: initial design plus `budget` further uniform draws."""
    task, rng, _, _ = _setup(cfg, task)
    recorder = _Recorder(task, cfg)
    _initial_design(recorder, cfg, rng)

    started = time.perf_counter()
    for t in range(1, cfg.budget + 1):
        if _out_of_time(cfg, started):
            break
        recorder.evaluate(sample_uniform(task.space, rng), phase="search", t=t)
    return recorder.trace


@dataclass
class ExhaustiveResult:
    table: pd.DataFrame
    correlations: pd.DataFrame


def run_exhaustive(cfg: RunConfig, task: Optional[Task] = None) -> ExhaustiveResult:
    """
    Runs the fixed-graph optimizer on every connected graph over the variables.

    Each graph gets `cfg.repeats` runs with seeds cfg.seed, cfg.seed + 1, ...; the
    table holds the mean/std final incumbent and per-node PageRank of every graph,
    and the correlations frame the per-node Pearson r between PageRank and mean
    performance across graphs (NaN when undefined).
    """
    cfg.validate()
    task = task or cfg.make_task()
    dim = task.space.dim
    if dim > MAX_EXHAUSTIVE_DIM:
        raise TooLarge(f"exhaustive search is limited to {MAX_EXHAUSTIVE_DIM} variables, got {dim}")

    rows = []
    for graph_id, graph in enumerate(enumerate_connected_graphs(dim)):
        finals = []
        for r in range(cfg.repeats):
            run_cfg = RunConfig(**{**cfg.to_dict(), "seed": cfg.seed + r, "mode": "prior-graph"})
            finals.append(run_prior_graph(run_cfg, graph, task).incumbent)
        scores = pagerank(graph).scores

        row = {
            "graph_id": graph_id,
            "edges": json.dumps(graph.sorted_edges()),
            "n_edges": len(graph.edges),
            "mean": float(np.mean(finals)),
            "std": float(np.std(finals)),
        }
        row.update({f"pr_{i}": float(s) for i, s in enumerate(scores)})
        rows.append(row)
        logger.info("[exhaustive] graph %d edges=%s mean=%.6g", graph_id, row["edges"], row["mean"])

    table = pd.DataFrame(rows)
    correlations = []
    for i in range(dim):
        try:
            r = pearson(table[f"pr_{i}"], table["mean"])
        except DegenerateInput:
            r = float("nan")
        correlations.append({"node": i, "variable": task.space.variables[i].name, "pearson": r})
    return ExhaustiveResult(table=table, correlations=pd.DataFrame(correlations))


def run(cfg: RunConfig, graph: Optional[MoldedGraph] = None, task: Optional[Task] = None):
    """
    Dispatches on cfg.mode; prior-graph mode defaults to the complete graph.
    """
    cfg.validate()
    task = task or cfg.make_task()
    if cfg.mode == "gebo":
        return run_gebo(cfg, task)
    if cfg.mode == "prior-graph":
        return run_prior_graph(cfg, graph or MoldedGraph.complete(task.space.dim), task)
    if cfg.mode == "random-search":
        return run_random_search(cfg, task)
    return run_exhaustive(cfg, task)
