import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from gebo_package.errors import MissingSnapshot, NonFiniteWeight, RewardOutOfRange, StaleSnapshot
from gebo_package.graphmold import MoldedGraph, ba_biased

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.1
DEFAULT_FAILURE_THRESHOLD = 5


def default_gamma(n_arms: int, budget: Optional[int] = None) -> float:
    """
    EXP3 exploration rate min(1, sqrt(K ln K / ((e - 1) T))), or 0.1 without a budget.
    """
    if n_arms <= 1:
        return 1.0
    if not budget:
        return DEFAULT_GAMMA
    return min(1.0, math.sqrt(n_arms * math.log(n_arms) / ((math.e - 1.0) * budget)))


@dataclass
class Exp3Agent:
    """EXP3 agent; weights are kept as log-weights."""

    log_weights: np.ndarray
    gamma: float

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def uniform(cls, n_arms: int, gamma: float) -> "Exp3Agent":
        return cls(log_weights=np.zeros(n_arms), gamma=gamma)

    @classmethod
    def from_weights(cls, weights: Sequence[float], gamma: float) -> "Exp3Agent":
        return cls(log_weights=np.log(np.asarray(weights, dtype=float)), gamma=gamma)

    @property
    def n_arms(self) -> int:
        return int(self.log_weights.size)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def exp3_probabilities(agent: Exp3Agent) -> np.ndarray:
    """
    Mixed EXP3 distribution p_i = (1 - gamma) w_i / sum(w) + gamma / K.
    """
    if not np.all(np.isfinite(agent.log_weights)):
        raise NonFiniteWeight(f"non-finite weights: {agent.weights}")
    shifted = np.exp(agent.log_weights - agent.log_weights.max())
    share = shifted / shifted.sum()
    return (1.0 - agent.gamma) * share + agent.gamma / agent.n_arms


@dataclass
class GraphSlot:
    graph: MoldedGraph
    fail_count: int = 0

    @property
    def centered(self) -> FrozenSet[int]:
        return self.graph.centered


@dataclass
class RewardRecord:
    value: float
    reward: float
    slot: int
    centered: FrozenSet[int]


@dataclass
class NestedBanditState:
    node_agent: Exp3Agent
    graph_agent: Exp3Agent
    slots: List[GraphSlot]
    failure_threshold: int = DEFAULT_FAILURE_THRESHOLD
    last_probs: Optional[np.ndarray] = None
    last_selected: Optional[int] = None

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "node_log_weights": self.node_agent.log_weights.tolist(),
            "node_gamma": self.node_agent.gamma,
            "graph_log_weights": self.graph_agent.log_weights.tolist(),
            "graph_gamma": self.graph_agent.gamma,
            "slots": [
                {"graph": slot.graph.to_dict(), "fail_count": slot.fail_count} for slot in self.slots
            ],
            "failure_threshold": self.failure_threshold,
            "last_probs": None if self.last_probs is None else self.last_probs.tolist(),
            "last_selected": self.last_selected,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "NestedBanditState":
        return cls(
            node_agent=Exp3Agent(np.array(payload["node_log_weights"]), payload["node_gamma"]),
            graph_agent=Exp3Agent(np.array(payload["graph_log_weights"]), payload["graph_gamma"]),
            slots=[
                GraphSlot(graph=MoldedGraph.from_dict(s["graph"]), fail_count=int(s["fail_count"]))
                for s in payload["slots"]
            ],
            failure_threshold=int(payload["failure_threshold"]),
            last_probs=None if payload.get("last_probs") is None else np.array(payload["last_probs"]),
            last_selected=payload.get("last_selected"),
        )


def sample_centered_nodes(state: NestedBanditState, c: int, rng: np.random.Generator) -> FrozenSet[int]:
    """
    Pulls the node agent c times with replacement and returns the distinct arms.
    """
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    probs = exp3_probabilities(state.node_agent)
    draws = rng.choice(state.node_agent.n_arms, size=c, replace=True, p=probs)
    return frozenset(int(d) for d in draws)


def select_graph(state: NestedBanditState, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    """
    Samples a slot from the graph agent and stores the probability snapshot.

    Returns:
        Tuple[int, np.ndarray]: Selected slot and the probabilities it was drawn from.
    """
    probs = exp3_probabilities(state.graph_agent)
    slot = int(rng.choice(state.n_slots, p=probs))
    state.last_probs = probs.copy()
    state.last_selected = slot
    return slot, state.last_probs


def update_rewards(state: NestedBanditState, record: RewardRecord) -> NestedBanditState:
    """
    Applies the two-level reward cascade to both agents.

    The graph estimate is the importance-weighted reward r / p_i; each centered
    node of the selected graph receives that estimate divided by the total
    snapshot probability of the slots in which it is centered.

    Args:
        state (NestedBanditState): State holding the selection snapshot.
        record (RewardRecord): Normalized reward of the evaluated point.

    Returns:
        NestedBanditState: The same state, updated in place.
    """
    if state.last_probs is None:
        raise MissingSnapshot("update_rewards called before select_graph")
    if not 0.0 <= record.reward <= 1.0:
        raise RewardOutOfRange(f"reward {record.reward} outside [0, 1]")
    if record.slot != state.last_selected:
        raise StaleSnapshot(f"reward for slot {record.slot} but slot {state.last_selected} was selected")

    probs = state.last_probs
    k = state.n_slots
    i = record.slot

    graph_estimate = record.reward / probs[i]
    state.graph_agent.log_weights[i] += state.graph_agent.gamma * graph_estimate / k

    centered = sorted(record.centered)
    for v in centered:
        membership = sum(probs[j] for j, slot in enumerate(state.slots) if v in slot.centered)
        if membership <= 0.0:
            raise StaleSnapshot(f"node {v} is not centered in any slot")
        node_estimate = graph_estimate / membership
        state.node_agent.log_weights[v] += state.node_agent.gamma * node_estimate / (len(centered) * k)

    return state


def normalize_reward(history: Sequence[float], f_new: float) -> float:
    """
    Min-max scales f_new over history plus f_new; 0.5 when the range is empty.
    """
    values = np.append(np.asarray(history, dtype=float), float(f_new))
    lo, hi = values.min(), values.max()
    if hi == lo:
        return 0.5
    return float((f_new - lo) / (hi - lo))


def maybe_replace(
    state: NestedBanditState,
    improved: bool,
    regenerate: Callable[[], MoldedGraph],
) -> Tuple[NestedBanditState, List[int]]:
    """
    Updates the selected slot's failure counter and replaces exhausted slots.

    A replaced slot gets a fresh graph from `regenerate`, weight 1 and a zero
    failure counter; the graph-agent weights are then rescaled to sum to K.

    Returns:
        Tuple[NestedBanditState, List[int]]: The state and the replaced slot indices.
    """
    selected = state.last_selected
    if selected is None:
        raise MissingSnapshot("maybe_replace called before select_graph")

    if improved:
        state.slots[selected].fail_count = 0
    else:
        state.slots[selected].fail_count += 1

    replaced = []
    for j, slot in enumerate(state.slots):
        if slot.fail_count >= state.failure_threshold:
            state.slots[j] = GraphSlot(graph=regenerate(), fail_count=0)
            state.graph_agent.log_weights[j] = 0.0
            replaced.append(j)

    if replaced:
        log_w = state.graph_agent.log_weights
        state.graph_agent.log_weights = log_w + math.log(state.n_slots) - logsumexp(log_w)
        logger.warning("Replaced graph slot(s) %s", replaced)

    return state, replaced


def initialize_state(
    dim: int,
    n_slots: int,
    n_centered: int,
    ba_threshold: int,
    failure_threshold: int,
    gamma_node: float,
    gamma_graph: float,
    rng: np.random.Generator,
) -> NestedBanditState:
    """
    Fresh nested bandit with uniform weights and K BA-biased graphs around
    centered nodes drawn from the node agent.
    """
    state = NestedBanditState(
        node_agent=Exp3Agent.uniform(dim, gamma_node),
        graph_agent=Exp3Agent.uniform(n_slots, gamma_graph),
        slots=[],
        failure_threshold=failure_threshold,
    )
    for _ in range(n_slots):
        centered = sample_centered_nodes(state, n_centered, rng)
        state.slots.append(GraphSlot(graph=ba_biased(dim, centered, ba_threshold, rng)))
    return state
