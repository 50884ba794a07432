import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import stats

from gebo_package.errors import (
    CenterOutOfRange,
    DegenerateInput,
    EmptyCenter,
    NoConvergence,
    NotConnected,
    TooLarge,
)

logger = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
DEFAULT_BA_THRESHOLD = 2
MAX_ENUMERATION_NODES = 6

Edge = Tuple[int, int]


def _canonical(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class MoldedGraph:
    """
    Undirected graph with one node per variable.

    Edges are stored as sorted pairs; `centered` holds the nodes of the complete
    core when the graph comes from the BA-biased generator.
    """

    n: int
    edges: FrozenSet[Edge]
    centered: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        cleaned = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside a {self.n}-node graph")
            cleaned.add(_canonical(i, j))
        object.__setattr__(self, "edges", frozenset(cleaned))
        object.__setattr__(self, "centered", frozenset(int(c) for c in self.centered))

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "edges": [list(e) for e in self.sorted_edges()],
            "centered": sorted(self.centered),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "MoldedGraph":
        return cls(
            n=int(payload["n"]),
            edges=frozenset(tuple(e) for e in payload.get("edges", [])),
            centered=frozenset(payload.get("centered", [])),
        )

    @classmethod
    def complete(cls, n: int) -> "MoldedGraph":
        return cls(n=n, edges=frozenset(itertools.combinations(range(n), 2)))


@dataclass(frozen=True)
class PageRankResult:
    scores: np.ndarray
    damping: float
    iterations: int


def ba_biased(n: int, centered: Iterable[int], threshold: int, rng: np.random.Generator) -> MoldedGraph:
    """
    Generates a BA-biased graph around a complete core of centered nodes.

    The remaining nodes are attached in ascending index order, each with a single
    edge to a node drawn uniformly from the repeated-node list, in which every
    core node starts with max(threshold, core degree) copies and each new edge
    appends both of its endpoints once.

    Args:
        n (int): Number of nodes.
        centered (Iterable[int]): Nodes forming the complete core.
        threshold (int): Minimum multiplicity of a core node in the repeated list.
        rng (np.random.Generator): Random stream, consumed only for attachment targets.

    Returns:
        MoldedGraph: Connected graph with |V|(|V|-1)/2 + (n - |V|) edges.
    """
    core = sorted({int(c) for c in centered})
    if not core:
        raise EmptyCenter("at least one centered node is required")
    if any(c < 0 or c >= n for c in core):
        raise CenterOutOfRange(f"centered nodes {core} outside [0, {n})")
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")

    edges = set(itertools.combinations(core, 2))
    core_degree = len(core) - 1

    # Lista de nós repetidos proporcional ao grau
    repeated_nodes = [c for c in core for _ in range(max(threshold, core_degree))]

    node_list = [v for v in range(n) if v not in set(core)]
    for node in node_list:
        target = repeated_nodes[int(rng.integers(len(repeated_nodes)))]
        edges.add(_canonical(node, target))
        repeated_nodes.append(target)
        repeated_nodes.append(node)

    return MoldedGraph(n=n, edges=frozenset(edges), centered=frozenset(core))


def is_connected(g: MoldedGraph) -> bool:
    """True iff the graph has a single connected component."""
    if g.n == 1:
        return True
    return nx.is_connected(g.to_networkx())


def attach_global_node(g: MoldedGraph) -> np.ndarray:
    """
    Builds the directed adjacency of `g` plus a global node.

    A[i, j] = 1 encodes a directed edge i -> j. Original edges become bidirectional
    pairs and node n receives one incoming edge from every other node.

    Returns:
        np.ndarray: (n+1, n+1) adjacency matrix.
    """
    adj = np.zeros((g.n + 1, g.n + 1))
    for i, j in g.edges:
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    adj[: g.n, g.n] = 1.0
    return adj


def pagerank(
    g: MoldedGraph,
    d: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PageRankResult:
    """
    PageRank of the molded graph by power iteration, edges taken in both directions.

    Args:
        g (MoldedGraph): Connected graph.
        d (float): Damping factor in (0, 1).
        tol (float): Stop once the largest per-node change falls below this value.
        max_iter (int): Iteration cap.

    Returns:
        PageRankResult: Scores summing to one.
    """
    if not 0 < d < 1:
        raise ValueError(f"damping must lie in (0, 1), got {d}")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if not is_connected(g):
        raise NotConnected("pagerank requires a connected graph")

    n = g.n
    if n == 1:
        return PageRankResult(scores=np.ones(1), damping=d, iterations=0)

    adj = nx.to_numpy_array(g.to_networkx(), nodelist=range(n))
    transition = adj / adj.sum(axis=1, keepdims=True)

    scores = np.full(n, 1.0 / n)
    for iteration in range(1, max_iter + 1):
        updated = (1.0 - d) / n + d * (scores @ transition)
        change = np.max(np.abs(updated - scores))
        scores = updated
        if change < tol:
            scores = scores / scores.sum()
            return PageRankResult(scores=scores, damping=d, iterations=iteration)

    raise NoConvergence(f"pagerank did not converge within {max_iter} iterations")


def enumerate_connected_graphs(n: int) -> Iterator[MoldedGraph]:
    """
    Yields every labeled connected undirected graph on n nodes exactly once.

    Edge subsets are visited in increasing bitmask order over the lexicographic
    list of node pairs.
    """
    if n > MAX_ENUMERATION_NODES:
        raise TooLarge(f"enumeration is limited to {MAX_ENUMERATION_NODES} nodes, got {n}")
    if n < 2:
        raise ValueError(f"enumeration needs at least 2 nodes, got {n}")

    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1, 1 << len(pairs)):
        edges = frozenset(pair for bit, pair in enumerate(pairs) if mask >> bit & 1)
        g = MoldedGraph(n=n, edges=edges)
        if is_connected(g):
            yield g


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Sample Pearson correlation between two equally long, non-constant lists.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInput(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DegenerateInput("pearson needs at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("pearson is undefined for a constant list")

    r = stats.pearsonr(x, y)[0]
    return float(np.clip(r, -1.0, 1.0))
