"""
Graph Core for FlowLoc
Weighted multigraph model, incidence algebra, Laplacian and edge-weight vertex measures
Numerical Contract: dense storage, immutable after construction
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from flowloc.utils.cache import array_fingerprint
from flowloc.utils.config import BALANCE_TOL, CONDUCTANCE_MAX, CONDUCTANCE_MIN, DEFAULT_CONDUCTANCE
from flowloc.utils.errors import (
    ConductanceRangeError,
    DisconnectedGraphError,
    DomainError,
    EmptyEdgeListError,
    GraphConstructionError,
    NonPositiveConductanceError,
    NumericalContractError,
    SelfLoopError,
    VertexIndexError,
    ZeroWeightError,
)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int, float]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class WeightedMultigraph:
    """
    Connected undirected multigraph with a fixed orientation per edge.

    Edge e runs from tails[e] to heads[e] and has conductance conductances[e] > 0.
    Parallel edges are allowed, self-loops are not. Build through build_graph().
    """
    n: int
    tails: np.ndarray
    heads: np.ndarray
    conductances: np.ndarray
    fingerprint: str = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'fingerprint',
                           array_fingerprint(np.array([self.n]), self.tails, self.heads, self.conductances))

    @property
    def m(self) -> int:
        return int(self.tails.shape[0])

    @property
    def edges(self) -> List[Edge]:
        return [(int(t), int(h), float(c)) for t, h, c in zip(self.tails, self.heads, self.conductances)]

    @property
    def is_unweighted(self) -> bool:
        return bool(np.all(self.conductances == 1.0))

    def degrees(self) -> np.ndarray:
        """Number of incident edges per vertex (parallel edges counted)"""
        return np.bincount(self.tails, minlength=self.n) + np.bincount(self.heads, minlength=self.n)

    def flip_edge(self, f: int) -> "WeightedMultigraph":
        """Same graph with the stored orientation of edge f reversed"""
        tails, heads = self.tails.copy(), self.heads.copy()
        tails[f], heads[f] = self.heads[f], self.tails[f]
        return _assemble(self.n, tails, heads, self.conductances.copy())

    def scale_conductances(self, alpha: float) -> "WeightedMultigraph":
        """Same graph with every conductance multiplied by alpha > 0"""
        if not alpha > 0:
            raise NonPositiveConductanceError(f"Scale factor must be positive, got {alpha}")
        return build_graph(
            [(t, h, c * alpha) for t, h, c in self.edges], self.n
        )


@dataclass(frozen=True, eq=False)
class IncidenceSystem:
    """Signed incidence B (m x n), conductance diagonal C (m x m) and Laplacian L = B^T C B"""
    B: np.ndarray
    C: np.ndarray
    L: np.ndarray


@dataclass(frozen=True, eq=False)
class EdgeWeighting:
    """Edge vector w and its vertex measure mu(x) = sum_{e: x in e} w_e^2 / (2 ||w||^2)"""
    w: np.ndarray
    mu: np.ndarray

    @property
    def norm_squared(self) -> float:
        return float(self.w @ self.w)


def _assemble(n: int, tails: np.ndarray, heads: np.ndarray, conductances: np.ndarray) -> WeightedMultigraph:
    return WeightedMultigraph(
        n=n,
        tails=_frozen(tails.astype(np.int64)),
        heads=_frozen(heads.astype(np.int64)),
        conductances=_frozen(conductances.astype(np.float64)),
    )


def is_connected(n: int, edges: Iterable[Sequence]) -> bool:
    """
    Check connectivity of the multigraph on vertices 0..n-1 by traversal

    Args:
        n: Vertex count
        edges: Iterable of (tail, head, ...) tuples

    Returns:
        bool: True if every vertex is reachable from vertex 0
    """
    if n <= 0:
        return False
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from((int(e[0]), int(e[1])) for e in edges)
    return nx.is_connected(graph)


def build_graph(edge_list: Sequence[Sequence], n: Optional[int] = None) -> WeightedMultigraph:
    """
    Validate an edge list and build a WeightedMultigraph

    Args:
        edge_list: Sequence of (tail, head) or (tail, head, conductance)
        n: Vertex count (default: 1 + largest index)

    Returns:
        WeightedMultigraph: validated, connected graph

    Raises:
        EmptyEdgeListError, VertexIndexError, SelfLoopError,
        NonPositiveConductanceError, ConductanceRangeError,
        GraphConstructionError (n < 2), DisconnectedGraphError
    """
    if len(edge_list) == 0:
        raise EmptyEdgeListError("Edge list is empty; a graph needs at least one edge")

    tails, heads, conductances = [], [], []
    for index, edge in enumerate(edge_list):
        if len(edge) not in (2, 3):
            raise GraphConstructionError(f"Edge {index} must be (tail, head[, conductance]), got {edge!r}")
        tail, head = edge[0], edge[1]
        conductance = float(edge[2]) if len(edge) == 3 else DEFAULT_CONDUCTANCE
        if int(tail) != tail or int(head) != head:
            raise VertexIndexError(f"Edge {index} has non-integer endpoint: {edge!r}")
        tails.append(int(tail))
        heads.append(int(head))
        conductances.append(conductance)

    if n is None:
        n = 1 + max(max(tails), max(heads))

    for index, (tail, head, conductance) in enumerate(zip(tails, heads, conductances)):
        if not (0 <= tail < n and 0 <= head < n):
            raise VertexIndexError(f"Edge {index} ({tail}, {head}) has an endpoint outside 0..{n - 1}")
        if tail == head:
            raise SelfLoopError(f"Edge {index} is a self-loop at vertex {tail}")
        if not math.isfinite(conductance) or conductance <= 0:
            raise NonPositiveConductanceError(
                f"Edge {index} ({tail}, {head}) has non-positive or non-finite conductance {conductance}"
            )
        if not CONDUCTANCE_MIN <= conductance <= CONDUCTANCE_MAX:
            raise ConductanceRangeError(
                f"Edge {index} conductance {conductance:g} outside [{CONDUCTANCE_MIN:g}, {CONDUCTANCE_MAX:g}]"
            )

    if n < 2:
        raise GraphConstructionError(f"A graph needs at least 2 vertices, got n={n}")

    if not is_connected(n, zip(tails, heads)):
        raise DisconnectedGraphError(f"Graph on {n} vertices with {len(tails)} edges is not connected")

    graph = _assemble(n, np.array(tails), np.array(heads), np.array(conductances))
    logger.debug(f"Built graph n={graph.n} m={graph.m} ({graph.fingerprint})")
    return graph


def incidence_system(g: WeightedMultigraph) -> IncidenceSystem:
    """
    Assemble B, C and L = B^T C B for a graph

    Row e of B is b_e = 1_{head} - 1_{tail}. L is spot-verified against the
    degree-minus-adjacency assembly and must annihilate constants.

    Args:
        g: Validated graph

    Returns:
        IncidenceSystem
    """
    rows = np.arange(g.m)
    B = np.zeros((g.m, g.n))
    B[rows, g.heads] = 1.0
    B[rows, g.tails] = -1.0
    C = np.diag(g.conductances)
    L = B.T @ (g.conductances[:, None] * B)

    # Degree minus adjacency, accumulated edge by edge
    reference = np.zeros((g.n, g.n))
    np.add.at(reference, (g.tails, g.tails), g.conductances)
    np.add.at(reference, (g.heads, g.heads), g.conductances)
    np.add.at(reference, (g.tails, g.heads), -g.conductances)
    np.add.at(reference, (g.heads, g.tails), -g.conductances)

    scale = float(np.max(np.abs(L)))
    if not np.allclose(L, reference, rtol=0.0, atol=1e-12 * scale):
        raise NumericalContractError("Laplacian B^T C B disagrees with degree-minus-adjacency assembly")
    if np.max(np.abs(L.sum(axis=1))) > BALANCE_TOL * scale:
        raise NumericalContractError("Laplacian rows do not sum to zero")

    return IncidenceSystem(B=_frozen(B), C=_frozen(C), L=_frozen(L))


def measure_from_weights(g: WeightedMultigraph, w: Sequence[float]) -> EdgeWeighting:
    """
    Vertex probability vector induced by an edge weighting

    mu_w(x) = (1 / (2 ||w||^2)) * sum of w_e^2 over edges e incident to x.
    For w = all-ones this is deg(x) / (2m).

    Args:
        g: Graph
        w: Real vector indexed by edges, not identically zero

    Returns:
        EdgeWeighting
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (g.m,):
        raise ValueError(f"Edge weighting must have length m={g.m}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DomainError("Edge weighting w must be finite")
    squared = w * w
    total = squared.sum()
    if total == 0:
        raise ZeroWeightError("Edge weighting w is identically zero")

    mu = np.bincount(g.tails, weights=squared, minlength=g.n) + np.bincount(g.heads, weights=squared, minlength=g.n)
    mu = mu / (2.0 * total)
    return EdgeWeighting(w=_frozen(w.copy()), mu=_frozen(mu))
