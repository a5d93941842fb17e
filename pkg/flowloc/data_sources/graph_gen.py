"""
Graph Family Generator for FlowLoc
Deterministic and seeded graph families used by the verification suite
Randomness: numpy Generator(PCG64(seed)), one fresh generator per generate() call
"""

import logging
import math
from typing import List, Literal, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from flowloc.data_sources.graph_core import WeightedMultigraph, build_graph, is_connected
from flowloc.utils.config import (
    DEFAULT_SEED,
    GADGET_BIG_PER_EDGE,
    GNP_DEFAULT_P,
    GNP_MAX_RETRIES,
    WEIGHTED_LOG10_RANGE,
)
from flowloc.utils.errors import ConnectivityRetriesExhausted

logger = logging.getLogger(__name__)

Family = Literal[
    "path", "cycle", "complete", "star", "grid2d",
    "hypercube", "gnp", "parallel_gadget", "random_weighted",
]

_VERTEX_FAMILIES = {"path", "cycle", "complete", "star", "gnp", "random_weighted"}


class FamilySpec(BaseModel):
    """
    One graph family member plus the randomness that decorates it

    Size parameters by family: n for path/cycle/complete/star/gnp/random_weighted
    (m optional for random_weighted, default 2n), k (side) or n for grid2d,
    d or n for hypercube, m (and big) for parallel_gadget.
    """
    model_config = ConfigDict(frozen=True)

    family: Family
    n: Optional[int] = Field(default=None, ge=2)
    k: Optional[int] = Field(default=None, ge=2)
    d: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    p: float = Field(default=GNP_DEFAULT_P, gt=0.0, le=1.0)
    big: Optional[float] = Field(default=None, gt=1.0)
    conductance: Literal["unit", "weighted"] = "unit"
    seed: int = Field(default=DEFAULT_SEED, ge=0)

    @model_validator(mode="after")
    def _check_size_parameters(self) -> "FamilySpec":
        family = self.family
        if family in _VERTEX_FAMILIES and self.n is None:
            raise ValueError(f"family {family} needs n")
        if family == "cycle" and self.n < 3:
            raise ValueError("cycle needs n >= 3")
        if family == "grid2d" and self.k is None and (self.n is None or self.n < 4):
            raise ValueError("grid2d needs k >= 2 or n >= 4")
        if family == "hypercube" and self.d is None and self.n is None:
            raise ValueError("hypercube needs d or n")
        if family == "parallel_gadget" and (self.m is None or self.m < 2):
            raise ValueError("parallel_gadget needs m >= 2")
        if family == "random_weighted" and self.m is not None and self.m < self.n - 1:
            raise ValueError(f"random_weighted needs m >= n - 1 = {self.n - 1}")
        return self

    @property
    def side(self) -> int:
        """Grid side k (k^2 vertices)"""
        return self.k if self.k is not None else math.isqrt(self.n)

    @property
    def dimension(self) -> int:
        """Hypercube dimension d (2^d vertices)"""
        return self.d if self.d is not None else max(1, int(math.floor(math.log2(self.n))))

    @property
    def big_conductance(self) -> float:
        return self.big if self.big is not None else GADGET_BIG_PER_EDGE * self.m

    @property
    def size(self) -> int:
        """The structural parameter the family is indexed by"""
        if self.family == "grid2d":
            return self.side
        if self.family == "hypercube":
            return self.dimension
        if self.family == "parallel_gadget":
            return self.m
        return self.n


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _integer_edges(graph: nx.Graph) -> List[Tuple[int, int]]:
    """Relabel nodes 0..n-1 in sorted order; edges sorted, tail < head"""
    relabeled = nx.convert_node_labels_to_integers(graph, ordering="sorted")
    return sorted((min(u, v), max(u, v)) for u, v in relabeled.edges())


def _structure(spec: FamilySpec, rng: np.random.Generator) -> Tuple[int, List[Tuple[int, int]]]:
    family = spec.family
    if family == "path":
        return spec.n, _integer_edges(nx.path_graph(spec.n))
    if family == "cycle":
        return spec.n, _integer_edges(nx.cycle_graph(spec.n))
    if family == "complete":
        return spec.n, _integer_edges(nx.complete_graph(spec.n))
    if family == "star":
        return spec.n, _integer_edges(nx.star_graph(spec.n - 1))
    if family == "grid2d":
        k = spec.side
        return k * k, _integer_edges(nx.grid_2d_graph(k, k))
    if family == "hypercube":
        d = spec.dimension
        return 2 ** d, _integer_edges(nx.hypercube_graph(d))
    if family == "gnp":
        return spec.n, _gnp_edges(spec.n, spec.p, rng)
    if family == "random_weighted":
        m = spec.m if spec.m is not None else 2 * spec.n
        return spec.n, _random_multigraph_edges(spec.n, m, rng)
    raise ValueError(f"no structure generator for family {family}")


def _gnp_edges(n: int, p: float, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Erdos-Renyi G(n, p), redrawn until connected"""
    rows, cols = np.triu_indices(n, k=1)
    for attempt in range(1, GNP_MAX_RETRIES + 1):
        keep = rng.random(rows.size) < p
        edges = list(zip(rows[keep].tolist(), cols[keep].tolist()))
        if edges and is_connected(n, edges):
            if attempt > 1:
                logger.debug(f"gnp(n={n}, p={p}) connected after {attempt} draws")
            return edges
    raise ConnectivityRetriesExhausted(
        f"gnp(n={n}, p={p}) stayed disconnected after {GNP_MAX_RETRIES} draws"
    )


def _random_multigraph_edges(n: int, m: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Random recursive spanning tree plus m - (n - 1) uniform vertex pairs (parallels allowed)"""
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
    for _ in range(m - (n - 1)):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n - 1))
        if v >= u:
            v += 1
        edges.append((min(u, v), max(u, v)))
    return edges


def log_uniform_conductances(count: int, rng: np.random.Generator) -> np.ndarray:
    """Conductances 10^U with U uniform on the configured log10 range"""
    low, high = WEIGHTED_LOG10_RANGE
    return 10.0 ** rng.uniform(low, high, size=count)


def parallel_gadget(m: int, big: float) -> WeightedMultigraph:
    """Two vertices joined by m - 1 unit edges and one edge of conductance big (the last edge)"""
    if m < 2:
        raise ValueError(f"parallel_gadget needs m >= 2, got {m}")
    edges = [(0, 1, 1.0)] * (m - 1) + [(0, 1, float(big))]
    return build_graph(edges, 2)


def generate(spec: FamilySpec) -> WeightedMultigraph:
    """
    Build the graph a FamilySpec describes

    Structure is drawn first, conductances second, from the same generator;
    parallel_gadget ignores the conductance mode and random_weighted always
    draws log-uniform conductances.

    Args:
        spec: Family specification

    Returns:
        WeightedMultigraph (validated by build_graph)

    Raises:
        ConnectivityRetriesExhausted: gnp never produced a connected draw
    """
    if spec.family == "parallel_gadget":
        return parallel_gadget(spec.m, spec.big_conductance)

    rng = _rng(spec.seed)
    n, pairs = _structure(spec, rng)

    if spec.conductance == "weighted" or spec.family == "random_weighted":
        conductances = log_uniform_conductances(len(pairs), rng)
    else:
        conductances = np.ones(len(pairs))

    g = build_graph([(u, v, float(c)) for (u, v), c in zip(pairs, conductances)], n)
    logger.debug(f"Generated {spec.family} (size {spec.size}, {spec.conductance}): n={g.n} m={g.m}")
    return g


def family_sizes(family: str, sizes: Sequence[int]) -> List[dict]:
    """
    Map a vertex-count ladder to the distinct size parameters it covers

    grid2d uses k = floor(sqrt(n)), hypercube d = floor(log2 n); parallel_gadget
    reads the ladder as edge counts. Sizes a family cannot realize are dropped.

    Returns:
        list of dicts of FamilySpec size fields, in ladder order, duplicates removed
    """
    seen = set()
    result = []
    for size in sizes:
        if family == "grid2d":
            if size < 4:
                continue
            params = {"k": math.isqrt(size)}
        elif family == "hypercube":
            if size < 2:
                continue
            params = {"d": int(math.floor(math.log2(size)))}
        elif family == "parallel_gadget":
            if size < 2:
                continue
            params = {"m": size}
        else:
            if size < (3 if family == "cycle" else 2):
                continue
            params = {"n": size}
        key = tuple(sorted(params.items()))
        if key not in seen:
            seen.add(key)
            result.append(params)
    return result


# Example usage and testing
if __name__ == "__main__":
    for spec in [
        FamilySpec(family="path", n=3),
        FamilySpec(family="hypercube", d=3),
        FamilySpec(family="grid2d", k=3),
        FamilySpec(family="parallel_gadget", m=5, big=100.0),
        FamilySpec(family="gnp", n=12, conductance="weighted"),
    ]:
        g = generate(spec)
        print(f"{spec.family:16s} n={g.n:3d} m={g.m:3d} edges[:3]={g.edges[:3]}")
