"""
Transfer-Current Engine for FlowLoc
Transfer-current matrix K, symmetrized projection Pi, current vectors and effective resistances
Sign convention: unit current enters at the tail of e and exits at its head
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from flowloc.analyzers.linalg import (
    SpectralDecomposition,
    decompose,
    projected_green,
    resistance_form,
    solve_potential,
    solve_potentials,
)
from flowloc.data_sources.graph_core import WeightedMultigraph, incidence_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurrentMatrices:
    """K = C B L^+ B^T, Pi = C^{1/2} B L^+ B^T C^{1/2} and their entrywise absolute values"""
    K: np.ndarray
    Pi: np.ndarray
    Kbar: np.ndarray
    Pibar: np.ndarray

    @property
    def m(self) -> int:
        return int(self.K.shape[0])


def transfer_current_matrix(g: WeightedMultigraph,
                            decomposition: Optional[SpectralDecomposition] = None) -> CurrentMatrices:
    """
    Compute all m current vectors from one eigendecomposition

    Args:
        g: Connected graph
        decomposition: Decomposition to reuse (default: decompose(g), M = I)

    Returns:
        CurrentMatrices; column e of K is the current vector i_e
    """
    if decomposition is None:
        decomposition = decompose(g)
    G = projected_green(g, decomposition)

    root = np.sqrt(g.conductances)
    K = g.conductances[:, None] * G
    Pi = root[:, None] * G * root[None, :]
    Pi = 0.5 * (Pi + Pi.T)

    logger.debug(f"Transfer currents for n={g.n} m={g.m}: trace(Pi)={np.trace(Pi):.10f}")
    return CurrentMatrices(K=K, Pi=Pi, Kbar=np.abs(K), Pibar=np.abs(Pi))


def current_vector(g: WeightedMultigraph, e: int, currents: Optional[CurrentMatrices] = None) -> np.ndarray:
    """
    Current on every edge when a unit current is driven across the endpoints of e

    Args:
        g: Graph
        e: Edge index
        currents: Precomputed matrices (default: computed)

    Returns:
        np.ndarray: column e of K
    """
    if not 0 <= e < g.m:
        raise IndexError(f"Edge index {e} out of range 0..{g.m - 1}")
    if currents is None:
        currents = transfer_current_matrix(g)
    return currents.K[:, e].copy()


def current_vector_direct(g: WeightedMultigraph, e: int) -> np.ndarray:
    """Oracle path for current_vector: C B phi with L phi = b_e solved directly"""
    if not 0 <= e < g.m:
        raise IndexError(f"Edge index {e} out of range 0..{g.m - 1}")
    B = incidence_system(g).B
    phi = solve_potential(g, B[e])
    return g.conductances * (B @ phi)


def current_vectors_direct(g: WeightedMultigraph) -> np.ndarray:
    """All m oracle current vectors as the columns of an m x m matrix"""
    B = incidence_system(g).B
    potentials = solve_potentials(g, B.T)
    return g.conductances[:, None] * (B @ potentials)


def effective_resistance(g: WeightedMultigraph, e: int,
                         decomposition: Optional[SpectralDecomposition] = None) -> float:
    """
    Effective resistance b_e^T L^+ b_e between the endpoints of edge e

    Satisfies 0 < R_eff <= 1 / c_e.
    """
    if not 0 <= e < g.m:
        raise IndexError(f"Edge index {e} out of range 0..{g.m - 1}")
    if decomposition is None:
        decomposition = decompose(g)
    return resistance_form(g, decomposition, e, e)


def l1_norms(currents: CurrentMatrices) -> np.ndarray:
    """||i_e||_1 for every edge: column sums of Kbar"""
    return currents.Kbar.sum(axis=0)


def avg_l1_flow(g: WeightedMultigraph, currents: Optional[CurrentMatrices] = None) -> float:
    """
    Average l1 length of unit electrical flows over edges

    m^{-1} sum_e ||i_e||_1 = 1^T Kbar 1 / m.
    """
    if currents is None:
        currents = transfer_current_matrix(g)
    return float(currents.Kbar.sum()) / g.m


def projection_residuals(currents: CurrentMatrices, n: int) -> Dict[str, Optional[float]]:
    """
    Defects of the projection structure

    Returns:
        dict: idempotence ||Pi^2 - Pi||_max, symmetry ||Pi - Pi^T||_max,
            trace |trace(Pi) - (n - 1)|, reciprocity ||K - K^T||_max
    """
    Pi = currents.Pi
    return {
        "idempotence": float(np.max(np.abs(Pi @ Pi - Pi))),
        "symmetry": float(np.max(np.abs(Pi - Pi.T))),
        "trace": abs(float(np.trace(Pi)) - (n - 1)),
        "reciprocity": float(np.max(np.abs(currents.K - currents.K.T))),
    }
