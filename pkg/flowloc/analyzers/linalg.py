"""
Spectral Engine for FlowLoc
Eigendecomposition of the scaled Laplacian, pseudoinverse forms, potential solves
and spectral norms of nonnegative matrices
Numerical Contract: residuals 1e-10 relative to max(1, lambda_n), kernel threshold 1e-12 * lambda_n
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from flowloc.data_sources.graph_core import WeightedMultigraph, incidence_system
from flowloc.utils.cache import generate_cache_key, get_cached, set_cache
from flowloc.utils.config import (
    BALANCE_TOL,
    EIG_RESIDUAL_TOL,
    KERNEL_THRESHOLD,
    ORTHONORMALITY_TOL,
    POWER_ITERATION_MAX_ITER,
    POWER_ITERATION_TOL,
    SYMMETRY_TOL,
)
from flowloc.utils.errors import (
    AsymmetricMatrixError,
    DomainError,
    EigenSolverError,
    KernelDimensionError,
    UnbalancedInjectionError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """
    Eigenpairs of S = M^{-1/2} L M^{-1/2}, eigenvalues ascending.

    edge_modes, when present, holds C^{1/2} B M^{-1/2} psi_i / sqrt(lambda_i)
    as column i (zero for the kernel column) for the graph identified by
    graph_fingerprint.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    scaling: np.ndarray
    edge_modes: Optional[np.ndarray] = None
    graph_fingerprint: Optional[str] = None

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def kernel_threshold(self) -> float:
        return KERNEL_THRESHOLD * self.lambda_max

    @property
    def kernel_dimension(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < self.kernel_threshold))

    @property
    def spectral_gap(self) -> float:
        """lambda_2 for a connected graph"""
        return float(self.eigenvalues[self.kernel_dimension])


@dataclass(frozen=True, eq=False)
class NormEstimate:
    """Power-iteration estimate of the spectral norm of a nonnegative symmetric matrix"""
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool

    def __float__(self) -> float:
        return self.value


def _check_symmetric(S: np.ndarray, what: str = "matrix") -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise AsymmetricMatrixError(f"{what} must be square, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    asymmetry = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if asymmetry > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError(f"{what} is not symmetric (max asymmetry {asymmetry:.3e})")


def _verify_eigenpairs(S: np.ndarray, eigenvalues: np.ndarray, eigenvectors: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    residual = float(np.max(np.linalg.norm(S @ eigenvectors - eigenvectors * eigenvalues, axis=0)))
    if residual > EIG_RESIDUAL_TOL * scale:
        raise EigenSolverError(f"Eigenpair residual {residual:.3e} exceeds {EIG_RESIDUAL_TOL * scale:.3e}")

    n = eigenvectors.shape[1]
    defect = float(np.max(np.abs(eigenvectors.T @ eigenvectors - np.eye(n))))
    if defect > ORTHONORMALITY_TOL:
        raise EigenSolverError(f"Eigenvectors not orthonormal (defect {defect:.3e})")


def _as_scaling(g: WeightedMultigraph, scaling: Optional[Sequence[float]]) -> np.ndarray:
    if scaling is None:
        return np.ones(g.n)
    scaling = np.asarray(scaling, dtype=np.float64)
    if scaling.shape != (g.n,):
        raise DomainError(f"Scaling must have length n={g.n}, got shape {scaling.shape}")
    if not np.all(np.isfinite(scaling)) or np.any(scaling <= 0):
        raise DomainError("Scaling diagonal must be finite and strictly positive")
    return scaling


def sym_eig(S: np.ndarray, scaling: Optional[np.ndarray] = None) -> SpectralDecomposition:
    """
    Symmetric eigendecomposition with verified residuals

    Args:
        S: Symmetric matrix (asymmetry at most 1e-12 relative to max|S|)
        scaling: Diagonal of M that S was built against (recorded only)

    Returns:
        SpectralDecomposition with ascending eigenvalues and orthonormal eigenvectors

    Raises:
        AsymmetricMatrixError, EigenSolverError
    """
    S = np.asarray(S, dtype=np.float64)
    _check_symmetric(S, "S")
    S = 0.5 * (S + S.T)

    try:
        eigenvalues, eigenvectors = np.linalg.eigh(S)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError(f"Symmetric eigensolver did not converge: {e}") from e

    _verify_eigenpairs(S, eigenvalues, eigenvectors)
    if scaling is None:
        scaling = np.ones(S.shape[0])
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors,
                                 scaling=np.asarray(scaling, dtype=np.float64))


def scaled_laplacian(g: WeightedMultigraph, scaling: Optional[Sequence[float]] = None) -> np.ndarray:
    """S = M^{-1/2} L M^{-1/2} for M = diag(scaling), identity by default"""
    d = 1.0 / np.sqrt(_as_scaling(g, scaling))
    return d[:, None] * incidence_system(g).L * d[None, :]


def _weighted_incidence(g: WeightedMultigraph, scaling: np.ndarray) -> np.ndarray:
    """C^{1/2} B M^{-1/2}; its Gram matrix is S"""
    B = incidence_system(g).B
    return np.sqrt(g.conductances)[:, None] * B / np.sqrt(scaling)[None, :]


def decompose(g: WeightedMultigraph, scaling: Optional[Sequence[float]] = None,
              use_cache: bool = True) -> SpectralDecomposition:
    """
    Eigendecomposition of the scaled Laplacian of a connected graph

    Computed from the thin SVD of A = C^{1/2} B M^{-1/2} (S = A^T A, so
    lambda_i = sigma_i^2). Working with A instead of S keeps the error of the
    edge-space projection at eps * sqrt(cond(L)).

    Args:
        g: Connected graph
        scaling: Positive diagonal of M (default: identity)
        use_cache: Reuse a decomposition already computed for (g, scaling)

    Returns:
        SpectralDecomposition carrying edge modes for g

    Raises:
        EigenSolverError, KernelDimensionError
    """
    scaling = _as_scaling(g, scaling)
    cache_key = generate_cache_key(g.fingerprint, "decomposition", scaling)
    if use_cache:
        cached = get_cached(cache_key)
        if cached is not None:
            return cached

    A = _weighted_incidence(g, scaling)
    try:
        U, sigma, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError(f"SVD of weighted incidence did not converge: {e}") from e

    eigenvalues = sigma[::-1] ** 2
    eigenvectors = Vt[::-1].T
    modes = U[:, ::-1].copy()

    if sigma.size < g.n:
        # m = n - 1: the thin SVD omits the kernel, which is known exactly
        kernel = np.sqrt(scaling) / np.linalg.norm(np.sqrt(scaling))
        eigenvalues = np.concatenate([[0.0], eigenvalues])
        eigenvectors = np.column_stack([kernel, eigenvectors])
        modes = np.column_stack([np.zeros(g.m), modes])
    else:
        modes[:, 0] = 0.0

    decomposition = SpectralDecomposition(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        scaling=scaling,
        edge_modes=modes,
        graph_fingerprint=g.fingerprint,
    )

    _verify_eigenpairs(scaled_laplacian(g, scaling), eigenvalues, eigenvectors)
    if decomposition.kernel_dimension != 1:
        raise KernelDimensionError(
            f"Expected a one-dimensional kernel, found {decomposition.kernel_dimension} "
            f"(threshold {decomposition.kernel_threshold:.3e})"
        )
    root = np.sqrt(scaling) / np.linalg.norm(np.sqrt(scaling))
    if abs(float(eigenvectors[:, 0] @ root)) < 1.0 - 1e-8:
        raise KernelDimensionError("Kernel eigenvector is not parallel to M^{1/2} 1")

    logger.debug(f"Decomposed n={g.n} m={g.m}: lambda_2={decomposition.spectral_gap:.4e}, "
                 f"lambda_n={decomposition.lambda_max:.4e}")
    if use_cache:
        set_cache(cache_key, decomposition)
    return decomposition


def edge_modes(g: WeightedMultigraph, decomposition: SpectralDecomposition) -> np.ndarray:
    """
    Columns C^{1/2} B M^{-1/2} psi_i / sqrt(lambda_i), kernel column zeroed

    Taken from the decomposition when it was built for g, otherwise formed
    from the eigenpairs.
    """
    if decomposition.kernel_dimension != 1:
        raise KernelDimensionError(f"Kernel dimension is {decomposition.kernel_dimension}, expected 1")
    if decomposition.edge_modes is not None and decomposition.graph_fingerprint == g.fingerprint:
        return decomposition.edge_modes

    A = _weighted_incidence(g, decomposition.scaling)
    modes = A @ decomposition.eigenvectors
    modes[:, 1:] /= np.sqrt(decomposition.eigenvalues[1:])[None, :]
    modes[:, 0] = 0.0
    return modes


def projected_green(g: WeightedMultigraph, decomposition: SpectralDecomposition) -> np.ndarray:
    """
    B L^+ B^T via the spectral sum over i >= 2

    Independent of the scaling M the decomposition was built with.

    Args:
        g: Graph
        decomposition: Decomposition of M^{-1/2} L M^{-1/2} for this graph

    Returns:
        np.ndarray: symmetric m x m matrix
    """
    Y = edge_modes(g, decomposition)[:, 1:] / np.sqrt(g.conductances)[:, None]
    G = Y @ Y.T
    return 0.5 * (G + G.T)


def resistance_form(g: WeightedMultigraph, decomposition: SpectralDecomposition, e: int, f: int) -> float:
    """b_e^T L^+ b_f for edges e and f"""
    Y = edge_modes(g, decomposition)[:, 1:] / np.sqrt(g.conductances)[:, None]
    return float(Y[e] @ Y[f])


def _grounded_solve(g: WeightedMultigraph, rhs: np.ndarray) -> np.ndarray:
    # Vertex 0 grounded; the reduced Laplacian of a connected graph is positive definite
    L = incidence_system(g).L
    reduced = scipy.linalg.solve(L[1:, 1:], rhs[1:], assume_a='pos')
    phi = np.concatenate([np.zeros((1,) + rhs.shape[1:]), reduced.reshape((g.n - 1,) + rhs.shape[1:])])
    return phi - phi.mean(axis=0)


def solve_potential(g: WeightedMultigraph, injection: Sequence[float]) -> np.ndarray:
    """
    Solve L phi = injection directly, normalized to sum(phi) = 0

    Args:
        g: Connected graph
        injection: Vertex vector summing to zero

    Returns:
        np.ndarray: potential phi

    Raises:
        UnbalancedInjectionError: injection not orthogonal to constants
    """
    injection = np.asarray(injection, dtype=np.float64)
    if injection.shape != (g.n,):
        raise DomainError(f"Injection must have length n={g.n}, got shape {injection.shape}")
    imbalance = abs(float(injection.sum()))
    if imbalance > BALANCE_TOL * max(1.0, float(np.abs(injection).sum())):
        raise UnbalancedInjectionError(f"Injection sums to {imbalance:.3e}, expected 0")
    return _grounded_solve(g, injection)


def solve_potentials(g: WeightedMultigraph, injections: np.ndarray) -> np.ndarray:
    """Column-wise solve_potential for an n x k matrix of balanced injections"""
    injections = np.asarray(injections, dtype=np.float64)
    imbalance = np.abs(injections.sum(axis=0))
    if np.any(imbalance > BALANCE_TOL * np.maximum(1.0, np.abs(injections).sum(axis=0))):
        raise UnbalancedInjectionError("At least one injection column does not sum to 0")
    return _grounded_solve(g, injections)


def nonneg_spectral_norm(A: np.ndarray, tol: float = POWER_ITERATION_TOL,
                         max_iter: int = POWER_ITERATION_MAX_ITER) -> NormEstimate:
    """
    Spectral norm of a symmetric entrywise-nonnegative matrix by power iteration

    Starts from the normalized all-ones vector. The estimate ||A x_k|| is
    nondecreasing and converges to the Perron root even when -lambda_max is
    also an eigenvalue (bipartite patterns), since it tracks A^2.

    Args:
        A: Symmetric matrix with nonnegative entries
        tol: Stop when successive estimates differ by at most tol * estimate
        max_iter: Iteration cap; the best estimate is returned flagged non-converged

    Returns:
        NormEstimate
    """
    A = np.asarray(A, dtype=np.float64)
    _check_symmetric(A, "A")
    if A.size and float(A.min()) < 0:
        raise DomainError("nonneg_spectral_norm requires entrywise-nonnegative input")

    n = A.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    value = 0.0
    for iteration in range(1, max_iter + 1):
        y = A @ x
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return NormEstimate(value=0.0, vector=x, iterations=iteration, converged=True)
        x = y / estimate
        if abs(estimate - value) <= tol * estimate:
            return NormEstimate(value=estimate, vector=x, iterations=iteration, converged=True)
        value = estimate

    logger.warning(f"Power iteration hit the cap of {max_iter} iterations (estimate {value:.12g})")
    return NormEstimate(value=value, vector=x, iterations=max_iter, converged=False)
