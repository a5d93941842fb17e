"""
Entropy Dissipation Engine for FlowLoc
Entropy, logarithmic mean, Fisher information and the executable forms of the
log-mean Cauchy-Schwarz bound, the entropy-dissipation identity and the
heat-kernel variation estimate
All logarithms are natural
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.special import entr, rel_entr, xlogy

from flowloc.analyzers.heat_kernel import (
    HeatKernelEvaluator,
    heat_H,
    heat_kernel_evaluator,
    panels_for_tolerance,
    time_grid,
)
from flowloc.analyzers.linalg import edge_modes
from flowloc.data_sources.graph_core import WeightedMultigraph, incidence_system, measure_from_weights
from flowloc.utils.config import DISSIPATION_FLOOR_FACTOR, DISSIPATION_HEAD_FACTOR, DISSIPATION_HORIZON_FACTOR
from flowloc.utils.errors import DomainError, NumericalContractError, ZeroWeightError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# |a - b| <= LOG_MEAN_SEAM * (a + b) switches to the series branch
LOG_MEAN_SEAM = 1e-8

# Round-off floor for heat-kernel values that are positive in exact arithmetic
_TINY = np.finfo(np.float64).tiny


class LogMeanBound(NamedTuple):
    """Both sides of (w^T C^{1/2} |Bh|)^2 <= (I(h)/2) sum_x h(x) sum_{e: x in e} w_e^2"""
    lhs: float
    rhs: float
    margin: float

    def holds(self, rel_tol: float = 1e-9) -> bool:
        return self.lhs <= self.rhs * (1.0 + rel_tol)


class HeatVariation(NamedTuple):
    """int_0^inf w^T |C^{1/2} B H_t B^T C^{1/2}| w dt (tail included) against 2 ||w||^2 H(mu_w)"""
    lhs: float
    rhs: float
    tail_bound: float

    def holds(self, rel_tol: float = 1e-6, abs_tol: float = 0.0) -> bool:
        return self.lhs <= self.rhs * (1.0 + rel_tol) + abs_tol


class PointwiseVariation(NamedTuple):
    """Per-vertex sides of (w^T C^{1/2} |B H_s 1_v|)^2 <= ||w||^2 I(H_s 1_v)"""
    lhs: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True, eq=False)
class DissipationTrace:
    """
    Samples of I(h_s) and Phi_mu(h_s) along h_s = P_s M^{-1} rho.

    integral = head_remainder + head_quadrature + quadrature + tail_correction:
    the head integrates I on its own geometric grid over [s_floor, s_min] and
    bounds [0, s_floor] by the a + b log(1/s) growth of I near 0; the tail
    uses Phi_mu(h_inf) = 0. None of it reads closed_form. The main quadrature
    is checked against the exact telescoped value Phi_mu(h_{s_min}) - Phi_mu(h_S).
    """
    times: np.ndarray
    fisher: np.ndarray
    phi: np.ndarray
    quadrature: float
    telescoped: float
    head_quadrature: float
    head_remainder: float
    tail_correction: float
    integral: float
    closed_form: float

    @property
    def discrepancy(self) -> float:
        return abs(self.integral - self.closed_form)

    @property
    def telescoping_gap(self) -> float:
        return abs(self.quadrature - self.telescoped)


def _probability_vector(p: ArrayLike, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DomainError(f"{name} must be a vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} has a negative or non-finite entry")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise DomainError(f"{name} must sum to 1, sums to {float(p.sum()):.12g}")
    return p


def entropy(mu: ArrayLike) -> float:
    """
    Shannon entropy H(mu) = -sum mu log mu with 0 log 0 = 0

    Args:
        mu: Probability vector

    Returns:
        float: value in [0, log n]
    """
    return float(np.sum(entr(_probability_vector(mu, "mu"))))


def relative_entropy(rho: ArrayLike, mu: ArrayLike) -> float:
    """sum_x rho(x) log(rho(x) / mu(x)), the closed form of the dissipation integral"""
    rho = _probability_vector(rho, "rho")
    mu = _probability_vector(mu, "mu")
    if np.any(mu <= 0):
        raise DomainError("mu must be strictly positive")
    return float(np.sum(rel_entr(rho, mu)))


def log_mean_branches(a: ArrayLike, b: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both evaluation branches of the logarithmic mean at the same arguments

    Returns:
        (series, direct): the near-diagonal series and the log1p quotient
        (the latter is nan where a == b)
    """
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)) or not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise DomainError("log_mean requires finite, strictly positive arguments")

    hi = np.maximum(a_arr, b_arr)
    lo = np.minimum(a_arr, b_arr)
    gap = hi - lo
    total = hi + lo

    with np.errstate(divide='ignore', invalid='ignore'):
        direct = gap / np.log1p(gap / lo)
    delta = gap / total
    series = 0.5 * total * (1.0 - delta ** 2 / 3.0 - 4.0 * delta ** 4 / 45.0)
    return series, direct


def log_mean(a: ArrayLike, b: ArrayLike) -> Union[float, np.ndarray]:
    """
    Logarithmic mean (a - b) / (log a - log b), equal to a when a = b

    Near the diagonal a symmetric series in delta = (a - b) / (a + b) is used:
    Lambda = m (1 - delta^2/3 - 4 delta^4/45), m the arithmetic mean. Away from
    it, log a - log b is evaluated as log1p((hi - lo) / lo) to avoid cancellation.

    Args:
        a, b: Positive reals or arrays of them

    Returns:
        float or np.ndarray, between sqrt(ab) and (a + b) / 2
    """
    series, direct = log_mean_branches(a, b)
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    gap = np.abs(a_arr - b_arr)
    result = np.where(gap <= LOG_MEAN_SEAM * (a_arr + b_arr), series, direct)
    if result.ndim == 0:
        return float(result)
    return result


def _edge_differences(g: WeightedMultigraph, h: np.ndarray) -> np.ndarray:
    """(B h)_e = h(head) - h(tail); h may carry extra trailing axes"""
    return h[g.heads] - h[g.tails]


def _fisher_columns(g: WeightedMultigraph, h: np.ndarray) -> np.ndarray:
    log_h = np.log(h)
    dh = _edge_differences(g, h)
    dlog = _edge_differences(g, log_h)
    return np.einsum('e,e...->...', g.conductances, dh * dlog)


def fisher(g: WeightedMultigraph, h: ArrayLike) -> float:
    """
    Discrete Fisher information I(h) = h^T L log h

    Evaluated edge by edge as sum c_xy (h(x) - h(y)) (log h(x) - log h(y)),
    cross-checked against the matrix form.

    Args:
        g: Graph
        h: Strictly positive vertex vector

    Returns:
        float: I(h) >= 0
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (g.n,):
        raise DomainError(f"h must have length n={g.n}, got shape {h.shape}")
    if np.any(~(h > 0)) or not np.all(np.isfinite(h)):
        raise DomainError("Fisher information requires a strictly positive, finite h")

    value = float(_fisher_columns(g, h))

    L = incidence_system(g).L
    log_h = np.log(h)
    matrix_form = float(h @ L @ log_h)
    scale = max(1.0, float(np.abs(h) @ np.abs(L) @ np.abs(log_h)))
    if abs(value - matrix_form) > 1e-9 * scale:
        raise NumericalContractError(
            f"Fisher information paths disagree: edge sum {value!r}, h^T L log h {matrix_form!r}"
        )
    return value


def log_mean_cs_check(g: WeightedMultigraph, h: ArrayLike, w: ArrayLike) -> LogMeanBound:
    """
    Evaluate both sides of the logarithmic-mean Cauchy-Schwarz inequality

    Args:
        g: Graph
        h: Strictly positive vertex vector
        w: Nonnegative edge vector

    Returns:
        LogMeanBound(lhs, rhs, margin = rhs - lhs)
    """
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (g.m,):
        raise DomainError(f"w must have length m={g.m}, got shape {w.shape}")
    if np.any(w < 0):
        raise DomainError("w must be entrywise nonnegative")

    information = fisher(g, h)
    lhs = float(w @ (np.sqrt(g.conductances) * np.abs(_edge_differences(g, h)))) ** 2
    vertex_mass = float(np.sum(w ** 2 * (h[g.tails] + h[g.heads])))
    rhs = 0.5 * information * vertex_mass
    return LogMeanBound(lhs=lhs, rhs=rhs, margin=rhs - lhs)


def phi_functional(mu: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Phi_mu(h) = sum_x mu(x) h(x) log h(x); h may be n x k (one value per column)"""
    return np.einsum('x,x...->...', mu, xlogy(h, h))


def _heat_columns(ev: HeatKernelEvaluator, rho: np.ndarray, times: np.ndarray) -> np.ndarray:
    """h_s = H_s rho for every s in times, as an n x len(times) array"""
    psi = ev.decomposition.eigenvectors
    inv_root = 1.0 / np.sqrt(ev.mu)
    coefficients = psi.T @ (inv_root * rho)
    decay = np.exp(-np.outer(ev.decomposition.eigenvalues, times)) * coefficients[:, None]
    return inv_root[:, None] * (psi @ decay)


def _uniformized_columns(ev: HeatKernelEvaluator, rho: np.ndarray, times: np.ndarray) -> np.ndarray:
    """
    h_s = exp(-s M^{-1} L) M^{-1} rho for short times, by uniformization

    With q = max_x deg_c(x) / mu(x) the matrix N = I - M^{-1} L / q is entrywise
    nonnegative and exp(-s M^{-1} L) = e^{-sq} sum_k (sq)^k / k! N^k. All terms
    are nonnegative, so an entry of order s^d keeps full relative precision.
    q <= lambda_n, hence sq <= DISSIPATION_HEAD_FACTOR on the head grid and
    n + 4 terms reach every vertex with truncation far below round-off.
    """
    generator = incidence_system(ev.graph).L / ev.mu[:, None]
    q = float(np.max(np.diag(generator)))
    N = np.maximum(np.eye(ev.graph.n) - generator / q, 0.0)

    x = q * times
    power = rho / ev.mu
    coefficient = np.ones_like(times)
    columns = np.zeros((ev.graph.n, times.size))
    for k in range(ev.graph.n + 4):
        columns += np.outer(power, coefficient)
        power = N @ power
        coefficient = coefficient * x / (k + 1)
    return columns * np.exp(-x)[None, :]


def _head_integral(g: WeightedMultigraph, ev: HeatKernelEvaluator, rho: np.ndarray,
                   s_min: float, panels: int) -> Tuple[float, float]:
    """
    int_0^{s_min} I(h_s) ds as (quadrature on [s_floor, s_min], remainder on [0, s_floor])

    Near 0, I(h_s) = a + b log(1/s) + o(1) (b > 0 when rho misses a vertex),
    so int_0^eps I = eps (I(h_eps) + b); b is read off the two smallest samples.
    """
    s_floor = DISSIPATION_FLOOR_FACTOR / ev.lambda_n
    times = time_grid(s_floor, s_min, panels)[1:]
    h = np.maximum(_uniformized_columns(ev, rho, times), _TINY)
    information = _fisher_columns(g, h)

    quadrature = float(simpson(information, x=times))
    slope = max((information[0] - information[1]) / math.log(times[1] / times[0]), 0.0)
    remainder = float(times[0] * (information[0] + slope))
    return quadrature, remainder


def dissipation_trace(g: WeightedMultigraph, mu: ArrayLike, rho: ArrayLike, tol: float = 1e-8) -> DissipationTrace:
    """
    Integrate the Fisher information along the heat flow started from rho

    Grid: geometric on [1e-4 / lambda_n, 40 / lambda_2], composite Simpson,
    plus a separate head grid on [1e-12 / lambda_n, 1e-4 / lambda_n] evaluated
    by uniformization. The integral is never derived from the closed form.

    Args:
        g: Connected graph
        mu: Strictly positive probability vector (the reference measure)
        rho: Probability vector (zeros allowed, e.g. a point mass)
        tol: Quadrature tolerance; selects the grid density

    Returns:
        DissipationTrace
    """
    rho = _probability_vector(rho, "rho")
    ev = heat_kernel_evaluator(g, mu)
    mu = ev.mu
    if rho.shape != mu.shape:
        raise DomainError("rho and mu must have the same length")

    panels = panels_for_tolerance(tol)
    s_min = DISSIPATION_HEAD_FACTOR / ev.lambda_n
    s_max = DISSIPATION_HORIZON_FACTOR / ev.lambda_2
    times = time_grid(s_min, s_max, panels)[1:]

    h = np.maximum(_heat_columns(ev, rho, times), _TINY)
    information = _fisher_columns(g, h)
    phi = phi_functional(mu, h)

    quadrature = float(simpson(information, x=times))
    telescoped = float(phi[0] - phi[-1])
    head_quadrature, head_remainder = _head_integral(g, ev, rho, s_min, panels)
    tail = float(phi[-1])

    trace = DissipationTrace(
        times=times,
        fisher=information,
        phi=phi,
        quadrature=quadrature,
        telescoped=telescoped,
        head_quadrature=head_quadrature,
        head_remainder=head_remainder,
        tail_correction=tail,
        integral=head_remainder + head_quadrature + quadrature + tail,
        closed_form=relative_entropy(rho, mu),
    )
    logger.debug(f"Dissipation trace: {times.size} samples, integral {trace.integral:.12g}, "
                 f"closed form {trace.closed_form:.12g}, telescoping gap {trace.telescoping_gap:.2e}")
    return trace


def debruijn_residuals(trace: DissipationTrace, floor: float = 1e-6) -> np.ndarray:
    """
    Relative mismatch between the slope of Phi_mu(h_s) and -I(h_s), per Simpson panel pair

    On each pair [s_k, s_{k+2}] the finite-difference slope of Phi_mu is compared
    with the Simpson mean of -I over the same pair. Pairs whose mean I is below
    floor * (largest mean) are dropped: round-off in Phi dominates there.
    """
    s, information, phi = trace.times, trace.fisher, trace.phi
    start = np.arange(0, s.size - 2, 2)
    h0 = s[start + 1] - s[start]
    h1 = s[start + 2] - s[start + 1]
    span = h0 + h1
    # three-point Simpson on a nonuniform pair
    area = span / 6.0 * ((2.0 - h1 / h0) * information[start]
                         + span ** 2 / (h0 * h1) * information[start + 1]
                         + (2.0 - h0 / h1) * information[start + 2])
    mean = area / span
    slope = (phi[start + 2] - phi[start]) / span
    keep = mean >= floor * float(mean.max())
    return np.abs(slope[keep] + mean[keep]) / mean[keep]


def _positive_weights(g: WeightedMultigraph, w: ArrayLike) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (g.m,):
        raise DomainError(f"w must have length m={g.m}, got shape {w.shape}")
    if np.any(w == 0):
        raise ZeroWeightError("w has a zero entry; the heat-kernel path needs w > 0")
    if np.any(w < 0):
        raise DomainError("w must be strictly positive")
    return w


def heat_variation_check(g: WeightedMultigraph, w: ArrayLike, tol: float = 1e-6) -> HeatVariation:
    """
    Time integral of the entrywise-absolute edge heat kernel against w

    The absolute value sits inside the integral, so there is no spectral
    closed form: the integrand is evaluated on the time grid and integrated
    by composite Simpson. Beyond the horizon T each entry is bounded through
    F_ee(t) <= e^{-lambda_2 (t - T)} F_ee(T) and Cauchy-Schwarz; that bound is
    added to lhs.

    Args:
        g: Connected graph
        w: Strictly positive edge vector
        tol: Tail tolerance

    Returns:
        HeatVariation(lhs, rhs = 2 ||w||^2 H(mu_w), tail_bound)
    """
    w = _positive_weights(g, w)
    weighting = measure_from_weights(g, w)
    ev = heat_kernel_evaluator(g, weighting.mu)

    modes = edge_modes(g, ev.decomposition)[:, 1:]
    lam = ev.decomposition.eigenvalues[1:]
    lambda_2 = ev.lambda_2

    diagonal_at_zero = (modes ** 2) @ lam
    Q = float(w @ np.sqrt(diagonal_at_zero)) ** 2 / lambda_2
    horizon = max(math.log(max(Q / tol, 1.0)), 1.0) / lambda_2
    times = time_grid(1e-3 / ev.lambda_n, horizon, panels_for_tolerance(tol))

    values = np.empty(times.size)
    for k, t in enumerate(times):
        F = (modes * (lam * np.exp(-t * lam))[None, :]) @ modes.T
        values[k] = w @ np.abs(F) @ w

    diagonal_at_horizon = (modes ** 2) @ (lam * np.exp(-horizon * lam))
    tail_bound = float(w @ np.sqrt(diagonal_at_horizon)) ** 2 / lambda_2

    lhs = float(simpson(values, x=times)) + tail_bound
    rhs = 2.0 * weighting.norm_squared * entropy(weighting.mu)
    logger.debug(f"Heat variation: lhs {lhs:.10g} rhs {rhs:.10g} ({times.size} nodes)")
    return HeatVariation(lhs=lhs, rhs=rhs, tail_bound=tail_bound)


def pointwise_variation_check(g: WeightedMultigraph, w: ArrayLike, s: float,
                              ev: Optional[HeatKernelEvaluator] = None) -> PointwiseVariation:
    """
    Per-vertex step of the variation estimate at time s > 0

    lhs_v = (w^T C^{1/2} |B H_s 1_v|)^2, rhs_v = ||w||^2 I(H_s 1_v), using
    mu_w^T H_s 1_v = 1.
    """
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    w = _positive_weights(g, w)
    if ev is None:
        ev = heat_kernel_evaluator(g, measure_from_weights(g, w).mu)

    H = np.maximum(heat_H(ev, s), _TINY)
    weighted = w * np.sqrt(g.conductances)
    lhs = (weighted @ np.abs(_edge_differences(g, H))) ** 2
    rhs = float(w @ w) * _fisher_columns(g, H)
    return PointwiseVariation(lhs=lhs, rhs=rhs)


# Example usage and testing
if __name__ == "__main__":
    from flowloc.data_sources.graph_core import build_graph

    triangle = build_graph([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    print(f"log_mean(e, 1) = {log_mean(math.e, 1.0):.12f} (expected {math.e - 1:.12f})")
    print(f"I(1, 2, 4) = {fisher(triangle, [1.0, 2.0, 4.0]):.12f}")

    trace = dissipation_trace(triangle, np.full(3, 1 / 3), [1.0, 0.0, 0.0])
    print(f"dissipation integral = {trace.integral:.10f} (closed form log 3 = {math.log(3):.10f})")

    variation = heat_variation_check(triangle, np.ones(3))
    print(f"heat variation: {variation.lhs:.6f} <= {variation.rhs:.6f}: {variation.holds()}")
