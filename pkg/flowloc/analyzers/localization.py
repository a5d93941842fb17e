"""
Localization Verifier for FlowLoc
Executable checks of the localization bounds on transfer-current matrices, the
parallel-edge gadget trend, and the supporting identities, plus the suite runner
Pass rule (upper): value <= bound * (1 + rel_tol) + abs_tol; (lower) mirrored
"""

import asyncio
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from flowloc.analyzers.entropy import (
    LOG_MEAN_SEAM,
    debruijn_residuals,
    dissipation_trace,
    entropy,
    heat_variation_check,
    log_mean,
    log_mean_branches,
    log_mean_cs_check,
)
from flowloc.analyzers.heat_kernel import green_time_quadrature, heat_kernel_evaluator
from flowloc.analyzers.linalg import decompose, nonneg_spectral_norm, projected_green, NormEstimate
from flowloc.analyzers.transfer_current import (
    CurrentMatrices,
    avg_l1_flow,
    current_vectors_direct,
    projection_residuals,
    transfer_current_matrix,
)
from flowloc.data_sources.graph_core import WeightedMultigraph, measure_from_weights
from flowloc.data_sources.graph_gen import FamilySpec, family_sizes, generate, parallel_gadget
from flowloc.utils.config import (
    ABS_TOL,
    CHECKS,
    CONDUCTANCE_MODES,
    DEFAULT_JOBS,
    DEFAULT_SEED,
    DEFAULT_SIZES,
    DEFAULT_SUITE_FAMILIES,
    FAMILIES,
    GADGET_BIG_PER_EDGE,
    GADGET_DEFAULT_SIZES,
    GADGET_FACTOR,
    GNP_DEFAULT_P,
    HEAT_VARIATION_MAX_EDGES,
    HEAT_VARIATION_REL_TOL,
    LOG_MEAN_SANDWICH_PAIRS,
    QUADRATURE_MAX_N,
    REL_TOL,
    validate_check_name,
)
from flowloc.utils.errors import NonUnitConductanceError, NumericalContractError

logger = logging.getLogger(__name__)

# Contract thresholds for the identity checks
PROJECTION_IDEMPOTENCE_TOL = 1e-9
PROJECTION_SYMMETRY_TOL = 1e-10
PROJECTION_TRACE_TOL = 1e-8
RECIPROCITY_TOL = 1e-10
ORACLE_TOL = 1e-8
GREEN_QUADRATURE_TOL = 1e-6
GREEN_AGREEMENT_TOL = 1e-5
DISSIPATION_QUADRATURE_TOL = 1e-10
DISSIPATION_REL_TOL = 1e-5
TELESCOPING_TOL = 1e-8
CONSISTENCY_TOL = 1e-6
SANDWICH_REL_SLACK = 1e-12
SEAM_CONTINUITY_TOL = 1e-10

Status = Literal["pass", "fail", "skipped", "error"]


class GraphDescriptor(BaseModel):
    """Where a graph came from: enough to regenerate it"""
    model_config = ConfigDict(frozen=True)

    family: str = "custom"
    size: int = 0
    n: int = 0
    m: int = 0
    seed: int = DEFAULT_SEED
    conductance: str = "given"


def describe(g: WeightedMultigraph, family: str = "custom", seed: int = DEFAULT_SEED,
             conductance: Optional[str] = None, size: Optional[int] = None) -> GraphDescriptor:
    if conductance is None:
        conductance = "unit" if g.is_unweighted else "given"
    return GraphDescriptor(family=family, size=g.n if size is None else size, n=g.n, m=g.m,
                           seed=seed, conductance=conductance)


class VerificationReport(BaseModel):
    """
    One check on one instance

    margin is the distance on the safe side of the bound: bound - value for
    upper bounds, value - bound for lower bounds. runtime is kept on the
    object but never serialized, so reports replay byte-identically.
    """
    model_config = ConfigDict(populate_by_name=True)

    check: str
    family: str
    n: int
    m: int
    seed: int
    conductance: str
    value: Optional[float] = None
    bound: Optional[float] = None
    margin: Optional[float] = None
    passed: Optional[bool] = Field(default=None, alias="pass")
    status: Status
    direction: Literal["upper", "lower"] = "upper"
    log_n: float
    rel_tol: float
    abs_tol: float
    reason: Optional[str] = None
    details: Dict[str, float] = Field(default_factory=dict)
    runtime: float = Field(default=0.0, exclude=True)

    def row(self) -> dict:
        """Serialized form with the `pass` key"""
        return self.model_dump(by_alias=True)


def _log_n(n: int) -> float:
    return math.log(n) if n >= 2 else 0.0


def _bound_report(check: str, descriptor: GraphDescriptor, value: float, bound: float, *,
                  rel_tol: float, abs_tol: float, direction: str = "upper",
                  details: Optional[Dict[str, float]] = None, reason: Optional[str] = None) -> VerificationReport:
    value, bound = float(value), float(bound)
    if direction == "upper":
        passed = value <= bound * (1.0 + rel_tol) + abs_tol
        margin = bound - value
    else:
        passed = value >= bound * (1.0 - rel_tol) - abs_tol
        margin = value - bound
    return VerificationReport(
        check=check,
        family=descriptor.family,
        n=descriptor.n,
        m=descriptor.m,
        seed=descriptor.seed,
        conductance=descriptor.conductance,
        value=value,
        bound=bound,
        margin=margin,
        passed=passed,
        status="pass" if passed else "fail",
        direction=direction,
        log_n=_log_n(descriptor.n),
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        reason=reason,
        details={k: float(v) for k, v in (details or {}).items()},
    )


def _unavailable_report(check: str, descriptor: GraphDescriptor, status: Status, reason: str,
                        rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    return VerificationReport(
        check=check,
        family=descriptor.family,
        n=descriptor.n,
        m=descriptor.m,
        seed=descriptor.seed,
        conductance=descriptor.conductance,
        status=status,
        log_n=_log_n(descriptor.n),
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        reason=reason,
    )


def matrix_norm(A: np.ndarray) -> NormEstimate:
    """
    Spectral norm of an entrywise-nonnegative matrix

    Symmetric input goes straight to power iteration; otherwise the norm is
    the square root of the Perron root of A^T A.
    """
    if np.array_equal(A, A.T):
        return nonneg_spectral_norm(A)
    gram = A.T @ A
    estimate = nonneg_spectral_norm(0.5 * (gram + gram.T))
    return NormEstimate(value=math.sqrt(estimate.value), vector=estimate.vector,
                        iterations=estimate.iterations, converged=estimate.converged)


def check_quadratic_form_bound(g: WeightedMultigraph, w: Sequence[float], *,
                               descriptor: Optional[GraphDescriptor] = None,
                               currents: Optional[CurrentMatrices] = None,
                               rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    """
    |w^T Pibar w| <= 2 H(mu_w) ||w||^2, both sides evaluated directly

    Args:
        g: Graph
        w: Edge vector, not identically zero

    Raises:
        ZeroWeightError: w == 0
    """
    descriptor = descriptor or describe(g)
    w = np.asarray(w, dtype=np.float64)
    weighting = measure_from_weights(g, w)
    currents = currents or transfer_current_matrix(g)

    lhs = abs(float(w @ currents.Pibar @ w))
    entropy_mu = entropy(weighting.mu)
    rhs = 2.0 * entropy_mu * weighting.norm_squared
    return _bound_report("quadratic_form", descriptor, lhs, rhs, rel_tol=rel_tol, abs_tol=abs_tol,
                         details={"entropy_mu": entropy_mu, "w_norm_squared": weighting.norm_squared})


def check_spectral_bound_weighted(g: WeightedMultigraph, *,
                                  descriptor: Optional[GraphDescriptor] = None,
                                  currents: Optional[CurrentMatrices] = None,
                                  rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    """
    ||Pibar||_{2->2} <= 2 ln n

    A power iteration that hits its cap is flagged in `reason`, and the
    report is still decided on the best estimate.
    """
    descriptor = descriptor or describe(g)
    currents = currents or transfer_current_matrix(g)
    estimate = nonneg_spectral_norm(currents.Pibar)

    reason = None if estimate.converged else f"power iteration did not converge in {estimate.iterations} iterations"
    return _bound_report("spectral_weighted", descriptor, estimate.value, 2.0 * math.log(g.n),
                         rel_tol=rel_tol, abs_tol=abs_tol, reason=reason,
                         details={"iterations": estimate.iterations, "converged": float(estimate.converged)})


def check_unweighted_bounds(g: WeightedMultigraph, *,
                            descriptor: Optional[GraphDescriptor] = None,
                            currents: Optional[CurrentMatrices] = None,
                            rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    """
    avg_l1_flow <= ||Kbar||_{2->2} <= 2 ln n on a unit-conductance graph

    The report's value is ||Kbar||; avg_l1 rides along in details. The first
    inequality holds by construction (the power iteration starts at the
    normalized ones vector), so its violation is a numerical error.

    Raises:
        NonUnitConductanceError: some conductance differs from 1
        NumericalContractError: avg_l1_flow exceeds the computed norm
    """
    if not g.is_unweighted:
        raise NonUnitConductanceError("unweighted_bounds requires every conductance to equal 1")
    descriptor = descriptor or describe(g)
    currents = currents or transfer_current_matrix(g)

    estimate = nonneg_spectral_norm(currents.Kbar)
    average = avg_l1_flow(g, currents)
    if average > estimate.value * (1.0 + rel_tol) + abs_tol:
        raise NumericalContractError(
            f"avg l1 flow {average!r} exceeds ||Kbar|| estimate {estimate.value!r}"
        )
    return _bound_report("unweighted_bounds", descriptor, estimate.value, 2.0 * math.log(g.n),
                         rel_tol=rel_tol, abs_tol=abs_tol,
                         details={"avg_l1": average, "kbar_norm": estimate.value,
                                  "chain_margin": estimate.value - average})


def check_parallel_gadget(m: int, big: float, *, seed: int = DEFAULT_SEED,
                          rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    """
    ||Kbar|| >= 0.9 sqrt(m) on the two-vertex gadget once big >= 100 m

    0.9 sqrt(m) is a desk-scale proxy for the sqrt(m) limit as big grows; the
    report labels it so. The same instance must keep ||Pibar|| <= 2 ln 2, so
    the report fails if either side breaks. Below big = 100 m the proxy does
    not apply and the report is skipped.
    """
    g = parallel_gadget(m, big)
    descriptor = GraphDescriptor(family="parallel_gadget", size=m, n=g.n, m=g.m, seed=seed,
                                 conductance=f"big={big:g}")
    currents = transfer_current_matrix(g)
    kbar = matrix_norm(currents.Kbar).value
    pibar = nonneg_spectral_norm(currents.Pibar).value
    pibar_bound = 2.0 * math.log(2.0)

    details = {"kbar_norm": kbar, "pibar_norm": pibar, "pibar_bound": pibar_bound,
               "sqrt_m": math.sqrt(m), "proxy_factor": GADGET_FACTOR, "big": big}
    report = _bound_report("parallel_gadget", descriptor, kbar, GADGET_FACTOR * math.sqrt(m),
                           direction="lower", rel_tol=rel_tol, abs_tol=abs_tol, details=details,
                           reason="lower bound is the desk-scale proxy 0.9*sqrt(m) for the sqrt(m) limit")
    if big < GADGET_BIG_PER_EDGE * m:
        return report.model_copy(update={
            "status": "skipped",
            "passed": None,
            "reason": f"big={big:g} below {GADGET_BIG_PER_EDGE:g}*m; the sqrt(m) proxy does not apply",
        })
    if pibar > pibar_bound * (1.0 + rel_tol) + abs_tol:
        return report.model_copy(update={
            "status": "fail",
            "passed": False,
            "reason": f"||Pibar|| = {pibar:.12g} exceeds 2 ln 2 = {pibar_bound:.12g}",
        })
    return report


def check_theorem_consistency(g: WeightedMultigraph, *,
                              descriptor: Optional[GraphDescriptor] = None,
                              currents: Optional[CurrentMatrices] = None,
                              rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> VerificationReport:
    """
    The quadratic-form path at the power-iteration vector reproduces ||Pibar||

    Value |w*^T Pibar w* - ||Pibar|||, bound 1e-6 ||Pibar||. The report also
    fails when w*^T Pibar w* exceeds the entropy bound 2 H(mu_{w*}) ||w*||^2
    (never above 2 ln n) beyond rel_tol / abs_tol.
    """
    descriptor = descriptor or describe(g)
    currents = currents or transfer_current_matrix(g)
    estimate = nonneg_spectral_norm(currents.Pibar)
    w_star = estimate.vector

    rayleigh = float(w_star @ currents.Pibar @ w_star)
    entropy_bound = 2.0 * entropy(measure_from_weights(g, w_star).mu) * float(w_star @ w_star)
    report = _bound_report("theorem_consistency", descriptor, abs(rayleigh - estimate.value),
                           CONSISTENCY_TOL * estimate.value, rel_tol=0.0, abs_tol=0.0,
                           details={"rayleigh": rayleigh, "pibar_norm": estimate.value,
                                    "entropy_bound": entropy_bound})
    if rayleigh > entropy_bound * (1.0 + rel_tol) + abs_tol:
        return report.model_copy(update={
            "status": "fail",
            "passed": False,
            "reason": f"w*^T Pibar w* = {rayleigh:.12g} exceeds the entropy bound {entropy_bound:.12g}",
        })
    return report


def check_projection(g: WeightedMultigraph, *,
                     descriptor: Optional[GraphDescriptor] = None,
                     currents: Optional[CurrentMatrices] = None) -> VerificationReport:
    """
    Pi is the orthogonal projection of rank n - 1; K = K^T when C = I

    Value is the largest defect in units of its own threshold (bound 1).
    """
    descriptor = descriptor or describe(g)
    currents = currents or transfer_current_matrix(g)
    residuals = projection_residuals(currents, g.n)

    scores = [
        residuals["idempotence"] / PROJECTION_IDEMPOTENCE_TOL,
        residuals["symmetry"] / PROJECTION_SYMMETRY_TOL,
        residuals["trace"] / PROJECTION_TRACE_TOL,
    ]
    if g.is_unweighted:
        scores.append(residuals["reciprocity"] / RECIPROCITY_TOL)
    return _bound_report("projection", descriptor, max(scores), 1.0, rel_tol=0.0, abs_tol=0.0,
                         details=residuals)


def check_oracle_equivalence(g: WeightedMultigraph, *,
                             descriptor: Optional[GraphDescriptor] = None,
                             currents: Optional[CurrentMatrices] = None) -> VerificationReport:
    """Spectral current vectors against direct grounded solves, entrywise"""
    descriptor = descriptor or describe(g)
    currents = currents or transfer_current_matrix(g)
    difference = float(np.max(np.abs(currents.K - current_vectors_direct(g))))
    return _bound_report("oracle_equivalence", descriptor, difference, ORACLE_TOL, rel_tol=0.0, abs_tol=0.0)


def check_green_integral(g: WeightedMultigraph, *,
                         descriptor: Optional[GraphDescriptor] = None) -> VerificationReport:
    """
    int_0^inf B H_t B^T dt by quadrature against B L^+ B^T

    The heat kernel is taken against the conductance-degree measure; the
    identity holds for every positive measure.
    """
    descriptor = descriptor or describe(g)
    degree = (np.bincount(g.tails, weights=g.conductances, minlength=g.n)
              + np.bincount(g.heads, weights=g.conductances, minlength=g.n))
    ev = heat_kernel_evaluator(g, degree / degree.sum())

    exact = projected_green(g, decompose(g))
    approximate = green_time_quadrature(ev, g, GREEN_QUADRATURE_TOL)
    scale = 1.0 + float(np.max(np.abs(exact)))
    difference = float(np.max(np.abs(approximate - exact)))
    return _bound_report("green_integral", descriptor, difference, GREEN_AGREEMENT_TOL * scale,
                         rel_tol=0.0, abs_tol=0.0, details={"max_entry": scale - 1.0})


def check_entropy_dissipation(g: WeightedMultigraph, w: Sequence[float], v: int, *,
                              descriptor: Optional[GraphDescriptor] = None) -> VerificationReport:
    """
    int_0^inf I(h_s) ds = -ln mu_w(v) for h_s started from the point mass at v

    Value is the larger of the relative mismatch (threshold 1e-5) and the
    quadrature-versus-telescoping gap (threshold 1e-8), each in units of its
    threshold; bound 1.
    """
    descriptor = descriptor or describe(g)
    mu = measure_from_weights(g, w).mu
    rho = np.zeros(g.n)
    rho[v] = 1.0
    trace = dissipation_trace(g, mu, rho, DISSIPATION_QUADRATURE_TOL)

    relative = trace.discrepancy / trace.closed_form
    slope_residuals = debruijn_residuals(trace)
    score = max(relative / DISSIPATION_REL_TOL, trace.telescoping_gap / TELESCOPING_TOL)
    return _bound_report("entropy_dissipation", descriptor, score, 1.0, rel_tol=0.0, abs_tol=0.0,
                         details={"integral": trace.integral, "closed_form": trace.closed_form,
                                  "relative_error": relative, "telescoping_gap": trace.telescoping_gap,
                                  "debruijn_max": float(slope_residuals.max()) if slope_residuals.size else 0.0,
                                  "vertex": v, "samples": trace.times.size})


def check_log_mean_cs(g: WeightedMultigraph, h: Sequence[float], w: Sequence[float], *,
                      descriptor: Optional[GraphDescriptor] = None,
                      rel_tol: float = REL_TOL) -> VerificationReport:
    """(w^T C^{1/2} |Bh|)^2 <= (I(h)/2) sum_x h(x) sum_{e: x in e} w_e^2 with slack rel_tol * rhs"""
    descriptor = descriptor or describe(g)
    result = log_mean_cs_check(g, h, w)
    return _bound_report("log_mean_cs", descriptor, result.lhs, result.rhs, rel_tol=rel_tol, abs_tol=0.0)


def check_heat_variation(g: WeightedMultigraph, w: Sequence[float], *,
                         descriptor: Optional[GraphDescriptor] = None,
                         abs_tol: float = ABS_TOL) -> VerificationReport:
    """int_0^inf w^T |C^{1/2} B H_t B^T C^{1/2}| w dt <= 2 ||w||^2 H(mu_w)"""
    descriptor = descriptor or describe(g)
    result = heat_variation_check(g, w)
    return _bound_report("heat_variation", descriptor, result.lhs, result.rhs,
                         rel_tol=HEAT_VARIATION_REL_TOL, abs_tol=abs_tol,
                         details={"tail_bound": result.tail_bound})


def check_log_mean_sandwich(pairs: int = LOG_MEAN_SANDWICH_PAIRS, seed: int = DEFAULT_SEED) -> VerificationReport:
    """
    sqrt(ab) <= Lambda(a, b) <= (a + b) / 2 over 16 orders of magnitude

    Half the pairs are drawn independently, half near the diagonal so the
    series branch is exercised. Seam continuity compares both branches where
    they hand over. Value is the worse of the two defects in units of their
    thresholds; bound 1.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    half = pairs // 2
    a = 10.0 ** rng.uniform(-8.0, 8.0, size=pairs)
    b = np.concatenate([
        10.0 ** rng.uniform(-8.0, 8.0, size=half),
        a[half:] * (1.0 + 10.0 ** rng.uniform(-15.0, -1.0, size=pairs - half)),
    ])

    lam = log_mean(a, b)
    below = np.maximum(np.sqrt(a) * np.sqrt(b) - lam, 0.0) / lam
    above = np.maximum(lam - 0.5 * (a + b), 0.0) / lam
    sandwich = float(np.max(np.maximum(below, above)))

    # at the hand-over point |a - b| = seam * (a + b)
    seam_a = 10.0 ** rng.uniform(-8.0, 8.0, size=100)
    seam_b = seam_a * (1.0 + LOG_MEAN_SEAM) / (1.0 - LOG_MEAN_SEAM)
    series, direct = log_mean_branches(seam_a, seam_b)
    seam = float(np.max(np.abs(series - direct) / series))

    descriptor = GraphDescriptor(family="scalar", size=pairs, seed=seed, conductance="none")
    score = max(sandwich / SANDWICH_REL_SLACK, seam / SEAM_CONTINUITY_TOL)
    return _bound_report("log_mean_sandwich", descriptor, score, 1.0, rel_tol=0.0, abs_tol=0.0,
                         details={"sandwich_violation": sandwich, "seam_jump": seam, "pairs": pairs})


# ---------------------------------------------------------------------------
# Suite runner
# ---------------------------------------------------------------------------

class SuiteSpec(BaseModel):
    """Which instances and checks a verification run covers"""
    families: List[str] = Field(default_factory=lambda: list(DEFAULT_SUITE_FAMILIES))
    sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    conductance_modes: List[Literal["unit", "weighted"]] = Field(default_factory=lambda: list(CONDUCTANCE_MODES))
    checks: List[str] = Field(default_factory=lambda: list(CHECKS))
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    p: float = Field(default=GNP_DEFAULT_P, gt=0.0, le=1.0)
    m: Optional[int] = Field(default=None, ge=1)
    gadget_sizes: List[int] = Field(default_factory=lambda: list(GADGET_DEFAULT_SIZES))
    big: Optional[float] = Field(default=None, gt=1.0)
    rel_tol: float = Field(default=REL_TOL, gt=0.0)
    abs_tol: float = Field(default=ABS_TOL, gt=0.0)
    jobs: int = Field(default=DEFAULT_JOBS, ge=1)

    @field_validator("families")
    @classmethod
    def _known_families(cls, value: List[str]) -> List[str]:
        unknown = [f for f in value if f not in FAMILIES]
        if unknown:
            raise ValueError(f"unknown families: {', '.join(unknown)}")
        return value

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, value: List[str]) -> List[str]:
        unknown = [c for c in value if not validate_check_name(c)]
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
        return [c.strip().lower() for c in value]


@dataclass
class _Instance:
    """One generated graph and its ordering key in the report"""
    spec: FamilySpec
    key: Tuple[int, int, int]


GRAPH_CHECKS = [c for c in CHECKS if c not in ("log_mean_sandwich", "parallel_gadget")]


def _instances(suite: SuiteSpec) -> List[_Instance]:
    instances = []
    graph_checks_selected = any(c in GRAPH_CHECKS for c in suite.checks)
    for family in suite.families:
        if family == "parallel_gadget":
            continue
        if not graph_checks_selected:
            break
        for mode_index, mode in enumerate(suite.conductance_modes):
            if family == "random_weighted" and mode == "unit":
                continue
            for params in family_sizes(family, suite.sizes):
                spec = FamilySpec(family=family, conductance=mode, seed=suite.seed, p=suite.p,
                                  m=suite.m if family == "random_weighted" else None, **params)
                instances.append(_Instance(spec=spec, key=(FAMILIES.index(family), spec.size, mode_index)))

    if "parallel_gadget" in suite.checks or "parallel_gadget" in suite.families:
        for params in family_sizes("parallel_gadget", suite.gadget_sizes):
            spec = FamilySpec(family="parallel_gadget", seed=suite.seed, big=suite.big, **params)
            instances.append(_Instance(spec=spec, key=(FAMILIES.index("parallel_gadget"), spec.size, 0)))
    return instances


def _check_rng(suite: SuiteSpec, key: Tuple[int, int, int], check: str) -> np.random.Generator:
    family_index, size, mode_index = key
    sequence = np.random.SeedSequence([suite.seed, family_index, size, mode_index, CHECKS.index(check)])
    return np.random.Generator(np.random.PCG64(sequence))


def _expected_n(spec: FamilySpec) -> int:
    if spec.family == "grid2d":
        return spec.side ** 2
    if spec.family == "hypercube":
        return 2 ** spec.dimension
    if spec.family == "parallel_gadget":
        return 2
    return spec.n


def _instance_checks(suite: SuiteSpec, instance: _Instance) -> List[str]:
    if instance.spec.family == "parallel_gadget":
        if "parallel_gadget" in suite.checks:
            return ["parallel_gadget"] + [c for c in suite.checks if c in GRAPH_CHECKS]
        return [c for c in suite.checks if c in GRAPH_CHECKS]
    return [c for c in suite.checks if c in GRAPH_CHECKS]


def _run_graph_check(check: str, g: WeightedMultigraph, descriptor: GraphDescriptor,
                     currents: Callable[[], CurrentMatrices], rng: np.random.Generator,
                     suite: SuiteSpec) -> VerificationReport:
    tolerances = {"rel_tol": suite.rel_tol, "abs_tol": suite.abs_tol}

    if check == "quadratic_form":
        w = rng.standard_normal(g.m)
        return check_quadratic_form_bound(g, w, descriptor=descriptor, currents=currents(), **tolerances)
    if check == "spectral_weighted":
        return check_spectral_bound_weighted(g, descriptor=descriptor, currents=currents(), **tolerances)
    if check == "unweighted_bounds":
        if not g.is_unweighted:
            return _unavailable_report(check, descriptor, "skipped", "conductances are not all 1", **tolerances)
        return check_unweighted_bounds(g, descriptor=descriptor, currents=currents(), **tolerances)
    if check == "theorem_consistency":
        return check_theorem_consistency(g, descriptor=descriptor, currents=currents(), **tolerances)
    if check == "projection":
        return check_projection(g, descriptor=descriptor, currents=currents())
    if check == "log_mean_cs":
        h = 10.0 ** rng.uniform(-3.0, 3.0, size=g.n)
        w = rng.random(g.m)
        w[rng.random(g.m) < 0.2] = 0.0
        return check_log_mean_cs(g, h, w, descriptor=descriptor, rel_tol=suite.rel_tol)

    if check in ("oracle_equivalence", "green_integral", "entropy_dissipation") and g.n > QUADRATURE_MAX_N:
        return _unavailable_report(check, descriptor, "skipped", f"n={g.n} above the quadrature gate {QUADRATURE_MAX_N}",
                                   **tolerances)
    if check == "oracle_equivalence":
        return check_oracle_equivalence(g, descriptor=descriptor, currents=currents())
    if check == "green_integral":
        return check_green_integral(g, descriptor=descriptor)
    if check == "entropy_dissipation":
        w = rng.uniform(0.5, 2.0, size=g.m)
        v = int(rng.integers(0, g.n))
        return check_entropy_dissipation(g, w, v, descriptor=descriptor)
    if check == "heat_variation":
        if g.m > HEAT_VARIATION_MAX_EDGES:
            return _unavailable_report(check, descriptor, "skipped",
                                       f"m={g.m} above the heat-variation gate {HEAT_VARIATION_MAX_EDGES}", **tolerances)
        w = rng.uniform(0.1, 1.0, size=g.m)
        return check_heat_variation(g, w, descriptor=descriptor, abs_tol=suite.abs_tol)
    raise ValueError(f"{check} is not a per-graph check")


def _run_checks(suite: SuiteSpec, g: WeightedMultigraph, descriptor: GraphDescriptor, checks: Sequence[str],
                key: Tuple[int, int, int], gadget: Optional[Tuple[int, float]] = None) -> List[VerificationReport]:
    """Run checks on one graph; one check's error never stops the rest"""
    cached: Dict[str, CurrentMatrices] = {}

    def currents() -> CurrentMatrices:
        if "K" not in cached:
            cached["K"] = transfer_current_matrix(g)
        return cached["K"]

    reports = []
    for check in checks:
        started = time.perf_counter()
        try:
            if check == "parallel_gadget":
                report = check_parallel_gadget(gadget[0], gadget[1], seed=descriptor.seed,
                                               rel_tol=suite.rel_tol, abs_tol=suite.abs_tol)
            else:
                report = _run_graph_check(check, g, descriptor, currents, _check_rng(suite, key, check), suite)
        except Exception as e:
            logger.error(f"Check {check} failed on {descriptor.family} size {descriptor.size}: {e}", exc_info=True)
            report = _unavailable_report(check, descriptor, "error", f"{type(e).__name__}: {e}",
                                         suite.rel_tol, suite.abs_tol)
        report.runtime = time.perf_counter() - started
        if report.status == "fail":
            logger.warning(f"FAIL {check} on {descriptor.family} n={g.n}: value {report.value!r} bound {report.bound!r}")
        else:
            logger.debug(f"{report.status} {check} on {descriptor.family} n={g.n} ({report.runtime:.3f}s)")
        reports.append(report)
    return reports


def _run_instance(suite: SuiteSpec, instance: _Instance) -> List[VerificationReport]:
    """Generate one graph and run every selected check on it"""
    spec = instance.spec
    checks = _instance_checks(suite, instance)
    placeholder = GraphDescriptor(family=spec.family, size=spec.size, n=_expected_n(spec), m=0,
                                  seed=spec.seed, conductance=spec.conductance)
    try:
        g = generate(spec)
    except Exception as e:
        logger.error(f"Could not generate {spec.family} (size {spec.size}): {e}", exc_info=True)
        return [_unavailable_report(c, placeholder, "error", f"generate: {e}", suite.rel_tol, suite.abs_tol)
                for c in checks]

    gadget = None
    conductance = spec.conductance
    if spec.family == "parallel_gadget":
        gadget = (spec.m, spec.big_conductance)
        conductance = f"big={spec.big_conductance:g}"
    descriptor = describe(g, family=spec.family, seed=spec.seed, conductance=conductance, size=spec.size)
    logger.info(f"Running {len(checks)} checks on {spec.family} size {spec.size} ({conductance}): n={g.n} m={g.m}")
    return _run_checks(suite, g, descriptor, checks, instance.key, gadget)


def verify_graph(g: WeightedMultigraph, suite: SuiteSpec, family: str = "file") -> List[VerificationReport]:
    """
    Run the selected per-graph checks on a single given graph

    Gadget and scalar checks need no graph and are not run here.
    """
    descriptor = describe(g, family=family, seed=suite.seed)
    checks = [c for c in suite.checks if c in GRAPH_CHECKS]
    logger.info(f"Running {len(checks)} checks on {family}: n={g.n} m={g.m}")
    return _run_checks(suite, g, descriptor, checks, (len(FAMILIES), g.n, 0))


def _order_key(report: VerificationReport, instance_key: Tuple[int, int, int]) -> Tuple:
    return instance_key + (CHECKS.index(report.check),)


async def run_suite_async(suite: SuiteSpec) -> List[VerificationReport]:
    """
    Run the suite with up to suite.jobs instances in flight

    Instances run in worker threads. Results are ordered by (family, size,
    conductance mode, check), so the output does not depend on scheduling.
    """
    if not suite.sizes:
        return []
    instances = _instances(suite)
    semaphore = asyncio.Semaphore(suite.jobs)

    async def bounded(instance: _Instance) -> List[VerificationReport]:
        async with semaphore:
            return await asyncio.to_thread(_run_instance, suite, instance)

    logger.info(f"Running suite: {len(instances)} instances, checks {', '.join(suite.checks)}, jobs {suite.jobs}")
    results = await asyncio.gather(*(bounded(i) for i in instances), return_exceptions=True)

    keyed: List[Tuple[Tuple, VerificationReport]] = []
    for instance, result in zip(instances, results):
        if isinstance(result, BaseException):
            logger.error(f"Instance {instance.spec.family} size {instance.spec.size} crashed: {result}")
            descriptor = GraphDescriptor(family=instance.spec.family, size=instance.spec.size,
                                         n=_expected_n(instance.spec), seed=instance.spec.seed,
                                         conductance=instance.spec.conductance)
            result = [_unavailable_report(c, descriptor, "error", str(result), suite.rel_tol, suite.abs_tol)
                      for c in _instance_checks(suite, instance)]
        keyed.extend((_order_key(r, instance.key), r) for r in result)

    if "log_mean_sandwich" in suite.checks:
        sandwich = check_log_mean_sandwich(seed=suite.seed)
        keyed.append(((len(FAMILIES), 0, 0, CHECKS.index("log_mean_sandwich")), sandwich))

    keyed.sort(key=lambda item: item[0])
    reports = [r for _, r in keyed]

    counts = {status: sum(r.status == status for r in reports) for status in ("pass", "fail", "skipped", "error")}
    logger.info(f"Suite finished: {len(reports)} reports, " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    return reports


def run_suite(suite: SuiteSpec) -> List[VerificationReport]:
    """
    Run every selected check over the suite's families and sizes

    Deterministic for a fixed SuiteSpec: random inputs (w, h, vertex choices)
    come from generators seeded by (seed, instance, check). An empty size
    ladder yields no graph reports.
    """
    return asyncio.run(run_suite_async(suite))
