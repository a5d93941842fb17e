import math

import numpy as np
import pytest
from pydantic import ValidationError

from flowloc.analyzers.localization import (
    SuiteSpec,
    VerificationReport,
    check_entropy_dissipation,
    check_green_integral,
    check_heat_variation,
    check_log_mean_cs,
    check_log_mean_sandwich,
    check_oracle_equivalence,
    check_parallel_gadget,
    check_projection,
    check_quadratic_form_bound,
    check_spectral_bound_weighted,
    check_theorem_consistency,
    check_unweighted_bounds,
    describe,
    matrix_norm,
    run_suite,
    verify_graph,
)
from flowloc.analyzers.linalg import NormEstimate
from flowloc.analyzers.transfer_current import transfer_current_matrix
from flowloc.data_sources.graph_gen import FamilySpec, generate
from flowloc.utils.config import CHECKS
from flowloc.utils.errors import NonUnitConductanceError, ZeroWeightError


def assert_consistent(report: VerificationReport):
    """pass <=> value on the safe side of bound within the recorded tolerances"""
    if report.direction == "upper":
        expected = report.value <= report.bound * (1 + report.rel_tol) + report.abs_tol
    else:
        expected = report.value >= report.bound * (1 - report.rel_tol) - report.abs_tol
    assert report.passed == expected
    assert report.status == ("pass" if expected else "fail")


class TestQuadraticForm:
    def test_single_edge(self, single_edge):
        report = check_quadratic_form_bound(single_edge, [1.0])
        assert report.value == pytest.approx(1.0)
        assert report.bound == pytest.approx(2 * math.log(2))
        assert report.passed
        assert report.margin == pytest.approx(2 * math.log(2) - 1.0)
        assert_consistent(report)

    def test_single_edge_support(self):
        g = generate(FamilySpec(family="grid2d", k=5))
        w = np.zeros(g.m)
        w[7] = 3.0
        report = check_quadratic_form_bound(g, w)
        assert report.value <= 9.0 + 1e-12
        assert report.bound <= 2 * 9.0 * math.log(2) + 1e-12
        assert report.passed

    def test_random_instances(self):
        rng = np.random.Generator(np.random.PCG64(99))
        families = ["gnp", "random_weighted", "complete", "cycle", "star"]
        for k in range(200):
            n = int(rng.integers(3, 41))
            g = generate(FamilySpec(family=families[k % 5], n=n, conductance="weighted", seed=k))
            w = rng.standard_normal(g.m)
            report = check_quadratic_form_bound(g, w)
            assert report.passed, report

    def test_zero_weight(self, triangle):
        with pytest.raises(ZeroWeightError):
            check_quadratic_form_bound(triangle, np.zeros(3))


class TestSpectralBounds:
    def test_tree_norm_is_one(self, star5):
        report = check_spectral_bound_weighted(star5)
        assert report.value == pytest.approx(1.0, abs=1e-10)
        assert report.bound == pytest.approx(2 * math.log(5))
        assert report.log_n == pytest.approx(math.log(5))
        assert report.passed

    def test_complete_graph(self):
        g = generate(FamilySpec(family="complete", n=8))
        report = check_spectral_bound_weighted(g)
        currents = transfer_current_matrix(g)
        assert report.value == pytest.approx(np.linalg.eigvalsh(currents.Pibar)[-1], rel=1e-9)
        assert report.value <= 2 * math.log(8)

    def test_unweighted_tree(self, path4):
        report = check_unweighted_bounds(path4)
        assert report.value == pytest.approx(1.0, abs=1e-10)
        assert report.details["avg_l1"] == pytest.approx(1.0, abs=1e-10)
        assert report.passed

    @pytest.mark.parametrize("n", [3, 6, 11])
    def test_unweighted_cycle(self, n):
        report = check_unweighted_bounds(generate(FamilySpec(family="cycle", n=n)))
        assert report.details["avg_l1"] == pytest.approx(2 * (n - 1) / n, abs=1e-10)
        assert report.details["chain_margin"] >= -1e-9
        assert report.passed

    @pytest.mark.parametrize("n", [4, 6, 8, 12, 16])
    def test_unweighted_complete(self, n):
        report = check_unweighted_bounds(generate(FamilySpec(family="complete", n=n)))
        assert report.details["avg_l1"] <= report.value * (1 + 1e-9)
        assert report.passed

    def test_unweighted_rejects_weighted(self, parallel_pair):
        with pytest.raises(NonUnitConductanceError):
            check_unweighted_bounds(parallel_pair)

    def test_theorem_consistency(self, weighted_gnp):
        report = check_theorem_consistency(weighted_gnp)
        assert report.passed
        assert report.details["entropy_bound"] <= 2 * math.log(weighted_gnp.n) + 1e-9
        assert report.details["rayleigh"] <= report.details["entropy_bound"]

    def test_theorem_consistency_fails_above_entropy_bound(self, monkeypatch, weighted_gnp):
        import flowloc.analyzers.localization as localization

        monkeypatch.setattr(localization, "entropy", lambda mu: 0.0)
        report = check_theorem_consistency(weighted_gnp)
        assert report.status == "fail"
        assert report.passed is False
        assert "entropy bound" in report.reason

    def test_scale_invariance(self, weighted_gnp):
        scaled = weighted_gnp.scale_conductances(37.5)
        a = check_spectral_bound_weighted(weighted_gnp)
        b = check_spectral_bound_weighted(scaled)
        assert a.value == pytest.approx(b.value, abs=1e-10)


class TestParallelGadget:
    def test_m9_big(self):
        report = check_parallel_gadget(9, 1e6)
        assert report.direction == "lower"
        assert report.bound == pytest.approx(2.7)
        assert report.value >= 2.7
        assert report.details["pibar_norm"] <= 2 * math.log(2) + 1e-9
        assert report.passed
        assert_consistent(report)

    def test_m2_limit(self):
        report = check_parallel_gadget(2, 1e8)
        assert report.value == pytest.approx(math.sqrt(2), rel=1e-6)

    def test_rank_one_closed_form(self):
        m, big = 5, 500.0
        c = np.array([1.0] * (m - 1) + [big])
        expected = np.linalg.norm(c) * math.sqrt(m) / c.sum()
        assert check_parallel_gadget(m, big).value == pytest.approx(expected, rel=1e-9)

    def test_grows_with_big(self):
        values = [check_parallel_gadget(16, big).value for big in (1e1, 1e3, 1e5)]
        assert values == sorted(values)

    def test_below_threshold_is_skipped(self):
        report = check_parallel_gadget(9, 10.0)
        assert report.status == "skipped"
        assert report.passed is None
        assert "below" in report.reason

    def test_pibar_above_two_ln_two_fails(self, monkeypatch):
        import flowloc.analyzers.localization as localization

        honest = localization.nonneg_spectral_norm

        def inflated(*args, **kwargs):
            estimate = honest(*args, **kwargs)
            return NormEstimate(value=estimate.value + 10.0, vector=estimate.vector,
                                iterations=estimate.iterations, converged=estimate.converged)

        monkeypatch.setattr(localization, "nonneg_spectral_norm", inflated)
        report = check_parallel_gadget(9, 1e6)
        assert report.value >= 2.7
        assert report.status == "fail"
        assert report.passed is False
        assert "2 ln 2" in report.reason

        reports = run_suite(SuiteSpec(checks=["parallel_gadget"], gadget_sizes=[9], big=1e6))
        assert [r.status for r in reports] == ["fail"]

    def test_matrix_norm_symmetric_and_not(self, cycle4, parallel_pair):
        currents = transfer_current_matrix(cycle4)
        assert matrix_norm(currents.Kbar).value == pytest.approx(1.5, rel=1e-9)
        Kbar = transfer_current_matrix(parallel_pair).Kbar
        assert matrix_norm(Kbar).value == pytest.approx(np.linalg.norm(Kbar, 2), rel=1e-9)


class TestIdentityChecks:
    def test_projection(self, weighted_gnp, triangle):
        assert check_projection(weighted_gnp).passed
        report = check_projection(triangle)
        assert report.passed
        assert "reciprocity" in report.details

    def test_oracle(self, weighted_gnp):
        report = check_oracle_equivalence(weighted_gnp)
        assert report.value <= 1e-8
        assert report.passed

    def test_green_integral(self, weighted_gnp):
        assert check_green_integral(weighted_gnp).passed

    def test_entropy_dissipation(self, triangle):
        report = check_entropy_dissipation(triangle, np.ones(3), 0)
        assert report.details["closed_form"] == pytest.approx(math.log(3), rel=1e-12)
        assert report.passed

    def test_entropy_dissipation_without_head_mass_fails(self, monkeypatch, triangle):
        import flowloc.analyzers.entropy as entropy_module

        monkeypatch.setattr(entropy_module, "_uniformized_columns",
                            lambda ev, rho, times: np.ones((ev.graph.n, times.size)))
        report = check_entropy_dissipation(triangle, np.ones(3), 0)
        assert report.details["relative_error"] > 1e-5
        assert report.status == "fail"

    def test_log_mean_cs_constant_h(self, triangle):
        report = check_log_mean_cs(triangle, [2.0, 2.0, 2.0], [1.0, 0.0, 1.0])
        assert report.value == 0.0 and report.bound == 0.0
        assert report.passed

    def test_heat_variation(self, single_edge):
        report = check_heat_variation(single_edge, [1.0])
        assert report.value == pytest.approx(1.0, abs=1e-6)
        assert report.passed

    def test_log_mean_sandwich(self):
        report = check_log_mean_sandwich(pairs=2000, seed=3)
        assert report.family == "scalar"
        assert report.passed


class TestSuiteSpec:
    def test_rejects_unknown_check(self):
        with pytest.raises(ValidationError):
            SuiteSpec(checks=["spectral_weighted", "nonsense"])

    def test_rejects_unknown_family(self):
        with pytest.raises(ValidationError):
            SuiteSpec(families=["torus"])

    @pytest.mark.parametrize("field", ["rel_tol", "abs_tol"])
    def test_rejects_nonpositive_tolerance(self, field):
        with pytest.raises(ValidationError):
            SuiteSpec(**{field: 0.0})


class TestRunSuite:
    def test_empty_sizes(self):
        assert run_suite(SuiteSpec(sizes=[])) == []

    def test_small_suite_passes(self):
        suite = SuiteSpec(families=["path", "cycle", "complete", "star", "grid2d", "hypercube", "gnp"],
                          sizes=[4, 6, 9], gadget_sizes=[4], seed=7)
        reports = run_suite(suite)
        statuses = {r.status for r in reports}
        assert "fail" not in statuses and "error" not in statuses
        skipped = [r for r in reports if r.status == "skipped"]
        assert all(r.check == "unweighted_bounds" and r.conductance != "unit" for r in skipped)
        for report in reports:
            if report.status == "pass":
                assert_consistent(report)

    def test_trees_give_one(self):
        reports = run_suite(SuiteSpec(families=["path", "star"], sizes=[4, 8], conductance_modes=["unit"],
                                      checks=["unweighted_bounds"]))
        assert len(reports) == 4
        for report in reports:
            assert report.value == pytest.approx(1.0, abs=1e-10)
            assert report.details["avg_l1"] == pytest.approx(1.0, abs=1e-10)

    def test_deterministic_and_ordered(self):
        suite = SuiteSpec(families=["gnp", "cycle"], sizes=[5, 8], checks=["quadratic_form", "log_mean_cs"],
                          seed=13, jobs=3)
        first = [r.row() for r in run_suite(suite)]
        second = [r.row() for r in run_suite(suite.model_copy(update={"jobs": 1}))]
        assert first == second
        families = [row["family"] for row in first]
        assert families == sorted(families, key=["cycle", "gnp"].index)

    def test_gadget_only(self):
        reports = run_suite(SuiteSpec(checks=["parallel_gadget"], gadget_sizes=[9], big=1e6))
        assert [r.check for r in reports] == ["parallel_gadget"]
        assert reports[0].value >= 2.7

    def test_sandwich_reported_once_at_end(self):
        reports = run_suite(SuiteSpec(families=["path"], sizes=[4], conductance_modes=["unit"],
                                      checks=["log_mean_sandwich", "projection"]))
        assert [r.check for r in reports] == ["projection", "log_mean_sandwich"]

    def test_verify_graph(self, triangle):
        reports = verify_graph(triangle, SuiteSpec())
        assert [r.check for r in reports] == [c for c in CHECKS if c not in ("log_mean_sandwich", "parallel_gadget")]
        assert all(r.family == "file" for r in reports)
        assert all(r.status == "pass" for r in reports)

    def test_check_error_is_collected(self, monkeypatch, triangle):
        import flowloc.analyzers.localization as localization

        def broken(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(localization, "check_projection", broken)
        reports = verify_graph(triangle, SuiteSpec(checks=["projection", "spectral_weighted"]))
        assert [r.status for r in reports] == ["error", "pass"]
        assert "boom" in reports[0].reason

    def test_row_uses_pass_key(self, single_edge):
        row = check_quadratic_form_bound(single_edge, [1.0], descriptor=describe(single_edge, family="path")).row()
        assert row["pass"] is True
        assert "passed" not in row and "runtime" not in row
        for key in ("check", "family", "n", "m", "value", "bound", "margin", "pass", "seed"):
            assert key in row
