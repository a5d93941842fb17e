import math

import numpy as np
import pytest

from flowloc.analyzers.heat_kernel import (
    edge_heat_kernel,
    exponential_weights,
    green_time_quadrature,
    heat_H,
    heat_kernel_evaluator,
    heat_P,
    panels_for_tolerance,
    tail_constant,
    time_grid,
)
from flowloc.analyzers.linalg import decompose, edge_modes, projected_green
from flowloc.data_sources.graph_core import incidence_system, measure_from_weights
from flowloc.data_sources.graph_gen import FamilySpec, generate
from flowloc.utils.errors import DomainError


@pytest.fixture
def edge_evaluator(single_edge):
    return heat_kernel_evaluator(single_edge, [0.5, 0.5])


@pytest.fixture
def weighted_evaluator(weighted_gnp, rng):
    mu = measure_from_weights(weighted_gnp, rng.uniform(0.2, 3.0, weighted_gnp.m)).mu
    return heat_kernel_evaluator(weighted_gnp, mu)


def degree_measure(g):
    return measure_from_weights(g, np.ones(g.m)).mu


class TestEvaluator:
    def test_rejects_zero_mass(self, triangle):
        with pytest.raises(DomainError):
            heat_kernel_evaluator(triangle, [0.5, 0.5, 0.0])

    def test_rejects_unnormalized(self, triangle):
        with pytest.raises(DomainError):
            heat_kernel_evaluator(triangle, [1.0, 1.0, 1.0])

    def test_single_edge_spectrum(self, edge_evaluator):
        assert edge_evaluator.lambda_2 == pytest.approx(4.0)
        assert edge_evaluator.lambda_n == pytest.approx(4.0)


class TestHeatP:
    def test_identity_at_zero(self, weighted_evaluator):
        np.testing.assert_allclose(heat_P(weighted_evaluator, 0.0), np.eye(weighted_evaluator.graph.n), atol=1e-10)

    @pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
    def test_single_edge_closed_form(self, edge_evaluator, t):
        decay = math.exp(-4.0 * t)
        expected = 0.5 * np.array([[1 + decay, 1 - decay], [1 - decay, 1 + decay]])
        np.testing.assert_allclose(heat_P(edge_evaluator, t), expected, atol=1e-12)

    def test_stationary_limit(self, weighted_evaluator):
        ev = weighted_evaluator
        P = heat_P(ev, 50.0 / ev.lambda_2)
        np.testing.assert_allclose(P, np.tile(ev.mu, (ev.graph.n, 1)), atol=1e-8)

    def test_stochastic_on_log_grid(self, weighted_evaluator):
        ev = weighted_evaluator
        for t in np.geomspace(1e-3 / ev.lambda_n, 10.0 / ev.lambda_2, 25):
            P = heat_P(ev, t)
            np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
            assert P.min() >= -1e-12

    def test_detailed_balance(self, weighted_evaluator):
        ev = weighted_evaluator
        flux = ev.mu[:, None] * heat_P(ev, 0.7)
        np.testing.assert_allclose(flux, flux.T, atol=1e-10)

    @pytest.mark.parametrize("t", [-1.0, math.inf, math.nan])
    def test_bad_time(self, edge_evaluator, t):
        with pytest.raises(DomainError):
            heat_P(edge_evaluator, t)


class TestHeatH:
    def test_zero_time_is_inverse_measure(self, weighted_evaluator):
        ev = weighted_evaluator
        np.testing.assert_allclose(heat_H(ev, 0.0), np.diag(1.0 / ev.mu), rtol=1e-9, atol=1e-9)

    def test_semigroup_on_triangle(self, triangle):
        mu = degree_measure(triangle)
        ev = heat_kernel_evaluator(triangle, mu)
        product = heat_H(ev, 0.3) @ np.diag(mu) @ heat_H(ev, 0.7)
        np.testing.assert_allclose(product, heat_H(ev, 1.0), atol=1e-9)

    def test_symmetric_and_mass_preserving(self, weighted_evaluator):
        ev = weighted_evaluator
        H = heat_H(ev, 0.2)
        np.testing.assert_allclose(H, H.T, atol=1e-10)
        np.testing.assert_allclose(ev.mu @ H, np.ones(ev.graph.n), atol=1e-9)

    def test_matches_term_by_term_sum(self, weighted_evaluator, rng):
        ev = weighted_evaluator
        psi = ev.decomposition.eigenvectors
        lam = ev.decomposition.eigenvalues
        inv_root = 1.0 / np.sqrt(ev.mu)
        for t in rng.uniform(0.0, 2.0, 5):
            reference = sum(math.exp(-t * lam[i]) * np.outer(inv_root * psi[:, i], inv_root * psi[:, i])
                            for i in range(ev.graph.n))
            np.testing.assert_allclose(heat_H(ev, t), reference, atol=1e-10 * np.abs(reference).max())

    def test_kernel_term_cancels(self, weighted_evaluator):
        ev = weighted_evaluator
        B = incidence_system(ev.graph).B
        a = B @ (ev.decomposition.eigenvectors[:, 0] / np.sqrt(ev.mu))
        assert np.abs(np.outer(a, a)).max() <= 1e-10

    def test_edge_kernel_is_conjugated_h(self, weighted_evaluator):
        ev = weighted_evaluator
        B = incidence_system(ev.graph).B
        root = np.sqrt(ev.graph.conductances)
        expected = root[:, None] * (B @ heat_H(ev, 0.4) @ B.T) * root[None, :]
        np.testing.assert_allclose(edge_heat_kernel(ev, 0.4), expected, atol=1e-9 * np.abs(expected).max())


class TestTimeGrid:
    @pytest.mark.parametrize("t_min, t_max, panels", [(1e-3, 10.0, 64), (0.5, 0.6, 64), (1e-6, 1.0, 512)])
    def test_simpson_ready(self, t_min, t_max, panels):
        grid = time_grid(t_min, t_max, panels)
        assert grid[0] == 0.0
        assert grid.size % 2 == 1
        assert grid[1] == pytest.approx(t_min)
        assert grid[-1] == pytest.approx(t_max)
        assert np.all(np.diff(grid) > 0)

    def test_panels_increase_with_tighter_tolerance(self):
        assert panels_for_tolerance(1e-6) <= panels_for_tolerance(1e-8) <= panels_for_tolerance(1e-11)


class TestQuadratureWeights:
    def test_zero_eigenvalue_integrates_the_span(self):
        grid = time_grid(1e-3, 10.0, 64)
        assert exponential_weights(np.array([0.0]), grid)[0] == pytest.approx(10.0, rel=1e-12)

    def test_matches_closed_form(self):
        eigenvalues = np.array([0.5, 3.0, 40.0])
        grid = time_grid(1e-4, 20.0, 256)
        expected = -np.expm1(-eigenvalues * 20.0) / eigenvalues
        np.testing.assert_allclose(exponential_weights(eigenvalues, grid), expected, rtol=1e-7)


def _exact_edge_tail(ev, T):
    """int_T^inf B H_t B^T dt summed mode by mode from a fresh eigendecomposition"""
    L = incidence_system(ev.graph).L
    inv_root = 1.0 / np.sqrt(ev.mu)
    lam, psi = np.linalg.eigh(inv_root[:, None] * L * inv_root[None, :])
    lam, psi = lam[1:], psi[:, 1:]
    kernel = (psi * (np.exp(-lam * T) / lam)[None, :]) @ psi.T
    B = incidence_system(ev.graph).B
    return B @ (inv_root[:, None] * kernel * inv_root[None, :]) @ B.T


class TestTailConstant:
    def test_single_edge(self, edge_evaluator):
        assert tail_constant(edge_evaluator) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("T", [0.0, 0.3, 2.0])
    def test_single_edge_bound_is_attained(self, edge_evaluator, T):
        tail = _exact_edge_tail(edge_evaluator, T)
        assert tail[0, 0] == pytest.approx(math.exp(-4.0 * T), rel=1e-10)

    @pytest.mark.parametrize("T", [0.0, 0.1, 1.0, 5.0])
    def test_bounds_every_tail_entry(self, weighted_evaluator, T):
        ev = weighted_evaluator
        bound = tail_constant(ev) * math.exp(-ev.lambda_2 * T)
        assert np.abs(_exact_edge_tail(ev, T)).max() <= bound * (1 + 1e-9)


class TestGreenQuadrature:
    def test_single_edge(self, single_edge, edge_evaluator):
        np.testing.assert_allclose(green_time_quadrature(edge_evaluator, single_edge, 1e-6), [[1.0]], atol=1e-6)

    def test_triangle_diagonal(self, triangle):
        ev = heat_kernel_evaluator(triangle, degree_measure(triangle))
        np.testing.assert_allclose(np.diag(green_time_quadrature(ev, triangle, 1e-6)), [2 / 3] * 3, atol=1e-6)

    @pytest.mark.parametrize("family, n", [("grid2d", 16), ("hypercube", 8), ("star", 12), ("random_weighted", 10)])
    def test_matches_projected_green(self, family, n):
        g = generate(FamilySpec(family=family, n=n, conductance="weighted", seed=3))
        ev = heat_kernel_evaluator(g, degree_measure(g))
        exact = projected_green(g, decompose(g))
        approx = green_time_quadrature(ev, g, 1e-6)
        assert np.abs(approx - exact).max() <= 1e-5 * (1 + np.abs(exact).max())

    def test_halving_tolerance_does_not_hurt(self, weighted_gnp, weighted_evaluator):
        exact = projected_green(weighted_gnp, decompose(weighted_gnp))
        coarse = np.abs(green_time_quadrature(weighted_evaluator, weighted_gnp, 1e-6) - exact).max()
        fine = np.abs(green_time_quadrature(weighted_evaluator, weighted_gnp, 5e-7) - exact).max()
        assert fine <= coarse + 1e-12

    def test_rejects_other_graph(self, edge_evaluator, triangle):
        with pytest.raises(DomainError):
            green_time_quadrature(edge_evaluator, triangle, 1e-6)

    def test_rejects_nonpositive_tolerance(self, single_edge, edge_evaluator):
        with pytest.raises(DomainError):
            green_time_quadrature(edge_evaluator, single_edge, 0.0)

    def test_edge_modes_shape(self, weighted_evaluator):
        ev = weighted_evaluator
        modes = edge_modes(ev.graph, ev.decomposition)
        assert modes.shape == (ev.graph.m, ev.graph.n)
        np.testing.assert_array_equal(modes[:, 0], 0.0)
