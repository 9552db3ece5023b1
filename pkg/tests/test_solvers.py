from itertools import combinations

import numpy as np
import pytest

from gearena.bcz import bcz_payoff
from gearena.core import ConfigError, GameConfig, Graph
from gearena.solvers import (
    WelfareOptimum,
    bcz_global_optimum,
    bcz_nash_effort,
    bcz_welfare,
    pgg_global_optimum,
    pgg_optimal_effort,
    spectral_radius,
)


def random_symmetric_graph(rng, n):
    mat = rng.integers(0, 2, size=(n, n))
    mat = np.triu(mat, 1)
    return Graph(mat + mat.T)


def set_partitions(items):
    """All ways to partition a list (Bell-number enumeration)."""
    if not items:
        yield []
        return
    head, *rest = items
    for partition in set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[head] + partition[i]] + partition[i + 1:]
        yield [[head]] + partition


class TestNashEffort:
    def test_empty_graph_returns_alpha(self):
        alpha = [0.7, 1.2, 0.9]
        solution = bcz_nash_effort(Graph.empty(3), alpha, 0.1)
        assert solution.converged
        assert np.allclose(solution.efforts, alpha)

    def test_linked_pair_hand_value(self):
        solution = bcz_nash_effort(Graph.from_edges(3, [(0, 1)]), [1, 1, 1], 0.05)
        assert solution.converged
        assert solution.efforts[0] == pytest.approx(1 / 0.95, abs=1e-12)
        assert solution.efforts[1] == pytest.approx(1 / 0.95, abs=1e-12)
        assert solution.efforts[2] == pytest.approx(1.0, abs=1e-12)

    def test_complete_graph_beyond_radius_not_converged(self):
        solution = bcz_nash_effort(Graph.complete(8), [1] * 8, 0.2)
        assert not solution.converged
        assert solution.efforts is None
        assert solution.spectral_gap == pytest.approx(1 - 0.2 * 7, abs=1e-9)

    def test_spectral_radius_of_complete_graph(self):
        assert spectral_radius(Graph.complete(6)) == pytest.approx(5.0, abs=1e-9)

    def test_fixed_point_condition_holds(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(3, 9))
            graph = random_symmetric_graph(rng, n)
            rho = spectral_radius(graph)
            delta = float(rng.uniform(0.1, 0.85)) * (0.9 / max(rho, 1.0))
            alpha = rng.uniform(0.5, 2.0, n)
            solution = bcz_nash_effort(graph, alpha, delta)
            assert solution.converged
            residual = solution.efforts - (alpha + delta * graph.adjacency @ solution.efforts)
            assert np.max(np.abs(residual)) < 1e-9
            assert np.all(solution.efforts >= 0)

    def test_each_effort_is_own_local_maximum(self):
        rng = np.random.default_rng(32)
        graph = random_symmetric_graph(rng, 6)
        alpha = rng.uniform(0.5, 1.5, 6)
        delta = 0.08
        solution = bcz_nash_effort(graph, alpha, delta)
        for i in range(6):
            for bump in (-1e-3, 1e-3):
                trial = solution.efforts.copy()
                trial[i] += bump
                assert (bcz_payoff(graph, trial, alpha, delta, 0.2)[i]
                        < bcz_payoff(graph, solution.efforts, alpha, delta, 0.2)[i])

    def test_clamped_path_reaches_fixed_point_for_negative_inputs(self):
        # Negative productivity is outside the game's domain but the solver
        # stays defined: the clamped fixed point zeroes that agent out.
        graph = Graph.from_edges(3, [(0, 1)])
        solution = bcz_nash_effort(graph, [-1.0, 1.0, 1.0], 0.05)
        assert solution.converged
        x = solution.efforts
        assert np.allclose(x, np.maximum(np.asarray([-1.0, 1.0, 1.0])
                                         + 0.05 * graph.adjacency @ x, 0.0), atol=1e-8)
        assert x[0] == 0.0


class TestPggOptima:
    def test_singleton_effort(self):
        assert pgg_optimal_effort(1, 1.5) == pytest.approx(1 / 3, abs=1e-12)

    def test_pair_clamps_to_zero(self):
        assert pgg_optimal_effort(2, 1.5) == 0.0

    def test_boundary_size_equals_r(self):
        assert pgg_optimal_effort(2, 2.0) == 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            pgg_optimal_effort(0, 1.5)
        with pytest.raises(ConfigError):
            pgg_optimal_effort(2, 1.0)

    def test_global_optimum_formula(self):
        assert pgg_global_optimum(5, 1.5) == pytest.approx(2.5, abs=1e-12)
        assert pgg_global_optimum(1, 1.5) == pytest.approx(0.5, abs=1e-12)
        assert pgg_global_optimum(4, 1.0 + 1e-9) == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("n,r", [(1, 1.5), (3, 1.5), (5, 1.5), (6, 2.5), (4, 3.5)])
    def test_global_optimum_matches_partition_and_grid_brute_force(self, n, r):
        from gearena.pgg import GroupPartition, pgg_payoff

        grid = np.linspace(0.0, 1.0, 21)  # step 0.05
        best = -np.inf
        for parts in set_partitions(list(range(n))):
            partition = GroupPartition(tuple(tuple(sorted(p)) for p in parts), n)
            x = np.zeros(n)
            improved = True
            while improved:  # coordinate ascent over the grid
                improved = False
                for i in range(n):
                    totals = []
                    for value in grid:
                        x[i] = value
                        totals.append(pgg_payoff(partition, x, r).sum())
                    pick = int(np.argmax(totals))
                    if x[i] != grid[pick]:
                        improved = True
                    x[i] = grid[pick]
            best = max(best, float(pgg_payoff(partition, x, r).sum()))
        assert pgg_global_optimum(n, r) == pytest.approx(best, abs=0.05)


class TestBczGlobalOptimum:
    def test_expensive_links_empty_graph(self):
        config = GameConfig.bcz(3, 1, alpha=1.0, delta=0.05, link_cost=10.0, seed=0)
        result = bcz_global_optimum(config)
        assert result.graph == Graph.empty(3)
        assert result.total == pytest.approx(1.5, abs=1e-9)
        assert not result.unbounded

    def test_free_links_tiny_synergy_complete_graph(self):
        config = GameConfig.bcz(3, 1, alpha=1.0, delta=0.01, link_cost=1e-9, seed=0)
        result = bcz_global_optimum(config)
        assert result.graph == Graph.complete(3)

    def test_unbounded_marker_when_planner_condition_fails(self):
        # 2 * delta * (N - 1) >= 1 on the complete graph
        config = GameConfig.bcz(4, 1, alpha=1.0, delta=0.2, link_cost=0.1, seed=0)
        result = bcz_global_optimum(config)
        assert result.unbounded
        assert np.isfinite(result.total)

    def test_agrees_with_numeric_ascent(self):
        rng = np.random.default_rng(77)
        for _ in range(10):
            n = int(rng.integers(3, 5))
            alpha = rng.uniform(0.5, 1.5, n)
            delta = float(rng.uniform(0.02, 0.1))
            cost = float(rng.uniform(0.05, 0.6))
            config = GameConfig.bcz(n, 1, alpha=alpha, delta=delta, link_cost=cost, seed=0)
            result = bcz_global_optimum(config)
            oracle_best = -np.inf
            for edges in range(1 << (n * (n - 1) // 2)):
                mat = np.zeros((n, n), dtype=np.int8)
                for bit, (i, j) in enumerate(combinations(range(n), 2)):
                    if edges >> bit & 1:
                        mat[i, j] = mat[j, i] = 1
                graph = Graph(mat)
                x = np.asarray(alpha, dtype=float).copy()
                for _ in range(4000):  # plain gradient ascent on welfare
                    grad = alpha - x + 2 * delta * (graph.adjacency @ x)
                    x = x + 0.3 * grad
                    if np.linalg.norm(x) > 1e6:
                        break
                else:
                    oracle_best = max(oracle_best, bcz_welfare(graph, x, alpha, delta, cost))
            assert result.total == pytest.approx(oracle_best, rel=1e-6, abs=1e-6)

    def test_sampled_fallback_flagged_non_exhaustive(self):
        config = GameConfig.bcz(6, 1, alpha=1.0, delta=0.03, link_cost=0.5, seed=0)
        result = bcz_global_optimum(config, n_limit=5, sample_budget=50)
        assert isinstance(result, WelfareOptimum)
        assert not result.exhaustive
