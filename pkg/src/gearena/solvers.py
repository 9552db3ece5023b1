"""Equilibrium and welfare solvers for both games.

The network game's interior equilibrium is the solution of the linear
first-order conditions ``(I - delta*G) x = alpha``, valid while
``delta * spectral_radius(G) < 1``. The planner's problem doubles the
synergy coupling because each link's cross term appears in both
endpoints' payoffs, giving ``(I - 2*delta*G) x = alpha`` and the bound
``2 * delta * spectral_radius(G) < 1`` for welfare to stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .core import ConfigError, DivergentEquilibrium, GameConfig, Graph

_FIXED_POINT_TOL = 1e-9
_MAX_BR_ITERATIONS = 100_000


@dataclass(frozen=True)
class NashSolution:
    """Equilibrium effort profile for a fixed graph.

    ``spectral_gap`` is ``1 - delta * spectral_radius(G)``; the linear
    system only pins down an equilibrium while it is positive. When it is
    not, ``converged`` is False and ``efforts`` is None (best responses
    grow without bound).
    """

    efforts: np.ndarray | None
    spectral_gap: float
    converged: bool


@dataclass(frozen=True)
class WelfareOptimum:
    """Best graph/effort pair found by the planner search.

    ``unbounded`` flags that at least one candidate graph admits infinite
    welfare, in which case the bounded incumbent reported here is only the
    best finite candidate. ``exhaustive`` is False when the graph space was
    sampled rather than enumerated.
    """

    graph: Graph
    efforts: np.ndarray
    total: float
    unbounded: bool
    exhaustive: bool


def spectral_radius(graph: Graph) -> float:
    if graph.n == 0:
        return 0.0
    eigenvalues = np.linalg.eigvalsh(graph.adjacency.astype(np.float64))
    return float(np.max(np.abs(eigenvalues)))


def bcz_nash_effort(graph: Graph, alpha: Sequence[float], delta: float) -> NashSolution:
    """Solve the simultaneous best-response conditions x = alpha + delta*G*x.

    Uses a direct linear solve. If that produces negative components
    (possible only for inputs outside the usual positive-alpha regime),
    falls back to best-response iteration clamped at zero until a fixed
    point, raising :class:`DivergentEquilibrium` if it never settles.
    """
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (graph.n,):
        raise ConfigError("alpha must match the graph dimension")
    adjacency = graph.adjacency.astype(np.float64)
    gap = 1.0 - delta * spectral_radius(graph)
    if gap <= 0:
        return NashSolution(efforts=None, spectral_gap=gap, converged=False)
    x = np.linalg.solve(np.eye(graph.n) - delta * adjacency, a)
    if x.min() >= -_FIXED_POINT_TOL:
        return NashSolution(efforts=np.maximum(x, 0.0), spectral_gap=gap, converged=True)
    x = np.maximum(x, 0.0)
    for _ in range(_MAX_BR_ITERATIONS):
        updated = np.maximum(a + delta * (adjacency @ x), 0.0)
        if np.max(np.abs(updated - x)) < _FIXED_POINT_TOL:
            return NashSolution(efforts=updated, spectral_gap=gap, converged=True)
        x = updated
    raise DivergentEquilibrium("clamped best-response iteration did not settle",
                               last_iterate=x)


def pgg_optimal_effort(group_size: int, r: float) -> float:
    """Individually optimal contribution for an agent in a group of the given size."""
    if group_size < 1:
        raise ConfigError("group_size must be >= 1")
    if r <= 1:
        raise ConfigError("multiplier must exceed 1")
    return max(0.0, 1.0 - group_size / r)


def pgg_global_optimum(n: int, r: float) -> float:
    """Maximum total payoff over all partitions and contribution profiles.

    Group payoffs sum to ``(r - 1)`` times the group's contributions, so
    total welfare is partition-independent and maximal at full
    contribution: ``(r - 1) * n``.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if r <= 1:
        raise ConfigError("multiplier must exceed 1")
    return (r - 1.0) * n


def bcz_welfare(graph: Graph, efforts: Sequence[float], alpha: Sequence[float],
                delta: float, cost: float) -> float:
    """Total payoff summed over agents for one graph/effort profile."""
    x = np.asarray(efforts, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    adjacency = graph.adjacency.astype(np.float64)
    return float(a @ x - 0.5 * x @ x + delta * x @ (adjacency @ x) - cost * adjacency.sum())


def bcz_global_optimum(config: GameConfig, n_limit: int = 8,
                       sample_budget: int = 5000) -> WelfareOptimum:
    """Search all symmetric graphs for the welfare-maximizing configuration.

    For each candidate graph the planner optimum solves
    ``(I - 2*delta*G) x = alpha`` when ``2*delta*rho(G) < 1``; other graphs
    admit unbounded welfare and are flagged rather than scored. Beyond
    ``n_limit`` agents the enumeration (``2^(N(N-1)/2)`` graphs) is replaced
    by seeded random sampling and the result is marked non-exhaustive.
    """
    n = config.n_agents
    alpha = np.asarray(config.alpha, dtype=np.float64)
    delta, cost = config.delta, config.link_cost
    pairs = list(combinations(range(n), 2))
    exhaustive = n <= n_limit
    if exhaustive:
        masks = range(1 << len(pairs))
    else:
        rng = np.random.default_rng(config.seed)
        sampled = {0, (1 << len(pairs)) - 1}
        sampled.update(int(m) for m in rng.integers(0, 1 << len(pairs), size=sample_budget))
        masks = sorted(sampled)

    best: tuple[float, Graph, np.ndarray] | None = None
    unbounded = False
    identity = np.eye(n)
    for mask in masks:
        adjacency = np.zeros((n, n), dtype=np.int8)
        for bit, (i, j) in enumerate(pairs):
            if mask >> bit & 1:
                adjacency[i, j] = adjacency[j, i] = 1
        graph = Graph(adjacency)
        rho = spectral_radius(graph)
        if 2.0 * delta * rho >= 1.0:
            unbounded = True
            continue
        efforts = np.linalg.solve(identity - 2.0 * delta * adjacency, alpha)
        total = bcz_welfare(graph, efforts, alpha, delta, cost)
        if best is None or total > best[0]:
            best = (total, graph, efforts)
    assert best is not None  # the empty graph is always bounded
    return WelfareOptimum(graph=best[1], efforts=best[2], total=best[0],
                          unbounded=unbounded, exhaustive=exhaustive)
