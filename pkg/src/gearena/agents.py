"""Agent implementations for the arena.

The oracle plays the deterministic strategy the trainer treats as expert:
myopic one-step link evaluation under equilibrium efforts, and the
individually optimal effort for the realized structure. The other
scripted agents provide contrasting behaviors for experiments, and
``policy_agent`` adapts trained edge logits to the engine interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .core import GameKind, Graph
from .engine import StepContext
from .pgg import form_groups
from .policy import PolicyParams, policy_sample
from .solvers import bcz_nash_effort, pgg_optimal_effort, spectral_radius
from .bcz import bcz_payoff

DecideGraph = Callable[[StepContext], Any]
DecideEffort = Callable[[StepContext], Any]


@dataclass(frozen=True)
class AgentHandle:
    """One participant: an id, a label, and its two decision callables."""

    agent_id: int
    kind: str
    decide_graph: DecideGraph
    decide_effort: DecideEffort


class _NashCache:
    """Memoizes equilibrium solutions per (graph, alpha, delta)."""

    def __init__(self):
        self._cache: dict[bytes, Any] = {}

    def solve(self, graph: Graph, alpha: tuple[float, ...], delta: float):
        key = graph.adjacency.tobytes() + repr((alpha, delta)).encode()
        if key not in self._cache:
            self._cache[key] = bcz_nash_effort(graph, alpha, delta)
        return self._cache[key]


def _oracle_bcz_payoff(ctx: StepContext, graph: Graph, cache: _NashCache) -> float | None:
    cfg = ctx.config
    solution = cache.solve(graph, cfg.alpha, cfg.delta)
    if not solution.converged:
        return None
    payoffs = bcz_payoff(graph, solution.efforts, cfg.alpha, cfg.delta, cfg.link_cost)
    return float(payoffs[ctx.agent_id])


def _oracle_pgg_payoff(ctx: StepContext, graph: Graph) -> float:
    partition = form_groups(graph)
    size = partition.size_of(ctx.agent_id)
    r = ctx.config.multiplier
    # Everyone in a group of size s plays x*(s), so the member payoff is
    # (r - 1) * x*(s).
    return (r - 1.0) * pgg_optimal_effort(size, r)


def oracle_graph_decision(ctx: StepContext, cache: _NashCache) -> list[int]:
    """Propose each link whose one-step marginal value is strictly positive.

    Candidates toggle a single edge on the previous round's realized graph
    (empty at round 0); ties and diverging candidates resolve to no link.
    """
    base = ctx.previous_graph or Graph.empty(ctx.n)
    me = ctx.agent_id
    proposals = [0] * ctx.n
    for j in range(ctx.n):
        if j == me:
            continue
        with_edge = base.with_edge(me, j, True)
        without_edge = base.with_edge(me, j, False)
        if ctx.config.game_kind is GameKind.BCZ:
            gain_with = _oracle_bcz_payoff(ctx, with_edge, cache)
            gain_without = _oracle_bcz_payoff(ctx, without_edge, cache)
            if gain_with is None or gain_without is None:
                continue
        else:
            gain_with = _oracle_pgg_payoff(ctx, with_edge)
            gain_without = _oracle_pgg_payoff(ctx, without_edge)
        if gain_with > gain_without:
            proposals[j] = 1
    return proposals


def oracle_effort_decision(ctx: StepContext, cache: _NashCache) -> float:
    cfg = ctx.config
    graph = ctx.current_graph or Graph.empty(ctx.n)
    if cfg.game_kind is GameKind.BCZ:
        solution = cache.solve(graph, cfg.alpha, cfg.delta)
        if not solution.converged:
            # Best response to an empty neighborhood.
            return float(cfg.alpha[ctx.agent_id])
        return float(solution.efforts[ctx.agent_id])
    group = ctx.my_group()
    size = len(group) if group else 1
    return pgg_optimal_effort(size, cfg.multiplier)


def oracle_agent(agent_id: int) -> AgentHandle:
    cache = _NashCache()
    return AgentHandle(
        agent_id, "oracle",
        decide_graph=lambda ctx: oracle_graph_decision(ctx, cache),
        decide_effort=lambda ctx: oracle_effort_decision(ctx, cache),
    )


def cooperator_agent(agent_id: int) -> AgentHandle:
    """Links to everyone and invests for the group, not for itself."""

    def decide_graph(ctx: StepContext) -> list[int]:
        proposals = [1] * ctx.n
        proposals[ctx.agent_id] = 0
        return proposals

    def decide_effort(ctx: StepContext) -> float:
        cfg = ctx.config
        if cfg.game_kind is GameKind.PGG:
            return 1.0
        graph = ctx.current_graph or Graph.empty(ctx.n)
        adjacency = graph.adjacency.astype(np.float64)
        if 2.0 * cfg.delta * spectral_radius(graph) >= 1.0:
            return float(cfg.alpha[ctx.agent_id])
        planner = np.linalg.solve(np.eye(ctx.n) - 2.0 * cfg.delta * adjacency,
                                  np.asarray(cfg.alpha))
        return float(max(planner[ctx.agent_id], 0.0))

    return AgentHandle(agent_id, "cooperator", decide_graph, decide_effort)


def freerider_agent(agent_id: int) -> AgentHandle:
    """Wants every link but contributes nothing."""

    def decide_graph(ctx: StepContext) -> list[int]:
        proposals = [1] * ctx.n
        proposals[ctx.agent_id] = 0
        return proposals

    return AgentHandle(agent_id, "freerider", decide_graph, lambda ctx: 0.0)


def random_agent(agent_id: int) -> AgentHandle:
    """Uniform proposals and efforts from the engine's per-step stream."""

    def decide_graph(ctx: StepContext) -> list[int]:
        proposals = ctx.rng.integers(0, 2, size=ctx.n).tolist()
        proposals[ctx.agent_id] = 0
        return proposals

    def decide_effort(ctx: StepContext) -> float:
        if ctx.config.game_kind is GameKind.PGG:
            return float(ctx.rng.random())
        return float(ctx.rng.random() * 2.0 * max(ctx.config.alpha))

    return AgentHandle(agent_id, "random", decide_graph, decide_effort)


def imitator_agent(agent_id: int) -> AgentHandle:
    """Repeats its own realized links and the population's mean effort."""

    def decide_graph(ctx: StepContext) -> list[int]:
        if ctx.previous_graph is None:
            return [0] * ctx.n
        return [int(v) for v in ctx.previous_graph.adjacency[ctx.agent_id]]

    def decide_effort(ctx: StepContext) -> float:
        if ctx.history:
            return float(np.mean(ctx.history[-1].final_efforts))
        if ctx.config.game_kind is GameKind.PGG:
            return 0.5
        return float(ctx.config.alpha[ctx.agent_id])

    return AgentHandle(agent_id, "imitator", decide_graph, decide_effort)


def best_responder_agent(agent_id: int) -> AgentHandle:
    """Responds myopically to the previous round's observed efforts."""

    def decide_graph(ctx: StepContext) -> list[int]:
        proposals = [0] * ctx.n
        if not ctx.history:
            return proposals
        previous = np.asarray(ctx.history[-1].final_efforts)
        cfg = ctx.config
        for j in range(ctx.n):
            if j == ctx.agent_id:
                continue
            if cfg.game_kind is GameKind.BCZ:
                if cfg.delta * previous[ctx.agent_id] * previous[j] > cfg.link_cost:
                    proposals[j] = 1
            else:
                if previous[j] > previous[ctx.agent_id]:
                    proposals[j] = 1
        return proposals

    def decide_effort(ctx: StepContext) -> float:
        cfg = ctx.config
        if cfg.game_kind is GameKind.PGG:
            group = ctx.my_group()
            size = len(group) if group else 1
            # The payoff is linear in one's own contribution, so the myopic
            # best response is bang-bang.
            return 1.0 if cfg.multiplier > size else 0.0
        graph = ctx.current_graph or Graph.empty(ctx.n)
        if ctx.history:
            others = np.asarray(ctx.history[-1].final_efforts)
        else:
            others = np.asarray(cfg.alpha)
        neighborhood = float(graph.adjacency[ctx.agent_id].astype(np.float64) @ others)
        return max(cfg.alpha[ctx.agent_id] + cfg.delta * neighborhood, 0.0)

    return AgentHandle(agent_id, "bestresponder", decide_graph, decide_effort)


def policy_agent(agent_id: int, params: PolicyParams) -> AgentHandle:
    """Adapter for trained edge logits; efforts fall back to the oracle rule."""
    cache = _NashCache()

    def decide_graph(ctx: StepContext) -> list[int]:
        if ctx.agent_id != 0:
            raise ValueError("the edge policy is defined for agent 0")
        decisions, _ = policy_sample(params, 2, ctx.rng)
        return list(decisions[0].proposals)

    return AgentHandle(
        agent_id, "policy",
        decide_graph=decide_graph,
        decide_effort=lambda ctx: oracle_effort_decision(ctx, cache),
    )


_FACTORIES: dict[str, Callable[[int], AgentHandle]] = {
    "oracle": oracle_agent,
    "cooperator": cooperator_agent,
    "freerider": freerider_agent,
    "random": random_agent,
    "imitator": imitator_agent,
    "bestresponder": best_responder_agent,
}


def agent_kinds() -> list[str]:
    return sorted(_FACTORIES)


def make_agent(kind: str, agent_id: int) -> AgentHandle:
    try:
        factory = _FACTORIES[kind]
    except KeyError:
        raise ValueError(f"unknown agent kind {kind!r}; known: {', '.join(agent_kinds())}")
    return factory(agent_id)


def make_lineup(kinds: list[str], n_agents: int) -> list[AgentHandle]:
    """Build N agents from a list of kind names, cycling when short."""
    if not kinds:
        raise ValueError("need at least one agent kind")
    return [make_agent(kinds[i % len(kinds)], i) for i in range(n_agents)]


def with_scripted_faults(base: AgentHandle,
                         graph_faults: dict[tuple[int, int], Any] | None = None,
                         effort_faults: dict[tuple[int, int], Any] | None = None) -> AgentHandle:
    """Wrap an agent so it emits fixed raw output at scheduled (round, step)
    positions. Used to inject malformed decisions when testing compliance
    accounting."""
    graph_faults = graph_faults or {}
    effort_faults = effort_faults or {}

    def decide_graph(ctx: StepContext) -> Any:
        key = (ctx.round_index, ctx.step_index)
        if key in graph_faults:
            return graph_faults[key]
        return base.decide_graph(ctx)

    def decide_effort(ctx: StepContext) -> Any:
        key = (ctx.round_index, ctx.step_index)
        if key in effort_faults:
            return effort_faults[key]
        return base.decide_effort(ctx)

    return AgentHandle(base.agent_id, base.kind, decide_graph, decide_effort)
