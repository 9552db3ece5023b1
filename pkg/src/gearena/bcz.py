"""Sequential network-investment game with linear-quadratic payoffs.

An agent's round payoff combines private productivity, a quadratic effort
cost, a synergy bonus over realized links, and a per-link maintenance cost:

    payoff_i = alpha_i * x_i - x_i^2 / 2
               + delta * sum_j G_ij * x_i * x_j
               - cost * sum_j G_ij

Rounds follow one of three step patterns: GE (link, invest), GEE (link,
invest, invest again after observing peers), and GGE (provisional links,
final links, invest).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import ConfigError, GameConfig, GeePayoffMode, Graph, RoundRecord, StepKind
from .engine import Agent, RoundState


def bcz_payoff(graph: Graph, efforts: Sequence[float], alpha: Sequence[float],
               delta: float, cost: float) -> np.ndarray:
    """Per-agent payoff vector for one effort profile on one graph."""
    x = np.asarray(efforts, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if x.shape != (graph.n,) or a.shape != (graph.n,):
        raise ConfigError("alpha/efforts must match the graph dimension")
    adjacency = graph.adjacency.astype(np.float64)
    synergy = delta * x * (adjacency @ x)
    maintenance = cost * adjacency.sum(axis=1)
    return a * x - 0.5 * x * x + synergy - maintenance


def run_bcz_round(config: GameConfig, agents: Sequence[Agent],
                  history: tuple[RoundRecord, ...], t: int) -> RoundRecord:
    """Execute one round of the configured step pattern.

    With several effort stages the recorded payoff follows
    ``config.gee_payoff_mode``: the final stage's payoff, or the sum of the
    per-stage payoffs (each stage evaluated independently, including link
    costs).
    """
    state = RoundState.begin(config, agents, history, t)
    for step_index, step_kind in enumerate(config.sequence.pattern):
        if step_kind.is_graph:
            state.run_graph_step(step_index, step_kind)
        else:
            state.run_effort_step(step_index)
    graph = state.current_graph
    assert graph is not None
    stage_payoffs = [bcz_payoff(graph, x, config.alpha, config.delta, config.link_cost)
                     for x in state.efforts]
    if config.gee_payoff_mode is GeePayoffMode.SUM_STAGES:
        payoffs = np.sum(stage_payoffs, axis=0)
    else:
        payoffs = stage_payoffs[-1]
    return state.finish(payoffs)
