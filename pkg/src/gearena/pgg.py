"""Sequential public goods game with endogenous group formation.

Agents propose mutual links; groups are the maximal cliques of the
resolved graph, picked greedily without overlap, with leftover agents as
singletons. Each group's contributions are multiplied by ``r`` and shared
per capita:

    payoff_i = r * sum_{j in group} x_j / |group| - x_i
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, GameConfig, GeePayoffMode, Graph, RoundRecord
from .engine import Agent, RoundState


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint groups covering every agent; each group of size >= 2 is a clique."""

    groups: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        members = [i for group in self.groups for i in group]
        if sorted(members) != list(range(self.n)):
            raise ConfigError("groups must partition the agent set")

    def group_of(self, agent: int) -> tuple[int, ...]:
        for group in self.groups:
            if agent in group:
                return group
        raise KeyError(agent)

    def size_of(self, agent: int) -> int:
        return len(self.group_of(agent))


def maximal_cliques(graph: Graph) -> list[frozenset[int]]:
    """Enumerate all maximal cliques (Bron-Kerbosch with pivoting).

    Isolated vertices come back as singleton cliques. Fine for the agent
    counts the config guard allows; worst case grows exponentially.
    """
    adj = {i: set(graph.neighbors(i)) for i in range(graph.n)}
    found: list[frozenset[int]] = []

    def expand(r: set[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            found.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda v: len(p & adj[v]))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(range(graph.n)), set())
    return found


def form_groups(graph: Graph) -> GroupPartition:
    """Partition agents into non-overlapping maximal cliques.

    Cliques are taken greedily, largest first; equal sizes are broken by
    the lexicographically smallest member tuple, which makes the partition
    deterministic. Agents left uncovered become singletons.
    """
    if not graph.is_symmetric:
        raise ConfigError("group formation needs a symmetric graph")
    candidates = sorted((tuple(sorted(c)) for c in maximal_cliques(graph)),
                        key=lambda c: (-len(c), c))
    taken: set[int] = set()
    groups: list[tuple[int, ...]] = []
    for clique in candidates:
        if taken.isdisjoint(clique):
            groups.append(clique)
            taken.update(clique)
    for agent in range(graph.n):
        if agent not in taken:
            groups.append((agent,))
    groups.sort(key=lambda g: g[0])
    return GroupPartition(tuple(groups), graph.n)


def pgg_payoff(partition: GroupPartition, efforts: Sequence[float], r: float) -> np.ndarray:
    """Per-agent payoff under a group partition; efforts are clamped to [0, 1]."""
    x = np.clip(np.asarray(efforts, dtype=np.float64), 0.0, 1.0)
    if x.shape != (partition.n,):
        raise ConfigError("efforts must match the partition size")
    payoffs = np.empty(partition.n, dtype=np.float64)
    for group in partition.groups:
        members = list(group)
        share = r * x[members].sum() / len(members)
        payoffs[members] = share - x[members]
    return payoffs


def run_pgg_round(config: GameConfig, agents: Sequence[Agent],
                  history: tuple[RoundRecord, ...], t: int) -> RoundRecord:
    """Execute one round: links, group formation, contributions, payoffs."""
    state = RoundState.begin(config, agents, history, t)
    for step_index, step_kind in enumerate(config.sequence.pattern):
        if step_kind.is_graph:
            graph = state.run_graph_step(step_index, step_kind)
            if step_kind.value == "G":
                state.groups = form_groups(graph).groups
        else:
            state.run_effort_step(step_index)
    assert state.groups is not None
    partition = GroupPartition(state.groups, config.n_agents)
    stage_payoffs = [pgg_payoff(partition, x, config.multiplier) for x in state.efforts]
    if config.gee_payoff_mode is GeePayoffMode.SUM_STAGES:
        payoffs = np.sum(stage_payoffs, axis=0)
    else:
        payoffs = stage_payoffs[-1]
    for group in partition.groups:
        members = list(group)
        contributed = np.clip(np.asarray(state.efforts[-1])[members], 0.0, 1.0).sum()
        # Group welfare identity: payoffs in a group sum to (r - 1) * contributions.
        assert abs(stage_payoffs[-1][members].sum() - (config.multiplier - 1.0) * contributed) < 1e-9
    return state.finish(payoffs, groups=partition.groups)
