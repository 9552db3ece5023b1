"""Round execution machinery shared by both game engines.

Agents are queried step by step in the configured pattern. Within a step
every agent receives an identical context and all decisions are gathered
before anything is resolved, so no agent can observe a same-step peer.
Malformed output never aborts a game: the engine substitutes a neutral
decision and records a violation, which the U1 metric later counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .core import (
    TAG_EFFORT_PARSE,
    TAG_EFFORT_RANGE,
    TAG_TIMEOUT,
    ConfigError,
    DecisionList,
    GameConfig,
    GameKind,
    GameLog,
    Graph,
    RoundRecord,
    StepKind,
    Violation,
    decision_from_raw,
    derive_rng,
    resolve_links,
    validate_decision_list,
)

_STREAM_AGENT = 11


class DecisionTimeout:
    """Sentinel an agent adapter returns when its backend did not answer in time."""


class Agent(Protocol):
    agent_id: int

    def decide_graph(self, ctx: "StepContext") -> Any: ...

    def decide_effort(self, ctx: "StepContext") -> Any: ...


@dataclass(frozen=True)
class StepContext:
    """Everything one agent may observe when asked for a decision."""

    config: GameConfig
    agent_id: int
    round_index: int
    step_index: int
    step_kind: StepKind
    history: tuple[RoundRecord, ...]
    previous_graph: Graph | None
    current_graph: Graph | None
    provisional_graph: Graph | None
    provisional_proposals: tuple[DecisionList, ...] | None
    efforts_so_far: tuple[tuple[float, ...], ...]
    groups: tuple[tuple[int, ...], ...] | None
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return self.config.n_agents

    def my_group(self) -> tuple[int, ...] | None:
        if self.groups is None:
            return None
        for group in self.groups:
            if self.agent_id in group:
                return group
        return None


@dataclass
class RoundState:
    """Mutable scratch state while one round executes."""

    config: GameConfig
    agents: Sequence[Agent]
    history: tuple[RoundRecord, ...]
    round_index: int
    step_kinds: list[StepKind]
    graphs: list[Graph]
    proposals: list[tuple[DecisionList, ...]]
    efforts: list[tuple[float, ...]]
    violations: list[Violation]
    current_graph: Graph | None = None
    provisional_graph: Graph | None = None
    provisional_proposals: tuple[DecisionList, ...] | None = None
    groups: tuple[tuple[int, ...], ...] | None = None

    @classmethod
    def begin(cls, config: GameConfig, agents: Sequence[Agent],
              history: tuple[RoundRecord, ...], t: int) -> "RoundState":
        if len(agents) != config.n_agents:
            raise ConfigError("agent count must match n_agents")
        if sorted(a.agent_id for a in agents) != list(range(config.n_agents)):
            raise ConfigError("agents must carry ids 0..N-1")
        return cls(config, agents, history, t, [], [], [], [], [])

    @property
    def previous_graph(self) -> Graph | None:
        return self.history[-1].realized_graph if self.history else None

    def context(self, agent_id: int, step_index: int, step_kind: StepKind) -> StepContext:
        return StepContext(
            config=self.config,
            agent_id=agent_id,
            round_index=self.round_index,
            step_index=step_index,
            step_kind=step_kind,
            history=self.history,
            previous_graph=self.previous_graph,
            current_graph=self.current_graph,
            provisional_graph=self.provisional_graph,
            provisional_proposals=self.provisional_proposals,
            efforts_so_far=tuple(self.efforts),
            groups=self.groups,
            rng=derive_rng(self.config.seed, _STREAM_AGENT, self.round_index,
                           step_index, agent_id),
        )

    def run_graph_step(self, step_index: int, step_kind: StepKind) -> Graph:
        """Gather, validate, and resolve one graph-forming step."""
        n = self.config.n_agents
        raws = [agent.decide_graph(self.context(agent.agent_id, step_index, step_kind))
                for agent in sorted(self.agents, key=lambda a: a.agent_id)]
        accepted: list[DecisionList] = []
        for agent_id, raw in enumerate(raws):
            if isinstance(raw, DecisionTimeout):
                self.violations.append(Violation(self.round_index, step_index, agent_id, TAG_TIMEOUT))
                accepted.append(DecisionList.empty(n, agent_id))
                continue
            verdict = validate_decision_list(raw, n, agent_id)
            if verdict.compliant:
                accepted.append(decision_from_raw(raw, n, agent_id))
            else:
                for tag in verdict.tags:
                    self.violations.append(Violation(self.round_index, step_index, agent_id, tag))
                accepted.append(DecisionList.empty(n, agent_id))
        graph = resolve_links(accepted, self.config.link_rule)
        self.step_kinds.append(step_kind)
        self.graphs.append(graph)
        self.proposals.append(tuple(accepted))
        if step_kind is StepKind.PROVISIONAL_GRAPH:
            self.provisional_graph = graph
            self.provisional_proposals = tuple(accepted)
        else:
            self.current_graph = graph
        return graph

    def run_effort_step(self, step_index: int) -> tuple[float, ...]:
        """Gather and validate one effort step; out-of-domain values are clamped."""
        raws = [agent.decide_effort(self.context(agent.agent_id, step_index, StepKind.EFFORT))
                for agent in sorted(self.agents, key=lambda a: a.agent_id)]
        efforts: list[float] = []
        for agent_id, raw in enumerate(raws):
            value, tag = _coerce_effort(raw, self.config.game_kind)
            if tag is not None:
                self.violations.append(Violation(self.round_index, step_index, agent_id, tag))
            efforts.append(value)
        vector = tuple(efforts)
        self.step_kinds.append(StepKind.EFFORT)
        self.efforts.append(vector)
        return vector

    def finish(self, payoffs: Sequence[float],
               groups: tuple[tuple[int, ...], ...] | None = None) -> RoundRecord:
        return RoundRecord(
            round_index=self.round_index,
            step_kinds=tuple(self.step_kinds),
            graphs_by_step=tuple(self.graphs),
            proposals_by_step=tuple(self.proposals),
            efforts_by_step=tuple(self.efforts),
            payoffs=tuple(float(p) for p in payoffs),
            violations=tuple(self.violations),
            groups=groups,
        )


def _coerce_effort(raw: Any, kind: GameKind) -> tuple[float, str | None]:
    if isinstance(raw, DecisionTimeout):
        return 0.0, TAG_TIMEOUT
    if isinstance(raw, bool) or not isinstance(raw, (int, float, np.integer, np.floating)):
        return 0.0, TAG_EFFORT_PARSE
    value = float(raw)
    if not math.isfinite(value):
        return 0.0, TAG_EFFORT_PARSE
    if kind is GameKind.PGG:
        if not 0.0 <= value <= 1.0:
            return min(max(value, 0.0), 1.0), TAG_EFFORT_RANGE
    else:
        if value < 0.0:
            return 0.0, TAG_EFFORT_RANGE
    return value, None


def run_game(config: GameConfig, agents: Sequence[Agent]) -> GameLog:
    """Play a full game, stopping early once the graph has been identical
    for ``early_stop_patience`` consecutive rounds."""
    from .bcz import run_bcz_round
    from .pgg import run_pgg_round

    run_round = run_bcz_round if config.game_kind is GameKind.BCZ else run_pgg_round
    rounds: list[RoundRecord] = []
    for t in range(config.total_rounds):
        rounds.append(run_round(config, agents, tuple(rounds), t))
        if _graph_stable(rounds, config.early_stop_patience):
            break
    return GameLog(config=config, rounds=rounds)


def _graph_stable(rounds: Sequence[RoundRecord], patience: int) -> bool:
    if len(rounds) < patience:
        return False
    tail = [r.realized_graph for r in rounds[-patience:]]
    return all(g == tail[0] for g in tail[1:])
