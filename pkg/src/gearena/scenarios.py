"""Training scenario preparation.

A scenario is one game configuration played end to end by oracle agents;
the realized graph of every round becomes the expert reference a policy
is rewarded against, and the earlier rounds' graphs form the memory
context for that round's prompt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .agents import oracle_agent
from .core import GameConfig, Graph, canonical_dumps, derive_rng
from .engine import run_game
from .tompo import theta_key

_STREAM_SCENARIO = 23

DEFAULT_SCENARIO_COUNT = 126
DEFAULT_SCENARIO_ROUNDS = 10
AGENT_RANGE = (4, 8)
HETEROGENEOUS_ALPHA_RANGE = (0.6, 1.8)
DELTA_RANGE = (0.05, 0.15)
COST_RANGE = (0.2, 0.6)


@dataclass(frozen=True)
class ScenarioItem:
    """One trainable prompt context: a config, a round, and its expert graph."""

    scenario_index: int
    round_index: int
    config: GameConfig
    expert_graph: Graph
    memory_graphs: tuple[Graph, ...]

    @property
    def prompt_key(self) -> str:
        return f"s{self.scenario_index}/r{self.round_index}"

    @property
    def theta(self) -> str:
        return theta_key(self.config)

    def expert_row(self) -> np.ndarray:
        """Agent 0's expert links toward agents 1..N-1."""
        return self.expert_graph.adjacency[0, 1:].astype(np.int64)


@dataclass
class TrainingScenario:
    """A batch of oracle-played scenarios with per-round expert graphs."""

    configs: list[GameConfig]
    expert_graphs: list[list[Graph]]

    def __post_init__(self):
        if len(self.configs) != len(self.expert_graphs):
            raise ValueError("one expert-graph sequence per config")

    def items(self) -> list[ScenarioItem]:
        out: list[ScenarioItem] = []
        for index, (config, graphs) in enumerate(zip(self.configs, self.expert_graphs)):
            for round_index, graph in enumerate(graphs):
                out.append(ScenarioItem(
                    scenario_index=index,
                    round_index=round_index,
                    config=config,
                    expert_graph=graph,
                    memory_graphs=tuple(graphs[:round_index]),
                ))
        return out

    def scenario_items(self, index: int) -> list[ScenarioItem]:
        return [item for item in self.items() if item.scenario_index == index]

    def final_graph(self, index: int) -> Graph:
        return self.expert_graphs[index][-1]

    def to_wire(self) -> dict[str, Any]:
        return {
            "configs": [c.to_wire() for c in self.configs],
            "expert_graphs": [[g.to_lists() for g in graphs] for graphs in self.expert_graphs],
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "TrainingScenario":
        return cls(
            configs=[GameConfig.from_wire(c) for c in doc["configs"]],
            expert_graphs=[[Graph(g) for g in graphs] for graphs in doc["expert_graphs"]],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(canonical_dumps(self.to_wire()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainingScenario":
        return cls.from_wire(json.loads(Path(path).read_text()))


def _sample_config(master_seed: int, candidate: int, rounds: int,
                   n_agents: int | None, homogeneous: bool | None,
                   cost_range: tuple[float, float]) -> GameConfig:
    rng = derive_rng(master_seed, _STREAM_SCENARIO, candidate)
    n = int(rng.integers(AGENT_RANGE[0], AGENT_RANGE[1] + 1))
    drawn_homogeneous = bool(rng.random() < 0.5)
    lo, hi = HETEROGENEOUS_ALPHA_RANGE
    alpha_draw = rng.uniform(lo, hi, size=AGENT_RANGE[1])
    delta = float(rng.uniform(*DELTA_RANGE))
    cost = float(rng.uniform(*cost_range))
    seed = int(rng.integers(0, 2**31))
    if n_agents is not None:
        n = n_agents
    use_homogeneous = drawn_homogeneous if homogeneous is None else homogeneous
    alpha = (1.0,) * n if use_homogeneous else tuple(round(float(a), 6) for a in alpha_draw[:n])
    return GameConfig.bcz(
        n, rounds, "GE", alpha=alpha, delta=round(delta, 6), link_cost=round(cost, 6),
        seed=seed, early_stop_patience=rounds + 1,
    )


def generate_training_scenarios(master_seed: int, count: int = DEFAULT_SCENARIO_COUNT,
                                rounds: int = DEFAULT_SCENARIO_ROUNDS,
                                n_agents: int | None = None,
                                homogeneous: bool | None = None,
                                stable_tail: int = 0,
                                cost_range: tuple[float, float] = COST_RANGE) -> TrainingScenario:
    """Play ``count`` oracle-only games and collect their per-round graphs.

    Configurations are sampled over 4 to 8 agents, homogeneous or
    heterogeneous productivity, modest synergy, and moderate link costs;
    early stopping is disabled so every scenario contributes the full
    ``rounds`` expert graphs. With ``stable_tail`` > 0, only scenarios whose
    last that-many graphs are identical are kept (candidates are consumed
    in order until ``count`` qualify), which guarantees a well-defined
    convergence target for policy training.
    """
    configs: list[GameConfig] = []
    expert_graphs: list[list[Graph]] = []
    candidate = 0
    while len(configs) < count:
        config = _sample_config(master_seed, candidate, rounds, n_agents, homogeneous,
                                cost_range)
        candidate += 1
        agents = [oracle_agent(i) for i in range(config.n_agents)]
        log = run_game(config, agents)
        graphs = [record.realized_graph for record in log.rounds]
        if stable_tail > 1:
            tail = graphs[-stable_tail:]
            if len(tail) < stable_tail or any(g != tail[0] for g in tail[1:]):
                continue
        configs.append(config)
        expert_graphs.append(graphs)
    return TrainingScenario(configs=configs, expert_graphs=expert_graphs)


def comparison_suite(master_seed: int, count: int = 20, n_agents: int = 6,
                     rounds: int = DEFAULT_SCENARIO_ROUNDS) -> TrainingScenario:
    """Fixed-size suite used to compare training algorithms head to head.

    Heterogeneous productivity with link costs at the low end of the
    sampling range, so the settled expert graphs span empty through
    complete rather than collapsing to one degenerate target.
    """
    return generate_training_scenarios(master_seed, count=count, rounds=rounds,
                                       n_agents=n_agents, homogeneous=False,
                                       stable_tail=3, cost_range=(0.2, 0.35))
