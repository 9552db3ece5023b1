"""Reward shaping, advantage estimation, and the clipped training objective.

A rollout is one candidate decision list for a prompt context. Compliant
rollouts are merged with the expert graph and scored two ways: a
sample-level reward ``5 * (0.7 * F1 + 0.3 * accuracy)`` over directed
off-diagonal entries, and a graph-level reward ``1 - hamming / (N(N-1))``.
Graph rewards are compared against two running references, the best of
the current rollout group (prompt best) and the best ever seen for the
same hyperparameter key (memory best).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .core import (
    ConfigError,
    DecisionList,
    GameConfig,
    Graph,
    GroupTooSmall,
    validate_decision_list,
)

COMPLIANT_REWARD = 0.5
NON_COMPLIANT_REWARD = -0.5

W_LOCAL = 0.8
W_GLOBAL = 0.2
W_SAMPLE = 0.8
W_GRAPH = 0.2

ADVANTAGE_EPS = 1e-8


class CombineMode(str, Enum):
    REPLACE_ROW_COL = "replace"
    CONSENT_AND = "consent"


def theta_key(config: GameConfig) -> str:
    """Stable key for one hyperparameter combination.

    Includes the game kind and agent count on top of the payoff
    parameters, since graph rewards are only comparable at equal N.
    """
    alpha = ",".join(repr(float(a)) for a in config.alpha)
    return (f"{config.game_kind.value}|n={config.n_agents}|alpha={alpha}"
            f"|delta={config.delta!r}|cost={config.link_cost!r}")


def compliance_reward(raw: Any, n_agents: int, owner: int) -> float:
    """0.5 for a well-formed decision list, -0.5 otherwise."""
    verdict = validate_decision_list(raw, n_agents, owner)
    return COMPLIANT_REWARD if verdict.compliant else NON_COMPLIANT_REWARD


def combine_with_expert(decision: DecisionList, expert: Graph,
                        mode: CombineMode = CombineMode.REPLACE_ROW_COL) -> Graph:
    """Merge one agent's decision list into the expert graph.

    REPLACE_ROW_COL takes the proposals as that agent's realized links,
    overwriting its row and column. CONSENT_AND additionally requires the
    expert counterpart to have proposed back.
    """
    if expert.n != len(decision.proposals):
        raise ConfigError("decision length must match the expert graph")
    mat = expert.adjacency.copy()
    owner = decision.owner
    row = np.asarray(decision.proposals, dtype=np.int8)
    if mode is CombineMode.CONSENT_AND:
        row = row & expert.adjacency[:, owner]
    mat[owner, :] = row
    mat[:, owner] = row
    mat[owner, owner] = 0
    return Graph(mat)


def _off_diagonal_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def sample_reward(g: Graph, expert: Graph) -> float:
    """F1/accuracy blend over directed off-diagonal entries, scaled to [0, 5].

    Edges are the positive class. When neither graph has any edge the F1
    is taken to be 1, so reproducing an empty expert graph scores fully.
    """
    if g.n != expert.n:
        raise ConfigError("graphs must have equal agent counts")
    mask = _off_diagonal_mask(g.n)
    predicted = g.adjacency[mask].astype(bool)
    actual = expert.adjacency[mask].astype(bool)
    tp = int((predicted & actual).sum())
    fp = int((predicted & ~actual).sum())
    fn = int((~predicted & actual).sum())
    tn = int((~predicted & ~actual).sum())
    denominator = 2 * tp + fp + fn
    f1 = 1.0 if denominator == 0 else 2.0 * tp / denominator
    accuracy = (tp + tn) / int(mask.sum())
    return float(5.0 * (0.7 * f1 + 0.3 * accuracy))


def graph_reward(g: Graph, expert: Graph) -> float:
    """One minus the normalized Hamming distance over off-diagonal entries."""
    if g.n != expert.n:
        raise ConfigError("graphs must have equal agent counts")
    mask = _off_diagonal_mask(g.n)
    distance = int(np.abs(g.adjacency[mask].astype(np.int64)
                          - expert.adjacency[mask].astype(np.int64)).sum())
    return 1.0 - distance / int(mask.sum())


def prompt_best(compliant_graph_rewards: Sequence[float]) -> float:
    """Highest graph reward among a prompt's compliant rollouts; 0 when none."""
    rewards = list(compliant_graph_rewards)
    return max(rewards) if rewards else 0.0


class MemoryBestStore:
    """Running maximum of graph rewards per hyperparameter key.

    Values never decrease, and merging two stores is a commutative
    max-merge, so shards trained concurrently can be combined in any
    order.
    """

    def __init__(self, values: dict[str, float] | None = None):
        self._values: dict[str, float] = dict(values or {})

    def get(self, key: str, default: float | None = None) -> float | None:
        return self._values.get(key, default)

    def update(self, key: str, reward: float) -> float:
        current = self._values.get(key)
        value = reward if current is None else max(current, reward)
        self._values[key] = value
        return value

    def merge(self, other: "MemoryBestStore") -> None:
        for key, value in other._values.items():
            self.update(key, value)

    def as_dict(self) -> dict[str, float]:
        return dict(self._values)

    def __len__(self) -> int:
        return len(self._values)


def sample_advantage(rewards: Sequence[float], epsilon: float = ADVANTAGE_EPS) -> np.ndarray:
    """Group-standardized rewards: (r - mean) / (population std + epsilon)."""
    values = np.asarray(rewards, dtype=np.float64)
    if values.size < 2:
        raise GroupTooSmall("need at least two rollouts for group statistics")
    return (values - values.mean()) / (values.std() + epsilon)


def graph_advantage(r_graph: float, r_prompt: float, r_memory: float,
                    w_local: float = W_LOCAL, w_global: float = W_GLOBAL) -> float:
    """Blend of the gaps to the prompt-best and memory-best references."""
    return w_local * (r_graph - r_prompt) + w_global * (r_graph - r_memory)


def total_advantage(a_sample: float, a_graph: float,
                    w_sample: float = W_SAMPLE, w_graph: float = W_GRAPH) -> float:
    if abs(w_sample + w_graph - 1.0) > 1e-12:
        raise ConfigError("advantage weights must sum to 1")
    return w_sample * a_sample + w_graph * a_graph


def tompo_objective(ratios: Sequence[float], advantages: Sequence[float],
                    clip_eps: float = 0.2, kl: float = 0.0, beta: float = 0.0) -> float:
    """Clipped surrogate objective with a KL penalty.

    Per rollout the pessimistic branch wins:
    ``min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)``; the mean over the
    group is then penalized by ``beta * kl``. The KL value is supplied by
    the caller so the kernel stays policy-agnostic.
    """
    r = np.asarray(ratios, dtype=np.float64)
    a = np.asarray(advantages, dtype=np.float64)
    if r.shape != a.shape:
        raise ConfigError("ratios and advantages must align")
    bad = np.flatnonzero(r <= 0)
    if bad.size:
        raise ValueError(f"non-positive ratio at index {int(bad[0])}")
    clipped = np.clip(r, 1.0 - clip_eps, 1.0 + clip_eps)
    return float(np.minimum(r * a, clipped * a).mean() - beta * kl)


@dataclass(frozen=True)
class RolloutGroup:
    """m candidate decision lists drawn for one prompt context."""

    prompt_key: str
    theta_key: str
    rollouts: tuple[DecisionList, ...]
    log_probs_old: tuple[float, ...]
    expert_graph: Graph

    def __post_init__(self):
        if len(self.rollouts) < 2:
            raise GroupTooSmall("a rollout group needs m >= 2")
        if len(self.log_probs_old) != len(self.rollouts):
            raise ConfigError("one old log-probability per rollout")

    @property
    def m(self) -> int:
        return len(self.rollouts)


@dataclass(frozen=True)
class RewardSet:
    """Rewards attached to a single rollout."""

    compliance: float
    sample: float | None
    graph: float | None
    prompt_best: float
    memory_best: float

    def __post_init__(self):
        compliant = self.compliance == COMPLIANT_REWARD
        if compliant != (self.sample is not None) or compliant != (self.graph is not None):
            raise ConfigError("sample/graph rewards exist exactly for compliant rollouts")


@dataclass
class RolloutTrace:
    """One JSONL record per rollout in a training trace."""

    prompt_key: str
    theta_key: str
    compliant: bool
    r_comp: float
    r_sample: float | None = None
    r_graph: float | None = None
    r_prompt: float | None = None
    r_memory: float | None = None
    a_sample: float | None = None
    a_graph: float | None = None
    a_total: float | None = None
    ratio: float | None = None
    step: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_wire(self) -> dict[str, Any]:
        doc = {
            "prompt_key": self.prompt_key,
            "theta_key": self.theta_key,
            "compliant": self.compliant,
            "r_comp": self.r_comp,
            "r_sample": self.r_sample,
            "r_graph": self.r_graph,
            "r_prompt": self.r_prompt,
            "r_memory": self.r_memory,
            "a_sample": self.a_sample,
            "a_graph": self.a_graph,
            "a_total": self.a_total,
            "ratio": self.ratio,
        }
        if self.step is not None:
            doc["step"] = self.step
        doc.update(self.extra)
        return doc
