"""Trainable edge policy: independent Bernoulli link proposals for agent 0.

The policy keeps one logit per potential link, so its log-probabilities,
importance ratios, KL divergence, and surrogate gradient are all exact
closed forms. That makes the training objective auditable against finite
differences instead of relying on autodiff machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .core import ConfigError, DecisionList

_P_FLOOR = 1e-12

DEFAULT_LEARNING_RATE = 0.05
DEFAULT_CLIP_EPS = 0.2
DEFAULT_BETA = 0.01


def sigmoid(x: np.ndarray | float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class PolicyParams:
    """Edge logits plus the optimizer settings used to update them."""

    logits: np.ndarray
    learning_rate: float = DEFAULT_LEARNING_RATE
    clip_eps: float = DEFAULT_CLIP_EPS
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        object.__setattr__(self, "logits", np.asarray(self.logits, dtype=np.float64).copy())
        if self.logits.ndim != 1 or self.logits.size < 1:
            raise ConfigError("logits must be a non-empty vector")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")

    @classmethod
    def initial(cls, n_agents: int, **kwargs) -> "PolicyParams":
        if n_agents < 2:
            raise ConfigError("need at least two agents for an edge policy")
        return cls(logits=np.zeros(n_agents - 1), **kwargs)

    @property
    def n_agents(self) -> int:
        return self.logits.size + 1

    def probabilities(self) -> np.ndarray:
        return sigmoid(self.logits)

    def with_logits(self, logits: np.ndarray) -> "PolicyParams":
        return replace(self, logits=logits)

    def to_wire(self) -> dict[str, Any]:
        return {
            "logits": [float(v) for v in self.logits],
            "learning_rate": self.learning_rate,
            "clip_eps": self.clip_eps,
            "beta": self.beta,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "PolicyParams":
        return cls(logits=np.asarray(doc["logits"], dtype=np.float64),
                   learning_rate=float(doc.get("learning_rate", DEFAULT_LEARNING_RATE)),
                   clip_eps=float(doc.get("clip_eps", DEFAULT_CLIP_EPS)),
                   beta=float(doc.get("beta", DEFAULT_BETA)))


def edge_draws(decision: DecisionList) -> np.ndarray:
    """Entries of a decision list excluding the owner's fixed zero."""
    if decision.owner != 0:
        raise ConfigError("the edge policy plays as agent 0")
    return np.asarray(decision.proposals[1:], dtype=np.int64)


def _log_mass(p: np.ndarray, draws: np.ndarray) -> np.ndarray:
    p = np.clip(p, _P_FLOOR, 1.0 - _P_FLOOR)
    return draws * np.log(p) + (1 - draws) * np.log1p(-p)


def decision_log_prob(params: PolicyParams, decision: DecisionList) -> float:
    return float(_log_mass(params.probabilities(), edge_draws(decision)).sum())


def policy_sample(params: PolicyParams, m: int,
                  rng: np.random.Generator) -> tuple[list[DecisionList], np.ndarray]:
    """Draw m independent decision lists with their log-probabilities."""
    if m < 2:
        raise ConfigError("rollout groups need m >= 2")
    p = params.probabilities()
    draws = (rng.random((m, p.size)) < p).astype(np.int64)
    log_probs = _log_mass(p, draws).sum(axis=1)
    decisions = [DecisionList((0, *(int(v) for v in row)), owner=0) for row in draws]
    return decisions, log_probs


def bernoulli_kl(p_new: np.ndarray, p_old: np.ndarray) -> float:
    """KL(new || old) summed over independent edges."""
    p = np.clip(np.asarray(p_new, dtype=np.float64), _P_FLOOR, 1.0 - _P_FLOOR)
    q = np.clip(np.asarray(p_old, dtype=np.float64), _P_FLOOR, 1.0 - _P_FLOOR)
    return float((p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))).sum())


def surrogate_objective(logits: np.ndarray, old_logits: np.ndarray,
                        actions: np.ndarray, old_log_probs: np.ndarray,
                        advantages: np.ndarray, clip_eps: float, beta: float) -> float:
    """Clipped surrogate value at ``logits`` for one rollout group.

    ``actions`` is the m x E matrix of sampled edge draws; ratios are
    computed analytically as exp(logprob_new - logprob_old).
    """
    p = sigmoid(logits)
    new_log_probs = _log_mass(p, actions).sum(axis=1)
    ratios = np.exp(new_log_probs - old_log_probs)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    surrogate = np.minimum(ratios * advantages, clipped * advantages).mean()
    penalty = beta * bernoulli_kl(p, sigmoid(old_logits))
    return float(surrogate - penalty)


def surrogate_gradient(logits: np.ndarray, old_logits: np.ndarray,
                       actions: np.ndarray, old_log_probs: np.ndarray,
                       advantages: np.ndarray, clip_eps: float, beta: float) -> np.ndarray:
    """Exact gradient of :func:`surrogate_objective` with respect to ``logits``.

    Per rollout the gradient of the Bernoulli log-likelihood is
    ``action - p``. Rollouts whose clipped branch is strictly smaller
    contribute nothing (the clip is constant there). The KL penalty's
    gradient reduces to ``p * (1 - p) * (logits - old_logits)`` because the
    logit of a sigmoid is the identity.
    """
    p = sigmoid(logits)
    new_log_probs = _log_mass(p, actions).sum(axis=1)
    ratios = np.exp(new_log_probs - old_log_probs)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    unclipped_active = (ratios * advantages) <= (clipped * advantages)
    weights = np.where(unclipped_active, ratios * advantages, 0.0)
    score = actions - p  # m x E
    gradient = (weights[:, None] * score).mean(axis=0)
    gradient -= beta * p * (1.0 - p) * (logits - old_logits)
    return gradient


def expected_graph_match(params: PolicyParams, expert_row: Sequence[int]) -> float:
    """Expected graph reward of a sampled decision against an expert graph
    whose row for agent 0 is ``expert_row`` (entries for agents 1..N-1).

    Replacing row and column 0 leaves the rest of the expert graph intact,
    so the expected normalized Hamming distance is
    ``2 * sum_e |p_e - row_e| / (N * (N - 1))``.
    """
    p = params.probabilities()
    row = np.asarray(expert_row, dtype=np.float64)
    if row.shape != p.shape:
        raise ConfigError("expert row must have one entry per edge")
    n = params.n_agents
    mismatch = np.abs(p - row).sum()
    return 1.0 - 2.0 * mismatch / (n * (n - 1))
