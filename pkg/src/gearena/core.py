"""Shared domain types for the arena: configs, graphs, decisions, game logs.

Everything here is an immutable value object once constructed, so games,
metrics, and trainers can share instances across workers without locking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised when a game or trainer configuration violates its invariants."""


class DivergentEquilibrium(RuntimeError):
    """Raised when an equilibrium iteration fails to reach a fixed point."""

    def __init__(self, message: str, last_iterate: np.ndarray | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate


class GroupTooSmall(ValueError):
    """Raised when a rollout group is too small for group statistics."""


# Violation tags recorded by the engine and counted by the U1 metric.
TAG_PARSE = "parse_failure"
TAG_LENGTH = "length_mismatch"
TAG_BINARY = "non_binary_entry"
TAG_SELF = "self_loop"
TAG_EFFORT_PARSE = "effort_parse_failure"
TAG_EFFORT_RANGE = "effort_out_of_range"
TAG_TIMEOUT = "timeout"


class GameKind(str, Enum):
    BCZ = "bcz"
    PGG = "pgg"


class StepKind(str, Enum):
    GRAPH = "G"
    PROVISIONAL_GRAPH = "P"
    EFFORT = "E"

    @property
    def is_graph(self) -> bool:
        return self in (StepKind.GRAPH, StepKind.PROVISIONAL_GRAPH)


class LinkRule(str, Enum):
    MUTUAL_AND = "and"
    UNILATERAL_ACCEPT = "accept"


class GeePayoffMode(str, Enum):
    LAST_STAGE = "last"
    SUM_STAGES = "sum"


_SEQUENCE_NAMES = {
    "GE": (StepKind.GRAPH, StepKind.EFFORT),
    "GEE": (StepKind.GRAPH, StepKind.EFFORT, StepKind.EFFORT),
    "GGE": (StepKind.PROVISIONAL_GRAPH, StepKind.GRAPH, StepKind.EFFORT),
}


@dataclass(frozen=True)
class DecisionSequence:
    """The per-round pattern of decision steps; every round repeats it."""

    pattern: tuple[StepKind, ...]

    def __post_init__(self):
        if not self.pattern:
            raise ConfigError("decision sequence must not be empty")
        kinds = list(self.pattern)
        n_graph = sum(1 for k in kinds if k.is_graph)
        n_effort = sum(1 for k in kinds if k is StepKind.EFFORT)
        if n_graph < 1 or n_effort < 1:
            raise ConfigError("sequence needs at least one graph and one effort step")
        # Graph-forming steps come first, then effort steps.
        first_effort = next(i for i, k in enumerate(kinds) if k is StepKind.EFFORT)
        if any(k.is_graph for k in kinds[first_effort:]):
            raise ConfigError("graph steps must precede effort steps")
        if kinds[n_graph - 1] is not StepKind.GRAPH:
            raise ConfigError("the last graph step must be a binding one")

    @classmethod
    def from_name(cls, name: str) -> "DecisionSequence":
        try:
            return cls(_SEQUENCE_NAMES[name.upper()])
        except KeyError:
            raise ConfigError(f"unknown sequence {name!r}; expected GE, GEE, or GGE")

    @property
    def name(self) -> str:
        for name, pattern in _SEQUENCE_NAMES.items():
            if pattern == self.pattern:
                return name
        return "".join(k.value for k in self.pattern)

    @property
    def n_graph_steps(self) -> int:
        return sum(1 for k in self.pattern if k.is_graph)

    @property
    def n_effort_steps(self) -> int:
        return sum(1 for k in self.pattern if k is StepKind.EFFORT)


# Clique enumeration and the exhaustive welfare search stay trivial below here.
MAX_AGENTS = 16


@dataclass(frozen=True)
class GameConfig:
    """Full parameterization of one game scenario."""

    game_kind: GameKind
    n_agents: int
    total_rounds: int
    sequence: DecisionSequence
    alpha: tuple[float, ...]
    delta: float
    link_cost: float
    multiplier: float
    seed: int
    discount: float = 1.0
    early_stop_patience: int = 5
    link_rule: LinkRule = LinkRule.MUTUAL_AND
    gee_payoff_mode: GeePayoffMode = GeePayoffMode.LAST_STAGE

    def __post_init__(self):
        if self.n_agents < 3:
            raise ConfigError("need at least three agents")
        if self.n_agents > MAX_AGENTS:
            raise ConfigError(f"n_agents capped at {MAX_AGENTS}")
        if self.total_rounds < 1:
            raise ConfigError("total_rounds must be >= 1")
        if len(self.alpha) != self.n_agents:
            raise ConfigError("alpha must have one entry per agent")
        if any(a <= 0 for a in self.alpha):
            raise ConfigError("alpha entries must be positive")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.link_cost <= 0:
            raise ConfigError("link_cost must be positive")
        if self.multiplier <= 1:
            raise ConfigError("multiplier must exceed 1")
        if not 0 < self.discount <= 1:
            raise ConfigError("discount must lie in (0, 1]")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")

    @classmethod
    def bcz(cls, n_agents: int, total_rounds: int, sequence: str = "GE", *,
            alpha: Sequence[float] | float = 1.0, delta: float = 0.05,
            link_cost: float = 0.2, seed: int = 0, **kwargs) -> "GameConfig":
        alpha_vec = tuple(float(a) for a in alpha) if isinstance(alpha, Iterable) \
            else (float(alpha),) * n_agents
        return cls(GameKind.BCZ, n_agents, total_rounds,
                   DecisionSequence.from_name(sequence), alpha_vec,
                   float(delta), float(link_cost), multiplier=1.5, seed=seed, **kwargs)

    @classmethod
    def pgg(cls, n_agents: int, total_rounds: int, *, multiplier: float = 1.5,
            seed: int = 0, sequence: str = "GE", **kwargs) -> "GameConfig":
        # alpha/delta/link_cost are irrelevant for PGG; carry neutral values.
        return cls(GameKind.PGG, n_agents, total_rounds,
                   DecisionSequence.from_name(sequence), (1.0,) * n_agents,
                   delta=0.05, link_cost=0.2, multiplier=float(multiplier),
                   seed=seed, **kwargs)

    def to_wire(self) -> dict[str, Any]:
        """Serialize to the documented JSON shape."""
        return {
            "game": self.game_kind.value,
            "n": self.n_agents,
            "rounds": self.total_rounds,
            "sequence": self.sequence.name,
            "alpha": list(self.alpha),
            "delta": self.delta,
            "cost": self.link_cost,
            "r": self.multiplier,
            "seed": self.seed,
            "link_rule": self.link_rule.value,
            "early_stop": self.early_stop_patience,
            "gee_payoff": self.gee_payoff_mode.value,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "GameConfig":
        try:
            n = int(doc["n"])
            return cls(
                game_kind=GameKind(doc["game"]),
                n_agents=n,
                total_rounds=int(doc["rounds"]),
                sequence=DecisionSequence.from_name(doc.get("sequence", "GE")),
                alpha=tuple(float(a) for a in doc.get("alpha", [1.0] * n)),
                delta=float(doc.get("delta", 0.05)),
                link_cost=float(doc.get("cost", 0.2)),
                multiplier=float(doc.get("r", 1.5)),
                seed=int(doc.get("seed", 0)),
                discount=float(doc.get("discount", 1.0)),
                early_stop_patience=int(doc.get("early_stop", 5)),
                link_rule=LinkRule(doc.get("link_rule", "and")),
                gee_payoff_mode=GeePayoffMode(doc.get("gee_payoff", "last")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config document: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "GameConfig":
        return cls.from_wire(json.loads(Path(path).read_text()))


class Graph:
    """N x N binary adjacency matrix with a zero diagonal.

    Instances are immutable; edits go through :meth:`with_edge`, which
    returns a new graph.
    """

    __slots__ = ("adjacency",)

    def __init__(self, adjacency: np.ndarray | Sequence[Sequence[int]]):
        mat = np.asarray(adjacency, dtype=np.int8)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigError("adjacency must be a square matrix")
        if not np.isin(mat, (0, 1)).all():
            raise ConfigError("adjacency entries must be 0 or 1")
        if np.trace(np.abs(mat)) != 0:
            raise ConfigError("adjacency diagonal must be zero (no self-loops)")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "adjacency", mat)

    def __setattr__(self, name, value):
        raise AttributeError("Graph is immutable")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(np.zeros((n, n), dtype=np.int8))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        mat = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            mat[i, j] = 1
            mat[j, i] = 1
        return cls(mat)

    def with_edge(self, i: int, j: int, present: bool) -> "Graph":
        if i == j:
            raise ConfigError("cannot set a self-loop")
        mat = self.adjacency.copy()
        mat[i, j] = mat[j, i] = 1 if present else 0
        return Graph(mat)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    @property
    def is_symmetric(self) -> bool:
        return bool((self.adjacency == self.adjacency.T).all())

    def edge_count(self) -> int:
        # Undirected count; assumes symmetry which both link rules guarantee.
        return int(self.adjacency.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.int64)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def to_lists(self) -> list[list[int]]:
        return self.adjacency.astype(int).tolist()

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash(self.adjacency.tobytes())

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count()})"


@dataclass(frozen=True)
class DecisionList:
    """One agent's link/group proposal vector for a graph step."""

    proposals: tuple[int, ...]
    owner: int

    def __post_init__(self):
        if any(p not in (0, 1) for p in self.proposals):
            raise ConfigError("proposals must be 0/1")
        if not 0 <= self.owner < len(self.proposals):
            raise ConfigError("owner index out of range")
        if self.proposals[self.owner] != 0:
            raise ConfigError("self-entry must be zero")

    @classmethod
    def empty(cls, n: int, owner: int) -> "DecisionList":
        return cls((0,) * n, owner)


@dataclass(frozen=True)
class ComplianceVerdict:
    """Outcome of rule-checking one raw decision; tags name each failed check."""

    compliant: bool
    tags: tuple[str, ...] = ()


def validate_decision_list(raw: Any, n_agents: int, owner: int) -> ComplianceVerdict:
    """Check a raw graph decision against the game rules.

    Total over arbitrary input: malformation yields a verdict, never an
    exception. Checks, each contributing one tag when failed: the output
    parses to a vector at all, length equals ``n_agents``, entries are
    binary, and the owner's self-entry is zero. When the output does not
    parse, the dependent structural checks cannot be evaluated and are not
    double-counted.
    """
    if raw is None or isinstance(raw, (str, bytes)) or not isinstance(raw, (list, tuple, np.ndarray)):
        return ComplianceVerdict(False, (TAG_PARSE,))
    entries = list(raw)
    tags: list[str] = []
    if len(entries) != n_agents:
        tags.append(TAG_LENGTH)
    binary_ok = True
    for value in entries:
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            binary_ok = False
            break
        if float(value) not in (0.0, 1.0):
            binary_ok = False
            break
    if not binary_ok:
        tags.append(TAG_BINARY)
    if owner < len(entries):
        entry = entries[owner]
        is_number = isinstance(entry, (int, float, np.integer, np.floating)) and not isinstance(entry, bool)
        if not is_number or float(entry) != 0.0:
            tags.append(TAG_SELF)
    return ComplianceVerdict(not tags, tuple(tags))


def decision_from_raw(raw: Any, n_agents: int, owner: int) -> DecisionList:
    """Build a DecisionList from validated raw output (caller checked compliance)."""
    return DecisionList(tuple(int(v) for v in raw), owner)


def resolve_links(proposals: Sequence[DecisionList], rule: LinkRule) -> Graph:
    """Combine all agents' proposals into the realized graph.

    MutualAnd keeps an edge only when both endpoints proposed it;
    UnilateralAccept keeps an edge when either endpoint did. Both rules
    yield a symmetric zero-diagonal matrix.
    """
    n = len(proposals)
    if sorted(p.owner for p in proposals) != list(range(n)):
        raise ConfigError("need exactly one proposal per agent")
    want = np.zeros((n, n), dtype=np.int8)
    for p in proposals:
        if len(p.proposals) != n:
            raise ConfigError("proposal length does not match agent count")
        want[p.owner] = p.proposals
    if rule is LinkRule.MUTUAL_AND:
        mat = want & want.T
    else:
        mat = want | want.T
    np.fill_diagonal(mat, 0)
    return Graph(mat)


@dataclass(frozen=True)
class Violation:
    """One failed rule check, attributed to an agent at a step of a round."""

    round_index: int
    step: int
    agent: int
    tag: str

    def to_wire(self) -> dict[str, Any]:
        return {"round": self.round_index, "step": self.step,
                "agent": self.agent, "tag": self.tag}

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "Violation":
        return cls(int(doc["round"]), int(doc["step"]), int(doc["agent"]), str(doc["tag"]))


@dataclass(frozen=True)
class RoundRecord:
    """Everything that happened in one round."""

    round_index: int
    step_kinds: tuple[StepKind, ...]
    graphs_by_step: tuple[Graph, ...]
    proposals_by_step: tuple[tuple[DecisionList, ...], ...]
    efforts_by_step: tuple[tuple[float, ...], ...]
    payoffs: tuple[float, ...]
    violations: tuple[Violation, ...]
    groups: tuple[tuple[int, ...], ...] | None = None

    @property
    def realized_graph(self) -> Graph:
        """The binding graph of the round: the last graph step's resolution."""
        return self.graphs_by_step[-1]

    @property
    def final_efforts(self) -> tuple[float, ...]:
        return self.efforts_by_step[-1]

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "kind": "round",
            "round": self.round_index,
            "step_kinds": [k.value for k in self.step_kinds],
            "graphs": [g.to_lists() for g in self.graphs_by_step],
            "proposals": [[list(d.proposals) for d in step] for step in self.proposals_by_step],
            "efforts": [list(e) for e in self.efforts_by_step],
            "payoffs": list(self.payoffs),
            "violations": [v.to_wire() for v in self.violations],
        }
        if self.groups is not None:
            doc["groups"] = [list(g) for g in self.groups]
        return doc

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "RoundRecord":
        return cls(
            round_index=int(doc["round"]),
            step_kinds=tuple(StepKind(k) for k in doc["step_kinds"]),
            graphs_by_step=tuple(Graph(g) for g in doc["graphs"]),
            proposals_by_step=tuple(
                tuple(DecisionList(tuple(int(v) for v in row), owner)
                      for owner, row in enumerate(step))
                for step in doc["proposals"]),
            efforts_by_step=tuple(tuple(float(x) for x in e) for e in doc["efforts"]),
            payoffs=tuple(float(p) for p in doc["payoffs"]),
            violations=tuple(Violation.from_wire(v) for v in doc["violations"]),
            groups=tuple(tuple(int(i) for i in g) for g in doc["groups"]) if "groups" in doc else None,
        )


@dataclass
class GameLog:
    """An ordered record of a complete game."""

    config: GameConfig
    rounds: list[RoundRecord] = field(default_factory=list)

    @property
    def rounds_played(self) -> int:
        return len(self.rounds)

    @property
    def terminated_early(self) -> bool:
        return self.rounds_played < self.config.total_rounds

    @property
    def final_round(self) -> RoundRecord:
        return self.rounds[-1]

    def to_wire(self) -> dict[str, Any]:
        return {"config": self.config.to_wire(),
                "rounds": [r.to_wire() for r in self.rounds]}

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "GameLog":
        log = cls(config=GameConfig.from_wire(doc["config"]))
        log.rounds = [RoundRecord.from_wire(r) for r in doc["rounds"]]
        return log

    def to_jsonl(self) -> str:
        lines = [canonical_dumps({"kind": "header", "config": self.config.to_wire()})]
        lines.extend(canonical_dumps(r.to_wire()) for r in self.rounds)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "GameLog":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("kind") != "header":
            raise ConfigError("game log must start with a header record")
        log = cls(config=GameConfig.from_wire(records[0]["config"]))
        log.rounds = [RoundRecord.from_wire(doc) for doc in records[1:]]
        return log

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "GameLog":
        return cls.from_jsonl(Path(path).read_text())


def canonical_dumps(obj: Any) -> str:
    """Stable JSON encoding used for every file the arena writes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


_MASK64 = (1 << 64) - 1


def derive_rng(*keys: int) -> np.random.Generator:
    """Deterministic child generator for a (seed, path...) tuple.

    The same key path always yields the same stream, so replays are
    bit-identical regardless of scheduling order.
    """
    return np.random.default_rng(np.random.SeedSequence([k & _MASK64 for k in keys]))
