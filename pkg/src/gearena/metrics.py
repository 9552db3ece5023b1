"""Evaluation metrics over completed game logs.

U1 measures rule compliance, U2 proximity of final efforts to the
individually optimal profile on the final graph, U3 collective welfare.
The per-round series mirror the quantities usually plotted for a run:
link count, mean effort, welfare, and the change rates of graph and
efforts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .core import GameKind, GameLog, StepKind
from .pgg import GroupPartition
from .solvers import bcz_global_optimum, bcz_nash_effort, pgg_global_optimum, pgg_optimal_effort

# Checks per agent per step, the fixed denominator behind U1: a graph step
# checks (parsed, length, binary entries, self-entry zero); an effort step
# checks (parsed, in domain).
GRAPH_CHECKS_PER_STEP = 4
EFFORT_CHECKS_PER_STEP = 2

_EFFORT_CHANGE_EPS = 1e-9


class U3Mode(str, Enum):
    RATIO_TO_OPTIMUM = "ratio"
    WELFARE_PER_ROUND = "per-round"


@dataclass(frozen=True)
class MetricReport:
    u1: float
    u2: float | None
    u3: float | None
    u3_mode: U3Mode
    u2_note: str | None = None
    u3_note: str | None = None
    series: dict[str, list[float]] | None = None

    def to_wire(self) -> dict[str, Any]:
        return {
            "u1": self.u1,
            "u2": self.u2,
            "u2_note": self.u2_note,
            "u3": self.u3,
            "u3_note": self.u3_note,
            "u3_mode": self.u3_mode.value,
            "series": self.series,
        }


def total_checks(log: GameLog) -> int:
    per_round = log.config.n_agents * (
        log.config.sequence.n_graph_steps * GRAPH_CHECKS_PER_STEP
        + log.config.sequence.n_effort_steps * EFFORT_CHECKS_PER_STEP)
    return per_round * log.rounds_played


def metric_u1(log: GameLog) -> float:
    """Compliance: one minus the violation fraction, floored at zero."""
    violations = sum(len(r.violations) for r in log.rounds)
    checks = total_checks(log)
    return max(1.0 - violations / checks, 0.0) if checks else 1.0


def metric_u2(actual: Sequence[float], optimal: Sequence[float]) -> float:
    """Proximity of an effort profile to the optimal one, in [0, 1].

    A zero optimal profile makes the relative residual undefined; by
    convention the score is 1 when the actual profile is also zero and 0
    otherwise.
    """
    a = np.asarray(actual, dtype=np.float64)
    o = np.asarray(optimal, dtype=np.float64)
    denom = float(np.linalg.norm(o))
    if denom == 0.0:
        return 1.0 if float(np.linalg.norm(a)) == 0.0 else 0.0
    return max(1.0 - float(np.linalg.norm(a - o)) / denom, 0.0)


def optimal_final_efforts(log: GameLog) -> tuple[np.ndarray | None, str | None]:
    """Individually optimal efforts for the final round's structure."""
    final = log.final_round
    if log.config.game_kind is GameKind.BCZ:
        solution = bcz_nash_effort(final.realized_graph, log.config.alpha, log.config.delta)
        if not solution.converged:
            return None, "equilibrium diverges on the final graph"
        return solution.efforts, None
    groups = final.groups
    if groups is None:
        groups = tuple((i,) for i in range(log.config.n_agents))
    partition = GroupPartition(groups, log.config.n_agents)
    optimal = np.array([pgg_optimal_effort(partition.size_of(i), log.config.multiplier)
                        for i in range(log.config.n_agents)])
    return optimal, None


def compute_u2(log: GameLog) -> tuple[float | None, str | None]:
    optimal, note = optimal_final_efforts(log)
    if optimal is None:
        return None, note
    return metric_u2(log.final_round.final_efforts, optimal), None


def metric_u3(log: GameLog, mode: U3Mode, n_limit: int = 8) -> tuple[float | None, str | None]:
    """Cooperative outcome, either as a ratio to the global optimum or as
    mean welfare per round (the latter may be negative)."""
    if mode is U3Mode.WELFARE_PER_ROUND:
        totals = [sum(r.payoffs) for r in log.rounds]
        return float(np.mean(totals)), None
    final_total = sum(log.final_round.payoffs)
    if log.config.game_kind is GameKind.PGG:
        optimum = pgg_global_optimum(log.config.n_agents, log.config.multiplier)
    else:
        result = bcz_global_optimum(log.config, n_limit=n_limit)
        if result.unbounded:
            return None, "global optimum is unbounded"
        optimum = result.total
    return max(final_total / optimum, 0.0), None


def extract_series(log: GameLog) -> dict[str, list[float]]:
    """Per-round plot series; change rates are zero at round 0."""
    links: list[float] = []
    mean_effort: list[float] = []
    welfare: list[float] = []
    graph_change: list[float] = []
    effort_change: list[float] = []
    n = log.config.n_agents
    off_diagonal = n * (n - 1)
    previous = None
    for record in log.rounds:
        graph = record.realized_graph
        efforts = np.asarray(record.final_efforts)
        links.append(float(graph.edge_count()))
        mean_effort.append(float(efforts.mean()))
        welfare.append(float(sum(record.payoffs)))
        if previous is None:
            graph_change.append(0.0)
            effort_change.append(0.0)
        else:
            prev_graph, prev_efforts = previous
            differing = int((graph.adjacency != prev_graph.adjacency).sum())
            graph_change.append(differing / off_diagonal)
            moved = int((np.abs(efforts - prev_efforts) > _EFFORT_CHANGE_EPS).sum())
            effort_change.append(moved / n)
        previous = (graph, efforts)
    return {
        "links": links,
        "mean_effort": mean_effort,
        "welfare": welfare,
        "graph_change": graph_change,
        "effort_change": effort_change,
    }


def series_csv(series: dict[str, list[float]]) -> str:
    lines = ["round,links,mean_effort,welfare,graph_change,effort_change"]
    for k in range(len(series["links"])):
        lines.append(",".join([
            str(k),
            repr(series["links"][k]),
            repr(series["mean_effort"][k]),
            repr(series["welfare"][k]),
            repr(series["graph_change"][k]),
            repr(series["effort_change"][k]),
        ]))
    return "\n".join(lines) + "\n"


def evaluate(log: GameLog, u3_mode: U3Mode = U3Mode.RATIO_TO_OPTIMUM,
             with_series: bool = True, n_limit: int = 8) -> MetricReport:
    u2, u2_note = compute_u2(log)
    u3, u3_note = metric_u3(log, u3_mode, n_limit=n_limit)
    return MetricReport(
        u1=metric_u1(log),
        u2=u2,
        u3=u3,
        u3_mode=u3_mode,
        u2_note=u2_note,
        u3_note=u3_note,
        series=extract_series(log) if with_series else None,
    )


def aggregate(reports: Sequence[MetricReport]) -> dict[str, Any]:
    """Arithmetic mean across repetition logs; undefined entries are skipped
    and their count reported."""
    if not reports:
        raise ValueError("no reports to aggregate")
    u2_values = [r.u2 for r in reports if r.u2 is not None]
    u3_values = [r.u3 for r in reports if r.u3 is not None]
    return {
        "n_logs": len(reports),
        "u1": float(np.mean([r.u1 for r in reports])),
        "u2": float(np.mean(u2_values)) if u2_values else None,
        "u2_defined": len(u2_values),
        "u3": float(np.mean(u3_values)) if u3_values else None,
        "u3_defined": len(u3_values),
        "u3_mode": reports[0].u3_mode.value,
    }
