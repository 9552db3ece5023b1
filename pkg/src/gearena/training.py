"""Training loops for the edge policy: the full algorithm and its ablation.

Each step samples one prompt context, draws a rollout group from the
frozen current policy, scores it, and takes one exact gradient step on
the clipped surrogate. The combined advantage is standardized within the
group before the update so the two advantage channels share a common
scale; with the graph channel and references switched off the loop
reduces exactly to the group-relative baseline (``grpo``).

Reference LLM-scale settings (actor learning rate 1e-6, KL coefficient
0.1) are documented for context only; the analytic policy trains with the
desk-scale defaults carried on :class:`~gearena.policy.PolicyParams`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import derive_rng, validate_decision_list
from .policy import (
    PolicyParams,
    decision_log_prob,
    edge_draws,
    expected_graph_match,
    policy_sample,
    surrogate_gradient,
)
from .scenarios import ScenarioItem, TrainingScenario
from .tompo import (
    ADVANTAGE_EPS,
    CombineMode,
    MemoryBestStore,
    RolloutTrace,
    combine_with_expert,
    graph_advantage,
    graph_reward,
    prompt_best,
    sample_advantage,
    sample_reward,
    total_advantage,
)
from . import tompo as rewards

_STREAM_TRAIN = 31

ALGO_TOMPO = "tompo"
ALGO_GRPO = "grpo"


@dataclass(frozen=True)
class TrainerSettings:
    """Knobs that distinguish the full algorithm from the baseline."""

    algo: str = ALGO_TOMPO
    m: int = 8
    w_sample: float = rewards.W_SAMPLE
    w_graph: float = rewards.W_GRAPH
    w_local: float = rewards.W_LOCAL
    w_global: float = rewards.W_GLOBAL
    use_references: bool = True
    beta_override: float | None = None
    inner_epochs: int = 1
    combine_mode: CombineMode = CombineMode.REPLACE_ROW_COL
    advantage_eps: float = ADVANTAGE_EPS

    @classmethod
    def tompo(cls, **kwargs) -> "TrainerSettings":
        return cls(algo=ALGO_TOMPO, **kwargs)

    @classmethod
    def grpo(cls, **kwargs) -> "TrainerSettings":
        """The baseline: sample-level advantages only, no references, no KL."""
        kwargs.setdefault("m", 8)
        return cls(algo=ALGO_GRPO, w_sample=1.0, w_graph=0.0,
                   use_references=False, beta_override=0.0, **kwargs)

    @classmethod
    def for_algo(cls, algo: str, **kwargs) -> "TrainerSettings":
        if algo == ALGO_TOMPO:
            return cls.tompo(**kwargs)
        if algo == ALGO_GRPO:
            return cls.grpo(**kwargs)
        raise ValueError(f"unknown algorithm {algo!r}")


@dataclass
class StepTrace:
    """Per-step summary record written to the training trace."""

    step: int
    prompt_key: str
    theta_key: str
    mean_r_sample: float
    mean_r_graph: float
    best_r_graph: float
    memory_best: float | None
    expected_match: float

    def to_wire(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "prompt_key": self.prompt_key,
            "theta_key": self.theta_key,
            "mean_r_sample": self.mean_r_sample,
            "mean_r_graph": self.mean_r_graph,
            "best_r_graph": self.best_r_graph,
            "memory_best": self.memory_best,
            "expected_match": self.expected_match,
        }


@dataclass
class TrainResult:
    """Final policies (one per agent count present in the scenario) plus traces."""

    bank: dict[int, PolicyParams]
    steps: list[StepTrace] = field(default_factory=list)
    rollouts: list[RolloutTrace] = field(default_factory=list)
    snapshots: list[tuple[int, dict[int, PolicyParams]]] = field(default_factory=list)
    memory: MemoryBestStore = field(default_factory=MemoryBestStore)

    def single_params(self) -> PolicyParams:
        if len(self.bank) != 1:
            raise ValueError("scenario spans several agent counts; pick by n")
        return next(iter(self.bank.values()))

    def bank_wire(self) -> dict[str, Any]:
        return {str(n): p.to_wire() for n, p in sorted(self.bank.items())}


def train_step(params: PolicyParams, item: ScenarioItem, settings: TrainerSettings,
               store: MemoryBestStore, rng: np.random.Generator,
               step_index: int = 0) -> tuple[PolicyParams, StepTrace, list[RolloutTrace]]:
    """One rollout group, one gradient step.

    Non-compliant rollouts earn the penalty reward and drop out of the
    update (the Bernoulli policy cannot actually emit one, but the gate is
    kept so adapters for other policies inherit the behavior).
    """
    decisions, old_log_probs = policy_sample(params, settings.m, rng)
    n = params.n_agents
    compliant: list[int] = []
    traces: list[RolloutTrace] = []
    for i, decision in enumerate(decisions):
        verdict = validate_decision_list(list(decision.proposals), n, decision.owner)
        traces.append(RolloutTrace(
            prompt_key=item.prompt_key, theta_key=item.theta,
            compliant=verdict.compliant,
            r_comp=rewards.COMPLIANT_REWARD if verdict.compliant else rewards.NON_COMPLIANT_REWARD,
            step=step_index,
        ))
        if verdict.compliant:
            compliant.append(i)

    if len(compliant) < 2:
        summary = StepTrace(step_index, item.prompt_key, item.theta,
                            mean_r_sample=0.0, mean_r_graph=0.0, best_r_graph=0.0,
                            memory_best=store.get(item.theta),
                            expected_match=expected_graph_match(params, item.expert_row()))
        return params, summary, traces

    graphs = [combine_with_expert(decisions[i], item.expert_graph, settings.combine_mode)
              for i in compliant]
    r_sample = np.array([sample_reward(g, item.expert_graph) for g in graphs])
    r_graph = np.array([graph_reward(g, item.expert_graph) for g in graphs])
    r_prompt = prompt_best(r_graph)
    stored = store.get(item.theta) if settings.use_references else None
    r_memory = r_prompt if stored is None else stored

    a_sample = sample_advantage(r_sample, settings.advantage_eps)
    if settings.use_references:
        a_graph = np.array([graph_advantage(rg, r_prompt, r_memory,
                                            settings.w_local, settings.w_global)
                            for rg in r_graph])
    else:
        a_graph = np.zeros_like(a_sample)
    a_total = np.array([total_advantage(a_sample[k], a_graph[k],
                                        settings.w_sample, settings.w_graph)
                        for k in range(len(compliant))])
    # Shared scale for the update regardless of the advantage mix.
    a_final = (a_total - a_total.mean()) / (a_total.std() + settings.advantage_eps)

    if settings.use_references:
        store.update(item.theta, float(r_graph.max()))

    actions = np.stack([edge_draws(decisions[i]) for i in compliant])
    old_lp = old_log_probs[compliant]
    beta = params.beta if settings.beta_override is None else settings.beta_override
    logits = params.logits.copy()
    for _ in range(settings.inner_epochs):
        gradient = surrogate_gradient(logits, params.logits, actions, old_lp,
                                      a_final, params.clip_eps, beta)
        logits = logits + params.learning_rate * gradient
    updated = params.with_logits(logits)

    for slot, i in enumerate(compliant):
        trace = traces[i]
        trace.r_sample = float(r_sample[slot])
        trace.r_graph = float(r_graph[slot])
        trace.r_prompt = float(r_prompt) if settings.use_references else None
        trace.r_memory = float(r_memory) if settings.use_references else None
        trace.a_sample = float(a_sample[slot])
        trace.a_graph = float(a_graph[slot]) if settings.use_references else None
        trace.a_total = float(a_final[slot])
        trace.ratio = float(np.exp(decision_log_prob(updated, decisions[i]) - old_log_probs[i]))

    summary = StepTrace(
        step=step_index, prompt_key=item.prompt_key, theta_key=item.theta,
        mean_r_sample=float(r_sample.mean()), mean_r_graph=float(r_graph.mean()),
        best_r_graph=float(r_graph.max()), memory_best=store.get(item.theta),
        expected_match=expected_graph_match(updated, item.expert_row()),
    )
    return updated, summary, traces


def tompo_train_step(params: PolicyParams, item: ScenarioItem, m: int,
                     store: MemoryBestStore, rng: np.random.Generator,
                     **kwargs) -> tuple[PolicyParams, StepTrace, list[RolloutTrace]]:
    return train_step(params, item, TrainerSettings.tompo(m=m, **kwargs), store, rng)


def grpo_train_step(params: PolicyParams, item: ScenarioItem, m: int,
                    rng: np.random.Generator,
                    **kwargs) -> tuple[PolicyParams, StepTrace, list[RolloutTrace]]:
    return train_step(params, item, TrainerSettings.grpo(m=m, **kwargs),
                      MemoryBestStore(), rng)


def _initial_bank(scenario: TrainingScenario,
                  initial: dict[int, PolicyParams] | PolicyParams | None) -> dict[int, PolicyParams]:
    counts = sorted({config.n_agents for config in scenario.configs})
    if initial is None:
        return {n: PolicyParams.initial(n) for n in counts}
    if isinstance(initial, PolicyParams):
        if counts != [initial.n_agents]:
            raise ValueError("single initial policy requires a single-N scenario")
        return {initial.n_agents: initial}
    missing = [n for n in counts if n not in initial]
    if missing:
        raise ValueError(f"initial bank missing agent counts {missing}")
    return dict(initial)


def train(scenario: TrainingScenario, settings: TrainerSettings,
          steps: int, seed: int,
          initial: dict[int, PolicyParams] | PolicyParams | None = None,
          snapshot_every: int = 0,
          store: MemoryBestStore | None = None,
          collect_rollouts: bool = True,
          stop_at_match: float | None = None) -> TrainResult:
    """Run the training loop for ``steps`` gradient updates.

    Prompt contexts are drawn uniformly from the scenario's items with a
    per-step derived stream, so two runs with the same seed and settings
    produce bit-identical parameter trajectories. One policy is kept per
    agent count, since edge logits are dimensioned by N. ``stop_at_match``
    ends the run once the expected graph match against the current item's
    scenario target reaches the given level.
    """
    items = scenario.items()
    if not items:
        raise ValueError("scenario has no items")
    result = TrainResult(bank=_initial_bank(scenario, initial),
                         memory=store if store is not None else MemoryBestStore())
    final_rows = {index: graphs[-1].adjacency[0, 1:].astype(np.int64)
                  for index, graphs in enumerate(scenario.expert_graphs)}
    for step_index in range(steps):
        rng = derive_rng(seed, _STREAM_TRAIN, step_index)
        item = items[int(rng.integers(len(items)))]
        n = item.config.n_agents
        updated, summary, rollout_traces = train_step(
            result.bank[n], item, settings, result.memory, rng, step_index=step_index)
        result.bank[n] = updated
        # Convergence is judged against the scenario's settled graph.
        summary.expected_match = expected_graph_match(updated, final_rows[item.scenario_index])
        result.steps.append(summary)
        if collect_rollouts:
            result.rollouts.extend(rollout_traces)
        if snapshot_every and (step_index + 1) % snapshot_every == 0:
            result.snapshots.append((step_index + 1, dict(result.bank)))
        if stop_at_match is not None and summary.expected_match >= stop_at_match:
            break
    return result


@dataclass
class ScenarioComparison:
    scenario_index: int
    theta_key: str
    tompo_steps_to_threshold: int | None
    grpo_steps_to_threshold: int | None
    tompo_final_match: float
    grpo_final_match: float

    def to_wire(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario_index,
            "theta_key": self.theta_key,
            "tompo_steps_to_threshold": self.tompo_steps_to_threshold,
            "grpo_steps_to_threshold": self.grpo_steps_to_threshold,
            "tompo_final_match": self.tompo_final_match,
            "grpo_final_match": self.grpo_final_match,
        }


@dataclass
class ComparisonResult:
    scenarios: list[ScenarioComparison]
    threshold: float
    step_cap: int

    def mean_final(self, algo: str) -> float:
        values = [s.tompo_final_match if algo == ALGO_TOMPO else s.grpo_final_match
                  for s in self.scenarios]
        return float(np.mean(values))

    def fraction_no_slower(self) -> float:
        """Share of scenarios where tompo hits the threshold in no more
        steps than grpo (never reaching it counts as infinitely many)."""
        wins = 0
        for s in self.scenarios:
            t = s.tompo_steps_to_threshold
            g = s.grpo_steps_to_threshold
            t_value = float("inf") if t is None else t
            g_value = float("inf") if g is None else g
            if t_value <= g_value:
                wins += 1
        return wins / len(self.scenarios)

    def to_wire(self) -> dict[str, Any]:
        return {
            "threshold": self.threshold,
            "step_cap": self.step_cap,
            "scenarios": [s.to_wire() for s in self.scenarios],
            "summary": {
                "mean_final_tompo": self.mean_final(ALGO_TOMPO),
                "mean_final_grpo": self.mean_final(ALGO_GRPO),
                "fraction_tompo_no_slower": self.fraction_no_slower(),
            },
        }


def _single_scenario(scenario: TrainingScenario, index: int) -> TrainingScenario:
    return TrainingScenario(configs=[scenario.configs[index]],
                            expert_graphs=[scenario.expert_graphs[index]])


def run_comparison(scenario: TrainingScenario, seed: int, steps: int = 2000,
                   m: int = 8, threshold: float = 0.9,
                   stop_at_match: float = 0.995) -> ComparisonResult:
    """Train both algorithms per scenario and compare convergence speed.

    Each scenario trains its own policy from neutral logits; the expected
    graph match against the scenario's settled expert graph is tracked
    every step, and the first step reaching ``threshold`` is recorded.
    """
    comparisons: list[ScenarioComparison] = []
    for index in range(len(scenario.configs)):
        sub = _single_scenario(scenario, index)
        finals: dict[str, float] = {}
        crossings: dict[str, int | None] = {}
        for algo in (ALGO_TOMPO, ALGO_GRPO):
            settings = TrainerSettings.for_algo(algo, m=m)
            result = train(sub, settings, steps, seed=seed + index,
                           collect_rollouts=False, stop_at_match=stop_at_match)
            finals[algo] = result.steps[-1].expected_match if result.steps else 0.0
            crossing = next((trace.step + 1 for trace in result.steps
                             if trace.expected_match >= threshold), None)
            crossings[algo] = crossing
        comparisons.append(ScenarioComparison(
            scenario_index=index,
            theta_key=sub.items()[0].theta,
            tompo_steps_to_threshold=crossings[ALGO_TOMPO],
            grpo_steps_to_threshold=crossings[ALGO_GRPO],
            tompo_final_match=finals[ALGO_TOMPO],
            grpo_final_match=finals[ALGO_GRPO],
        ))
    return ComparisonResult(scenarios=comparisons, threshold=threshold, step_cap=steps)
