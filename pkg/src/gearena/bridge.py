"""Bridge to agents running outside the process.

The wire protocol is one JSON object per line on the child's stdin and
stdout. Requests look like::

    {"type": "graph"|"effort", "round": t, "step": j, "n": N,
     "history": [...], "params": {...}}

and the child answers ``{"decision": [0, 1, ...]}`` or
``{"effort": 0.42}``. A missed deadline becomes a timeout substitution
(the engine records the violation); a dead transport degrades the handle
to empty proposals and zero effort, logged once.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from typing import Any

from .agents import AgentHandle
from .core import GameKind
from .engine import DecisionTimeout, StepContext

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 5.0


class ExternalProcessAgent:
    """Owns a child process and translates step contexts to protocol requests."""

    def __init__(self, command: list[str] | str, agent_id: int,
                 timeout: float = DEFAULT_TIMEOUT):
        self.agent_id = agent_id
        self.timeout = timeout
        self.degraded = False
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._process = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            logger.warning("external agent %d failed to start: %s", agent_id, exc)
            self._process = None
            self.degraded = True
            return
        self._lines: queue.Queue[str] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._process is not None and self._process.stdout is not None
        for line in self._process.stdout:
            self._lines.put(line)

    def _mark_degraded(self, reason: str) -> None:
        if not self.degraded:
            logger.warning("external agent %d degraded: %s", self.agent_id, reason)
        self.degraded = True

    def _request(self, doc: dict[str, Any]) -> Any:
        """Send one request; returns the parsed response, a DecisionTimeout,
        or None when the transport is gone."""
        if self.degraded or self._process is None or self._process.poll() is not None:
            self._mark_degraded("process not running")
            return None
        # Discard any stale late answers from earlier timed-out requests.
        while not self._lines.empty():
            try:
                self._lines.get_nowait()
            except queue.Empty:
                break
        try:
            assert self._process.stdin is not None
            self._process.stdin.write(json.dumps(doc) + "\n")
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._mark_degraded(f"write failed: {exc}")
            return None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            if self._process.poll() is not None:
                # the child died rather than stalled; that is a transport
                # failure, not an agent violation
                self._mark_degraded("process exited without answering")
                return None
            return DecisionTimeout()
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            return line.strip()

    def _params_doc(self, ctx: StepContext) -> dict[str, Any]:
        cfg = ctx.config
        if cfg.game_kind is GameKind.PGG:
            return {"game": "pgg", "r": cfg.multiplier}
        return {"game": "bcz", "alpha": list(cfg.alpha), "delta": cfg.delta,
                "cost": cfg.link_cost}

    def _ask(self, ctx: StepContext, kind: str) -> Any:
        response = self._request({
            "type": kind,
            "round": ctx.round_index,
            "step": ctx.step_index,
            "n": ctx.n,
            "history": [r.to_wire() for r in ctx.history],
            "params": self._params_doc(ctx),
        })
        if response is None:  # degraded transport: neutral decision, no violation
            return [0] * ctx.n if kind == "graph" else 0.0
        if isinstance(response, DecisionTimeout):
            return response
        if isinstance(response, dict):
            return response.get("decision") if kind == "graph" else response.get("effort")
        return response  # garbage; the engine's validator will tag it

    def decide_graph(self, ctx: StepContext) -> Any:
        return self._ask(ctx, "graph")

    def decide_effort(self, ctx: StepContext) -> Any:
        return self._ask(ctx, "effort")

    def close(self) -> None:
        if self._process is not None and self._process.poll() is None:
            self._process.terminate()
            try:
                self._process.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._process.kill()

    def __enter__(self) -> "ExternalProcessAgent":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def external_agent_bridge(command: list[str] | str, agent_id: int,
                          timeout: float = DEFAULT_TIMEOUT) -> AgentHandle:
    """Wrap a line-protocol child process as an engine agent."""
    backend = ExternalProcessAgent(command, agent_id, timeout=timeout)
    return AgentHandle(agent_id, "external",
                       decide_graph=backend.decide_graph,
                       decide_effort=backend.decide_effort)
