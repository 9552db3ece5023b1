"""Multi-agent graph-effort game arena.

Simulators for a sequential network-investment game and a public goods
game with endogenous groups, equilibrium and welfare solvers, the
U1/U2/U3 metric suite, and a ToMPO/GRPO training loop for a small
parametric edge policy. Everything is exposed through a FastAPI service;
the ``gearena`` CLI is a thin client of that service.
"""

__version__ = "0.1.0"
