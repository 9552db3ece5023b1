"""FastAPI application wrapping the core package.

Endpoints are stateless: they compute and return JSON documents, leaving
file layout and manifests to clients (the CLI writes both). Seeds arrive
in the request, so identical requests produce identical responses.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..agents import make_lineup
from ..core import ConfigError, GameLog, derive_rng
from ..engine import run_game
from ..metrics import U3Mode, aggregate, evaluate, extract_series, series_csv
from ..scenarios import comparison_suite, generate_training_scenarios
from ..solvers import bcz_global_optimum, bcz_nash_effort
from ..solvers import pgg_global_optimum, pgg_optimal_effort
from ..core import Graph
from ..training import TrainerSettings, run_comparison, train
from . import schemas

_STREAM_REP = 41


def _rep_seed(base_seed: int, rep: int) -> int:
    return int(derive_rng(base_seed, _STREAM_REP, rep).integers(0, 2**31))


def create_app() -> FastAPI:
    app = FastAPI(title="gearena", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(_, exc: ConfigError):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(request: schemas.SimulateRequest) -> schemas.SimulateResponse:
        config = request.config.to_config()
        base_seed = config.seed if request.base_seed is None else request.base_seed
        try:
            lineup_kinds = [a.kind for a in make_lineup(request.agents, config.n_agents)]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        logs = []
        seeds = []
        for rep in range(request.reps):
            seed = _rep_seed(base_seed, rep)
            rep_config = dataclasses.replace(config, seed=seed)
            agents = make_lineup(request.agents, config.n_agents)
            logs.append(run_game(rep_config, agents).to_wire())
            seeds.append(seed)
        return schemas.SimulateResponse(logs=logs, seeds=seeds, lineup=lineup_kinds)

    @app.post("/metrics", response_model=schemas.MetricsResponse)
    def metrics(request: schemas.MetricsRequest) -> schemas.MetricsResponse:
        if not request.logs:
            raise HTTPException(status_code=422, detail="no logs supplied")
        mode = U3Mode(request.u3_mode)
        reports = [evaluate(GameLog.from_wire(doc), mode, with_series=request.with_series)
                   for doc in request.logs]
        return schemas.MetricsResponse(
            reports=[r.to_wire() for r in reports],
            aggregate=aggregate(reports),
        )

    @app.post("/solve/nash", response_model=schemas.NashResponse)
    def solve_nash(request: schemas.NashRequest) -> schemas.NashResponse:
        solution = bcz_nash_effort(Graph(request.graph), request.alpha, request.delta)
        efforts = None if solution.efforts is None else [float(x) for x in solution.efforts]
        return schemas.NashResponse(efforts=efforts,
                                    spectral_gap=solution.spectral_gap,
                                    converged=solution.converged)

    @app.post("/solve/pgg-effort", response_model=schemas.PggEffortResponse)
    def solve_pgg_effort(request: schemas.PggEffortRequest) -> schemas.PggEffortResponse:
        return schemas.PggEffortResponse(effort=pgg_optimal_effort(request.group_size, request.r))

    @app.post("/solve/bcz-optimum", response_model=schemas.BczOptimumResponse)
    def solve_bcz_optimum(request: schemas.BczOptimumRequest) -> schemas.BczOptimumResponse:
        result = bcz_global_optimum(request.config.to_config(), n_limit=request.n_limit)
        return schemas.BczOptimumResponse(
            graph=result.graph.to_lists(),
            efforts=[float(x) for x in result.efforts],
            total=result.total,
            unbounded=result.unbounded,
            exhaustive=result.exhaustive,
        )

    @app.post("/solve/pgg-optimum", response_model=schemas.PggOptimumResponse)
    def solve_pgg_optimum(request: schemas.PggOptimumRequest) -> schemas.PggOptimumResponse:
        return schemas.PggOptimumResponse(total=pgg_global_optimum(request.n, request.r))

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_policy(request: schemas.TrainRequest) -> schemas.TrainResponse:
        scenario = generate_training_scenarios(
            request.scenario_seed, count=request.scenarios, rounds=request.rounds,
            n_agents=request.n_agents)
        settings = TrainerSettings.for_algo(request.algo, m=request.m)
        seed = request.scenario_seed if request.train_seed is None else request.train_seed
        result = train(scenario, settings, request.steps, seed=seed,
                       snapshot_every=request.snapshot_every,
                       collect_rollouts=request.collect_rollouts)
        return schemas.TrainResponse(
            algo=request.algo,
            params=result.bank_wire(),
            steps=[t.to_wire() for t in result.steps],
            rollouts=[t.to_wire() for t in result.rollouts],
            memory=result.memory.as_dict(),
            snapshots=[{"step": step, "params": {str(n): p.to_wire() for n, p in bank.items()}}
                       for step, bank in result.snapshots],
        )

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(request: schemas.CompareRequest) -> schemas.CompareResponse:
        suite = comparison_suite(request.suite_seed, count=request.count,
                                 n_agents=request.n_agents)
        seed = request.suite_seed if request.train_seed is None else request.train_seed
        result = run_comparison(suite, seed=seed, steps=request.steps, m=request.m,
                                threshold=request.threshold)
        return schemas.CompareResponse(comparison=result.to_wire())

    @app.post("/plotdata", response_model=schemas.PlotDataResponse)
    def plotdata(request: schemas.PlotDataRequest) -> schemas.PlotDataResponse:
        log = GameLog.from_wire(request.log)
        return schemas.PlotDataResponse(csv=series_csv(extract_series(log)))

    return app


app = create_app()
