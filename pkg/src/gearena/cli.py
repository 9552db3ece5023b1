"""Command-line client for the arena service.

The CLI owns argument parsing, file layout, and manifests; every
computation goes through the service API. By default the app is mounted
in-process over an ASGI transport so no server needs to run; pass
``--server URL`` to talk to a remote instance instead. Each command
writes a ``manifest.json`` next to its outputs, and ``gearena rerun``
replays a manifest byte-identically.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

import httpx

from .core import canonical_dumps

logger = logging.getLogger("gearena")


class ClientError(RuntimeError):
    pass


class ArenaClient:
    """Minimal JSON-over-HTTP client; in-process unless a server URL is given."""

    def __init__(self, server: str | None = None):
        self._client: httpx.Client | None = None
        self._app = None
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from .service import app
            self._app = app

    def _post_in_process(self, path: str, payload: dict[str, Any]) -> httpx.Response:
        import asyncio

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://arena.local",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())

    def post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        if self._client is not None:
            response = self._client.post(path, json=payload)
        else:
            response = self._post_in_process(path, payload)
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ClientError(f"{path} failed ({response.status_code}): {detail}")
        return response.json()

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("wrote %s", path)


def _write_manifest(out_dir: Path, command: str, options: dict[str, Any]) -> None:
    doc = {"command": command, "options": options}
    _write(out_dir / "manifest.json", json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _log_jsonl(log_doc: dict[str, Any]) -> str:
    lines = [canonical_dumps({"kind": "header", "config": log_doc["config"]})]
    lines.extend(canonical_dumps(r) for r in log_doc["rounds"])
    return "\n".join(lines) + "\n"


def _read_log_wire(path: Path) -> dict[str, Any]:
    records = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not records or records[0].get("kind") != "header":
        raise ClientError(f"{path} is not a game log (missing header record)")
    return {"config": records[0]["config"], "rounds": records[1:]}


def run_simulate(options: dict[str, Any], out_dir: Path, client: ArenaClient) -> None:
    response = client.post("/simulate", {
        "config": options["config"],
        "reps": options["reps"],
        "agents": options["agents"],
        "base_seed": options.get("base_seed"),
    })
    for index, log_doc in enumerate(response["logs"]):
        _write(out_dir / f"log_{index}.jsonl", _log_jsonl(log_doc))
    _write_manifest(out_dir, "simulate", options)
    print(f"simulate: wrote {len(response['logs'])} log(s) to {out_dir} "
          f"(lineup {','.join(response['lineup'])})")


def run_metrics(options: dict[str, Any], out_dir: Path | None, client: ArenaClient) -> None:
    logs = [_read_log_wire(Path(p)) for p in options["logs"]]
    response = client.post("/metrics", {
        "logs": logs,
        "u3_mode": options["u3_mode"],
        "with_series": options.get("with_series", True),
    })
    text = canonical_dumps(response) + "\n"
    if out_dir is None:
        sys.stdout.write(text)
    else:
        _write(out_dir / "metrics.json", text)
        _write_manifest(out_dir, "metrics", options)
    aggregate = response["aggregate"]
    print(f"metrics: u1={aggregate['u1']} u2={aggregate['u2']} u3={aggregate['u3']} "
          f"({aggregate['n_logs']} log(s), u3_mode={aggregate['u3_mode']})")


def run_solve(options: dict[str, Any], out_dir: Path | None, client: ArenaClient) -> None:
    problem = options["problem"]
    if problem == "nash":
        payload = {"graph": options["graph"], "alpha": options["alpha"],
                   "delta": options["delta"]}
        response = client.post("/solve/nash", payload)
    elif problem == "pgg-effort":
        response = client.post("/solve/pgg-effort",
                               {"group_size": options["size"], "r": options["r"]})
    elif problem == "bcz-optimum":
        response = client.post("/solve/bcz-optimum",
                               {"config": options["config"], "n_limit": options["n_limit"]})
    elif problem == "pgg-optimum":
        response = client.post("/solve/pgg-optimum", {"n": options["n"], "r": options["r"]})
    else:
        raise ClientError(f"unknown solve problem {problem!r}")
    text = canonical_dumps(response) + "\n"
    if out_dir is None:
        sys.stdout.write(text)
    else:
        _write(out_dir / "solution.json", text)
        _write_manifest(out_dir, "solve", options)


def run_train(options: dict[str, Any], out_dir: Path, client: ArenaClient) -> None:
    response = client.post("/train", {
        "scenario_seed": options["seed"],
        "algo": options["algo"],
        "steps": options["steps"],
        "m": options["m"],
        "scenarios": options["scenarios"],
        "rounds": options["rounds"],
        "n_agents": options.get("n_agents"),
        "train_seed": options.get("train_seed"),
        "snapshot_every": options.get("snapshot_every", 0),
        "collect_rollouts": options.get("collect_rollouts", True),
    })
    _write(out_dir / "params.json", canonical_dumps(response["params"]) + "\n")
    _write(out_dir / "trace.jsonl",
           "".join(canonical_dumps(t) + "\n" for t in response["steps"]))
    _write(out_dir / "rollouts.jsonl",
           "".join(canonical_dumps(t) + "\n" for t in response["rollouts"]))
    _write(out_dir / "memory.json", canonical_dumps(response["memory"]) + "\n")
    if response["snapshots"]:
        _write(out_dir / "snapshots.jsonl",
               "".join(canonical_dumps(s) + "\n" for s in response["snapshots"]))
    _write_manifest(out_dir, "train", options)
    final = response["steps"][-1]["expected_match"] if response["steps"] else None
    print(f"train[{options['algo']}]: {len(response['steps'])} step(s), "
          f"final expected match {final}")


def run_compare(options: dict[str, Any], out_dir: Path, client: ArenaClient) -> None:
    response = client.post("/compare", {
        "suite_seed": options["seed"],
        "count": options["count"],
        "n_agents": options["n_agents"],
        "steps": options["steps"],
        "m": options["m"],
        "threshold": options["threshold"],
        "train_seed": options.get("train_seed"),
    })
    _write(out_dir / "comparison.json", canonical_dumps(response["comparison"]) + "\n")
    _write_manifest(out_dir, "compare", options)
    summary = response["comparison"]["summary"]
    print(f"compare: tompo final {summary['mean_final_tompo']:.4f}, "
          f"grpo final {summary['mean_final_grpo']:.4f}, "
          f"tompo no slower on {summary['fraction_tompo_no_slower']:.0%} of scenarios")


def run_plotdata(options: dict[str, Any], out_dir: Path | None, client: ArenaClient) -> None:
    log_doc = _read_log_wire(Path(options["log"]))
    response = client.post("/plotdata", {"log": log_doc})
    if out_dir is None:
        sys.stdout.write(response["csv"])
    else:
        _write(out_dir / "plot.csv", response["csv"])
        _write_manifest(out_dir, "plotdata", options)


_RUNNERS = {
    "simulate": run_simulate,
    "metrics": run_metrics,
    "solve": run_solve,
    "train": run_train,
    "compare": run_compare,
    "plotdata": run_plotdata,
}

_OUT_REQUIRED = {"simulate", "train", "compare"}


def run_manifest(manifest_path: Path, out_dir: Path, client: ArenaClient) -> None:
    doc = json.loads(manifest_path.read_text())
    command, options = doc["command"], doc["options"]
    if command not in _RUNNERS:
        raise ClientError(f"manifest names unknown command {command!r}")
    _RUNNERS[command](options, out_dir, client)


def _load_config_doc(path: str) -> dict[str, Any]:
    return json.loads(Path(path).read_text())


def _load_graph_arg(value: str, n: int) -> list[list[int]]:
    if value == "empty":
        return [[0] * n for _ in range(n)]
    if value == "complete":
        return [[0 if i == j else 1 for j in range(n)] for i in range(n)]
    return json.loads(Path(value).read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gearena",
        description="Thin client for the graph-effort game arena service.")
    parser.add_argument("--server", help="base URL of a running service; "
                                         "defaults to an in-process instance")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run repeated games and write JSONL logs")
    p.add_argument("--config", required=True, help="path to a game config JSON file")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="base seed (default: config seed)")
    p.add_argument("--agents", default="oracle",
                   help="comma-separated agent kinds, cycled to N agents")
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="evaluate U1/U2/U3 over logs")
    p.add_argument("logs", nargs="+", help="game log JSONL files")
    p.add_argument("--u3-mode", choices=["ratio", "per-round"], default="ratio")
    p.add_argument("--no-series", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("solve", help="equilibrium and welfare solvers")
    solve_sub = p.add_subparsers(dest="problem", required=True)
    q = solve_sub.add_parser("nash", help="equilibrium efforts on a fixed graph")
    q.add_argument("--config", required=True)
    q.add_argument("--graph", default="empty", help="'empty', 'complete', or a JSON file")
    q.add_argument("--out", default=None)
    q = solve_sub.add_parser("pgg-effort", help="optimal contribution for a group size")
    q.add_argument("--size", type=int, required=True)
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--out", default=None)
    q = solve_sub.add_parser("bcz-optimum", help="welfare-optimal graph and efforts")
    q.add_argument("--config", required=True)
    q.add_argument("--n-limit", type=int, default=8)
    q.add_argument("--out", default=None)
    q = solve_sub.add_parser("pgg-optimum", help="maximum total payoff")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--out", default=None)

    p = sub.add_parser("train", help="train the edge policy")
    p.add_argument("--seed", type=int, required=True, help="scenario seed")
    p.add_argument("--algo", choices=["tompo", "grpo"], default="tompo")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--m", type=int, default=8, help="rollouts per group")
    p.add_argument("--scenarios", type=int, default=126)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--n-agents", type=int, default=None)
    p.add_argument("--train-seed", type=int, default=None)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--no-rollouts", action="store_true",
                   help="skip the per-rollout trace file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="train tompo and grpo head to head")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--n-agents", type=int, default=6)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--train-seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plotdata", help="emit per-round series as CSV")
    p.add_argument("log", help="game log JSONL file")
    p.add_argument("--out", default=None)

    p = sub.add_parser("rerun", help="replay a manifest into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the service with uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _options_from_args(args: argparse.Namespace) -> dict[str, Any]:
    if args.command == "simulate":
        return {"config": _load_config_doc(args.config), "reps": args.reps,
                "agents": [k.strip() for k in args.agents.split(",") if k.strip()],
                "base_seed": args.seed}
    if args.command == "metrics":
        return {"logs": [str(Path(p).resolve()) for p in args.logs],
                "u3_mode": args.u3_mode, "with_series": not args.no_series}
    if args.command == "solve":
        options: dict[str, Any] = {"problem": args.problem}
        if args.problem == "nash":
            config = _load_config_doc(args.config)
            options.update(graph=_load_graph_arg(args.graph, int(config["n"])),
                           alpha=config.get("alpha") or [1.0] * int(config["n"]),
                           delta=config.get("delta", 0.05))
        elif args.problem == "pgg-effort":
            options.update(size=args.size, r=args.r)
        elif args.problem == "bcz-optimum":
            options.update(config=_load_config_doc(args.config), n_limit=args.n_limit)
        elif args.problem == "pgg-optimum":
            options.update(n=args.n, r=args.r)
        return options
    if args.command == "train":
        return {"seed": args.seed, "algo": args.algo, "steps": args.steps, "m": args.m,
                "scenarios": args.scenarios, "rounds": args.rounds,
                "n_agents": args.n_agents, "train_seed": args.train_seed,
                "snapshot_every": args.snapshot_every,
                "collect_rollouts": not args.no_rollouts}
    if args.command == "compare":
        return {"seed": args.seed, "count": args.count, "n_agents": args.n_agents,
                "steps": args.steps, "m": args.m, "threshold": args.threshold,
                "train_seed": args.train_seed}
    if args.command == "plotdata":
        return {"log": str(Path(args.log).resolve())}
    raise ClientError(f"no options builder for {args.command}")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("ARENA_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn
        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    client = ArenaClient(args.server)
    try:
        if args.command == "rerun":
            run_manifest(Path(args.manifest), Path(args.out), client)
            return 0
        options = _options_from_args(args)
        out_dir = Path(args.out) if getattr(args, "out", None) else None
        if args.command in _OUT_REQUIRED and out_dir is None:
            raise ClientError(f"{args.command} requires --out")
        _RUNNERS[args.command](options, out_dir, client)
        return 0
    except (ClientError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
