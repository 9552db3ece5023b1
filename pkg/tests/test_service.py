import pytest
from fastapi.testclient import TestClient

from gearena.service import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


PGG_CONFIG = {"game": "pgg", "n": 5, "rounds": 3, "sequence": "GE", "r": 1.5, "seed": 2}
BCZ_CONFIG = {"game": "bcz", "n": 4, "rounds": 2, "sequence": "GE",
              "alpha": [1.0, 1.0, 1.0, 1.0], "delta": 0.05, "cost": 0.3, "seed": 2}


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestSimulate:
    def test_returns_requested_reps(self, client):
        response = client.post("/simulate", json={"config": PGG_CONFIG, "reps": 2,
                                                  "agents": ["cooperator"]})
        assert response.status_code == 200
        body = response.json()
        assert len(body["logs"]) == 2 and len(body["seeds"]) == 2
        assert body["lineup"] == ["cooperator"] * 5
        assert len(body["logs"][0]["rounds"]) <= 3

    def test_identical_requests_identical_responses(self, client):
        payload = {"config": BCZ_CONFIG, "reps": 2, "agents": ["oracle"]}
        first = client.post("/simulate", json=payload).json()
        second = client.post("/simulate", json=payload).json()
        assert first == second

    def test_unknown_agent_kind_rejected(self, client):
        response = client.post("/simulate", json={"config": PGG_CONFIG,
                                                  "agents": ["martian"]})
        assert response.status_code == 422

    def test_invalid_config_rejected(self, client):
        bad = dict(PGG_CONFIG, r=0.5)
        response = client.post("/simulate", json={"config": bad})
        assert response.status_code == 422


class TestMetrics:
    def test_cooperator_run_scores(self, client):
        logs = client.post("/simulate", json={"config": PGG_CONFIG, "reps": 2,
                                              "agents": ["cooperator"]}).json()["logs"]
        response = client.post("/metrics", json={"logs": logs, "u3_mode": "ratio"})
        body = response.json()
        assert body["aggregate"]["u1"] == 1.0
        assert body["aggregate"]["u3"] == pytest.approx(1.0, abs=1e-9)
        assert len(body["reports"]) == 2

    def test_empty_logs_rejected(self, client):
        assert client.post("/metrics", json={"logs": []}).status_code == 422


class TestSolvers:
    def test_nash_endpoint(self, client):
        graph = [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
        response = client.post("/solve/nash", json={"graph": graph,
                                                    "alpha": [1, 1, 1],
                                                    "delta": 0.05})
        body = response.json()
        assert body["converged"]
        assert body["efforts"][0] == pytest.approx(1 / 0.95)

    def test_pgg_effort_endpoint(self, client):
        body = client.post("/solve/pgg-effort", json={"group_size": 1, "r": 1.5}).json()
        assert body["effort"] == pytest.approx(1 / 3)

    def test_bcz_optimum_endpoint(self, client):
        config = dict(BCZ_CONFIG, cost=10.0)
        body = client.post("/solve/bcz-optimum", json={"config": config}).json()
        assert body["total"] == pytest.approx(2.0, abs=1e-9)
        assert not body["unbounded"] and body["exhaustive"]

    def test_pgg_optimum_endpoint(self, client):
        body = client.post("/solve/pgg-optimum", json={"n": 5, "r": 1.5}).json()
        assert body["total"] == pytest.approx(2.5)


class TestTrainAndCompare:
    def test_train_small_run(self, client):
        response = client.post("/train", json={
            "scenario_seed": 9, "algo": "grpo", "steps": 5, "m": 4,
            "scenarios": 2, "rounds": 4, "n_agents": 5, "snapshot_every": 5})
        body = response.json()
        assert set(body["params"]) == {"5"}
        assert len(body["steps"]) == 5
        assert len(body["rollouts"]) == 20
        assert body["algo"] == "grpo"
        assert len(body["snapshots"]) == 1

    def test_zero_steps_returns_initial_params(self, client):
        body = client.post("/train", json={
            "scenario_seed": 9, "algo": "tompo", "steps": 0,
            "scenarios": 1, "rounds": 3, "n_agents": 4}).json()
        assert body["params"]["4"]["logits"] == [0.0, 0.0, 0.0]
        assert body["steps"] == []

    def test_compare_small_run(self, client):
        response = client.post("/compare", json={
            "suite_seed": 41, "count": 2, "n_agents": 5, "steps": 250, "m": 6})
        body = response.json()["comparison"]
        assert len(body["scenarios"]) == 2
        assert 0.0 <= body["summary"]["fraction_tompo_no_slower"] <= 1.0


class TestPlotData:
    def test_csv_document(self, client):
        log = client.post("/simulate", json={"config": PGG_CONFIG,
                                             "agents": ["oracle"]}).json()["logs"][0]
        body = client.post("/plotdata", json={"log": log}).json()
        lines = body["csv"].strip().splitlines()
        assert lines[0] == "round,links,mean_effort,welfare,graph_change,effort_change"
        assert len(lines) == 1 + len(log["rounds"])
