"""Tests for the request pipeline and the REST routes."""

import asyncio

import pytest
from starlette.testclient import TestClient

from rateadapt.http.routes import create_web_app
from rateadapt.service import run_evaluate, run_meta, run_optimize, run_simulate

SMALL = {"analysis.class_count": 4}


@pytest.fixture
def client():
    with TestClient(create_web_app()) as c:
        yield c


def test_evaluate_endpoint(client):
    response = client.post("/evaluate", json={"scheme": "clra", "n": 2, "overrides": SMALL})
    assert response.status_code == 200
    body = response.json()
    assert body["scheme"] == "clra"
    assert body["T"] == 15
    assert len(body["classes"]) == 4


def test_evaluate_requires_scheme(client):
    response = client.post("/evaluate", json={"n": 2})
    assert response.status_code == 400
    assert "scheme is required" in response.json()["error"]


def test_evaluate_rejects_fragments_beyond_deadline(client):
    response = client.post("/evaluate", json={"scheme": "olra", "n": 16})
    assert response.status_code == 400
    assert response.json()["error"].startswith("Evaluate error: n:")


def test_invalid_override_is_400(client):
    response = client.post(
        "/evaluate", json={"scheme": "olra", "n": 2, "overrides": {"spatial.density": "-1/km2"}}
    )
    assert response.status_code == 400
    assert "spatial.density" in response.json()["error"]


def test_invalid_json_body(client):
    response = client.post("/meta", content=b"{not json", headers={"Content-Type": "application/json"})
    assert response.status_code == 400
    response = client.post("/meta", json=[1, 2])
    assert response.status_code == 400


def test_meta_endpoint(client):
    response = client.post("/meta", json={"n": 2, "deltas": [0.0, 0.5, 1.0], "overrides": SMALL})
    assert response.status_code == 200
    body = response.json()
    assert body["m1"] == pytest.approx(0.6185, abs=5e-4)
    assert body["ccdf"][0] == pytest.approx(1.0)
    assert body["ccdf"][0] >= body["ccdf"][1] >= body["ccdf"][2]
    assert len(body["class_medians"]) == 4
    assert body["degenerate"] is False


def test_meta_degenerate_field(client):
    response = client.post("/meta", json={"n": 3, "overrides": {"spatial.density": 0}})
    body = response.json()
    assert body["degenerate"] is True
    assert body["beta_shape"] is None
    assert body["p_ack"] == 1.0


def test_simulate_disabled_by_default(client):
    response = client.post("/simulate", json={"scheme": "clra", "n": 2})
    assert response.status_code == 404
    assert response.json()["code"] == "SIMULATE_DISABLED"


def test_tools_endpoint(client):
    names = {t["name"] for t in client.get("/tools").json()["tools"]}
    assert {"evaluate", "optimize", "meta"} <= names


def test_optimize_pipeline():
    body, status = asyncio.run(
        run_optimize({"scheme": "olra-es", "objective": "max-psd", "overrides": SMALL})
    )
    assert status == 200
    assert body["feasible"] is True
    assert 1 <= body["n_opt"] <= 15


def test_optimize_rejects_bad_target():
    body, status = asyncio.run(run_optimize({"scheme": "olra", "target": 2.0}))
    assert status == 400
    assert "target" in body["error"]


def test_simulate_pipeline_is_seeded():
    args = {"scheme": "olra", "n": 3, "packets": 500, "seed": 4, "overrides": SMALL}
    first, status = asyncio.run(run_simulate(args))
    second, _ = asyncio.run(run_simulate(dict(args)))
    assert status == 200
    assert first == second
    assert first["packets"] == 2000
    assert first["packets_per_class"] == 500


def test_evaluate_pipeline_p_ack():
    body, status = asyncio.run(run_evaluate({"scheme": "clra", "n": 2, "p_ack": 0.5, "overrides": SMALL}))
    assert status == 200
    assert body["p_ack"] == 0.5
    body, status = asyncio.run(run_evaluate({"scheme": "clra", "n": 2, "p_ack": "high"}))
    assert status == 400


def test_meta_requires_fragments():
    body, status = asyncio.run(run_meta({}))
    assert status == 400
    assert "n (fragment count)" in body["error"]


@pytest.mark.parametrize("deltas", [[1.5], [-0.1], [0.2, "x"], [True], [float("nan")]])
def test_meta_rejects_deltas_outside_unit_interval(deltas):
    for overrides in ({"spatial.density": 0}, SMALL):
        body, status = asyncio.run(run_meta({"n": 2, "deltas": deltas, "overrides": overrides}))
        assert status == 400
        assert "deltas" in body["error"]
