import pytest
from fastapi.testclient import TestClient

from reliablocks.api import create_app
from reliablocks.avs import AvsParams
from reliablocks.engine import Engine
from reliablocks.ingestion import read_feed, record_to_obj
from reliablocks.scoring import ScoringParams
from reliablocks.store import EventLog

SCORING = ScoringParams(finality_depth=100)
AVS = AvsParams(operator_stake=10**22)

SCORE_FIELDS = {
    "l2_block", "score", "interest_rate", "cumulative_value_base_units", "exit_count", "depth", "finalized",
}


@pytest.fixture
def empty_client():
    return TestClient(create_app(Engine(SCORING, AVS)))


@pytest.fixture
def golden_engine(tmp_path, golden_feed_path):
    eng = Engine(SCORING, AVS, EventLog(tmp_path / "g.log"))
    eng.apply(record_to_obj(r) for r in read_feed(golden_feed_path))
    return eng


@pytest.fixture
def client(golden_engine):
    return TestClient(create_app(golden_engine))


def test_health_empty(empty_client):
    r = empty_client.get("/v1/health")
    assert r.status_code == 200 and r.json() == {"status": "ok", "head": 0, "events": 0}
    assert empty_client.get("/v1/health").json() == r.json()


def test_health_after_replay(client, golden_engine):
    body = client.get("/v1/health").json()
    assert body == {"status": "ok", "head": 99, "events": len(golden_engine.log)}


def test_score_empty_chain(empty_client):
    r = empty_client.get("/v1/score/0")
    assert r.status_code == 200
    body = r.json()
    assert set(body) == SCORE_FIELDS
    assert body["score"] == 0.0 and body["interest_rate"] == 0.03


def test_score_beyond_head(client):
    r = client.get("/v1/score/100")
    assert r.status_code == 422 and r.json()["code"] == "beyond_head"


@pytest.mark.parametrize("path", ["/v1/score/-1", "/v1/score/abc", "/v1/scores?from=x&to=1", "/v1/scores?to=1"])
def test_bad_request(client, path):
    r = client.get(path)
    assert r.status_code == 400 and r.json()["code"] == "bad_request"


def test_score_matches_library(client, golden_engine):
    assert client.get("/v1/score/5").json() == golden_engine.score(5)


def test_range(client):
    one = client.get("/v1/scores", params={"from": 99, "to": 99}).json()
    assert len(one) == 1 and one[0]["l2_block"] == 99
    assert client.get("/v1/scores", params={"from": 5, "to": 4}).status_code == 400
    assert client.get("/v1/scores", params={"from": 90, "to": 100}).status_code == 422
    many = client.get("/v1/scores", params={"from": 0, "to": 99}).json()
    assert many == [client.get(f"/v1/score/{b}").json() for b in range(100)]


def test_range_cap():
    eng = Engine(SCORING, AVS)
    eng.apply([{"type": "head", "l2_block": 20_000, "ts": 0}])
    c = TestClient(create_app(eng))
    assert c.get("/v1/scores", params={"from": 0, "to": 10_000}).status_code == 200
    assert c.get("/v1/scores", params={"from": 0, "to": 10_001}).status_code == 400


def test_tasks(client, golden_engine):
    r = client.post("/v1/tasks", json={"l2_block": 99})
    assert r.status_code == 201
    body = r.json()
    assert body["status"] == "open" and body["task_id"] == "task-0" and body["result"] is None
    assert client.get("/v1/tasks/task-0").json() == body
    assert client.get("/v1/tasks/unknown").status_code == 404
    r = client.post("/v1/tasks", json={"l2_block": 100})
    assert r.status_code == 422 and r.json()["code"] == "beyond_head"
    assert client.post("/v1/tasks", json={"l2_block": "x"}).status_code == 400
    # task creation went through the log
    assert list(golden_engine.log.entries())[-1].record == {"type": "task", "l2_block": 99}


def test_operators_after_slashing_round(golden_engine):
    golden_engine.apply(
        [
            {"type": "operator", "id": f"op{i}", "stake": str(10**22), "strategy": s}
            for i, s in enumerate(["honest", "honest", "honest", "offset:10"])
        ]
        + [{"type": "round", "l2_block": 50}]
    )
    c = TestClient(create_app(golden_engine))
    ops = {o["id"]: o for o in c.get("/v1/operators").json()}
    assert set(ops["op3"]) >= {"id", "stake", "active", "slashed_total", "rewards_total"}
    assert int(ops["op3"]["slashed_total"]) == 10**21
    assert int(ops["op3"]["stake"]) == 10**22 - 10**21
    assert int(ops["op0"]["rewards_total"]) > 0
    task = c.get("/v1/tasks/task-0").json()
    assert task["status"] == "resolved" and task["result"]["slashed"] == ["op3"]


def test_get_is_pure(client, golden_engine):
    before = (golden_engine.state.to_dict(), golden_engine.world.to_dict(), golden_engine.seq)
    for path in ["/v1/health", "/v1/score/3", "/v1/scores?from=0&to=10", "/v1/operators", "/v1/tasks/nope"]:
        client.get(path)
    assert (golden_engine.state.to_dict(), golden_engine.world.to_dict(), golden_engine.seq) == before
