import pytest
from fastapi.testclient import TestClient

from pooltest.service import create_app


CONFIG = {
    "id": "camp",
    "seed": 1,
    "n": 4,
    "k": 24,
    "n_max": 2,
    "q": 0.3,
    "policy": {"name": "dorfman"},
}


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c


def test_full_flow(client):
    assert client.get("/campaigns").json() == {"campaigns": []}

    resp = client.post("/campaigns", json=CONFIG)
    assert resp.status_code == 201
    view = resp.json()
    assert view["id"] == "camp"
    assert view["status"] == "ready-to-propose"
    assert view["marginal"] == [0.3] * 4

    assert client.get("/campaigns").json() == {"campaigns": ["camp"]}
    assert client.get("/campaigns/camp").json() == view

    resp = client.post("/campaigns/camp/proposal")
    assert resp.status_code == 200
    view = resp.json()
    assert view["status"] == "awaiting-results"
    assert view["pending"] == {"sequence": 1, "groups": [[0, 1], [2, 3]]}

    resp = client.post(
        "/campaigns/camp/results", json={"outcomes": [1, 0], "sequence": 1}
    )
    assert resp.status_code == 200
    view = resp.json()
    assert view["status"] == "ready-to-propose"
    assert view["cycle"] == 1
    assert view["tests_performed"] == 2

    resp = client.get("/campaigns/camp/marginal")
    assert resp.status_code == 200
    body = resp.json()
    assert body["cycle"] == 1
    assert body["marginal"] == view["marginal"]

    resp = client.get("/campaigns/camp/events")
    assert resp.status_code == 200
    kinds = [e["kind"] for e in resp.json()["events"]]
    assert kinds == ["created", "proposed", "observed"]


def test_error_codes(client):
    # malformed config
    assert client.post("/campaigns", json={"id": "x"}).status_code == 400
    assert client.post("/campaigns", json=[1, 2]).status_code == 400
    bad = dict(CONFIG, id="spaces not allowed")
    assert client.post("/campaigns", json=bad).status_code == 400

    # unknown campaign
    for path in ("/campaigns/ghost", "/campaigns/ghost/marginal",
                 "/campaigns/ghost/events"):
        assert client.get(path).status_code == 404
    assert client.post("/campaigns/ghost/proposal").status_code == 404

    client.post("/campaigns", json=CONFIG)

    # duplicate id
    assert client.post("/campaigns", json=CONFIG).status_code == 409

    # wrong status: no proposal pending yet
    resp = client.post("/campaigns/camp/results", json={"outcomes": [0, 0]})
    assert resp.status_code == 409
    assert "error" in resp.json()

    client.post("/campaigns/camp/proposal")
    # proposing twice conflicts
    assert client.post("/campaigns/camp/proposal").status_code == 409
    # stale sequence number
    resp = client.post(
        "/campaigns/camp/results", json={"outcomes": [0, 0], "sequence": 9}
    )
    assert resp.status_code == 409
    # malformed bodies
    resp = client.post("/campaigns/camp/results", json={"values": [0, 0]})
    assert resp.status_code == 400
    resp = client.post(
        "/campaigns/camp/results", json={"outcomes": [0, 0], "sequence": "one"}
    )
    assert resp.status_code == 400
    resp = client.post("/campaigns/camp/results", json={"outcomes": [0, 0, 1]})
    assert resp.status_code == 400

    # the campaign survived all of that untouched
    view = client.get("/campaigns/camp").json()
    assert view["status"] == "awaiting-results"
    assert view["cycle"] == 0


def test_degenerate_results_conflict(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as client:
        config = {
            "id": "degen", "seed": 0, "n": 4, "k": 2, "n_max": 1, "q": 0.1,
            "noise": {"specificity": 1.0, "sensitivity": 1.0},
            "policy": {"name": "g-mimax"},
            "smc": {"num_particles": 8},
        }
        assert client.post("/campaigns", json=config).status_code == 201
        view = client.post("/campaigns/degen/proposal").json()
        seq = view["pending"]["sequence"]
        resp = client.post(
            "/campaigns/degen/results", json={"outcomes": [1, 1], "sequence": seq}
        )
        assert resp.status_code == 409
        assert "impossible" in resp.json()["error"]
        resp = client.post(
            "/campaigns/degen/results", json={"outcomes": [1, 0], "sequence": seq}
        )
        assert resp.status_code == 200


def test_state_survives_app_restart(tmp_path):
    data = tmp_path / "data"
    with TestClient(create_app(data)) as client:
        client.post("/campaigns", json=CONFIG)
        client.post("/campaigns/camp/proposal")
        client.post("/campaigns/camp/results", json={"outcomes": [1, 0]})
        before = client.get("/campaigns/camp").json()
    with TestClient(create_app(data)) as client:
        after = client.get("/campaigns/camp").json()
    assert after == before


def test_ui_mount(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<!doctype html><title>console</title>")
    with TestClient(create_app(tmp_path / "data", ui_dir=ui)) as client:
        resp = client.get("/ui/")
        assert resp.status_code == 200
        assert "console" in resp.text
    # without a ui dir the mount is simply absent
    with TestClient(create_app(tmp_path / "data2")) as client:
        assert client.get("/ui/").status_code == 404
