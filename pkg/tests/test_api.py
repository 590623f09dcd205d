import pytest
from fastapi.testclient import TestClient

from hendorse.api import create_app, parse_listen
from hendorse.home import Principal

ARRIVAL = [
    ("lock-1", "unlock"),
    ("door-1", "open"),
    ("panel-1", "disarm"),
    ("motion-1", "walk-past"),
    ("presence-1", "arrive"),
    ("beacon-1", "detect"),
    ("thermostat-1", "walk-past"),
]


class TestAuthentication:
    def test_missing_token(self, _client):
        response = _client.post("/api/aho/mode", json={"value": "night"})
        assert response.status_code == 401
        assert response.headers["WWW-Authenticate"] == "Bearer"

    def test_unknown_token(self, _client):
        response = _client.get("/api/states", headers=_auth("stolen"))
        assert response.status_code == 401


class TestAhoWrites:
    def test_applied(self, _client, _testbed):
        response = _client.post("/api/aho/mode", json={"value": "night"}, headers=_auth("ifttt"))
        assert response.status_code == 200
        assert response.json() == {"status": "APPLIED"}
        assert _testbed.aho_states()["mode"] == "night"

    def test_not_granted(self, _client):
        response = _client.post("/api/aho/mode", json={"value": "night"}, headers=_auth("kasa"))
        assert response.status_code == 403
        assert response.json()["reason"] == "permission_denied"

    def test_endorsement_denied(self, _client, _testbed):
        response = _client.post("/api/aho/home", json={"value": "home"}, headers=_auth("kasa"))
        assert response.status_code == 409
        body = response.json()
        assert body["reason"] == "endorsement_denied"
        assert body["failed_checks"]
        assert body["template_id"].startswith("home=home:")
        assert body["notification"] == 0
        assert _testbed.aho_states()["home"] == "away"

        notifications = _client.get("/api/notifications", headers=_auth("dashboard")).json()
        assert [(entry["seq"], entry["kind"], entry["principal"]) for entry in notifications] == [
            (0, "DENIAL", "third-party(kasa)")
        ]
        assert notifications[0]["failed_checks"] == body["failed_checks"]

    def test_physical_arrival_then_endorsed(self, _testbed):
        now = [1000]
        client = TestClient(create_app(_testbed, time_source=lambda: now[0]))
        for device_id, verb in ARRIVAL:
            assert client.post(f"/api/physical/{device_id}/{verb}", headers=_auth("dashboard")).status_code == 200
        now[0] = 3000
        response = client.post("/api/aho/home", json={"value": "home"}, headers=_auth("tracker"))
        assert response.status_code == 200

        states = client.get("/api/states", headers=_auth("tracker")).json()
        assert states["time"] == 3000
        assert states["ahos"]["home"] == "home"
        assert states["devices"]["camera-1"]["power"] == "OFF"

    @pytest.mark.parametrize(
        ("name", "value", "code", "reason"),
        [("mode", "party", 400, "invalid_request"), ("weather", "rain", 404, "not_found")],
    )
    def test_invalid_targets(self, _client, name, value, code, reason):
        response = _client.post(f"/api/aho/{name}", json={"value": value}, headers=_auth("ifttt"))
        assert response.status_code == code
        assert response.json()["reason"] == reason

    def test_extra_body_fields_are_rejected(self, _client):
        response = _client.post("/api/aho/mode", json={"value": "night", "force": True}, headers=_auth("ifttt"))
        assert response.status_code == 422

    def test_clock_never_goes_back(self, _testbed):
        _testbed.advance_to(5000)
        client = TestClient(create_app(_testbed, time_source=lambda: 0))
        assert client.post("/api/aho/mode", json={"value": "night"}, headers=_auth("ifttt")).status_code == 200
        entry = next(entry for entry in _testbed.monitor.audit if entry.target == "mode=night")
        assert entry.time == 5000

    def test_overtaken_requests_are_mediated(self, _testbed):
        def overtaken_arrival() -> int:
            arrival = _testbed.clock.now + 1
            _testbed.set_aho(Principal.local_user(), "mode", "vacation", arrival + 1)  # gets in first
            return arrival

        client = TestClient(create_app(_testbed, time_source=overtaken_arrival))
        assert client.post("/api/aho/mode", json={"value": "night"}, headers=_auth("ifttt")).status_code == 200
        assert client.post("/api/device/switch-1/power", json={"value": "ON"}, headers=_auth("ifttt")).status_code == 200
        assert client.post("/api/physical/motion-1/walk-past", headers=_auth("dashboard")).status_code == 200
        assert _testbed.state.latest("motion-1", "motion").timestamp == _testbed.clock.now


class TestDeviceWrites:
    def test_applied(self, _client, _testbed):
        response = _client.post("/api/device/switch-1/power", json={"value": "ON"}, headers=_auth("ifttt"))
        assert response.status_code == 200
        assert not _testbed.state.latest("switch-1", "power").trusted

    @pytest.mark.parametrize(
        ("path", "value", "code", "reason"),
        [
            ("lock-1/lock", "UNLOCKED(owner)", 409, "tamper_denied"),
            ("motion-1/motion", "ACTIVE", 409, "tamper_denied"),
            ("camera-1/power", "OFF", 403, "permission_denied"),
            ("switch-1/power", "DIMMED", 400, "invalid_request"),
            ("switch-1/power", "ON()", 400, "invalid_request"),
            ("fridge-1/door", "OPEN", 404, "not_found"),
            ("switch-1/volume", "HIGH", 404, "not_found"),
        ],
    )
    def test_denied(self, _client, path, value, code, reason):
        response = _client.post(f"/api/device/{path}", json={"value": value}, headers=_auth("ifttt"))
        assert response.status_code == code
        assert response.json()["reason"] == reason


class TestPhysical:
    def test_needs_a_local_token(self, _client):
        response = _client.post("/api/physical/lock-1/unlock", headers=_auth("ifttt"))
        assert response.status_code == 403

    def test_with_parameters(self, _client, _testbed):
        response = _client.post("/api/physical/lock-1/unlock", json={"params": {"method": "manual"}}, headers=_auth("dashboard"))
        assert response.status_code == 200
        assert response.json() == {"status": "APPLIED", "reports": ["APPLIED"]}
        assert _testbed.device_states()["lock-1"]["lock"] == "UNLOCKED(manual)"

    def test_errors(self, _client, _testbed):
        headers = _auth("dashboard")
        assert _client.post("/api/physical/lock-1/kick", headers=headers).status_code == 404
        response = _client.post("/api/physical/lock-1/unlock", json={"params": {"pin": "1234"}}, headers=headers)
        assert response.status_code == 400
        _testbed.set_online("motion-1", False)
        response = _client.post("/api/physical/motion-1/walk-past", headers=headers)
        assert response.status_code == 409
        assert response.json()["reason"] == "device_offline"


class TestNotifications:
    def test_no_deletion_route(self, _client):
        assert _client.delete("/api/notifications", headers=_auth("dashboard")).status_code == 405


@pytest.mark.parametrize(("listen", "expected"), [("127.0.0.1:8123", ("127.0.0.1", 8123)), ("localhost:80", ("localhost", 80))])
def test_parse_listen(listen, expected):
    assert parse_listen(listen) == expected


@pytest.mark.parametrize("listen", ["8123", ":8123", "localhost:", "localhost:http"])
def test_parse_listen_rejects(listen):
    with pytest.raises(ValueError, match="host:port"):
        parse_listen(listen)


# ----- Helpers & Fixtures ----- #


def _auth(token: str) -> dict[str, str]:
    return {"Authorization": f"Bearer {token}"}


@pytest.fixture
def _client(_testbed) -> TestClient:
    return TestClient(create_app(_testbed, time_source=lambda: 1000))
