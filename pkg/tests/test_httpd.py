import json

import numpy as np
import requests

from gahub.protocol import ExperimentConfig, decode_config, decode_reply, encode_report
from conftest import honest_report, live_server, small_params


def tiny_config(**overrides):
    defaults = dict(ga=small_params(), evaluation_budget=5000)
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def test_get_config_roundtrips():
    config = tiny_config()
    with live_server(config) as (url, hub, _):
        resp = requests.get(url + "/api/config", timeout=5)
        assert resp.status_code == 200
        assert decode_config(resp.text) == config


def test_migration_roundtrip_over_http():
    config = tiny_config()
    with live_server(config) as (url, hub, _):
        genome = np.zeros(64, dtype=np.uint8)
        genome[:8] = 1
        body = encode_report(honest_report(config, "webclient", genome))
        resp = requests.post(
            url + "/api/migration",
            data=body.encode(),
            headers={"Content-Type": "application/json"},
            timeout=5,
        )
        assert resp.status_code == 200
        reply = decode_reply(resp.text, 64)
        assert reply.immigrant_fitness == 8.0
        assert reply.generations_to_run == 20
        assert hub.get_stats()["evaluations_total"] == 1000


def test_stats_endpoint():
    with live_server(tiny_config()) as (url, hub, _):
        resp = requests.get(url + "/api/stats", timeout=5)
        assert resp.status_code == 200
        stats = resp.json()
        assert stats["evaluations_total"] == 0
        assert stats["evaluation_budget"] == 5000


def test_malformed_body_is_400():
    with live_server(tiny_config()) as (url, _, __):
        resp = requests.post(url + "/api/migration", data=b"{nope", timeout=5)
        assert resp.status_code == 400
        assert "error" in resp.json()


def test_validation_failure_is_422():
    config = tiny_config()
    with live_server(config) as (url, _, __):
        report = honest_report(config, "bad", np.zeros(64, dtype=np.uint8))
        obj = json.loads(encode_report(report))
        obj["evaluations_delta"] = -1
        resp = requests.post(url + "/api/migration", data=json.dumps(obj).encode(), timeout=5)
        assert resp.status_code == 422


def test_rejected_report_is_422_with_reason():
    config = tiny_config()
    with live_server(config) as (url, hub, _):
        report = honest_report(config, "cheat", np.zeros(64, dtype=np.uint8))
        obj = json.loads(encode_report(report))
        obj["best_fitness"] = 64.0
        resp = requests.post(url + "/api/migration", data=json.dumps(obj).encode(), timeout=5)
        assert resp.status_code == 422
        assert "rejected" in resp.json()["error"]
        assert hub.get_stats()["evaluations_total"] == 0


def test_unknown_endpoint_404():
    with live_server(tiny_config()) as (url, _, __):
        assert requests.get(url + "/api/nothing", timeout=5).status_code == 404
        assert requests.post(url + "/api/nothing", data=b"{}", timeout=5).status_code == 404


def test_root_serves_placeholder_without_static_dir():
    with live_server(tiny_config()) as (url, _, __):
        resp = requests.get(url + "/", timeout=5)
        assert resp.status_code == 200
        assert "text/html" in resp.headers["Content-Type"]


def test_root_serves_static_assets(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>volunteer page</body></html>")
    (tmp_path / "app.js").write_text("console.log('hi')")
    with live_server(tiny_config(), static_dir=tmp_path) as (url, _, __):
        index = requests.get(url + "/", timeout=5)
        assert "volunteer page" in index.text
        js = requests.get(url + "/app.js", timeout=5)
        assert js.status_code == 200
        assert "javascript" in js.headers["Content-Type"]
        assert requests.get(url + "/../etc/passwd", timeout=5).status_code == 404
