import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests

from gahub import cli, metrics
from gahub.protocol import ExperimentConfig
from gahub.server import EventRecord
from conftest import honest_report, live_server, small_params

REPO = Path(__file__).resolve().parent.parent


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def write_events(path, durations=(292, 900, 1000, 2323, 2323)):
    lines = []
    for i, d in enumerate(durations, start=1):
        for ts, granted in [(100, 20), (100 + d, 0)]:
            lines.append(
                EventRecord(
                    timestamp=ts,
                    experiment_id=i,
                    client_id=f"c{i}",
                    segment_index=1,
                    best_fitness=8.0,
                    evaluations_total_after=1000,
                    generations_granted=granted,
                ).to_json()
            )
    path.write_text("\n".join(lines) + "\n")


# -- parser behavior -------------------------------------------------------------


@pytest.mark.parametrize(
    "argv", [["serve"], ["swarm"], ["analyze"], ["gen-plan"], ["vectors"]]
)
def test_help_exits_zero(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv + ["--help"])
    assert exc.value.code == 0


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze", "--log", "x", "--frobnicate"])
    assert exc.value.code == 2


# -- gen-plan --------------------------------------------------------------------


def test_gen_plan_writes_file(tmp_path):
    out = tmp_path / "plan.json"
    assert cli.main(["gen-plan", "--clients", "5", "--seed", "3", "--out", str(out)]) == 0
    plan = json.loads(out.read_text())
    assert len(plan["profiles"]) == 5


def test_gen_plan_bad_spec_is_usage_error(tmp_path):
    rc = cli.main(
        ["gen-plan", "--speed", "bogus:1", "--out", str(tmp_path / "p.json")]
    )
    assert rc == 2


# -- vectors -----------------------------------------------------------------------


def test_vectors_check_repo_dir():
    assert cli.main(["vectors", "--dir", str(REPO / "vectors")]) == 0


def test_vectors_check_detects_tampering(tmp_path):
    assert cli.main(["vectors", "--write", "--dir", str(tmp_path)]) == 0
    (tmp_path / "report_01.json").write_text("{}")
    assert cli.main(["vectors", "--dir", str(tmp_path)]) == 1


# -- analyze -----------------------------------------------------------------------


def test_analyze_emits_csv_and_summary(tmp_path, capsys):
    log = tmp_path / "events.jsonl"
    write_events(log)
    out_dir = tmp_path / "out"
    rc = cli.main(["analyze", "--log", str(log), "--out", str(out_dir)])
    assert rc == 0
    for name in ("gaps.csv", "generations_per_client.csv", "durations.csv",
                 "evaluations_series.csv"):
        assert (out_dir / name).exists()
    summary = json.loads(capsys.readouterr().out)
    assert summary["completed_experiments"] == 5


def test_analyze_speedup_against_min_duration(tmp_path, capsys):
    log = tmp_path / "events.jsonl"
    write_events(log)
    rc = cli.main(
        ["analyze", "--log", str(log), "--out", str(tmp_path / "o"),
         "--summary", "--speedup", "2.906", "375"]
    )
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert abs(summary["speedup"]["vs_min_duration"] - 3.73) < 0.005


def test_analyze_empty_log_summary_zeros(tmp_path, capsys):
    log = tmp_path / "events.jsonl"
    log.write_text("")
    rc = cli.main(["analyze", "--log", str(log), "--out", str(tmp_path / "o")])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["events"] == 0
    assert (tmp_path / "o" / "gaps.csv").read_text() == "gap_seconds,count\n"


def test_analyze_missing_log_is_usage_error(tmp_path):
    assert cli.main(["analyze", "--log", str(tmp_path / "absent.jsonl")]) == 2


def test_analyze_apache_format(tmp_path, capsys):
    log = tmp_path / "access.log"
    log.write_text(
        '1.2.3.4 - - [10/Oct/2008:13:55:36 +0000] "POST /api/migration HTTP/1.1" 200 10\n'
        '1.2.3.4 - - [10/Oct/2008:13:55:39 +0000] "POST /api/migration HTTP/1.1" 200 10\n'
    )
    rc = cli.main(["analyze", "--log", str(log), "--format", "apache",
                   "--out", str(tmp_path / "o"), "--summary"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["gap"]["median"] == 3


# -- swarm -------------------------------------------------------------------------


def test_swarm_command_runs_plan(tmp_path, capsys):
    config = ExperimentConfig(ga=small_params(), evaluation_budget=3000)
    with live_server(config) as (url, hub, _):
        out = tmp_path / "report.json"
        rc = cli.main(
            ["swarm", "--server", url, "--clients", "2", "--speed", "constant:1",
             "--seed", "1", "--no-delay", "--out", str(out)]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["total_evaluations"] == hub.get_stats()["evaluations_total"]
        assert report["abnormal_exits"] == 0


def test_swarm_unreachable_server_fails(tmp_path):
    rc = cli.main(
        ["swarm", "--server", "http://127.0.0.1:1", "--clients", "1",
         "--no-delay", "--out", str(tmp_path / "r.json")]
    )
    assert rc == 1


def test_swarm_bad_plan_file_is_usage_error(tmp_path):
    bad = tmp_path / "plan.json"
    bad.write_text("{]")
    rc = cli.main(["swarm", "--server", "http://127.0.0.1:1", "--plan", str(bad)])
    assert rc == 2


# -- serve (subprocess) ------------------------------------------------------------


def serve_proc(args, env=None):
    full_env = dict(os.environ, GAHUB_BACKEND="numpy")
    if env:
        full_env.update(env)
    return subprocess.Popen(
        [sys.executable, "-m", "gahub.cli", "serve", *args],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        env=full_env,
    )


def wait_for_server(url, deadline=30.0):
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        try:
            return requests.get(url + "/api/config", timeout=2)
        except requests.RequestException:
            time.sleep(0.1)
    raise TimeoutError(f"server at {url} never came up")


def test_serve_interrupt_persists_and_restarts(tmp_path):
    port = free_port()
    url = f"http://127.0.0.1:{port}"
    data_dir = tmp_path / "data"
    args = ["--port", str(port), "--data-dir", str(data_dir),
            "--budget", "5000", "--genome-length", "64"]

    proc = serve_proc(args)
    try:
        resp = wait_for_server(url)
        config_obj = json.loads(resp.text)
        assert config_obj["evaluation_budget"] == 5000

        from gahub.protocol import decode_config, encode_report
        import numpy as np

        config = decode_config(resp.text)
        genome = np.zeros(64, dtype=np.uint8)
        genome[:8] = 1
        report = honest_report(config, "cli-test", genome)
        posted = requests.post(url + "/api/migration", data=encode_report(report).encode(),
                               timeout=5)
        assert posted.status_code == 200
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0

    # restart on the same data dir: stats continuity via restore_state
    proc = serve_proc(["--port", str(port), "--data-dir", str(data_dir)])
    try:
        wait_for_server(url)
        stats = requests.get(url + "/api/stats", timeout=5).json()
        assert stats["evaluations_total"] == 1000
        assert stats["experiment_id"] == 1
        assert stats["best_fitness"] == 8.0
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0


def test_serve_invalid_config_file_exits_2(tmp_path):
    bad = tmp_path / "config.json"
    bad.write_text('{"evaluation_budget": "lots"}')
    proc = serve_proc(["--config", str(bad), "--port", str(free_port())])
    assert proc.wait(timeout=30) == 2
    out = proc.stdout.read()
    assert "error" in out


def test_serve_config_file_with_server_section(tmp_path):
    port = free_port()
    config_file = tmp_path / "config.json"
    config_file.write_text(
        json.dumps(
            {
                "evaluation_budget": 7000,
                "generations_per_segment": 20,
                "ga": json.loads(
                    (REPO / "vectors" / "config_01.json").read_text()
                )["ga"],
                "server": {"port": port, "data_dir": str(tmp_path / "d"),
                           "watcher_period_seconds": 0.1},
            }
        )
    )
    proc = serve_proc(["--config", str(config_file)])
    try:
        resp = wait_for_server(f"http://127.0.0.1:{port}")
        assert json.loads(resp.text)["evaluation_budget"] == 7000
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0
