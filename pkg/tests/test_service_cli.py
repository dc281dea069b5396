import json
import socket
import threading
import time
import warnings

import pytest

from wingsched.cli import EXIT_ERROR, EXIT_VIOLATION, main, parse_seeds

with warnings.catch_warnings():
    warnings.filterwarnings("ignore", message="Using `httpx`")
    from starlette.testclient import TestClient

from wingsched.service.app import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def post(client, path, body):
    r = client.post(path, json=body)
    assert r.status_code == 200, r.text
    return r.json()


# --- service ------------------------------------------------------------------------------


def test_health(client):
    assert client.get("/health").json() == {"status": "ok", "presets": ["benchmark"]}


def test_wing_preset(client):
    r = post(client, "/wing", {"source": {"preset": "benchmark"}})
    assert r["task_count"] == 2153 and r["robots"] == 4 and r["threshold"] == 3.0
    assert list(r["coas"]) == ["COA1", "COA2", "COA3", "COA4", "COA5"]


def test_inline_config_matches_preset(client):
    cfg = post(client, "/wing", {"source": {"preset": "benchmark"}})["config"]
    a = post(client, "/partition", {"source": {"config": cfg}, "coa": "COA3"})
    b = post(client, "/partition", {"source": {"preset": "benchmark"}, "coa": "COA3"})
    assert a == b and a["imbalance"] <= 30.0


def test_schedule_certified(client):
    r = post(client, "/schedule", {"source": {"preset": "benchmark"}, "coa": "COA1"})
    assert r["certified"] and r["min_distance"] > r["threshold"]
    g = post(client, "/schedule", {"source": {"preset": "benchmark"}, "coa": "COA1", "method": "greedy"})
    assert g["certified"] is None and g["completion"] > r["completion"]


def test_simulate_and_optimize(client):
    body = {"source": {"preset": "benchmark"}, "coa": "COA2", "seed": 5}
    sim = post(client, "/simulate", body)
    assert sim["min_distance"] > 3.0 and set(sim["skipped"]) <= set(sim["leftover"])
    opt = post(client, "/optimize", body)
    assert 0 < opt["efficiency"] <= 1 and opt["min_distance"] > 3.0 and not opt["capped"]
    for sale in opt["sales"]:
        assert sale["sigma_after"] <= sale["sigma_before"]
    assert sorted(c for r in opt["final"]["rows"] for c in r) == list(range(opt["cities"]))


def test_errors_mapped(client):
    assert client.post("/wing", json={"source": {"preset": "nope"}}).status_code == 404
    assert client.post("/partition", json={"coa": "COA9"}).status_code == 404
    assert client.post("/partition", json={"overlap_fraction": 2.0}).status_code == 422
    assert client.post("/bench", json={"seeds": []}).status_code == 422
    assert client.post("/report", json={"rows": []}).status_code == 422


# --- CLI ------------------------------------------------------------------------------------


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,4,7-9") == [1, 4, 7, 8, 9]
    for bad in ("", "5-2", "x"):
        with pytest.raises(ValueError):
            parse_seeds(bad)


def test_cli_pipeline(tmp_path, capsys):
    cfg = tmp_path / "wing.json"
    assert main(["wing", "--out", str(cfg)]) == 0
    assert json.loads(cfg.read_text())["workpart"]
    assert main(["partition", "--config", str(cfg), "--coa", "COA4"]) == 0
    assert "imbalance" in capsys.readouterr().out
    assert main(["schedule", "--coa", "COA1"]) == 0
    assert "certificate: pass" in capsys.readouterr().out
    assert main(["simulate", "--coa", "COA1", "--seed", "2", "--method", "greedy"]) == 0
    out = tmp_path / "opt.json"
    assert main(["optimize", "--coa", "COA1", "--seed", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["efficiency"] > 0.9


def test_cli_bench_and_report(tmp_path, capsys):
    d = tmp_path / "run"
    code = main(["bench", "--coas", "COA5", "--seeds", "0-1", "--variants", "proposed-noopt,greedy-noopt",
                 "--out-dir", str(d), "--no-timing"])
    assert code == 0
    text = (d / "results.csv").read_text()
    assert text.count("\n") == 5
    assert json.loads((d / "summary.json").read_text())["failed"] == 0
    capsys.readouterr()
    assert main(["report", str(d / "results.csv")]) == 0
    assert "proposed-noopt" in capsys.readouterr().out


def test_cli_report_flags_violations(tmp_path):
    src = tmp_path / "r.csv"
    src.write_text("coa,seed,method,opt_mode,efficiency,t_min,t_act,comp_time_ms,min_pairwise_ft,"
                   "leftover_city_count,opt_time_ms,sales,status,error\n"
                   "COA1,0,proposed,noopt,0.9,1,1,,2.5,3,,0,violation,too close\n")
    assert main(["report", str(src)]) == EXIT_VIOLATION


def test_cli_errors(capsys):
    assert main(["partition", "--coa", "COA9"]) == EXIT_ERROR
    assert "unknown COA" in capsys.readouterr().err
    assert main(["report", "/nonexistent/results.csv"]) == EXIT_ERROR
    with pytest.raises(SystemExit):
        main(["bench", "--variants", "fast"])


def test_cli_against_running_server(capsys):
    uvicorn = pytest.importorskip("uvicorn")
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    th = threading.Thread(target=server.run, daemon=True)
    th.start()
    try:
        for _ in range(100):
            if server.started:
                break
            time.sleep(0.05)
        assert main(["--server", f"http://127.0.0.1:{port}", "schedule", "--coa", "COA2"]) == 0
        assert "certificate: pass" in capsys.readouterr().out
    finally:
        server.should_exit = True
        th.join(10)
