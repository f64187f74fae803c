import json

import pytest
from fastapi.testclient import TestClient

from uavafl.cli import EXIT_DOMAIN, main
from uavafl.service.app import app

CONFIG = """M = 2
layout = uniform
K = 40
K_cycle = 20
S = 5
compute_time_slots = 0
dim = 4
max_outer = 2
max_inner = 2
eval_window = 10
strategies = uav_afl, sfhf
"""


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text(CONFIG)
    return p


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_bad_config_is_structured_422(client, tmp_path):
    r = client.post("/benchmark", json={"config": "banana = 1", "out_dir": str(tmp_path)})
    assert r.status_code == 422
    body = r.json()
    assert body["error"] == "configuration_error" and "banana" in body["message"]


def test_malformed_request_rejected(client):
    assert client.post("/optimize", json={"out_dir": "x"}).status_code == 422


def test_optimize_then_simulate_via_cli(cfg_file, tmp_path, capsys):
    out = tmp_path / "opt"
    assert main(["optimize", str(cfg_file), "-o", str(out)]) == 0
    resp = json.loads(capsys.readouterr().out)
    assert (out / "schedule.csv").is_file() and (out / "trace.csv").is_file()
    assert resp["schedule_csv"].endswith("schedule.csv")
    hist = tmp_path / "h.csv"
    assert main(["simulate", str(cfg_file), str(out / "schedule.csv"), "-o", str(hist)]) == 0
    sim = json.loads(capsys.readouterr().out)
    assert hist.is_file() and sim["ms"] <= 5
    assert hist.read_text().splitlines()[0].startswith("k,")


def test_benchmark_and_report_via_cli(cfg_file, tmp_path, capsys):
    out = tmp_path / "bench"
    assert main(["benchmark", str(cfg_file), "-o", str(out)]) == 0
    first = json.loads(capsys.readouterr().out)
    assert set(first["strategies"]) == {"uav_afl", "sfhf"}
    assert main(["report", str(out)]) == 0
    again = json.loads(capsys.readouterr().out)
    assert again["strategies"] == first["strategies"]


def test_missing_config_exit_code_and_line(tmp_path, capsys):
    assert main(["benchmark", str(tmp_path / "none.cfg")]) == EXIT_DOMAIN
    line = error_line(capsys)
    assert line["ok"] is False and line["error"] == "configuration_error"


def test_missing_schedule_exit_code(cfg_file, tmp_path, capsys):
    assert main(["simulate", str(cfg_file), str(tmp_path / "none.csv")]) == EXIT_DOMAIN
    assert error_line(capsys)["error"] == "configuration_error"


def test_infeasible_schedule_reported(cfg_file, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    # device 1 is never selected, which breaks the staleness bound
    rows = ["k,x,y,z,a_0,a_1,b_0,b_1,zeta"]
    for k in range(21):
        rows.append(f"{k},500,500,100,{int(k > 0)},0,0.1,0.1,0")
    bad.write_text("\n".join(rows) + "\n")
    code = main(["simulate", str(cfg_file), str(bad), "-o", str(tmp_path / "h.csv"), "--relax", "mechanics"])
    assert code == EXIT_DOMAIN
    line = error_line(capsys)
    assert line["kind"] == "InfeasibleScheduleError"


def test_report_of_empty_directory_fails(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) != 0
    assert error_line(capsys)["ok"] is False


def test_unreachable_service_gives_error_line(cfg_file, capsys):
    code = main(["--url", "http://127.0.0.1:9", "benchmark", str(cfg_file)])
    assert code == 1
    assert error_line(capsys)["error"] == "internal_error"
