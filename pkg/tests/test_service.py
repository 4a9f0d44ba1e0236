import json

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from blenderlab import __version__
from blenderlab.cli import main
from blenderlab.service.app import app

client = TestClient(app)

FAST_CONFIG = {
    "target_spacing": 0.75,
    "ph_samples": 8,
    "defect_samples": 8,
    "h_base": 0.004,
    "disabled_checks": ["globalization_forward", "globalization_backward"],
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok" and body["version"] == __version__


def test_certify_endpoint():
    resp = client.post("/certify", json={"config": FAST_CONFIG})
    assert resp.status_code == 200
    body = resp.json()
    assert body["overall_pass"] is True
    cert = body["certificate"]
    assert cert["schema"] == "blenderlab-cert/1"
    names = {c["name"] for c in cert["checks"]}
    assert "tangency_product_cover_site1" in names
    skipped = [c for c in cert["checks"] if c["status"] == "skipped"]
    assert {c["name"] for c in skipped} == set(FAST_CONFIG["disabled_checks"])


def test_certify_endpoint_rejects_bad_config():
    resp = client.post("/certify", json={"config": {"ell": 2}})
    assert resp.status_code == 422


def test_audit_endpoint():
    resp = client.post("/audit-realization", json={"config": {}, "n_points": 9})
    assert resp.status_code == 200
    body = resp.json()
    assert body["max_defect"] >= 0.0
    assert len(body["report"]["table"]) >= 9


def test_sweep_endpoint():
    req = {"config": FAST_CONFIG, "eta_list": [0.0], "trials": 1}
    resp = client.post("/sweep", json=req)
    assert resp.status_code == 200
    table = resp.json()["table"]
    assert table["rows"][0]["passes"] == 1


def test_cli_certify_pass_and_artifacts():
    runner = CliRunner()
    with runner.isolated_filesystem():
        with open("cfg.json", "w") as fh:
            json.dump(FAST_CONFIG, fh)
        result = runner.invoke(main, ["certify", "--config", "cfg.json",
                                      "--out", "cert.json"])
        assert result.exit_code == 0, result.output
        assert "overall: PASS" in result.output
        cert = json.load(open("cert.json"))
        assert cert["schema"] == "blenderlab-cert/1"


def test_cli_certify_fail_exit_code():
    runner = CliRunner()
    with runner.isolated_filesystem():
        cfg = dict(FAST_CONFIG)
        cfg["nu"] = 0.9  # partial hyperbolicity cannot hold
        with open("cfg.json", "w") as fh:
            json.dump(cfg, fh)
        result = runner.invoke(main, ["certify", "--config", "cfg.json"])
        assert result.exit_code == 1
        assert "overall: FAIL" in result.output


def test_cli_overrides_are_forwarded():
    runner = CliRunner()
    with runner.isolated_filesystem():
        with open("cfg.json", "w") as fh:
            json.dump(FAST_CONFIG, fh)
        result = runner.invoke(main, ["certify", "--config", "cfg.json",
                                      "--out", "cert.json", "--seed", "11",
                                      "--net", "0.005"])
        assert result.exit_code == 0, result.output
        cert = json.load(open("cert.json"))
        assert cert["provenance"]["seed"] == 11
        assert cert["provenance"]["config"]["h_base"] == 0.005


def test_cli_audit_realization():
    runner = CliRunner()
    result = CliRunner().invoke(main, ["audit-realization"])
    assert result.exit_code == 0
    assert "max defect" in result.output
