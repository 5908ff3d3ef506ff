import json
import subprocess
import sys

import pytest

from cpx.cli import EXIT_IO, EXIT_OK, EXIT_SCENARIO, EXIT_USAGE, EXIT_VERIFY, main

MED, GMC = "Medical School", "General Medical Council"
DEGREE = json.dumps({"full_name": "Alex Morgan", "date_of_birth": "1996-03-14", "degree": "MBChB",
                     "university": "U", "graduation_date": "2020-06-20"})


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "trace"
    assert main(["scenario", "run", "--out", str(out), "--seed", "1", "--mutations", "40"]) == EXIT_OK
    return out


@pytest.fixture
def state(tmp_path):
    path = tmp_path / "state"
    assert main(["ecosystem", "init", "--state", str(path), "--seed", "2"]) == EXIT_OK
    return path


def test_scenario_run_writes_trace(run_dir):
    names = {p.name for p in run_dir.iterdir()}
    assert {"messages.jsonl", "audit.jsonl", "wallet.json", "registry.json", "run.json",
            "metrics.json", "principles.json", "state"} <= names
    assert json.loads((run_dir / "principles.json").read_text())["all_checked_pass"]


def test_report_metrics_renders_figures(run_dir, tmp_path, capsys):
    assert main(["report", "metrics", "--trace", str(run_dir), "--out", str(tmp_path)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "Rotation" in text and "total" in text
    for name in ("timeline.png", "savings.png"):
        data = (tmp_path / name).read_bytes()
        assert data.startswith(b"\x89PNG") and len(data) > 5000
    report = json.loads((tmp_path / "metrics_report.json").read_text())
    assert report["figures"] == ["timeline.png", "savings.png"] and len(report["rows"]) == 9


def test_report_principles(run_dir, tmp_path, capsys):
    assert main(["report", "principles", "--trace", str(run_dir), "--out", str(tmp_path)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("Protection") and len(lines) == 25
    assert json.loads((tmp_path / "principles_report.json").read_text())["all_checked_pass"]


def test_audit_verify_ok_broken_unreadable(run_dir, tmp_path, capsys):
    log = run_dir / "audit.jsonl"
    assert main(["audit", "verify", "--log", str(log)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "Ok"
    rows = [json.loads(line) for line in log.read_text().splitlines()]
    rows[4]["timestamp"] = "2000-01-01T00:00:00Z"
    bad = tmp_path / "bad.jsonl"
    bad.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert main(["audit", "verify", "--log", str(bad)]) == EXIT_VERIFY
    assert capsys.readouterr().out.strip() == "Broken(index=4)"
    junk = tmp_path / "junk.jsonl"
    junk.write_text("not json\n")
    assert main(["audit", "verify", "--log", str(junk)]) == EXIT_IO


def test_issue_request_present_verify_and_replay(state, tmp_path, capsys):
    assert main(["issue", "--state", str(state), "--issuer", MED, "--schema", "medical_degree:1",
                 "--values", DEGREE]) == EXIT_OK
    req, pres = tmp_path / "req.json", tmp_path / "pres.json"
    assert main(["request-proof", "--state", str(state), "--verifier", GMC,
                 "--attr", f"degree/medical_degree:1/{MED}", "--out", str(req)]) == EXIT_OK
    assert main(["present", "--state", str(state), "--request", str(req), "--out", str(pres)]) == EXIT_OK
    capsys.readouterr()
    assert main(["verify", "--state", str(state), "--request", str(req), "--presentation", str(pres)]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("accepted")
    assert main(["verify", "--state", str(state), "--request", str(req), "--presentation", str(pres)]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "nonce       FAILED" in out and out.strip().endswith("rejected")
    doc = json.loads(pres.read_text())
    assert set(doc["presentation"]["credentials"][0]["body"]) >= {"credential_id", "digests"}


def test_present_with_denied_consent(state, tmp_path):
    req = tmp_path / "req.json"
    main(["issue", "--state", str(state), "--issuer", MED, "--schema", "medical_degree:1", "--values", DEGREE])
    main(["request-proof", "--state", str(state), "--verifier", GMC, "--attr", "degree", "--out", str(req)])
    assert main(["present", "--state", str(state), "--request", str(req), "--out", str(tmp_path / "p.json"),
                 "--deny"]) == EXIT_VERIFY


def test_wallet_list_export_import(state, tmp_path, capsys):
    main(["issue", "--state", str(state), "--issuer", MED, "--schema", "medical_degree:1", "--values", DEGREE])
    capsys.readouterr()
    assert main(["wallet", "list", "--state", str(state), "--json"]) == EXIT_OK
    listing = json.loads(capsys.readouterr().out)
    assert listing["credentials"][0]["values"]["degree"] == "MBChB"
    exported = tmp_path / "w.txt"
    assert main(["wallet", "export", "--state", str(state), "--out", str(exported)]) == EXIT_OK
    assert main(["wallet", "import", "--state", str(state), "--file", str(exported)]) == EXIT_OK
    exported.write_text(exported.read_text().replace("MBChB", "MBChC"))
    assert main(["wallet", "import", "--state", str(state), "--file", str(exported)]) == EXIT_IO


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["ecosystem", "init", "--state", str(tmp_path / "production-state"), "--profile", "TOY"]) == EXIT_USAGE
    assert main(["issue", "--state", str(tmp_path / "missing"), "--issuer", MED, "--schema", "x:1",
                 "--values", "{}"]) == EXIT_IO


def test_unknown_entity_is_usage_error(state):
    assert main(["issue", "--state", str(state), "--issuer", "Nobody", "--schema", "x:1", "--values", "{}"]) == EXIT_USAGE


def test_scenario_failure_exit_code(tmp_path, capsys):
    script = {"version": 1, "career_start": "2020-06-01", "career_end": "2021-01-01", "moments": [
        {"moment_id": "bad", "kind": "Training", "date": "2020-07-01",
         "steps": [{"action": "issue", "issuer": MED, "schema": "nursing:1", "values": {}}]}]}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(script))
    assert main(["scenario", "run", "--script", str(path), "--out", str(tmp_path / "o"), "--profile", "TOY"]) == EXIT_SCENARIO
    assert "bad step 0" in capsys.readouterr().err


def test_scenario_script_prints_default(tmp_path):
    out = tmp_path / "s.json"
    assert main(["scenario", "script", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["version"] == 1


def test_seed_env_override(tmp_path, monkeypatch):
    main(["ecosystem", "init", "--state", str(tmp_path / "a"), "--seed", "5"])
    monkeypatch.setenv("CPX_SEED", "6")
    main(["ecosystem", "init", "--state", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a" / "registry.json").read_text() != (tmp_path / "b" / "registry.json").read_text()
    monkeypatch.setenv("CPX_SEED", "five")
    assert main(["ecosystem", "init", "--state", str(tmp_path / "c")]) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cpx.cli", "audit", "verify", "--log", str(tmp_path / "none")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_IO
