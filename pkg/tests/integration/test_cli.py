from __future__ import annotations

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from iotfence.cli import app, main
from tests.pcaps import DEVICE_MAC, NETATMO_POLICY, netatmo_trace, write_pcap

runner = CliRunner()


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, tmp_path: Path):
    for name in ("IOTFENCE_INTERFACE", "IOTFENCE_UPSTREAM_RESOLVER", "IOTFENCE_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("IOTFENCE_PROJECT_ROOT", str(tmp_path))


@pytest.fixture
def policy_file(tmp_path: Path) -> Path:
    path = tmp_path / "netatmo.json"
    path.write_text(NETATMO_POLICY, encoding="utf-8")
    return path


@pytest.fixture
def netatmo_pcap(tmp_path: Path) -> Path:
    return write_pcap(tmp_path / "netatmo.pcap", netatmo_trace())


def test_cli_has_commands():
    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    for command in ("learn", "compile", "simulate", "summarize", "explain", "validate"):
        assert command in result.output


def test_learn_writes_policy(tmp_path: Path, netatmo_pcap: Path):
    out = tmp_path / "learned.json"

    result = runner.invoke(
        app,
        [
            "learn",
            "--pcap", str(netatmo_pcap),
            "--device-mac", "70-EE-50-13-AB-CD",
            "--name", "Netatmo Weather Station",
            "--aggregate-prefix", "24",
            "--out", str(out),
        ],
    )  # fmt: skip

    assert result.exit_code == 0, result.output
    assert out.read_text(encoding="utf-8") == NETATMO_POLICY


def test_learn_names_device_after_capture(tmp_path: Path, netatmo_pcap: Path):
    out = tmp_path / "learned.json"

    result = runner.invoke(app, ["learn", "--pcap", str(netatmo_pcap), "--device-mac", DEVICE_MAC, "-o", str(out)])

    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text(encoding="utf-8"))
    assert list(document) == ["netatmo"]
    assert document["netatmo"]["AllowedDNSReplies"][0]["answers"] == "62.210.92.5/32"


def test_learn_rate_slack(tmp_path: Path, netatmo_pcap: Path):
    out = tmp_path / "learned.json"

    result = runner.invoke(
        app,
        ["learn", "--pcap", str(netatmo_pcap), "--device-mac", DEVICE_MAC, "--rate-slack", "2", "--out", str(out)],
    )

    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text(encoding="utf-8"))["netatmo"]["AllowedConnections"][0]["freq"] == "12/hr"


def test_learn_requires_device_mac(tmp_path: Path, netatmo_pcap: Path):
    out = tmp_path / "learned.json"

    result = runner.invoke(app, ["learn", "--pcap", str(netatmo_pcap), "--out", str(out)])

    assert result.exit_code == 2
    assert not out.exists()


def test_learn_rejects_bad_inputs(tmp_path: Path, netatmo_pcap: Path):
    out = tmp_path / "learned.json"
    base = ["learn", "--pcap", str(netatmo_pcap), "--out", str(out)]

    assert runner.invoke(app, base + ["--device-mac", "not-a-mac"]).exit_code == 64
    assert runner.invoke(app, base + ["--device-mac", DEVICE_MAC, "--rate-slack", "0.5"]).exit_code == 64
    assert runner.invoke(app, base + ["--device-mac", DEVICE_MAC, "--aggregate-prefix", "40"]).exit_code == 64
    missing = ["learn", "--pcap", str(tmp_path / "missing.pcap"), "--device-mac", DEVICE_MAC, "--out", str(out)]
    assert runner.invoke(app, missing).exit_code == 64
    assert not out.exists()


def test_learn_on_capture_without_device_traffic(tmp_path: Path):
    pcap = write_pcap(tmp_path / "empty.pcap", [])
    out = tmp_path / "learned.json"

    result = runner.invoke(app, ["learn", "--pcap", str(pcap), "--device-mac", DEVICE_MAC, "--out", str(out)])

    assert result.exit_code == 2
    assert not out.exists()


def test_compile_netfilter(tmp_path: Path, policy_file: Path):
    out = tmp_path / "netatmo.sh"

    result = runner.invoke(app, ["compile", str(policy_file), "--format", "netfilter", "--out", str(out)])

    assert result.exit_code == 0, result.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "#!/bin/sh"
    assert lines[1:3] == [
        "iptables -t nat -A PREROUTING -i wlan0 -s 172.16.1.2 -d 62.210.92.0/24 -p tcp --dport 25050 "
        "-m limit --limit 6/hour -j ACCEPT",
        "iptables -t nat -A PREROUTING -i wlan0 -s 172.16.1.2 -d 192.168.1.1 -p udp --dport 53 -j ACCEPT",
    ]


def test_compile_dnsforward(tmp_path: Path, policy_file: Path):
    out = tmp_path / "dnsmasq.conf"

    result = runner.invoke(
        app, ["compile", str(policy_file), "-f", "dnsforward", "--upstream", "8.8.8.8", "-o", str(out)]
    )

    assert result.exit_code == 0, result.output
    assert out.read_text(encoding="utf-8") == "no-resolv\nserver=/netcom.netatmo.net/8.8.8.8\naddress=/#/127.0.0.1\n"


def test_compile_follows_project_config(tmp_path: Path, policy_file: Path):
    (tmp_path / "iotfence.yaml").write_text("enforcement:\n  interface: br-iot\n", encoding="utf-8")
    out = tmp_path / "netatmo.sh"

    result = runner.invoke(app, ["compile", str(policy_file), "--out", str(out)])

    assert result.exit_code == 0, result.output
    assert "-i br-iot" in out.read_text(encoding="utf-8")


def test_compile_unjoinable_policy(tmp_path: Path):
    document = json.loads(NETATMO_POLICY)
    document["Netatmo Weather Station"]["AllowedDNSReplies"] = []
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(document), encoding="utf-8")

    result = runner.invoke(app, ["compile", str(path), "--out", str(tmp_path / "out.sh")])

    assert result.exit_code == 3
    assert not (tmp_path / "out.sh").exists()


def test_compile_bad_options(policy_file: Path):
    assert runner.invoke(app, ["compile", str(policy_file), "--format", "pf"]).exit_code == 64
    assert runner.invoke(app, ["compile", str(policy_file), "--chain", "mangle"]).exit_code == 64


def test_invalid_policy_is_usage_error(tmp_path: Path):
    path = tmp_path / "bad.json"
    path.write_text('{"Dev": {"MACAddr": "nope"}}', encoding="utf-8")

    assert runner.invoke(app, ["compile", str(path)]).exit_code == 64
    assert runner.invoke(app, ["validate", str(path)]).exit_code == 64
    assert runner.invoke(app, ["explain", str(tmp_path / "missing.json")]).exit_code == 64


def test_simulate_clean_capture(tmp_path: Path, policy_file: Path, netatmo_pcap: Path):
    log = tmp_path / "verdicts.ndjson"
    stats = tmp_path / "stats.json"

    result = runner.invoke(
        app,
        [
            "simulate", "--policy", str(policy_file), "--pcap", str(netatmo_pcap), "--log", str(log), "--stats", str(stats)
        ],  # fmt: skip
    )

    assert result.exit_code == 0, result.output
    verdicts = [json.loads(line) for line in log.read_text(encoding="utf-8").splitlines()]
    assert len(verdicts) == len(netatmo_trace())
    assert verdicts[0] == {
        "index": 0,
        "ts": netatmo_trace()[0].timestamp,
        "decision": "ALLOW",
        "reason": "RULE_MATCH",
        "rule_id": "dns_queries[0]",
    }
    report = json.loads(stats.read_text(encoding="utf-8"))
    assert report["denied_total"] == 0
    assert report["rule_hits"]["connections[0]"] > 0


def test_simulate_reports_violations(tmp_path: Path, policy_file: Path):
    pcap = write_pcap(tmp_path / "busy.pcap", netatmo_trace(uploads=7, interval=500.0))
    stats = tmp_path / "stats.json"

    result = runner.invoke(app, ["simulate", "--policy", str(policy_file), "--pcap", str(pcap), "--stats", str(stats)])

    assert result.exit_code == 1
    assert json.loads(stats.read_text(encoding="utf-8"))["denied_total"] > 0


def test_simulate_empty_capture(tmp_path: Path, policy_file: Path):
    pcap = write_pcap(tmp_path / "empty.pcap", [])
    log = tmp_path / "verdicts.ndjson"

    result = runner.invoke(app, ["simulate", "--policy", str(policy_file), "--pcap", str(pcap), "--log", str(log)])

    assert result.exit_code == 0, result.output
    assert log.read_text(encoding="utf-8") == ""


def test_simulate_rejects_non_pcap(tmp_path: Path, policy_file: Path):
    junk = tmp_path / "junk.pcap"
    junk.write_bytes(b"not a capture at all")

    result = runner.invoke(app, ["simulate", "--policy", str(policy_file), "--pcap", str(junk)])

    assert result.exit_code == 64


def test_summarize_json(netatmo_pcap: Path):
    result = runner.invoke(app, ["summarize", "--pcap", str(netatmo_pcap), "--device-mac", DEVICE_MAC, "--json"])

    assert result.exit_code == 0, result.output
    line = next(line for line in result.stdout.splitlines() if line.startswith("{"))
    assert json.loads(line) == {
        "distinct_endpoints": 2,
        "distinct_domains": 1,
        "hardcoded_ips": 0,
        "rogue_resolver": False,
    }


def test_summarize_table(netatmo_pcap: Path):
    result = runner.invoke(app, ["summarize", "--pcap", str(netatmo_pcap)])
    assert result.exit_code == 0, result.output


def test_explain(policy_file: Path):
    result = runner.invoke(app, ["explain", str(policy_file), "--subject", "This weather station"])

    assert result.exit_code == 0, result.output
    assert "This weather station" in result.stdout
    assert "netcom.netatmo.net" in result.stdout


def test_validate(policy_file: Path):
    result = runner.invoke(app, ["validate", str(policy_file)])

    assert result.exit_code == 0, result.output
    assert "NO_BYTE_BOUND" in result.output


def test_main_maps_usage_errors(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["compile"])
    assert excinfo.value.code == 64

    with pytest.raises(SystemExit) as excinfo:
        main(["no-such-command"])
    assert excinfo.value.code == 64


def test_main_exit_codes(tmp_path: Path, policy_file: Path):
    pcap = write_pcap(tmp_path / "busy.pcap", netatmo_trace(uploads=7, interval=500.0))

    with pytest.raises(SystemExit) as excinfo:
        main(["simulate", "--policy", str(policy_file), "--pcap", str(pcap)])
    assert excinfo.value.code == 1

    with pytest.raises(SystemExit) as excinfo:
        main(["validate", str(policy_file)])
    assert excinfo.value.code == 0
