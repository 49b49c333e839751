from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from iotfence.settings import load_settings, parse_aggregate_prefix


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("IOTFENCE_PROJECT_ROOT", "IOTFENCE_INTERFACE", "IOTFENCE_UPSTREAM_RESOLVER", "IOTFENCE_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def _write_project(tmp_path: Path, config: dict) -> Path:
    path = tmp_path / "iotfence.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


def test_defaults_without_project(monkeypatch):
    monkeypatch.setattr("iotfence.settings._find_project_root", lambda: None)

    settings = load_settings()

    assert settings.project_root is None
    assert settings.enforcement.interface == "wlan0"
    assert settings.enforcement.chain == "nat-prerouting"
    assert settings.monitor.udp_idle_timeout == 60
    assert (settings.monitor.binding_ttl_floor, settings.monitor.binding_ttl_cap) == (60, 86400)
    assert settings.learn.aggregate_prefix == "exact"
    assert settings.advanced.log_level == "INFO"


def test_load_settings_uses_project_root(monkeypatch, tmp_path: Path):
    _write_project(
        tmp_path,
        {
            "enforcement": {"interface": "br-iot", "chain": "filter-forward", "upstream_resolver": "9.9.9.9"},
            "monitor": {"binding_ttl_floor": 30, "schedule_timezone": "Europe/Copenhagen"},
            "learn": {"aggregate_prefix": 24, "rate_slack": 1.5},
        },
    )
    monkeypatch.setattr("iotfence.settings._find_project_root", lambda: tmp_path)

    settings = load_settings()

    assert settings.project_root == tmp_path
    assert settings.enforcement.interface == "br-iot"
    assert settings.enforcement.chain == "filter-forward"
    assert settings.enforcement.upstream_resolver == "9.9.9.9"
    assert settings.monitor.binding_ttl_floor == 30
    assert settings.monitor.schedule_timezone == "Europe/Copenhagen"
    assert settings.learn.aggregate_prefix == 24
    assert settings.learn.rate_slack == 1.5


def test_explicit_config_path(tmp_path: Path):
    path = _write_project(tmp_path, {"advanced": {"log_level": "DEBUG"}})

    settings = load_settings(path)

    assert settings.project_root == tmp_path.resolve()
    assert settings.advanced.log_level == "DEBUG"


def test_env_overrides_yaml(monkeypatch, tmp_path: Path):
    _write_project(tmp_path, {"enforcement": {"interface": "br-iot"}})
    monkeypatch.setenv("IOTFENCE_PROJECT_ROOT", str(tmp_path))
    monkeypatch.setenv("IOTFENCE_INTERFACE", "wlan1")
    monkeypatch.setenv("IOTFENCE_UPSTREAM_RESOLVER", "1.1.1.1")

    settings = load_settings()

    assert settings.enforcement.interface == "wlan1"
    assert settings.enforcement.upstream_resolver == "1.1.1.1"


def test_empty_yaml_is_defaults(monkeypatch, tmp_path: Path):
    (tmp_path / "iotfence.yaml").write_text("", encoding="utf-8")
    monkeypatch.setattr("iotfence.settings._find_project_root", lambda: tmp_path)

    assert load_settings().enforcement.interface == "wlan0"


def test_unknown_chain_is_rejected(monkeypatch, tmp_path: Path):
    _write_project(tmp_path, {"enforcement": {"chain": "mangle"}})
    monkeypatch.setattr("iotfence.settings._find_project_root", lambda: tmp_path)

    with pytest.raises(ValueError, match="enforcement.chain"):
        load_settings()


def test_ttl_floor_above_cap_is_rejected(monkeypatch, tmp_path: Path):
    _write_project(tmp_path, {"monitor": {"binding_ttl_floor": 600, "binding_ttl_cap": 60}})
    monkeypatch.setattr("iotfence.settings._find_project_root", lambda: tmp_path)

    with pytest.raises(ValueError, match="binding_ttl_floor"):
        load_settings()


@pytest.mark.parametrize(("value", "expected"), [("exact", "exact"), ("EXACT", "exact"), (24, 24), ("0", 0), (32, 32)])
def test_parse_aggregate_prefix(value, expected):
    assert parse_aggregate_prefix(value) == expected


@pytest.mark.parametrize("value", ["wide", 33, -1])
def test_parse_aggregate_prefix_rejects(value):
    with pytest.raises(ValueError, match="aggregate prefix"):
        parse_aggregate_prefix(value)
