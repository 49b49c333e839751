"""Configuration for iotfence.

Loads configuration from:
1. iotfence.yaml (enforcement defaults, monitor tuning, learning options)
2. Environment variables (.env)

A project file is optional: without one every command runs on defaults, so
the CLI works directly on capture files and policy documents.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

CONFIG_FILENAME = "iotfence.yaml"

CHAINS = ("nat-prerouting", "filter-forward")


@dataclass(frozen=True)
class EnforcementConfig:
    """Defaults for compiled firewall / DNS forwarder artifacts."""

    interface: str = "wlan0"
    chain: str = "nat-prerouting"  # "nat-prerouting" (as deployed) or "filter-forward"
    upstream_resolver: str = "8.8.8.8"
    sinkhole_address: str = "127.0.0.1"


@dataclass(frozen=True)
class MonitorConfig:
    """Reference monitor tuning."""

    udp_idle_timeout: int = 60  # seconds of silence that end a UDP flow
    binding_ttl_floor: int = 60  # DNS-learned destinations live at least this long
    binding_ttl_cap: int = 86400  # ... and never longer than this
    binding_maxsize: int = 65536
    schedule_timezone: str = "UTC"


@dataclass(frozen=True)
class LearnConfig:
    """Policy synthesis defaults."""

    aggregate_prefix: int | str = "exact"  # "exact" or a prefix length 0-32
    rate_slack: float = 1.0
    min_rate_observations: int = 2


@dataclass(frozen=True)
class AdvancedConfig:
    """Technical settings."""

    log_level: str = "INFO"


@dataclass(frozen=True)
class Settings:
    """Complete iotfence configuration."""

    project_root: Path | None = None
    enforcement: EnforcementConfig = field(default_factory=EnforcementConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    advanced: AdvancedConfig = field(default_factory=AdvancedConfig)


def _find_project_root() -> Path | None:
    """Find project root by looking for iotfence.yaml in cwd and its parents."""
    current = Path.cwd().resolve()
    for path in [current] + list(current.parents):
        if (path / CONFIG_FILENAME).exists():
            return path
    return None


def _load_yaml_config(path: Path) -> dict[str, Any]:
    """Load and parse YAML config file."""
    if not path.exists():
        return {}

    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def parse_aggregate_prefix(value: Any) -> int | str:
    """Normalize an aggregation setting to ``"exact"`` or an int in 0..32."""
    text = str(value).strip().lower()
    if text == "exact":
        return "exact"
    try:
        prefix = int(text)
    except ValueError:
        raise ValueError(f"aggregate prefix must be 'exact' or 0-32, got {value!r}") from None
    if not 0 <= prefix <= 32:
        raise ValueError(f"aggregate prefix must be 'exact' or 0-32, got {value!r}")
    return prefix


def load_settings(config_path: Path | None = None) -> Settings:
    """Load iotfence configuration.

    Process:
    1. Find project root (explicit path, IOTFENCE_PROJECT_ROOT env, or discover from cwd)
    2. Load .env file
    3. Load iotfence.yaml (if exists)
    4. Apply environment overrides
    5. Build Settings object
    """
    # 1. Find project root
    if config_path is not None:
        project_root: Path | None = config_path.resolve().parent
        config_file = config_path.resolve()
    else:
        env_root = os.getenv("IOTFENCE_PROJECT_ROOT")
        project_root = Path(env_root).resolve() if env_root else _find_project_root()
        config_file = project_root / CONFIG_FILENAME if project_root else None

    # 2. Load .env file
    if project_root is not None and (project_root / ".env").exists():
        load_dotenv(project_root / ".env")

    # 3. Load iotfence.yaml
    config = _load_yaml_config(config_file) if config_file else {}
    if config_file and config:
        logger.debug("Loaded configuration from %s", config_file)

    # 4. Parse sections, env overrides win over YAML
    enforcement_config = config.get("enforcement") or {}
    chain = str(enforcement_config.get("chain", "nat-prerouting"))
    if chain not in CHAINS:
        raise ValueError(f"enforcement.chain must be one of {', '.join(CHAINS)}, got {chain!r}")
    enforcement = EnforcementConfig(
        interface=os.getenv("IOTFENCE_INTERFACE") or str(enforcement_config.get("interface", "wlan0")),
        chain=chain,
        upstream_resolver=os.getenv("IOTFENCE_UPSTREAM_RESOLVER")
        or str(enforcement_config.get("upstream_resolver", "8.8.8.8")),
        sinkhole_address=str(enforcement_config.get("sinkhole_address", "127.0.0.1")),
    )

    monitor_config = config.get("monitor") or {}
    monitor = MonitorConfig(
        udp_idle_timeout=int(monitor_config.get("udp_idle_timeout", 60)),
        binding_ttl_floor=int(monitor_config.get("binding_ttl_floor", 60)),
        binding_ttl_cap=int(monitor_config.get("binding_ttl_cap", 86400)),
        binding_maxsize=int(monitor_config.get("binding_maxsize", 65536)),
        schedule_timezone=str(monitor_config.get("schedule_timezone", "UTC")),
    )
    if monitor.binding_ttl_floor > monitor.binding_ttl_cap:
        raise ValueError("monitor.binding_ttl_floor must not exceed monitor.binding_ttl_cap")

    learn_config = config.get("learn") or {}
    learn = LearnConfig(
        aggregate_prefix=parse_aggregate_prefix(learn_config.get("aggregate_prefix", "exact")),
        rate_slack=float(learn_config.get("rate_slack", 1.0)),
        min_rate_observations=int(learn_config.get("min_rate_observations", 2)),
    )

    advanced_config = config.get("advanced") or {}
    advanced = AdvancedConfig(
        log_level=os.getenv("IOTFENCE_LOG_LEVEL") or str(advanced_config.get("log_level", "INFO")),
    )

    # 5. Build Settings object
    return Settings(
        project_root=project_root,
        enforcement=enforcement,
        monitor=monitor,
        learn=learn,
        advanced=advanced,
    )
