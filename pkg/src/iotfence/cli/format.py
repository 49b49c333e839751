"""CLI formatting helpers: status lines, lint check lines and summary tables."""

from __future__ import annotations

import os
import sys

from rich.console import Console
from rich.table import Table

from iotfence.policy.validation import PolicyWarning
from iotfence.traffic.summary import CaptureSummary

_CONSOLE = Console(highlight=False)
_CONSOLE_ERR = Console(stderr=True, highlight=False)
_CHECK_WIDTH = 50

_STATUS_STYLES = {"PASS": "green", "OK": "green", "FAIL": "red", "WARN": "yellow"}


def _use_color() -> bool:
    """Return False if NO_COLOR is set or stdout is not a TTY."""
    if os.environ.get("NO_COLOR"):
        return False
    return sys.stdout.isatty()


def _format_check(name: str, status: str, width: int = _CHECK_WIDTH) -> str:
    """Build padded line like 'connections[0]......................... [WARN]'."""
    status_str = f" [{status}]"
    padding_len = max(0, width - len(name) - len(status_str))
    return f"{name}{'.' * padding_len}{status_str}"


def print_check(warning: PolicyWarning, *, width: int = _CHECK_WIDTH) -> None:
    """Emit one lint line for ``warning`` followed by its message."""
    line = _format_check(f"{warning.rule_id} {warning.code}", "WARN", width=width)
    _CONSOLE.print(line, style="yellow" if _use_color() else None, soft_wrap=True, markup=False)
    _CONSOLE.print(f"  - {warning.message}", style="dim" if _use_color() else None, soft_wrap=True, markup=False)


def print_info(msg: str, *, err: bool = False) -> None:
    """Print an info line (plain or dim)."""
    console = _CONSOLE_ERR if err else _CONSOLE
    console.print(msg, style="dim" if _use_color() else None, soft_wrap=True, markup=False)


def print_status(status: str, message: str, *, err: bool = False) -> None:
    """Print a status line (for non-check contexts, e.g. errors)."""
    style = _STATUS_STYLES.get(status) if _use_color() else None
    console = _CONSOLE_ERR if err else _CONSOLE
    console.print(f"[{status}] {message}", style=style, soft_wrap=True, markup=False)


def print_summary_table(rows: list[tuple[str, CaptureSummary]]) -> None:
    """Print capture footprints, one device per row."""
    table = Table(title="Network behavior")
    table.add_column("Device")
    table.add_column("Distinct Endpoints", justify="right")
    table.add_column("Distinct Domains", justify="right")
    table.add_column("HC IPs", justify="right")
    table.add_column("Rogue resolver")
    for device, summary in rows:
        table.add_row(
            device,
            str(summary.distinct_endpoints),
            str(summary.distinct_domains),
            str(summary.hardcoded_ips),
            "yes" if summary.rogue_resolver else "no",
        )
    _CONSOLE.print(table)
