"""Logging setup and optional Logfire tracing.

Logs go to stderr (data goes to stdout or files). Logfire spans are emitted
only when LOGFIRE_TOKEN is set; otherwise ``span`` is a null context.
"""

from __future__ import annotations

import contextlib
import logging
import os
from collections.abc import Iterator
from typing import Any

from rich.console import Console
from rich.logging import RichHandler

logger = logging.getLogger(__name__)

_configured: bool = False
_enabled: bool = False


def configure_logging(level: str | int = "INFO") -> None:
    """Route all iotfence logging to stderr through rich."""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing, RichHandler):
            root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)


def configure() -> bool:
    """Configure Logfire once per process. Returns True if spans will be exported.

    Skips configuration when no token is present to avoid interactive prompts.
    """
    global _configured, _enabled
    if _configured:
        return _enabled
    _configured = True

    if not os.getenv("LOGFIRE_TOKEN"):
        return False

    try:
        import logfire

        logfire.configure(send_to_logfire="if-token-present", service_name="iotfence")
        _enabled = True
        logger.info("Logfire configured")
    except ImportError:
        logger.warning("LOGFIRE_TOKEN set but logfire is not installed")
    except Exception as e:
        logger.warning("Failed to configure Logfire: %s", e)
    return _enabled


@contextlib.contextmanager
def span(name: str, **attributes: Any) -> Iterator[None]:
    """Trace a pipeline stage when Logfire is enabled."""
    if not _enabled:
        yield
        return
    import logfire

    with logfire.span(name, **attributes):
        yield
