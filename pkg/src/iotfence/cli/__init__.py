"""iotfence CLI - learn, compile, simulate, summarize, explain."""

from iotfence.cli.main import app, main

__all__ = ["app", "main"]
