"""Subprocess worker that executes guardrail snippets over line-delimited JSON."""

from extexec.worker import handle_request, serve

__all__ = ["handle_request", "serve"]
__version__ = "0.1.0"
