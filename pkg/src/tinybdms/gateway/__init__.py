"""HTTP API and interactive shell."""

from .repl import EmbeddedBackend, RemoteBackend, repl_loop
from .server import create_app

__all__ = ["EmbeddedBackend", "RemoteBackend", "create_app", "repl_loop"]
