"""Service entry points: the HTTP gateway and the command line."""

from .app import create_app
from .auth import AuthManager
from .cli import main

__all__ = ["AuthManager", "create_app", "main"]
