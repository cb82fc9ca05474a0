"""Command-line entry point: ``edcplab <command> ...``."""
from .commands import dispatch, main

__all__ = ["dispatch", "main"]
