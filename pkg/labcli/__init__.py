"""Command-line front end: ``kyleback-lab <subcommand>``."""

from .cli import build_parser, main

__all__ = ["build_parser", "main"]
