"""Command-line handlers and report schemas."""

from molscale.cli.commands import COMMANDS, RunContext
from molscale.cli.schemas import RunManifest, write_manifest

__all__ = ["COMMANDS", "RunContext", "RunManifest", "write_manifest"]
