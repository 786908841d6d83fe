"""Shared exception base so the CLI can map failures to one exit path."""


class WarmstartError(Exception):
    """Base class for all errors raised by this package."""
