"""Shared exception base for the vulnreach package."""


class VulnreachError(Exception):
    """Base class for all errors raised by vulnreach modules."""
