"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and I/O problems exit
with 2, data/computation problems with 1.
"""


class SewerclustError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SewerclustError):
    """Invalid input data or an operation precondition violated by the data."""


class ConfigError(SewerclustError):
    """Bad run configuration: missing files, invalid parameter combinations."""


class DependencyError(ConfigError):
    """A subcommand needs an artifact that an earlier stage has not produced."""
