"""Exception types shared across the package.

Kept in one place so the command-line layer can map each family to a
stable exit code without importing every subsystem.
"""

__all__ = ["SpinBayesError", "ConfigError", "ScenarioError"]


class SpinBayesError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SpinBayesError):
    """Invalid, missing, or contradictory run configuration."""


class ScenarioError(SpinBayesError):
    """A simulation scenario left its domain of validity mid-run."""
