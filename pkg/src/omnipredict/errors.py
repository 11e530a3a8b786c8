"""Exception hierarchy shared by every module in the package.

The distinction between the classes mirrors the command-line exit codes:
argument errors are caller mistakes (exit 1), configuration and model
errors mean the inputs on disk are unusable (exit 2), and guarantee
failures such as an exceeded iteration bound surface as exit 3.
"""

from __future__ import annotations


class OmnipredictError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(OmnipredictError, ValueError):
    """An operation was called with unusable arguments."""


class ConfigurationError(OmnipredictError):
    """A scenario, dataset, or training configuration is invalid."""


class WeightInvariantError(ConfigurationError):
    """An importance-weight function violates its mass or range invariants."""


class ModelMismatchError(OmnipredictError):
    """A stored model does not fit the scenario it was loaded against.

    Raised on fingerprint mismatches and on update terms whose loss or
    hypothesis references do not resolve in the scenario.
    """


class DataFormatError(OmnipredictError):
    """A data file is malformed; the message names the offending line."""


class LearnerContractError(OmnipredictError):
    """A cost-sensitive learner returned a hypothesis that fails its own
    mean-cost contract."""


class BoundExceededError(OmnipredictError):
    """Exact-mode training exceeded its proven iteration bound.

    This indicates an internal inconsistency, so the partial trace is
    attached for diagnosis.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
