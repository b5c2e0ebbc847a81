"""Exception hierarchy shared by every module."""


class UnboundedDEError(Exception):
    """Base class for all errors raised by unbounded_de."""


class ContractViolation(UnboundedDEError, ValueError):
    """A caller broke an operation's precondition (length mismatch, empty support...)."""


class UnknownIndividual(UnboundedDEError, LookupError):
    """An insertion index that is not (or no longer) held by a population store."""


class BudgetExhausted(UnboundedDEError, RuntimeError):
    """The objective was asked for an evaluation past its budget."""


class ConfigError(UnboundedDEError, ValueError):
    """Invalid configuration or experiment plan."""


class ResultMismatch(UnboundedDEError, RuntimeError):
    """Results on disk were produced by a different plan."""
