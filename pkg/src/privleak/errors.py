"""Exception hierarchy shared across the package."""


class PrivleakError(Exception):
    """Base class for all errors raised by privleak."""


class DomainError(PrivleakError, ValueError):
    """An argument lies outside the domain of a function."""


class PreconditionError(PrivleakError, ValueError):
    """An operation was called in a state where it is not defined."""


class LossTypeError(PrivleakError, TypeError):
    """Model output type does not match the requested loss."""


class ContractError(PrivleakError, ValueError):
    """A declared bound or contract was violated at runtime."""


class RegularizationRequiredError(PrivleakError, ValueError):
    """Unregularized least squares system is singular."""


class EncodingOverflowError(DomainError):
    """Feature or response does not fit the collusion encoding."""


class DegenerateThresholdError(DomainError):
    """Threshold adversary asked to separate non-overfitted error laws."""


class NotComputableError(PrivleakError):
    """Requested quantity has no implementation for this distribution."""


class ConfigError(PrivleakError, ValueError):
    """Experiment or run configuration is invalid.

    ``problems`` lists every violation found, not only the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CsvParseError(PrivleakError, ValueError):
    """A CSV cell could not be parsed; message carries the line number."""
