"""Exception types shared across the package.

CLI exit codes are attached to the families the command line maps onto
stable codes (2 validation, 3 training contract, 4 size guard).
"""


class QcommitError(Exception):
    exit_code = 1


class SizeError(QcommitError, ValueError):
    """Array or register size out of the supported range."""


class BindingError(QcommitError, ValueError):
    """A parameter slot could not be resolved to a value."""


class UnsupportedGateError(QcommitError, ValueError):
    pass


class DegenerateInputError(QcommitError, ValueError):
    pass


class ValidationError(QcommitError, ValueError):
    """Case document failed validation; ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class TopologyError(ValidationError):
    pass


class ContractError(QcommitError, RuntimeError):
    exit_code = 3


class SizeGuardError(QcommitError, RuntimeError):
    exit_code = 4
