"""Exception hierarchy.

``ConfigurationError`` covers bad settings (CLI exit code 2); ``DataError``
covers problems with the data itself (CLI exit code 3).
"""


class DpmpmError(Exception):
    pass


class ConfigurationError(DpmpmError, ValueError):
    pass


class DataError(DpmpmError, ValueError):
    pass


class SchemaError(DataError):
    pass


class FormatError(DataError):
    pass


class ContractViolation(DpmpmError, ValueError):
    """A caller broke an operation's precondition."""


class DegenerateTruthError(DpmpmError, RuntimeError):
    pass


class OracleRefusal(DpmpmError, ValueError):
    """Instance too large for brute-force enumeration."""
