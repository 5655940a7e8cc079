class DataError(Exception):
    """Input data is missing, malformed or unusable (CLI exit code 2)."""


class UsageError(Exception):
    """Invalid invocation or argument combination (CLI exit code 1)."""
