class DataError(Exception):
    """Malformed or inconsistent input data."""


class ValidationError(DataError):
    """A record failed schema or invariant validation."""


class BackendError(Exception):
    """A configured external backend failed or was unreachable."""
