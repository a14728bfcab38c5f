"""Exception hierarchy."""


class ErgolabError(Exception):
    pass


class ConfigurationError(ErgolabError, ValueError):
    """Invalid system spec, observable spec or experiment config."""


class UnsupportedError(ErgolabError, NotImplementedError):
    """The requested operation is not defined for this system."""


class InvariantViolation(ErgolabError, AssertionError):
    """A checked mathematical invariant failed at run time."""
