"""Exception types shared across the toolkit."""


class GapAttackError(Exception):
    """Base class for all toolkit errors."""


class MalformedFileError(GapAttackError):
    """A file exists but cannot be parsed in its declared format."""


class ManifestMismatchError(MalformedFileError):
    """A weight payload does not match the manifest that declared it."""


class ShapeMismatchError(GapAttackError):
    """An array or image does not have the shape a consumer requires."""


class OracleError(GapAttackError):
    """A classification backend failed to produce a usable answer."""


class BudgetExhaustedError(OracleError):
    """A query budget guard refused a classify call."""


class DegenerateImageError(GapAttackError):
    """The attack region offers no usable candidate pixels."""
