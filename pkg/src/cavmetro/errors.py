"""Exception hierarchy.

Every error raised on purpose by the library derives from ``CavmetroError`` so
the command line can map it to a stable, machine-readable category name.
"""


class CavmetroError(Exception):
    """Base class for all library errors."""

    @property
    def category(self) -> str:
        return type(self).__name__


class DimensionMismatch(CavmetroError):
    pass


class InvalidState(CavmetroError):
    pass


class InvalidAtomState(CavmetroError):
    pass


class TruncationTooSmall(CavmetroError):
    pass


class StepSizeUnderflow(CavmetroError):
    pass


class NoConvergence(CavmetroError):
    pass


class DegenerateNullSpace(CavmetroError):
    pass


class UnstableSystem(CavmetroError):
    pass


class UnphysicalMoments(CavmetroError):
    pass


class ZeroSensitivity(CavmetroError):
    pass


class ZeroCoherence(CavmetroError):
    pass


class EmptyWindow(CavmetroError):
    pass


class ConfigError(CavmetroError):
    pass
