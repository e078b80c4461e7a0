"""Exception types shared across the package."""


class SandstoneError(ValueError):
    """Base class for all domain errors raised by sandstone."""


class DegenerateMatrixError(SandstoneError):
    """A matrix of trace <= 2 was used where a proper circle is required."""


class NoProperSuccessorError(SandstoneError):
    pass


class IncompatiblePatchesError(SandstoneError):
    """Quadratic patches disagree in value or gradient at a shared point."""


class CollinearError(SandstoneError):
    pass


class GeometryError(SandstoneError):
    """Invalid circle configuration (bad tangency, coincident points, ...)."""


class WindowOverflowError(SandstoneError):
    """A boundary site of a finite window had to topple."""


class FitResidualError(SandstoneError):
    """The successor patch construction failed its own consistency checks."""


class IrrationalEntryError(SandstoneError):
    pass
