"""Exception hierarchy shared by all wgimage modules."""


class WaveguideError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(WaveguideError):
    """Cross-section extents or other geometric parameters are invalid."""


class CutoffResonance(WaveguideError):
    """The wavenumber coincides with a mode cutoff (axial wavenumber 0)."""


class FamilyMismatch(WaveguideError):
    """A field kind was requested that the mode family does not provide."""


class CoincidentAxialPlanes(WaveguideError):
    """Source and observer axial planes are closer than the declared gap."""


class PointOutsideHalfGuide(WaveguideError):
    """An evaluation point lies outside the closure of the half guide."""


class SeparationViolated(WaveguideError):
    """Scene, grid, or sampling point violates an axial separation rule."""


class LSDiverged(WaveguideError):
    """Volume-integral fixed-point iteration failed to reach tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DimensionMismatch(WaveguideError):
    """Array shapes or grid resolution are inconsistent with the basis."""


class EmptyLattice(WaveguideError):
    """A sampling lattice contains no nodes."""


class ValidationError(WaveguideError):
    """A configuration value failed validation.

    ``field`` holds the dotted path of the offending entry, e.g.
    ``scene.shapes[1].radius``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(WaveguideError):
    """A file could not be parsed (config JSON, binary container, CSV/VTK)."""
