"""Exception hierarchy shared across the package."""


class ExcursetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(ExcursetError):
    """A scalar parameter is outside its documented range."""


class FormatError(ExcursetError):
    """A file does not match the documented on-disk contract."""


class ValidationError(ExcursetError):
    """Input data violates a content invariant (e.g. NaN payload values)."""


class DesignError(ExcursetError):
    """The design matrix or contrast vector is unusable (rank, shape)."""


class DegeneratePixelError(ExcursetError):
    """Zero residual variance at one or more pixels.

    Carries the offending flat pixel indices in ``pixels``.
    """

    def __init__(self, pixels):
        self.pixels = list(pixels)
        shown = ", ".join(str(p) for p in self.pixels[:10])
        more = "" if len(self.pixels) <= 10 else f" (+{len(self.pixels) - 10} more)"
        super().__init__(f"zero residual variance at pixel indices [{shown}]{more}")


class ConfigurationError(ExcursetError):
    """Inconsistent or infeasible configuration (lattice/n mismatch, bad scenario)."""


class EmptyEstimateError(ExcursetError):
    """The estimated combined excursion set is empty or fills the lattice.

    The boundary-based calibration has nothing to evaluate, so confidence
    regions are undefined for this input.
    """


class DegenerateBootstrapError(ExcursetError):
    """A bootstrap sample had zero standard deviation at a boundary-adjacent pixel."""

    def __init__(self, realization, pixel_index):
        self.realization = realization
        self.pixel_index = pixel_index
        super().__init__(
            f"degenerate bootstrap sample (sd = 0) in realization {realization} "
            f"at boundary pixel {pixel_index}"
        )
