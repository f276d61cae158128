"""Exception types shared across the package."""


class PsdaError(Exception):
    """Base class for errors raised by this package."""


class CappedConcentrationError(PsdaError):
    """Mean resultant length is at or beyond the invertible cap.

    Raised when data are so concentrated that the maximum-likelihood
    concentration would be numerically unbounded (all points effectively
    coincident at float precision).
    """

    def __init__(self, r: float, r_max: float):
        self.r = float(r)
        self.r_max = float(r_max)
        super().__init__(
            f"mean resultant length {self.r:.17g} is at or above the "
            f"invertible cap {self.r_max:.17g}; data are numerically coincident"
        )


class ParseError(PsdaError):
    """A data file could not be parsed.

    Carries the file path and 1-based line number so callers can report
    actionable locations.
    """

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = int(lineno)
        super().__init__(f"{self.path}:{self.lineno}: {message}")
