"""Exception hierarchy shared by every module."""


class ZPLError(Exception):
    """Base class for all library errors."""


class ValidationError(ZPLError, ValueError):
    """Bad user-facing input (CLI exit code 1)."""


class PrecisionExhausted(ZPLError):
    """The requested accuracy needs more than ``max_working_bits``."""


class PoleAtOne(ZPLError, ZeroDivisionError):
    pass


class PoleError(ZPLError, ZeroDivisionError):
    pass


class GridMismatch(ValidationError):
    pass


class BadRatio(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, text: str = "", position: int = 0):
        super().__init__(f"{message} (at position {position} in {text!r})")
        self.text = text
        self.position = position


class NotIsolating(ValidationError):
    pass


class DigitUncertain(ZPLError):
    """A digit sits too close to a boundary at the available precision."""

    def __init__(self, index: int, bits: int):
        super().__init__(f"digit {index} undecidable at {bits} bits; raise precision")
        self.index = index
        self.bits = bits


class QuadratureNonConvergent(ZPLError):
    def __init__(self, achieved: float, requested: float):
        super().__init__(f"quadrature error estimate {achieved:.3g} exceeds {requested:.3g}")
        self.achieved = achieved
        self.requested = requested


class HypothesisUnverified(ValidationError):
    pass


class ZetaPointError(ZPLError):
    """A grid point failed; carries the offending index."""

    def __init__(self, n: int, cause: Exception):
        super().__init__(f"zeta evaluation failed at n={n}: {cause}")
        self.n = n
        self.cause = cause
