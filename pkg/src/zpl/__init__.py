"""Zeta values on vertical progressions, their Bernoulli duals and digit statistics."""

from .errors import ZPLError
from .hp import DEFAULT_CONTEXT, PrecisionContext

__version__ = "0.1.0"
__all__ = ["DEFAULT_CONTEXT", "PrecisionContext", "ZPLError", "__version__"]
