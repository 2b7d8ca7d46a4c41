"""riplab: numerical experiments for restricted isometries of structured
random measurements, from finite group orbits to function-space sampling."""

from .numerics import CapacityError, NumericalError, SeededRng, lq_norm, operator_norm, schatten_norm

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "NumericalError",
    "SeededRng",
    "lq_norm",
    "operator_norm",
    "schatten_norm",
    "__version__",
]
