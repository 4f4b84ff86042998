"""Principal eigenvalues and concentration profiles of small-noise operators on the circle and 2-torus."""

__version__ = "0.1.0"

from .errors import LabError
from .model import FieldModel, RecurrentComponent, TrigSeries, benchmark_field, build_component

__all__ = [
    "__version__",
    "LabError",
    "FieldModel",
    "RecurrentComponent",
    "TrigSeries",
    "benchmark_field",
    "build_component",
]
