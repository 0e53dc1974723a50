"""hfepr: desk-scale simulator for a 110-336 GHz pulsed EPR/ENDOR spectrometer."""

from .constants import CONSTANTS, PhysicalConstants
from .errors import (
    CapacityError,
    DomainError,
    MixerOverloadWarning,
    SimulationWarning,
    UnsupportedModelError,
)

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS",
    "PhysicalConstants",
    "CapacityError",
    "DomainError",
    "MixerOverloadWarning",
    "SimulationWarning",
    "UnsupportedModelError",
    "__version__",
]
