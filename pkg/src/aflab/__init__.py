"""Expected delay-Doppler ambiguity functions of random communication waveforms."""

from .bases import ModulationBasis, Scheme2D
from .constellation import Constellation, ConstellationStats
from .dpaf import AFGrid
from .errors import AfLabError, AssumptionViolationError, InvalidArgumentError, StateSpaceTooLargeError

__all__ = [
    "AFGrid",
    "AfLabError",
    "AssumptionViolationError",
    "Constellation",
    "ConstellationStats",
    "InvalidArgumentError",
    "ModulationBasis",
    "Scheme2D",
    "StateSpaceTooLargeError",
]
__version__ = "0.1.0"
