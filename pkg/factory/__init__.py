"""
Factory Pattern für den Gitter-Simulator.

Enthält:
- Zahlmodelle (kohärent, gequetscht, Fock)
- NumberModelFactory
"""

from factory.number_model_factory import (
    NumberModel,
    CoherentNumberModel,
    SqueezedNumberModel,
    FockNumberModel,
    NumberModelFactory,
)

__all__ = [
    "NumberModel",
    "CoherentNumberModel",
    "SqueezedNumberModel",
    "FockNumberModel",
    "NumberModelFactory",
]
