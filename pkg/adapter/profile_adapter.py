"""
Adapter Pattern für externe Profile.

Übersetzt ExternalProfile (Mikrometer, Listen) in DensityProfile
(Meter, numpy-Arrays), ohne die Auswertung zu verändern.
"""

from __future__ import annotations

import numpy as np

from adapter.external_profile import ExternalProfile
from model.entities import DensityProfile
from model.errors import DomainError

UM = 1e-6
SPACING_TOLERANCE = 1e-6


class ProfileAdapter:
    """
    Adapter: Konvertiert ExternalProfile -> DensityProfile.

    - Client: die Auswertung (verwendet DensityProfile)
    - Service: ExternalProfileReader (liefert ExternalProfile)
    - Adapter: ProfileAdapter (übersetzt zwischen beiden)
    """

    def __init__(self, config_hash: str = "") -> None:
        self._config_hash = config_hash

    def _convert_positions(self, x_um: list[float]) -> np.ndarray:
        """
        Mikrometer -> Meter; verlangt aufsteigende, äquidistante Positionen.
        """
        positions = np.asarray(x_um, dtype=float) * UM
        steps = np.diff(positions)
        if steps.size == 0 or np.any(steps <= 0):
            raise DomainError("Positionen müssen streng aufsteigen")
        if np.max(np.abs(steps - steps.mean())) > SPACING_TOLERANCE * steps.mean() + 1e-15:
            raise DomainError("Positionen müssen äquidistant sein")
        return positions

    def adapt(self, external: ExternalProfile) -> DensityProfile:
        """
        Konvertiert ein externes Profil.
        """
        if len(external.x_um) != len(external.density):
            raise DomainError("x_um und density müssen gleich lang sein")
        density = np.asarray(external.density, dtype=float)
        if not np.all(np.isfinite(density)):
            raise DomainError("Dichte enthält ungültige Werte")
        return DensityProfile(
            positions=self._convert_positions(external.x_um),
            density=density,
            n_samples=1,
            seed=None,
            config_hash=self._config_hash,
        )
