"""
Adapter Pattern für den Gitter-Simulator.

Enthält:
- ExternalProfileReader (externe Profil-CSV)
- ExternalProfile (externes Datenformat)
- ProfileAdapter (Konvertierung extern -> DensityProfile)
"""

from adapter.external_profile import (
    ExternalProfile,
    ExternalProfileReader,
)

from adapter.profile_adapter import (
    ProfileAdapter,
)

__all__ = [
    # Externe Quelle
    "ExternalProfile",
    "ExternalProfileReader",
    # Adapter
    "ProfileAdapter",
]
