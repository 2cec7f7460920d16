"""Fehlerklassen des Gitter-Simulators."""

from __future__ import annotations


class LatticeSimError(Exception):
    """Basisklasse aller fachlichen Fehler."""


class DomainError(LatticeSimError, ValueError):
    """Physikalisch unzulässige Eingabe (z.B. negative Tiefe, leere Zeitachse)."""


class ConvergenceError(LatticeSimError):
    """Numerisches Verfahren hat die geforderte Genauigkeit nicht erreicht."""


class TruncationError(LatticeSimError):
    """Das Fock-Fenster schneidet zu viel Norm ab."""


class ConfigurationError(LatticeSimError):
    """Fehlerhafte oder unvollständige Konfiguration."""


class StepSizeError(LatticeSimError):
    """Zeitschritt verletzt die Stabilitätsgrenze oder die Norm driftet."""


class ClippingError(LatticeSimError):
    """Zu viel Dichte liegt außerhalb des Bildfelds."""


class SizeError(LatticeSimError, ValueError):
    """Problemgröße überschreitet das zulässige Limit."""


class ArtifactIOError(LatticeSimError, OSError):
    """Ausgabedatei konnte nicht geschrieben werden."""
