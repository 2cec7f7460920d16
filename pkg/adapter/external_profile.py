"""
Externe Profilquelle für das Adapter Pattern.

Liest Dichteprofile aus fremden Auswerteketten im CSV-Format
(Spalten x_um und density, Kommentarzeilen mit '#').
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List

from model.constants import PROFILE_DENSITY_COLUMN, PROFILE_X_COLUMN
from model.errors import ArtifactIOError, DomainError

logger = logging.getLogger(__name__)


@dataclass
class ExternalProfile:
    """
    Externes Datenformat - Inkompatibel mit DensityProfile (Mikrometer, Listen).
    """

    x_um: List[float]
    density: List[float]
    source: str = ""


class ExternalProfileReader:
    """
    Liest Profil-CSV-Dateien.
    """

    def read(self, path: str | Path) -> ExternalProfile:
        """
        Liest eine Profildatei.

        Raises:
            ArtifactIOError: Datei fehlt oder ist nicht lesbar
            DomainError: Spalten fehlen oder Werte sind keine Zahlen
        """
        path = Path(path)
        try:
            with path.open(encoding="utf-8", newline="") as handle:
                lines = [line for line in handle if line.strip() and not line.lstrip().startswith("#")]
        except OSError as exc:
            raise ArtifactIOError(f"Profil nicht lesbar: {path} ({exc})") from exc

        reader = csv.DictReader(lines)
        columns = set(reader.fieldnames or [])
        missing = {PROFILE_X_COLUMN, PROFILE_DENSITY_COLUMN} - columns
        if missing:
            raise DomainError(f"{path}: fehlende Spalten {sorted(missing)}")

        x_um: list[float] = []
        density: list[float] = []
        for number, row in enumerate(reader, start=2):
            try:
                x_um.append(float(row[PROFILE_X_COLUMN]))
                density.append(float(row[PROFILE_DENSITY_COLUMN]))
            except (TypeError, ValueError) as exc:
                raise DomainError(f"{path}, Datenzeile {number}: keine Zahl") from exc
        logger.debug("Profil gelesen: %s (%d Punkte)", path, len(x_um))
        return ExternalProfile(x_um=x_um, density=density, source=str(path))
