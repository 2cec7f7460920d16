"""Repository für den Zugriff auf Konfigurationsdateien."""

from __future__ import annotations

import configparser
import logging
import re
from pathlib import Path
from typing import Dict, Mapping

from model.errors import ArtifactIOError, ConfigurationError

logger = logging.getLogger(__name__)

_SECTION_LINE = re.compile(r"^\s*\[(?P<name>[^\]]+)\]")
_KEY_LINE = re.compile(r"^\s*(?P<key>[^=:#;\s][^=:]*?)\s*[=:]")

# (Sektion, Schlüssel) -> (Rohwert, Zeilennummer)
RawConfig = Dict[str, Dict[str, tuple[str, int]]]


class IniConfigRepository:
    """
    Repository für sektionierte Schlüssel-Wert-Dateien (INI-Format).

    Das Repository ist die Datenzugriffsschicht:
    - Kapselt Lesen und Schreiben der Konfigurationsdatei
    - Keine Validierung der Werte, nur Rohtext und Zeilennummern
    - Gibt einfache Datenstrukturen zurück

    Die Zeilennummern erlauben Fehlermeldungen der Form
    "Zeile 12: unbekannter Schlüssel 'depht_u' in [lattice]".
    """

    def __init__(self, path: str | Path) -> None:
        """
        Initialisiert das Repository.
        """
        self._path = Path(path)

    @property
    def path(self) -> Path:
        return self._path

    def exists(self) -> bool:
        return self._path.is_file()

    # ---------- Lesen ----------

    def _line_numbers(self, text: str) -> dict[tuple[str, str], int]:
        """
        Ordnet jedem (Sektion, Schlüssel) seine Zeilennummer zu.

        Sektionen ohne Schlüssel erhalten den Eintrag (Sektion, "").
        """
        lines: dict[tuple[str, str], int] = {}
        section = ""
        for number, line in enumerate(text.splitlines(), start=1):
            match = _SECTION_LINE.match(line)
            if match:
                section = match.group("name").strip()
                lines.setdefault((section, ""), number)
                continue
            match = _KEY_LINE.match(line)
            if match and section:
                lines.setdefault((section, match.group("key").strip().lower()), number)
        return lines

    def load(self) -> RawConfig:
        """
        Liest die Datei und gibt Rohwerte samt Zeilennummern zurück.

        Raises:
            ConfigurationError: Datei fehlt oder ist syntaktisch fehlerhaft
        """
        if not self.exists():
            raise ConfigurationError(
                f"Konfigurationsdatei nicht gefunden: {self._path} (mit 'init' erzeugen)"
            )
        try:
            text = self._path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"Konfigurationsdatei nicht lesbar: {self._path} ({exc})") from exc

        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(self._path))
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigurationError(f"{self._path}, Zeile {exc.lineno}: Eintrag vor der ersten Sektion") from exc
        except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
            raise ConfigurationError(f"{self._path}, Zeile {exc.lineno}: {exc.message}") from exc
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else "?"
            raise ConfigurationError(f"{self._path}, Zeile {lineno}: Zeile nicht lesbar") from exc

        numbers = self._line_numbers(text)
        raw: RawConfig = {}
        for section in parser.sections():
            raw[section] = {
                key: (value, numbers.get((section, key), 0)) for key, value in parser.items(section)
            }
        logger.debug("Konfiguration gelesen: %s (%d Sektionen)", self._path, len(raw))
        return raw

    # ---------- Schreiben ----------

    def write(self, sections: Mapping[str, Mapping[str, str]], overwrite: bool = False) -> Path:
        """
        Schreibt eine vollständige Konfiguration.

        Raises:
            ArtifactIOError: wenn die Datei existiert (ohne overwrite) oder nicht schreibbar ist
        """
        if self.exists() and not overwrite:
            raise ArtifactIOError(f"Datei existiert bereits: {self._path}")
        parser = configparser.ConfigParser(interpolation=None)
        for section, values in sections.items():
            parser[section] = dict(values)
        try:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with self._path.open("w", encoding="utf-8") as handle:
                parser.write(handle)
        except OSError as exc:
            raise ArtifactIOError(f"Konfiguration konnte nicht geschrieben werden: {self._path} ({exc})") from exc
        logger.info("Konfiguration geschrieben: %s", self._path)
        return self._path
