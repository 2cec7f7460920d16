"""
Controller für den Gitter-Simulator.
Koordiniert zwischen Service (Model) und ReportView.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Sequence

from adapter.external_profile import ExternalProfileReader
from adapter.profile_adapter import ProfileAdapter
from model.constants import EXIT_CONVERGENCE, EXIT_OK
from model.repository import IniConfigRepository
from model.run_config import RunConfig
from model.service import ExperimentService
from view.report_view import ReportView

logger = logging.getLogger(__name__)


class ExperimentController:

    def __init__(self, service: ExperimentService, view: ReportView) -> None:
        self._service = service
        self._view = view

    # ---------- Konfiguration ----------

    @staticmethod
    def init_config(path: str | Path, overwrite: bool = False) -> Path:
        """Schreibt eine vollständige Default-Konfiguration."""
        return IniConfigRepository(path).write(RunConfig().to_sections(), overwrite=overwrite)

    # ---------- Unterbefehle ----------

    def params(self, depths: Sequence[float]) -> Path:
        """Parametertabelle über die Tiefen."""
        return self._view.write_params(self._service.parameter_table(depths))

    def bloch(self, images: bool = False, scan_gradients: Sequence[float] | None = None) -> List[Path]:
        """
        Bloch-Trajektorie samt Peakgewichten; optional PGM-Bilder und Gradienten-Scan.
        """
        if scan_gradients:
            return [self._view.write_gradient_scan(self._service.gradient_scan(scan_gradients))]
        run = self._service.bloch_run()
        paths = self._view.write_bloch(run)
        if images:
            paths += self._view.write_frames(run, self._service.config.imaging.image_width_um * 1e-6)
        return paths

    def squeezing(self, depths: Sequence[float], number_model: str | None = None) -> Path:
        """Inkohärenter Anteil und Depletion über die Tiefe."""
        return self._view.write_squeezing(self._service.squeezing_curve(depths, number_model))

    def coherence(self, depths: Sequence[float] | None = None, number_model: str | None = None) -> List[Path]:
        """
        Kohärenzzeit bei der konfigurierten Tiefe; mit depths zusätzlich der Tiefenscan.
        """
        paths = self._view.write_coherence(self._service.coherence_run(number_model=number_model))
        if depths:
            paths.append(self._view.write_depth_scan(self._service.coherence_vs_depth(depths)))
        return paths

    def rephase(self) -> List[Path]:
        """Rephasierung nach Abschalten des Gradienten mit Zwei-Platz-Vergleich."""
        return self._view.write_rephase(self._service.rephase_run())

    def fit(self, profile_path: str | Path) -> int:
        """
        Passt ein externes Profil an und schreibt den Fit-Bericht.

        Gibt den Exit-Code zurück (3 bei Nichtkonvergenz).
        """
        external = ExternalProfileReader().read(profile_path)
        profile = ProfileAdapter(self._service.config_hash).adapt(external)
        fit, width = self._service.fit_profile(profile)
        self._view.write_fit_report(fit, width)
        if not fit.converged:
            logger.warning("Fit von %s nicht konvergiert", profile_path)
        return EXIT_OK if fit.converged else EXIT_CONVERGENCE
