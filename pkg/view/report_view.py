"""
View-Schicht: CSV-Artefakte und Konsolenzusammenfassungen.

Jede CSV-Datei beginnt mit drei Kommentarzeilen (config_hash, seed,
artifact_version); identische Eingaben ergeben byteidentische Dateien.
"""

from __future__ import annotations

import csv
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from model.analysis import PARAMETER_NAMES, incoherent_fraction
from model.constants import (
    ARTIFACT_VERSION,
    COHERENCE_FIT_COLUMNS,
    CSV_FLOAT_FORMAT,
    DEPTH_SCAN_COLUMNS,
    FIT_REPORT_COLUMNS,
    GRADIENT_SCAN_COLUMNS,
    ORDER_PARAMETER_COLUMNS,
    PARAMS_COLUMNS,
    PEAK_WEIGHT_COLUMNS,
    PROFILE_COLUMNS,
    REPHASE_COLUMNS,
    SQUEEZING_COLUMNS,
    TRAJECTORY_COLUMNS,
    TWO_SITE_COLUMNS,
    WIDTH_COLUMNS,
)
from model.entities import (
    BlochRun,
    CoherenceRun,
    DensityProfile,
    DepthScanRow,
    FitResult,
    GradientScanRow,
    RephaseRun,
    SqueezingRow,
    WidthMeasurement,
)
from model.errors import ArtifactIOError
from model.tof_imaging import render_image

logger = logging.getLogger(__name__)


def _period_ms(frequency: float) -> float:
    return 2.0 * math.pi / frequency * 1e3 if frequency > 0 else math.inf


def format_cell(value) -> str:
    """Einheitliche Textform für CSV-Zellen."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) or hasattr(value, "dtype"):
        number = float(value)
        if math.isnan(number):
            return "nan"
        return CSV_FLOAT_FORMAT.format(number)
    return str(value)


class ReportView:
    """
    Schreibt die Ergebnisse der Service-Schicht als Dateien.

    Die View kennt nur Ergebnisobjekte und Spaltenlisten; sie rechnet nichts
    außer Einheitenumrechnungen (s -> ms, rad/s -> Hz).
    """

    def __init__(self, out_dir: str | Path, config_hash: str, seed: int, stream: TextIO | None = None) -> None:
        self._out_dir = Path(out_dir)
        self._config_hash = config_hash
        self._seed = seed
        self._stream = stream if stream is not None else sys.stdout

    @property
    def out_dir(self) -> Path:
        return self._out_dir

    # ---------- Allgemein ----------

    def _header(self) -> list[str]:
        return [
            f"# config_hash={self._config_hash}",
            f"# seed={self._seed}",
            f"# artifact_version={ARTIFACT_VERSION}",
        ]

    def write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """
        Schreibt eine CSV-Datei mit Provenienzkopf.

        Raises:
            ArtifactIOError: wenn das Ausgabeverzeichnis nicht beschreibbar ist
        """
        path = self._out_dir / name
        try:
            self._out_dir.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8", newline="") as handle:
                for line in self._header():
                    handle.write(line + "\n")
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([format_cell(v) for v in row])
        except OSError as exc:
            raise ArtifactIOError(f"Datei konnte nicht geschrieben werden: {path} ({exc})") from exc
        logger.info("Geschrieben: %s", path)
        return path

    def summary(self, text: str) -> None:
        """Kurze Zusammenfassung auf der Konsole."""
        print(text, file=self._stream)

    # ---------- Parameter ----------

    def write_params(self, rows: list[dict]) -> Path:
        path = self.write_csv("params.csv", PARAMS_COLUMNS, ([row[c] for c in PARAMS_COLUMNS] for row in rows))
        self.summary(f"{len(rows)} Tiefen -> {path}")
        return path

    # ---------- Bloch ----------

    def write_bloch(self, run: BlochRun) -> list[Path]:
        times_ms = run.trajectory.times * 1e3
        trajectory = self.write_csv(
            "trajectory.csv",
            TRAJECTORY_COLUMNS,
            (
                (t, q.fraction if q.defined else math.nan, norm)
                for t, q, norm in zip(times_ms, run.quasimomenta, run.trajectory.norms)
            ),
        )
        weights = self.write_csv(
            "peak_weights.csv",
            PEAK_WEIGHT_COLUMNS,
            ((t, *w) for t, w in zip(times_ms, run.peak_weights)),
        )
        self.summary(f"Bloch-Periode {run.bloch_period * 1e3:.4f} ms, {times_ms.size} Bilder")
        return [trajectory, weights]

    def write_profile(self, name: str, profile: DensityProfile) -> Path:
        """Dichteprofil als CSV (x_um, density), lesbar für das fit-Kommando."""
        return self.write_csv(name, PROFILE_COLUMNS, zip(profile.positions * 1e6, profile.density))

    def write_frames(self, run: BlochRun, transverse_width: float) -> list[Path]:
        """Ein 16-bit-PGM und eine Profil-CSV je Bild (frame_000.pgm, frame_000.csv, ...)."""
        paths = []
        for index, profile in enumerate(run.profiles):
            path = self._out_dir / f"frame_{index:03d}.pgm"
            try:
                self._out_dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ArtifactIOError(f"Ausgabeverzeichnis nicht anlegbar: {self._out_dir} ({exc})") from exc
            render_image(profile, transverse_width, path)
            paths.append(path)
            paths.append(self.write_profile(f"frame_{index:03d}.csv", profile))
        self.summary(f"{len(run.profiles)} Bilder -> {self._out_dir}")
        return paths

    def write_gradient_scan(self, rows: list[GradientScanRow]) -> Path:
        return self.write_csv(
            "width_vs_gradient.csv",
            GRADIENT_SCAN_COLUMNS,
            ((r.gradient_hz, r.hold * 1e3, r.width, r.width_err, r.incoherent_fraction, r.status) for r in rows),
        )

    # ---------- Squeezing ----------

    def write_squeezing(self, rows: list[SqueezingRow]) -> Path:
        path = self.write_csv(
            "squeezing.csv",
            SQUEEZING_COLUMNS,
            (
                (r.depth_u, r.incoherent_fraction, r.fraction_err, r.depletion, r.sigma_ratio, r.below_noise_floor)
                for r in rows
            ),
        )
        for r in rows:
            self.summary(f"U = {r.depth_u:5.2f} E_R  inkohärent {r.incoherent_fraction:.4f}  Depletion {r.depletion:.4f}")
        return path

    # ---------- Kohärenz ----------

    def write_coherence(self, run: CoherenceRun) -> list[Path]:
        scan = run.scan
        widths = self.write_csv(
            "coherence_widths.csv",
            WIDTH_COLUMNS,
            ((t * 1e3, w, e) for t, w, e in zip(run.times, run.widths, run.width_errors)),
        )
        fit = self.write_csv(
            "coherence_fit.csv",
            COHERENCE_FIT_COLUMNS,
            [
                (
                    scan.tau_c * 1e3,
                    scan.tau_c_err * 1e3,
                    scan.w_0,
                    scan.w_0_err,
                    scan.w_f,
                    scan.w_f_err,
                    scan.extrapolated,
                    scan.poor_fit,
                    run.theory_tau * 1e3,
                    run.array_theory_tau * 1e3,
                    run.skipped_frames,
                )
            ],
        )
        order = self.write_csv(
            "order_parameter.csv",
            ORDER_PARAMETER_COLUMNS,
            ((t * 1e3, a.real, a.imag, abs(a)) for t, a in zip(run.order_times, run.order_parameter)),
        )
        self.summary(
            f"U = {run.depth_u:.2f} E_R ({run.number_model}): tau_c = {scan.tau_c * 1e3:.2f} "
            f"+- {scan.tau_c_err * 1e3:.2f} ms (Theorie {run.theory_tau * 1e3:.2f} ms, "
            f"Array {run.array_theory_tau * 1e3:.2f} ms, {run.skipped_frames} Bilder übersprungen)"
        )
        return [widths, fit, order]

    def write_depth_scan(self, rows: list[DepthScanRow]) -> Path:
        return self.write_csv(
            "coherence_vs_depth.csv",
            DEPTH_SCAN_COLUMNS,
            (
                (
                    r.depth_u,
                    r.tau_coherent * 1e3,
                    r.tau_coherent_err * 1e3,
                    r.tau_squeezed * 1e3,
                    r.tau_squeezed_err * 1e3,
                    r.theory_coherent * 1e3,
                    r.theory_squeezed * 1e3,
                    r.status,
                )
                for r in rows
            ),
        )

    # ---------- Rephasierung ----------

    def write_rephase(self, run: RephaseRun) -> list[Path]:
        times_ms = run.times * 1e3
        widths = self.write_csv("rephase.csv", REPHASE_COLUMNS, zip(times_ms, run.widths))
        scale = run.two_site.n_total / 2.0
        two_site = self.write_csv(
            "two_site.csv",
            TWO_SITE_COLUMNS,
            (
                (t, abs(c) / scale, i)
                for t, c, i in zip(times_ms, run.two_site.coherence, run.two_site.imbalance)
            ),
        )
        self.summary(
            f"Minimale Breite bei {run.revival_time * 1e3:.2f} ms; "
            f"2 pi / omega_J = {_period_ms(run.josephson_frequency):.2f} ms, "
            f"Zwei-Platz-Periode {_period_ms(run.two_site_frequency):.2f} ms "
            f"(Plasma {_period_ms(run.plasma_frequency):.2f} ms)"
        )
        return [widths, two_site]

    # ---------- Fit-Bericht ----------

    def write_fit_report(self, fit: FitResult, width: WidthMeasurement | None) -> Path:
        model = fit.model
        values = []
        for peak in (*model.narrow, model.broad):
            values += [peak.center, peak.width, peak.area]
        values.append(model.baseline)
        rows: list[tuple] = [
            (name, value, fit.std_err(name)) for name, value in zip(PARAMETER_NAMES, values)
        ]
        rows.append(("converged", fit.converged, math.nan))
        rows.append(("residual_rms", fit.residual_rms, math.nan))
        rows.append(("n_iterations", fit.n_iterations, math.nan))
        if fit.converged:
            rows.append(("incoherent_fraction", incoherent_fraction(fit), math.nan))
        if width is not None:
            rows.append(("central_width", width.value, math.nan))
            rows.append(("spacing", width.spacing, math.nan))
            rows.append(("kinematic_spacing", width.kinematic_spacing, math.nan))
            rows.append(("resolution_limit", width.resolution_limit, math.nan))
            rows.append(("saturated", width.saturated, math.nan))
        path = self.write_csv("fit_report.csv", FIT_REPORT_COLUMNS, rows)
        self.summary(f"Fit {'konvergiert' if fit.converged else 'NICHT konvergiert'}: {fit.message}")
        return path
