"""
Laufkonfiguration: Sektionen, Validierung, Umrechnung in Domänenobjekte und Hash.

Vorrang: eingebaute Defaults < Konfigurationsdatei < Kommandozeile.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

from model.constants import (
    DEFAULT_ARRAY_RADIUS,
    DEFAULT_BLOCH_PERIODS,
    DEFAULT_BLUR,
    DEFAULT_CENTRAL_OCCUPATION,
    DEFAULT_DEPTH_U,
    DEFAULT_FRAMES_PER_PERIOD,
    DEFAULT_GRADIENT_HZ,
    DEFAULT_IMAGE_WIDTH,
    DEFAULT_N_TIMES,
    DEFAULT_NOISE_FLOOR,
    DEFAULT_PIXEL_SIZE,
    DEFAULT_PIXELS,
    DEFAULT_PLANE_WAVES,
    DEFAULT_REPHASE_COUPLING,
    DEFAULT_REPHASE_POINTS,
    DEFAULT_SAMPLES,
    DEFAULT_SCAN_HOLD_MS,
    DEFAULT_SEED,
    DEFAULT_SHOT_TO_SHOT_SIGMA,
    DEFAULT_SQUEEZING_FORMULA,
    DEFAULT_T_BLOCH_MS,
    DEFAULT_T_RAMP_MS,
    DEFAULT_T_REPHASE_MS,
    DEFAULT_TIME_SPAN_TAU,
    DEFAULT_TOF,
    DEFAULT_TRANSVERSE_WIDTH,
    DEFAULT_WAVELENGTH,
    ENSEMBLE_MODELS,
    ENVELOPE_GAUSSIAN,
    ENVELOPES,
    FIT_MAX_ITERATIONS,
    NUMBER_MODEL_SQUEEZED,
    RB87_MASS,
    RB87_SCATTERING_LENGTH,
    SQUEEZING_FORMULAS,
    WIDTH_CONVENTIONS,
    WIDTH_EFFECTIVE,
    WIDTH_SIGMA,
    ZENER_FRACTION,
)
from model.entities import EnsembleSpec, HubbardParams, ImagingConfig, LatticeConfig
from model.errors import ConfigurationError, DomainError
from model.repository import RawConfig

logger = logging.getLogger(__name__)

_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


# ---------- Sektionen ----------


@dataclass(frozen=True)
class LatticeSection:
    depth_u: float = DEFAULT_DEPTH_U
    wavelength_nm: float = round(DEFAULT_WAVELENGTH * 1e9, 6)
    scattering_length_nm: float = round(RB87_SCATTERING_LENGTH * 1e9, 6)
    transverse_width_um: float = round(DEFAULT_TRANSVERSE_WIDTH * 1e6, 6)
    plane_waves: int = DEFAULT_PLANE_WAVES
    zener_fraction: float = ZENER_FRACTION
    rephase_coupling: float = DEFAULT_REPHASE_COUPLING


@dataclass(frozen=True)
class AtomsSection:
    total_atoms: int = 0
    central_occupation: float = DEFAULT_CENTRAL_OCCUPATION
    array_radius_sites: float = DEFAULT_ARRAY_RADIUS
    envelope: str = ENVELOPE_GAUSSIAN
    number_model: str = NUMBER_MODEL_SQUEEZED
    squeezing_formula: str = DEFAULT_SQUEEZING_FORMULA
    shot_to_shot_sigma: float = DEFAULT_SHOT_TO_SHOT_SIGMA


@dataclass(frozen=True)
class GradientSection:
    gradient_hz: float = DEFAULT_GRADIENT_HZ
    scan_hold_ms: float = DEFAULT_SCAN_HOLD_MS
    balance_confinement: bool = True


@dataclass(frozen=True)
class TimesSection:
    t_ramp_ms: float = DEFAULT_T_RAMP_MS
    t_bloch_ms: float = DEFAULT_T_BLOCH_MS
    t_rephase_ms: float = DEFAULT_T_REPHASE_MS
    tof_ms: float = round(DEFAULT_TOF * 1e3, 6)
    bloch_periods: int = DEFAULT_BLOCH_PERIODS
    frames_per_period: int = DEFAULT_FRAMES_PER_PERIOD


@dataclass(frozen=True)
class EnsembleSection:
    n_samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    workers: int = 1


@dataclass(frozen=True)
class ImagingSection:
    pixel_size_um: float = round(DEFAULT_PIXEL_SIZE * 1e6, 6)
    n_pixels: int = DEFAULT_PIXELS
    resolution_blur_um: float = round(DEFAULT_BLUR * 1e6, 6)
    image_width_um: float = round(DEFAULT_IMAGE_WIDTH * 1e6, 6)
    photon_shot: bool = True
    atom_shot: bool = True


@dataclass(frozen=True)
class AnalysisSection:
    n_times: int = DEFAULT_N_TIMES
    time_span_tau: float = DEFAULT_TIME_SPAN_TAU
    noise_floor: float = DEFAULT_NOISE_FLOOR
    width_convention: str = WIDTH_SIGMA
    dephasing_convention: str = WIDTH_EFFECTIVE
    resolution_limit: float = 0.0
    rephase_points: int = DEFAULT_REPHASE_POINTS
    max_iterations: int = FIT_MAX_ITERATIONS


SECTION_TYPES: dict[str, type] = {
    "lattice": LatticeSection,
    "atoms": AtomsSection,
    "gradient": GradientSection,
    "times": TimesSection,
    "ensemble": EnsembleSection,
    "imaging": ImagingSection,
    "analysis": AnalysisSection,
}


# ---------- Gesamtkonfiguration ----------


@dataclass(frozen=True)
class RunConfig:
    """
    Vollständig aufgelöste Laufkonfiguration.

    Immutable; Überschreibungen der Kommandozeile erzeugen über
    with_overrides() eine neue Instanz.
    """

    lattice: LatticeSection = field(default_factory=LatticeSection)
    atoms: AtomsSection = field(default_factory=AtomsSection)
    gradient: GradientSection = field(default_factory=GradientSection)
    times: TimesSection = field(default_factory=TimesSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    imaging: ImagingSection = field(default_factory=ImagingSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    def __post_init__(self) -> None:
        _validate(self)

    # ---------- Umrechnung ----------

    def lattice_config(self, depth_u: float | None = None, gradient_hz: float | None = None) -> LatticeConfig:
        """LatticeConfig in SI-Einheiten; depth_u und gradient_hz überschreiben die Datei."""
        return LatticeConfig(
            depth_u=self.lattice.depth_u if depth_u is None else float(depth_u),
            wavelength=self.lattice.wavelength_nm * 1e-9,
            atom_mass=RB87_MASS,
            scattering_length=self.lattice.scattering_length_nm * 1e-9,
            total_atoms=self.atoms.total_atoms,
            central_occupation=self.atoms.central_occupation,
            array_radius_sites=self.atoms.array_radius_sites,
            gradient_e=2.0 * math.pi * (self.gradient.gradient_hz if gradient_hz is None else float(gradient_hz)),
            transverse_width=self.lattice.transverse_width_um * 1e-6,
            shot_to_shot_sigma=self.atoms.shot_to_shot_sigma,
            plane_waves=self.lattice.plane_waves,
            envelope=self.atoms.envelope,
            balance_confinement=self.gradient.balance_confinement,
            zener_fraction=self.lattice.zener_fraction,
        )

    def imaging_config(self, params: HubbardParams) -> ImagingConfig:
        return ImagingConfig(
            onsite_width=params.axial_width,
            tof_time=self.times.tof_ms * 1e-3,
            pixel_size=self.imaging.pixel_size_um * 1e-6,
            n_pixels=self.imaging.n_pixels,
            photon_shot=self.imaging.photon_shot,
            atom_shot=self.imaging.atom_shot,
            number_fluct_sigma=self.atoms.shot_to_shot_sigma,
            resolution_blur=self.imaging.resolution_blur_um * 1e-6,
        )

    def ensemble_spec(self, number_model: str | None = None) -> EnsembleSpec:
        """EnsembleSpec; number_model überschreibt das Modell der Datei."""
        return EnsembleSpec(
            n_samples=self.ensemble.n_samples,
            number_sigma_model=self.atoms.number_model if number_model is None else number_model,
            master_seed=self.ensemble.seed,
            squeezing_formula=self.atoms.squeezing_formula,
        )

    # ---------- Serialisierung ----------

    def to_sections(self) -> dict[str, dict[str, str]]:
        """Normalisierte Textdarstellung aller Werte (sortiert nach Sektion und Schlüssel)."""
        sections: dict[str, dict[str, str]] = {}
        for name in sorted(SECTION_TYPES):
            values = getattr(self, name)
            sections[name] = {
                f.name: _format_value(getattr(values, f.name))
                for f in sorted(fields(SECTION_TYPES[name]), key=lambda f: f.name)
            }
        return sections

    def config_hash(self) -> str:
        """Erste 16 Hex-Stellen von SHA-256 über die kanonische Serialisierung."""
        canonical = "\n".join(
            f"{section}.{key}={value}"
            for section, values in self.to_sections().items()
            for key, value in values.items()
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, overrides: Mapping[str, Mapping[str, Any]]) -> RunConfig:
        """
        Neue Konfiguration mit überschriebenen Werten; None-Werte werden ignoriert.

        Raises:
            ConfigurationError: unbekannte Sektion oder unbekannter Schlüssel
        """
        updates: dict[str, Any] = {}
        for section, values in overrides.items():
            if section not in SECTION_TYPES:
                raise ConfigurationError(f"Unbekannte Sektion: [{section}]")
            known = {f.name for f in fields(SECTION_TYPES[section])}
            changes = {k: v for k, v in values.items() if v is not None}
            unknown = set(changes) - known
            if unknown:
                raise ConfigurationError(f"Unbekannter Schlüssel in [{section}]: {sorted(unknown)[0]}")
            if changes:
                updates[section] = replace(getattr(self, section), **changes)
        return replace(self, **updates) if updates else self


# ---------- Parsen ----------


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(raw: str, target: type, where: str) -> Any:
    text = raw.strip()
    try:
        if target is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigurationError(f"{where}: ungültiger Wert '{text}' (erwartet {target.__name__})") from exc


def build_run_config(raw: RawConfig, source: str = "<config>") -> RunConfig:
    """
    Erstellt eine RunConfig aus Rohwerten des Repositories.

    Fehlende Schlüssel behalten ihre Defaults.

    Raises:
        ConfigurationError: unbekannte Sektionen oder Schlüssel, fehlerhafte Werte
    """
    sections: dict[str, Any] = {}
    for section, values in raw.items():
        if section not in SECTION_TYPES:
            line = min((line for _, line in values.values()), default=0)
            raise ConfigurationError(f"{source}: unbekannte Sektion [{section}] (nahe Zeile {line})")
        section_type = SECTION_TYPES[section]
        types = {f.name: type(f.default) for f in fields(section_type)}
        parsed: dict[str, Any] = {}
        for key, (text, line) in values.items():
            where = f"{source}, Zeile {line}"
            if key not in types:
                raise ConfigurationError(f"{where}: unbekannter Schlüssel '{key}' in [{section}]")
            parsed[key] = _convert(text, types[key], where)
        sections[section] = section_type(**parsed)
    return RunConfig(**sections)


# ---------- Validierung ----------


def _validate(config: RunConfig) -> None:
    times = config.times
    for name in ("t_ramp_ms", "t_bloch_ms", "t_rephase_ms", "tof_ms"):
        if getattr(times, name) < 0:
            raise ConfigurationError(f"Zeit [times] {name} darf nicht negativ sein: {getattr(times, name)}")
    if times.tof_ms <= 0:
        raise ConfigurationError("Flugzeit [times] tof_ms muss positiv sein")
    if config.gradient.scan_hold_ms < 0:
        raise ConfigurationError("Haltezeit [gradient] scan_hold_ms darf nicht negativ sein")
    if times.bloch_periods < 1 or times.frames_per_period < 2:
        raise ConfigurationError("Mindestens eine Bloch-Periode mit zwei Bildern nötig")
    if config.ensemble.n_samples < 1 or config.ensemble.workers < 1:
        raise ConfigurationError("n_samples und workers müssen mindestens 1 sein")
    if config.ensemble.seed < 0:
        raise ConfigurationError("seed darf nicht negativ sein")
    if config.atoms.envelope not in ENVELOPES:
        raise ConfigurationError(f"Unbekannte Einhüllende: '{config.atoms.envelope}'")
    if config.atoms.number_model not in ENSEMBLE_MODELS:
        raise ConfigurationError(f"Unbekanntes Zahlmodell: '{config.atoms.number_model}'")
    if config.atoms.squeezing_formula not in SQUEEZING_FORMULAS:
        raise ConfigurationError(f"Unbekannte Squeezing-Formel: '{config.atoms.squeezing_formula}'")
    if config.atoms.total_atoms < 0:
        raise ConfigurationError(f"[atoms] total_atoms darf nicht negativ sein: {config.atoms.total_atoms}")
    if not 0 <= config.lattice.rephase_coupling <= 1:
        raise ConfigurationError(f"[lattice] rephase_coupling muss in [0, 1] liegen: {config.lattice.rephase_coupling}")
    analysis = config.analysis
    if analysis.width_convention not in WIDTH_CONVENTIONS:
        raise ConfigurationError(f"Unbekannte Breitenkonvention: '{analysis.width_convention}'")
    if analysis.dephasing_convention not in WIDTH_CONVENTIONS:
        raise ConfigurationError(f"Unbekannte Breitenkonvention: '{analysis.dephasing_convention}'")
    if analysis.resolution_limit < 0:
        raise ConfigurationError("resolution_limit darf nicht negativ sein")
    if analysis.n_times < 5 or analysis.rephase_points < 2 or analysis.max_iterations < 1:
        raise ConfigurationError("n_times >= 5, rephase_points >= 2 und max_iterations >= 1 erforderlich")
    if analysis.time_span_tau <= 0 or not 0 <= analysis.noise_floor <= 1:
        raise ConfigurationError("time_span_tau muss positiv und noise_floor in [0, 1] sein")
    imaging = config.imaging
    if imaging.image_width_um <= 0 or imaging.pixel_size_um <= 0 or imaging.n_pixels < 3:
        raise ConfigurationError("Bildbreite und Pixelgröße müssen positiv sein, n_pixels mindestens 3")
    if imaging.resolution_blur_um < 0:
        raise ConfigurationError("resolution_blur_um darf nicht negativ sein")
    try:
        config.lattice_config()
        EnsembleSpec(n_samples=config.ensemble.n_samples, master_seed=config.ensemble.seed)
    except DomainError as exc:
        raise ConfigurationError(f"Ungültige Konfiguration: {exc}") from exc
