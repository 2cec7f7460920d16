"""
Flugzeitabbildung des Gitterarrays.

Im Fernfeld bildet die Flugzeit t den Impuls auf den Ort x = hbar k t / m ab.
Jeder Platz trägt ein Gauß-Orbital mit Impulsverteilung
|w(k)|^2 = (a / sqrt(pi)) exp(-k^2 a^2); die Dichte einer Realisierung ist

    n(x) = |sum_i b_i exp(-i k x_i)|^2 |w(k)|^2 dk/dx * Pixelgröße,  k = m x / (hbar t),

also in Atomen pro Pixel mit Integral sum_i n_i.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from model.constants import (
    ARTIFACT_VERSION,
    ENSEMBLE_CHUNK,
    FOV_SPACINGS,
    HBAR,
    MIN_CAPTURED_FRACTION,
    PGM_MAX,
)
from model.entities import ArrayState, DensityProfile, HubbardParams, ImagingConfig
from model.errors import ArtifactIOError, ClippingError, DomainError

logger = logging.getLogger(__name__)


# ---------- Kinematik ----------


def kinematic_spacing(params: HubbardParams, tof_time: float) -> float:
    """Abstand der Interferenzpeaks (2 hbar k / m) t in m."""
    return params.bragg_momentum * tof_time / params.atom_mass


def detector_wavenumbers(config: ImagingConfig, params: HubbardParams) -> np.ndarray:
    """Wellenzahl k = m x / (hbar t) je Pixel."""
    return params.atom_mass * config.positions / (HBAR * config.tof_time)


def onsite_envelope(config: ImagingConfig, params: HubbardParams) -> np.ndarray:
    """Einhüllende eines einzelnen Platzes in Atomen pro Pixel (Summe ~ 1)."""
    k = detector_wavenumbers(config, params)
    a = config.onsite_width
    jacobian = params.atom_mass / (HBAR * config.tof_time)
    return a / math.sqrt(math.pi) * np.exp(-(k * a) ** 2) * jacobian * config.pixel_size


def _check_field_of_view(config: ImagingConfig, params: HubbardParams) -> None:
    spacing = kinematic_spacing(params, config.tof_time)
    if config.half_field < FOV_SPACINGS * spacing:
        raise ClippingError(
            f"Bildfeld +-{config.half_field * 1e6:.0f} um ist kleiner als {FOV_SPACINGS} Peakabstände"
        )


# ---------- Synthese ----------


def synthesize_shots(state: ArrayState, config: ImagingConfig, params: HubbardParams) -> np.ndarray:
    """
    Einzelschuss-Profile aller Realisierungen, Form (samples, pixels).

    Raises:
        ClippingError: wenn das Bildfeld zu klein ist oder mehr als 2% der Atome verliert
    """
    _check_field_of_view(config, params)
    k = detector_wavenumbers(config, params)
    site_positions = state.site_index.astype(float) * params.site_spacing
    phase_matrix = np.exp(-1j * np.multiply.outer(site_positions, k))
    weight = onsite_envelope(config, params)
    blur = config.resolution_blur / config.pixel_size

    fields = state.fields
    shots = np.empty((state.n_samples, config.n_pixels))
    for start in range(0, state.n_samples, ENSEMBLE_CHUNK):
        chunk = slice(start, min(start + ENSEMBLE_CHUNK, state.n_samples))
        far_field = fields[chunk] @ phase_matrix
        density = (far_field.real ** 2 + far_field.imag ** 2) * weight
        if blur > 0:
            density = gaussian_filter1d(density, sigma=blur, axis=1, mode="constant")
        shots[chunk] = density

    captured = float(shots.sum() / state.atom_numbers.sum())
    if captured < MIN_CAPTURED_FRACTION:
        raise ClippingError(f"Nur {captured:.1%} der Atome liegen im Bildfeld")
    return shots


def synthesize_profile(
    state: ArrayState,
    config: ImagingConfig,
    params: HubbardParams,
    seed: int | None = None,
    config_hash: str = "",
) -> DensityProfile:
    """Über alle Realisierungen gemitteltes Dichteprofil (ohne Rauschen)."""
    shots = synthesize_shots(state, config, params)
    return DensityProfile(
        positions=config.positions,
        density=shots.mean(axis=0),
        n_samples=state.n_samples,
        seed=seed,
        config_hash=config_hash,
    )


# ---------- Rauschen ----------


def _noisy(density: np.ndarray, config: ImagingConfig, rng: np.random.Generator) -> np.ndarray:
    noisy = density
    if config.atom_shot and config.number_fluct_sigma > 0:
        s = config.number_fluct_sigma
        noisy = noisy * math.exp(s * rng.standard_normal() - 0.5 * s * s)
    if config.photon_shot:
        noisy = rng.poisson(np.maximum(noisy, 0.0)).astype(float)
    return noisy


def add_noise(profile: DensityProfile, config: ImagingConfig, seed: int) -> DensityProfile:
    """
    Schussrauschen für ein Profil.

    atom_shot: mittelwerterhaltender lognormaler Skalenfaktor mit Breite number_fluct_sigma.
    photon_shot: Poisson-Zählrauschen pro Pixel. Ohne beide Flags unverändert.
    """
    if not (config.atom_shot or config.photon_shot):
        return profile
    rng = np.random.default_rng(seed)
    return DensityProfile(
        positions=profile.positions,
        density=_noisy(profile.density, config, rng),
        n_samples=profile.n_samples,
        seed=profile.seed,
        config_hash=profile.config_hash,
    )


def add_shot_noise(shots: np.ndarray, config: ImagingConfig, seed: int) -> np.ndarray:
    """Rauschen je Einzelschuss; jeder Schuss erhält einen eigenen Generator aus SeedSequence(seed)."""
    if not (config.atom_shot or config.photon_shot):
        return shots
    children = np.random.SeedSequence(seed).spawn(shots.shape[0])
    return np.array([_noisy(row, config, np.random.default_rng(child)) for row, child in zip(shots, children)])


# ---------- Bilder ----------


def render_image(
    profile: DensityProfile,
    transverse_width: float,
    path: str | Path | None = None,
) -> np.ndarray:
    """
    Zweidimensionales Bild als Außenprodukt mit einem transversalen Gauß-Profil.

    Die Spaltensummen reproduzieren das Profil. Mit path wird ein 16-bit-PGM
    (P5, big-endian) samt Metadaten-Sidecar (.txt) geschrieben; das Maximum
    entspricht dem höchsten Grauwert.

    Raises:
        ArtifactIOError: wenn die Datei nicht geschrieben werden kann
    """
    if transverse_width <= 0:
        raise DomainError("Transversale Bildbreite muss positiv sein")
    pixel = profile.pixel_size
    half_rows = int(math.ceil(4.0 * transverse_width / pixel))
    rows = (np.arange(-half_rows, half_rows + 1)) * pixel
    column = np.exp(-(rows ** 2) / (2.0 * transverse_width ** 2))
    column /= column.sum()
    image = np.outer(column, np.maximum(profile.density, 0.0))

    if path is not None:
        _write_pgm(image, Path(path), profile)
    return image


def _write_pgm(image: np.ndarray, path: Path, profile: DensityProfile) -> None:
    peak = float(image.max())
    scale = PGM_MAX / peak if peak > 0 else 0.0
    gray = np.rint(image * scale).astype(">u2")
    height, width = gray.shape
    header = f"P5\n{width} {height}\n{PGM_MAX}\n".encode("ascii")
    sidecar = path.with_suffix(".txt")
    lines = [
        f"atoms_per_level={1.0 / scale if scale > 0 else 0.0:.10g}",
        f"pixel_size_um={profile.pixel_size * 1e6:.10g}",
        f"config_hash={profile.config_hash}",
        f"seed={profile.seed}",
        f"artifact_version={ARTIFACT_VERSION}",
    ]
    try:
        path.write_bytes(header + gray.tobytes())
        sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(f"Bild konnte nicht geschrieben werden: {path} ({exc})") from exc
    logger.debug("PGM geschrieben: %s (%dx%d)", path, width, height)
