"""
Gitterparameter aus der Bandstruktur.

Das Gitterpotential V(x) = U E_R sin^2(k x) wird in der Basis ebener Wellen
exp(i (q + 2 k j) x), j = -n .. n, diagonalisiert. In Einheiten von E_R ist
die Matrix tridiagonal: Diagonale (q/k + 2 j)^2 + U/2, Nebendiagonale -U/4.
Alle Energien werden als Kreisfrequenzen (Energie / hbar) zurückgegeben.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from model.constants import (
    BAND_CONVERGENCE_TOL,
    DEFAULT_PLANE_WAVES,
    DEFAULT_WAVELENGTH,
    DEPTH_RANGE,
    HBAR,
    MIN_PLANE_WAVES,
    PLANE_WAVE_CHECK_STEP,
    QUASIMOMENTUM_POINTS,
    RB87_MASS,
    ZENER_FRACTION,
)
from model.entities import HubbardParams, LatticeConfig
from model.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)


# ---------- Grundgrößen ----------


def wave_number(wavelength: float) -> float:
    """Wellenzahl k = 2 pi / lambda des Gitterlasers."""
    if wavelength <= 0:
        raise DomainError(f"Wellenlänge muss positiv sein, erhalten: {wavelength}")
    return 2.0 * math.pi / wavelength


def recoil_energy(wavelength: float, atom_mass: float = RB87_MASS) -> float:
    """
    Rückstoßenergie E_R / hbar = hbar k^2 / (2 m) in rad/s.

    Für 852 nm und Rb-87 ergibt sich E_R / h = 3.16 kHz.
    """
    if atom_mass <= 0:
        raise DomainError(f"Atommasse muss positiv sein, erhalten: {atom_mass}")
    k = wave_number(wavelength)
    return HBAR * k * k / (2.0 * atom_mass)


def bloch_period(gradient_e: float) -> float:
    """Bloch-Periode T = 2 pi hbar / E in s."""
    if gradient_e <= 0:
        raise DomainError(f"Gradient muss positiv sein, erhalten: {gradient_e}")
    return 2.0 * math.pi / gradient_e


# ---------- Bandstruktur ----------


def _check_basis(n_plane_waves: int) -> None:
    if n_plane_waves < MIN_PLANE_WAVES or n_plane_waves % 2 == 0:
        raise DomainError(
            f"Basisgröße muss ungerade und mindestens {MIN_PLANE_WAVES} sein, erhalten: {n_plane_waves}"
        )


def _lowest_levels(q_over_k: float, depth_u: float, n_plane_waves: int, count: int) -> np.ndarray:
    """Die niedrigsten count Eigenwerte (in E_R) bei Quasiimpuls q."""
    half = n_plane_waves // 2
    j = np.arange(-half, half + 1)
    diagonal = (q_over_k + 2.0 * j) ** 2 + depth_u / 2.0
    off_diagonal = np.full(n_plane_waves - 1, -depth_u / 4.0)
    return eigvalsh_tridiagonal(
        diagonal, off_diagonal, select="i", select_range=(0, count - 1)
    )


def band_structure(
    depth_u: float,
    n_plane_waves: int = DEFAULT_PLANE_WAVES,
    q_points: int = QUASIMOMENTUM_POINTS,
    n_bands: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Berechnet die niedrigsten Bänder über der ersten Brillouin-Zone.

    Args:
        depth_u: Gittertiefe in E_R (U = 0 ergibt das gefaltete freie Band)
        n_plane_waves: ungerade Basisgröße
        q_points: Anzahl der Quasiimpulse in [-k, k] (ungerade, inkl. Zonenrand)
        n_bands: Anzahl der berechneten Bänder

    Returns:
        (q / k, Energien in E_R mit Form (q_points, n_bands))

    Raises:
        DomainError: bei negativer Tiefe oder ungültiger Basis
        ConvergenceError: wenn eine um 10 größere Basis das unterste Band
            um mehr als 1e-6 E_R verschiebt
    """
    if depth_u < 0:
        raise DomainError(f"Gittertiefe darf nicht negativ sein, erhalten: {depth_u}")
    _check_basis(n_plane_waves)
    if q_points < 3 or q_points % 2 == 0:
        raise DomainError("Quasiimpulsgitter braucht eine ungerade Punktzahl >= 3")

    q_grid = np.linspace(-1.0, 1.0, q_points)
    energies = np.array([_lowest_levels(q, depth_u, n_plane_waves, n_bands) for q in q_grid])

    # Konvergenz am Zonenzentrum und Zonenrand
    larger = n_plane_waves + PLANE_WAVE_CHECK_STEP
    for q in (0.0, 1.0):
        reference = _lowest_levels(q, depth_u, n_plane_waves, 1)[0]
        extended = _lowest_levels(q, depth_u, larger, 1)[0]
        if abs(extended - reference) > BAND_CONVERGENCE_TOL:
            raise ConvergenceError(
                f"Bandstruktur bei U = {depth_u} mit {n_plane_waves} ebenen Wellen nicht konvergiert "
                f"(Abweichung {abs(extended - reference):.2e} E_R)"
            )
    return q_grid, energies


def bandwidth(depth_u: float, n_plane_waves: int = DEFAULT_PLANE_WAVES) -> float:
    """Breite des untersten Bandes in E_R."""
    _, energies = band_structure(depth_u, n_plane_waves)
    lowest = energies[:, 0]
    return float(lowest.max() - lowest.min())


def band_gap(depth_u: float, n_plane_waves: int = DEFAULT_PLANE_WAVES) -> float:
    """Lücke zwischen erstem und zweitem Band am Zonenrand in E_R."""
    if depth_u < 0:
        raise DomainError(f"Gittertiefe darf nicht negativ sein, erhalten: {depth_u}")
    _check_basis(n_plane_waves)
    first, second = _lowest_levels(1.0, depth_u, n_plane_waves, 2)
    return float(second - first)


def tunneling(
    depth_u: float,
    recoil: float | None = None,
    n_plane_waves: int = DEFAULT_PLANE_WAVES,
) -> float:
    """
    Tunnelkopplung gamma = Bandbreite / 4 in rad/s.

    Ohne recoil wird die Rückstoßenergie des Standardgitters (852 nm, Rb-87) verwendet.

    Raises:
        DomainError: wenn U außerhalb von [1, 40] liegt
    """
    low, high = DEPTH_RANGE
    if not low <= depth_u <= high:
        raise DomainError(f"Gittertiefe {depth_u} liegt außerhalb von [{low}, {high}] E_R")
    if recoil is None:
        recoil = recoil_energy(DEFAULT_WAVELENGTH)
    return bandwidth(depth_u, n_plane_waves) / 4.0 * recoil


def asymptotic_tunneling(depth_u: float) -> float:
    """Tiefgitter-Näherung (4 / sqrt(pi)) U^(3/4) exp(-2 sqrt(U)) in E_R."""
    return 4.0 / math.sqrt(math.pi) * depth_u ** 0.75 * math.exp(-2.0 * math.sqrt(depth_u))


# ---------- Wechselwirkung ----------


def axial_oscillator_length(depth_u: float, recoil: float, atom_mass: float = RB87_MASS) -> float:
    """Oszillatorlänge sqrt(hbar / (m omega)) eines Gitterplatzes mit omega = 2 sqrt(U) E_R / hbar."""
    if depth_u <= 0:
        raise DomainError(f"Gittertiefe muss positiv sein, erhalten: {depth_u}")
    omega = 2.0 * math.sqrt(depth_u) * recoil
    return math.sqrt(HBAR / (atom_mass * omega))


def gaussian_overlap_integral(axial_width: float, transverse_width: float) -> float:
    """Integral von |w|^4 für ein Gauß-Orbital: 1 / ((2 pi)^(3/2) a_ax a_perp^2) in 1/m^3."""
    if axial_width <= 0 or transverse_width <= 0:
        raise DomainError("Orbitalbreiten müssen positiv sein")
    return 1.0 / ((2.0 * math.pi) ** 1.5 * axial_width * transverse_width ** 2)


def onsite_interaction(config: LatticeConfig) -> float:
    """
    Wechselwirkungsenergie g beta / hbar = (4 pi hbar a_s / m) * Integral |w|^4 in rad/s.

    Die axiale Breite folgt aus der harmonischen Näherung eines Gitterplatzes
    bei config.depth_u, die transversale Breite ist der Kalibrierparameter.
    Verschwindende Streulänge ergibt 0.
    """
    if config.transverse_width <= 0:
        raise DomainError("Transversale Breite muss positiv sein")
    recoil = recoil_energy(config.wavelength, config.atom_mass)
    axial = axial_oscillator_length(config.depth_u, recoil, config.atom_mass)
    coupling = 4.0 * math.pi * HBAR * config.scattering_length / config.atom_mass
    return coupling * gaussian_overlap_integral(axial, config.transverse_width)


def derive_hubbard_params(config: LatticeConfig) -> HubbardParams:
    """Bündelt gamma, g beta und die Gittergeometrie für die Tiefe der Konfiguration."""
    recoil = recoil_energy(config.wavelength, config.atom_mass)
    gamma = tunneling(config.depth_u, recoil, config.plane_waves)
    g_beta = onsite_interaction(config)
    if gamma <= 0:
        raise DomainError(f"Abgeleitete Tunnelkopplung ist nicht positiv: {gamma}")
    k = wave_number(config.wavelength)
    params = HubbardParams(
        depth_u=config.depth_u,
        gamma=gamma,
        g_beta=g_beta,
        recoil=recoil,
        site_spacing=config.wavelength / 2.0,
        bragg_momentum=2.0 * HBAR * k,
        axial_width=axial_oscillator_length(config.depth_u, recoil, config.atom_mass),
        atom_mass=config.atom_mass,
    )
    logger.debug(
        "U = %.2f E_R: gamma/2pi = %.3f Hz, g_beta/2pi = %.4f Hz",
        config.depth_u,
        gamma / (2 * math.pi),
        g_beta / (2 * math.pi),
    )
    return params


# ---------- Zener ----------


def zener_warning(
    params: HubbardParams,
    gradient_e: float,
    fraction: float = ZENER_FRACTION,
    n_plane_waves: int = DEFAULT_PLANE_WAVES,
) -> bool:
    """
    Warnt, wenn die Energie pro Platz einen Bruchteil der Bandlücke am Zonenrand übersteigt.

    Die Warnung ist rein beratend; Zener-Verluste werden nicht modelliert.
    """
    if gradient_e <= 0:
        return False
    gap = band_gap(params.depth_u, n_plane_waves) * params.recoil
    flagged = gradient_e > fraction * gap
    if flagged:
        logger.warning(
            "Gradient %.1f Hz übersteigt %.0f%% der Bandlücke bei U = %.2f E_R (Zener-Tunneln möglich)",
            gradient_e / (2 * math.pi),
            fraction * 100,
            params.depth_u,
        )
    return flagged


# ---------- Tabellen ----------


def parameter_table(config: LatticeConfig, depths) -> list[dict[str, float | bool]]:
    """
    Parametertabelle über einen Tiefen-Sweep (eine Zeile pro Tiefe, Frequenzen in Hz).
    """
    rows: list[dict[str, float | bool]] = []
    for depth in depths:
        params = derive_hubbard_params(replace(config, depth_u=float(depth)))
        rows.append(
            {
                "depth_u": float(depth),
                "gamma_hz": params.gamma / (2.0 * math.pi),
                "g_beta_hz": params.g_beta / (2.0 * math.pi),
                "recoil_hz": params.recoil / (2.0 * math.pi),
                "bloch_period_ms": bloch_period(config.gradient_e) * 1e3 if config.gradient_e > 0 else math.inf,
                "zener_flag": zener_warning(params, config.gradient_e, config.zener_fraction, config.plane_waves),
            }
        )
    return rows
