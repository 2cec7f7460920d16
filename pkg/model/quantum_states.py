"""
Zahlstatistik und Quantendynamik einzelner Gitterplätze.

Enthält die Squeezing-Breite, Fock-Darstellungen kohärenter und gequetschter
Zustände, den exakten Kollaps des Ordnungsparameters, die Bogoliubov-Depletion
und das exakt diagonalisierte Zwei-Platz-Modell.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln
from scipy.stats import norm, poisson

from model.constants import (
    DEFAULT_DEPLETION_SITES,
    DEFAULT_SQUEEZING_FORMULA,
    FOCK_SIGMA_MIN,
    NUMBER_MODEL_COHERENT,
    NUMBER_MODEL_FOCK,
    SQUEEZING_FORMULAS,
    TRUNCATION_SIGMAS,
    TWO_SITE_MAX_ATOMS,
)
from model.entities import FockState, NumberStatistics, TwoSiteResult
from model.errors import DomainError, SizeError, TruncationError

logger = logging.getLogger(__name__)

LOST_NORM_LIMIT = 1e-8


# ---------- Zahlbreiten ----------


def squeezed_sigma(
    n: float,
    g_beta: float,
    gamma: float,
    formula: str = DEFAULT_SQUEEZING_FORMULA,
) -> float:
    """
    Gequetschte Zahlbreite sigma_S(N) = (N^2 / (1 + c N g_beta / gamma))^(1/4).

    Args:
        n: mittlere Besetzung (>= 1)
        g_beta: Wechselwirkung in rad/s
        gamma: Tunnelkopplung in rad/s
        formula: "half" (c = 1/2, Standard) oder "full" (c = 1)

    Raises:
        DomainError: bei gamma <= 0, negativer Wechselwirkung oder n < 1
    """
    if gamma <= 0:
        raise DomainError("gamma muss positiv sein; für gamma = 0 den Fock-Limes verwenden")
    if n < 1 or g_beta < 0:
        raise DomainError(f"Ungültige Eingabe: n = {n}, g_beta = {g_beta}")
    if formula not in SQUEEZING_FORMULAS:
        raise DomainError(f"Unbekannte Squeezing-Formel: '{formula}'")
    return _squeezed_sigma_unchecked(n, g_beta, gamma, SQUEEZING_FORMULAS[formula])


def _squeezed_sigma_unchecked(n, g_beta: float, gamma: float, factor: float):
    # auch für Arrays und Besetzungen < 1 (Randplätze des Arrays)
    return (np.square(n) / (1.0 + factor * n * g_beta / gamma)) ** 0.25


def coherence_time(stats: NumberStatistics, g_beta: float) -> float:
    """
    Kohärenzzeit tau = 1 / (g_beta sigma_n) in s.

    Für g_beta = 0 wird math.inf zurückgegeben.
    """
    if g_beta < 0:
        raise DomainError(f"g_beta darf nicht negativ sein, erhalten: {g_beta}")
    if stats.sigma_n <= 0:
        raise DomainError("Kohärenzzeit verlangt eine positive Zahlbreite")
    if g_beta == 0:
        return math.inf
    return 1.0 / (g_beta * stats.sigma_n)


def array_coherence_time(occupations, sigmas, g_beta: float) -> float:
    """
    Kohärenzzeit eines ganzen Arrays: 1 / (g_beta sqrt(sum N_i sigma_i^2 / sum N_i)).

    Jeder Platz trägt mit seiner Atomzahl zum kohärenten Anteil bei; für ein
    Array aus gleichen Plätzen folgt die Einzelplatz-Formel.
    """
    n = np.asarray(occupations, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if n.shape != s.shape or n.size == 0 or np.any(n < 0) or np.any(s < 0):
        raise DomainError("Besetzungen und Zahlbreiten brauchen gleiche Form und dürfen nicht negativ sein")
    if g_beta < 0 or not n.sum() > 0:
        raise DomainError("Array-Kohärenzzeit verlangt Atome und nichtnegatives g_beta")
    spread = math.sqrt(float(np.sum(n * s ** 2) / n.sum()))
    if g_beta == 0:
        return math.inf
    if spread == 0:
        raise DomainError("Array-Kohärenzzeit verlangt eine positive Zahlbreite")
    return 1.0 / (g_beta * spread)


# ---------- Fock-Zustände ----------


def make_fock_state(stats: NumberStatistics, truncation_sigmas: float = TRUNCATION_SIGMAS) -> FockState:
    """
    Baut die Fock-Darstellung eines kohärenten oder gequetschten Zustands.

    Kohärent: exakte Poisson-Amplituden mit reeller Amplitude alpha = sqrt(N).
    Gequetscht: reelle Amplituden c_n ~ exp(-(n - N)^2 / (4 sigma^2)).
    Für sigma < 1e-3 (oder Fock-Regime) entsteht ein einzelner Fock-Zustand.

    Raises:
        DomainError: bei truncation_sigmas < 6
        TruncationError: wenn das Abschneiden bei n = 0 mehr als 1e-8 Norm kostet
    """
    if truncation_sigmas < 6:
        raise DomainError(f"Fenster muss mindestens 6 sigma breit sein, erhalten: {truncation_sigmas}")

    mean_n = stats.mean_n
    sigma = stats.sigma_n
    if stats.regime == NUMBER_MODEL_FOCK or sigma < FOCK_SIGMA_MIN:
        return FockState(amplitudes=np.array([1.0 + 0j]), n_min=int(round(mean_n)), mean_n=mean_n)

    half = int(math.ceil(truncation_sigmas * sigma)) + 1
    n_lo = max(int(math.floor(mean_n)) - half, 0)
    n_hi = int(math.ceil(mean_n)) + half
    n = np.arange(n_lo, n_hi + 1)

    if stats.regime == NUMBER_MODEL_COHERENT:
        log_p = n * math.log(mean_n) - mean_n - gammaln(n + 1.0)
        probabilities = np.exp(log_p)
        lost = float(poisson.cdf(n_lo - 1, mean_n) + poisson.sf(n_hi, mean_n))
        alpha: complex | None = complex(math.sqrt(mean_n))
    else:
        probabilities = np.exp(-((n - mean_n) ** 2) / (2.0 * sigma ** 2))
        lost = float(norm.cdf((-0.5 - mean_n) / sigma))
        alpha = None
        if lost > LOST_NORM_LIMIT:
            raise TruncationError(
                f"Abschneiden bei n = 0 verliert {lost:.2e} der Norm (N = {mean_n}, sigma = {sigma})"
            )

    amplitudes = np.sqrt(probabilities / probabilities.sum()).astype(complex)
    return FockState(amplitudes=amplitudes, n_min=n_lo, mean_n=mean_n, lost_norm=lost, alpha=alpha)


def order_parameter(state: FockState, g_beta: float, t):
    """
    Exakter Ordnungsparameter <a>(t) = sum_n c_n^* c_(n+1) sqrt(n+1) exp(-i g_beta n t).

    t darf Skalar oder Array sein; das Ergebnis hat die gleiche Form.
    """
    norm_sq = float(np.sum(state.probabilities))
    if abs(norm_sq - 1.0) > 1e-10:
        raise DomainError(f"Zustand ist nicht normiert (Norm^2 = {norm_sq})")
    c = state.amplitudes
    n = state.n_values[:-1].astype(float)
    weights = np.conj(c[:-1]) * c[1:] * np.sqrt(n + 1.0)
    times = np.asarray(t, dtype=float)
    phases = np.exp(-1j * g_beta * np.multiply.outer(times, n))
    return phases @ weights


def collapse_envelope(n: float, g_beta: float, t):
    """Geschlossene Kollapsform sqrt(N) exp(-N g_beta^2 t^2 / 2)."""
    times = np.asarray(t, dtype=float)
    return math.sqrt(n) * np.exp(-n * g_beta ** 2 * times ** 2 / 2.0)


# ---------- Depletion ----------


def quantum_depletion(
    n: float,
    g_beta: float,
    gamma: float,
    n_sites: int = DEFAULT_DEPLETION_SITES,
) -> float:
    """
    Bogoliubov-Depletion eines homogenen Arrays mit periodischem Rand.

    depletion = (1 / N_tot) sum_(q != 0) v_q^2 mit
    eps_q = 4 gamma sin^2(q d / 2), E_q = sqrt(eps_q (eps_q + 2 g_beta N)),
    v_q^2 = ((eps_q + g_beta N) / E_q - 1) / 2 und N_tot = N n_sites.
    """
    if n_sites < 4:
        raise DomainError(f"Mindestens 4 Plätze nötig, erhalten: {n_sites}")
    if gamma <= 0 or g_beta < 0 or n <= 0:
        raise DomainError("Depletion verlangt gamma > 0, g_beta >= 0 und N > 0")
    k = np.arange(1, n_sites)
    eps = 4.0 * gamma * np.sin(np.pi * k / n_sites) ** 2
    interaction = g_beta * n
    energy = np.sqrt(eps * (eps + 2.0 * interaction))
    v_sq = ((eps + interaction) / energy - 1.0) / 2.0
    return float(np.sum(v_sq) / (n * n_sites))


# ---------- Zwei-Platz-Modell ----------


def josephson_frequency(n: float, g_beta: float, gamma: float) -> float:
    """Verallgemeinerte Josephson-Frequenz sqrt(N g_beta gamma) in rad/s."""
    return math.sqrt(n * g_beta * gamma)


def plasma_frequency(n_total: float, gamma: float, g_beta: float) -> float:
    """Kleinschwingungsfrequenz des Zwei-Platz-Modells sqrt(2 gamma (2 gamma + g_beta N_tot))."""
    return math.sqrt(2.0 * gamma * (2.0 * gamma + g_beta * n_total))


def oscillation_frequency(times: np.ndarray, signal: np.ndarray) -> float:
    """
    Dominante Kreisfrequenz eines äquidistant abgetasteten Signals.

    Hann-Fenster, achtfaches Zero-Padding und parabolische Interpolation
    des Spektralmaximums. Ohne Wechselanteil wird nan zurückgegeben.
    """
    if times.size < 8:
        raise DomainError("Mindestens 8 Zeitpunkte für die Spektralanalyse nötig")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise DomainError("Spektralanalyse verlangt ein äquidistantes Zeitgitter")
    centered = signal - signal.mean()
    if not np.any(np.abs(centered) > 1e-14 * max(1.0, np.abs(signal).max())):
        return math.nan
    windowed = centered * np.hanning(centered.size)
    n_fft = 8 * centered.size
    spectrum = np.abs(np.fft.rfft(windowed, n=n_fft))
    peak = int(np.argmax(spectrum[1:])) + 1
    offset = 0.0
    if 1 <= peak < spectrum.size - 1:
        left, mid, right = spectrum[peak - 1], spectrum[peak], spectrum[peak + 1]
        denom = left - 2.0 * mid + right
        if denom != 0:
            offset = 0.5 * (left - right) / denom
    frequency = (peak + offset) / (n_fft * steps.mean())
    return 2.0 * math.pi * frequency


def two_site_exact(
    n_total: int,
    gamma: float,
    g_beta: float,
    t_grid,
    phase_offset: float = 0.1,
) -> TwoSiteResult:
    """
    Exakte Dynamik zweier gekoppelter Plätze in der Basis |n, N - n>.

    H = -gamma (a1^dag a2 + h.c.) + (g_beta / 2) sum_j n_j (n_j - 1).
    Startzustand ist ein Zwei-Moden-Phasenzustand (Binomialamplituden) mit
    relativer Phase phase_offset; die Imbalance schwingt dann mit der
    Kleinschwingungsfrequenz, die über das Spektralmaximum bestimmt wird.

    Returns:
        TwoSiteResult mit <a1^dag a2>(t), Imbalance <n1 - n2> / 2 und Frequenz

    Raises:
        SizeError: wenn n_total > 2000
    """
    if n_total > TWO_SITE_MAX_ATOMS:
        raise SizeError(f"Zwei-Platz-Modell ist auf {TWO_SITE_MAX_ATOMS} Atome begrenzt, erhalten: {n_total}")
    if n_total < 1 or gamma < 0 or g_beta < 0:
        raise DomainError("Zwei-Platz-Modell verlangt n_total >= 1 und nichtnegative Kopplungen")
    times = np.asarray(t_grid, dtype=float)

    n = np.arange(n_total + 1, dtype=float)
    diagonal = 0.5 * g_beta * (n * (n - 1.0) + (n_total - n) * (n_total - n - 1.0))
    hopping = np.sqrt((n[:-1] + 1.0) * (n_total - n[:-1]))
    off_diagonal = -gamma * hopping
    energies, vectors = eigh_tridiagonal(diagonal, off_diagonal)

    log_binomial = gammaln(n_total + 1.0) - gammaln(n + 1.0) - gammaln(n_total - n + 1.0)
    psi0 = np.exp(0.5 * (log_binomial - n_total * math.log(2.0)) + 1j * phase_offset * n)
    psi0 /= np.linalg.norm(psi0)

    projections = vectors.T @ psi0
    evolved = (np.exp(-1j * np.multiply.outer(times, energies)) * projections) @ vectors.T

    coherence = np.sum(np.conj(evolved[:, 1:]) * evolved[:, :-1] * hopping, axis=1)
    imbalance = np.abs(evolved) ** 2 @ (n - n_total / 2.0)

    frequency = oscillation_frequency(times, imbalance) if times.size >= 8 else math.nan
    logger.debug("Zwei-Platz-Modell N = %d: Frequenz %.2f rad/s", n_total, frequency)
    return TwoSiteResult(
        times=times,
        coherence=coherence,
        imbalance=imbalance,
        frequency=frequency,
        n_total=n_total,
    )
