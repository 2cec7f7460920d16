"""
Mean-Field-Dynamik des gekippten Gitterarrays mit Ensemble-Fluktuationen.

Jede Realisierung folgt der diskreten nichtlinearen Schrödinger-Gleichung

    i da_i/dt = -gamma (a_(i+1) + a_(i-1)) + (eps_i + V_i + g_beta N_tot |a_i|^2) a_i

mit eps_i = E i und einem statischen Fallenausgleich V_i. Die statischen
Platzenergien werden im Wechselwirkungsbild exakt behandelt; integriert
wird mit festem RK4-Schritt. Zahl- und Phasenrauschen der Anfangszustände
stammen aus Ensemble-Stichproben (eine SeedSequence pro Realisierung).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.stats import norm

from factory.number_model_factory import NumberModelFactory
from model.constants import (
    ENSEMBLE_CHUNK,
    ENVELOPE_FLAT,
    MAX_SITES,
    NORM_DRIFT_LIMIT,
    STEP_SAFETY,
    TRUNCATION_BIAS_LIMIT,
    UNDEFINED_PHASE_LENGTH,
)
from model.entities import (
    ArrayState,
    EnsembleSpec,
    HubbardParams,
    LatticeConfig,
    QuasimomentumResult,
    Trajectory,
)
from model.errors import ConfigurationError, DomainError, StepSizeError

logger = logging.getLogger(__name__)


# ---------- Gittergeometrie ----------


def site_window(radius: float, gamma: float, gradient_e: float, duration: float = 0.0) -> int:
    """
    Halbe Fensterbreite (in Plätzen) für ein Array mit 1/e-Radius radius.

    Das Fenster umfasst mindestens 4 R Plätze plus die Bloch-Atmungsamplitude
    4 gamma / E bzw. die ballistische Ausbreitung 2 gamma t ohne Gradient.
    """
    core = int(math.ceil(2.0 * radius))
    spread = 2.0 * gamma * max(duration, 0.0)
    if gradient_e > 0:
        spread = min(spread, 4.0 * gamma / gradient_e)
    half = core + int(math.ceil(spread)) + 2
    limit = (MAX_SITES - 1) // 2
    if half > limit:
        logger.warning("Platzfenster %d auf %d begrenzt", half, limit)
        half = limit
    return half


def envelope_occupations(config: LatticeConfig, site_index: np.ndarray) -> np.ndarray:
    """Mittlere Besetzung N_i: Gauß N exp(-i^2 / R^2) oder flach N für |i| <= R."""
    radius = config.array_radius_sites
    if config.envelope == ENVELOPE_FLAT:
        return np.where(np.abs(site_index) <= radius, config.central_occupation, 0.0)
    return config.central_occupation * np.exp(-(site_index.astype(float) ** 2) / radius ** 2)


def _truncation_bias(occupations: np.ndarray, sigmas: np.ndarray) -> float:
    """Relativer Fehler der Gesamtatomzahl durch Abschneiden der Normalverteilung bei 0."""
    mask = sigmas > 0
    mu = occupations[mask]
    s = sigmas[mask]
    bias = s * norm.pdf(mu / s) - mu * norm.cdf(-mu / s)
    return float(np.sum(bias) / np.sum(occupations))


# ---------- Ensemble ----------


def init_array(
    config: LatticeConfig,
    params: HubbardParams,
    spec: EnsembleSpec,
    half_width: int | None = None,
) -> ArrayState:
    """
    Zieht die Anfangszustände aller Realisierungen.

    Pro Platz: n_i ~ Normal(N_i, sigma_i^2) bei 0 abgeschnitten, theta_i ~ Normal(0, sigma_theta^2)
    mit sigma_theta = 1 / (2 sigma_i), sofern spec.phase_sigma nicht gesetzt ist.
    Jede Realisierung erhält einen eigenen Generator aus SeedSequence(master_seed).spawn(),
    damit das Ergebnis nicht von der Ausführungsreihenfolge abhängt.

    Raises:
        ConfigurationError: wenn das Abschneiden die Atomzahl um mehr als 1% verzerrt
    """
    if half_width is None:
        half_width = site_window(config.array_radius_sites, params.gamma, config.gradient_e)
    site_index = np.arange(-half_width, half_width + 1)
    occupations = envelope_occupations(config, site_index)

    model = NumberModelFactory.create_model(spec.number_sigma_model, formula=spec.squeezing_formula)
    sigmas = np.where(occupations > 0, model.site_sigmas(occupations, params.g_beta, params.gamma), 0.0)

    bias = _truncation_bias(occupations, sigmas)
    if bias > TRUNCATION_BIAS_LIMIT:
        raise ConfigurationError(
            f"Einhüllende zu schmal: Abschneiden bei n = 0 verzerrt die Atomzahl um {bias:.1%}"
        )

    occupied = occupations > 0
    if spec.phase_sigma is not None:
        phase_sigmas = np.where(occupied, spec.phase_sigma, 0.0)
    else:
        # sigma = 0 (Fock) bedeutet völlig unbestimmte Phase
        safe = np.where(sigmas > 0, sigmas, 1.0)
        phase_sigmas = np.where(sigmas > 0, 0.5 / safe, math.pi)
        phase_sigmas = np.where(occupied, phase_sigmas, 0.0)

    children = np.random.SeedSequence(spec.master_seed).spawn(spec.n_samples)
    numbers = np.empty((spec.n_samples, site_index.size))
    phases = np.empty_like(numbers)
    for row, child in enumerate(children):
        rng = np.random.default_rng(child)
        numbers[row] = np.maximum(rng.normal(occupations, sigmas), 0.0)
        phases[row] = rng.normal(0.0, phase_sigmas)

    totals = numbers.sum(axis=1)
    if np.any(totals <= 0):
        raise DomainError("Realisierung ohne Atome gezogen")
    amplitudes = np.sqrt(numbers / totals[:, None]) * np.exp(1j * phases)

    confinement = np.zeros(site_index.size)
    if config.balance_confinement:
        confinement = params.g_beta * (occupations.max() - occupations)

    logger.debug(
        "Ensemble: %d Realisierungen, %d Plätze, Modell %s, Abschneidefehler %.2e",
        spec.n_samples,
        site_index.size,
        model.describe(),
        bias,
    )
    return ArrayState(
        amplitudes=amplitudes,
        atom_numbers=totals,
        occupations=occupations,
        site_index=site_index,
        site_energies=config.gradient_e * site_index.astype(float),
        confinement=confinement,
        time=0.0,
    )


# ---------- Zeitentwicklung ----------


def stable_step(state: ArrayState, params: HubbardParams, gradient_e: float) -> float:
    """Stabilitätsgrenze dt = 1 / (50 max(gamma, E, g_beta n_max)); inf ohne Dynamik."""
    n_max = float(state.populations.max())
    rate = max(params.gamma, abs(gradient_e), params.g_beta * n_max)
    return math.inf if rate == 0 else 1.0 / (STEP_SAFETY * rate)


def _rhs(b: np.ndarray, hop_phase: np.ndarray, gamma: float, nonlinear: np.ndarray) -> np.ndarray:
    coupling = np.zeros_like(b)
    coupling[:, :-1] += b[:, 1:] * hop_phase
    coupling[:, 1:] += b[:, :-1] * np.conj(hop_phase)
    return -1j * (nonlinear[:, None] * (b.real ** 2 + b.imag ** 2) * b - gamma * coupling)


def _integrate_chunk(
    b0: np.ndarray,
    nonlinear: np.ndarray,
    detuning: np.ndarray,
    gamma: float,
    record: np.ndarray,
    dt_max: float,
) -> np.ndarray:
    """RK4 im Wechselwirkungsbild; gibt b zu allen Aufzeichnungszeiten zurück."""
    out = np.empty((record.size,) + b0.shape, dtype=complex)
    b = b0.copy()
    t_prev = 0.0
    for slot, t_next in enumerate(record):
        span = t_next - t_prev
        if span > 0:
            n_steps = 1 if math.isinf(dt_max) else max(1, int(math.ceil(span / dt_max - 1e-9)))
            h = span / n_steps
            for step in range(n_steps):
                tau = t_prev + step * h
                p0 = np.exp(-1j * detuning * tau)
                p_half = np.exp(-1j * detuning * (tau + 0.5 * h))
                p1 = np.exp(-1j * detuning * (tau + h))
                k1 = _rhs(b, p0, gamma, nonlinear)
                k2 = _rhs(b + 0.5 * h * k1, p_half, gamma, nonlinear)
                k3 = _rhs(b + 0.5 * h * k2, p_half, gamma, nonlinear)
                k4 = _rhs(b + h * k3, p1, gamma, nonlinear)
                b = b + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[slot] = b
        t_prev = t_next
    return out


def evolve(
    state: ArrayState,
    params: HubbardParams,
    gradient_e: float,
    t_end: float,
    dt: float | None = None,
    record_times=None,
    workers: int = 1,
) -> Trajectory:
    """
    Integriert alle Realisierungen bis t_end (relativ zu state.time).

    Args:
        state: Anfangszustand (Ensemble)
        params: Hubbard-Parameter (gamma, g_beta)
        gradient_e: Energiedifferenz benachbarter Plätze während der Entwicklung
        t_end: Dauer in s
        dt: Schrittweite; None = Stabilitätsgrenze
        record_times: Aufzeichnungszeitpunkte in [0, t_end]; None = nur t_end
        workers: Anzahl paralleler Threads (Ergebnis ist davon unabhängig)

    Raises:
        StepSizeError: wenn dt die Stabilitätsgrenze überschreitet oder die Norm um mehr als 1e-6 driftet
    """
    if t_end < 0:
        raise DomainError(f"Dauer darf nicht negativ sein, erhalten: {t_end}")
    dt_max = stable_step(state, params, gradient_e)
    if dt is not None:
        if dt <= 0 or dt > dt_max * (1.0 + 1e-12):
            raise StepSizeError(f"Schrittweite {dt:.3e} s überschreitet die Stabilitätsgrenze {dt_max:.3e} s")
        dt_max = dt

    record = np.array([t_end] if record_times is None else sorted(record_times), dtype=float)
    if record.size == 0 or record[0] < 0 or record[-1] > t_end * (1.0 + 1e-12):
        raise DomainError("Aufzeichnungszeiten müssen in [0, t_end] liegen")

    site_energies = gradient_e * state.site_index.astype(float)
    levels = site_energies + state.confinement
    detuning = np.diff(levels)
    nonlinear = params.g_beta * state.atom_numbers

    chunks = [slice(start, min(start + ENSEMBLE_CHUNK, state.n_samples)) for start in range(0, state.n_samples, ENSEMBLE_CHUNK)]

    def run(chunk: slice) -> np.ndarray:
        return _integrate_chunk(state.amplitudes[chunk], nonlinear[chunk], detuning, params.gamma, record, dt_max)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(run, chunks))
    recorded = np.concatenate(parts, axis=1)

    norms = np.sum(np.abs(recorded) ** 2, axis=2)
    norm_drift = float(np.max(np.abs(norms - 1.0)))
    logger.debug("Entwicklung über %.3f ms: Normdrift %.2e", t_end * 1e3, norm_drift)
    if norm_drift > NORM_DRIFT_LIMIT:
        raise StepSizeError(f"Normdrift {norm_drift:.2e} überschreitet {NORM_DRIFT_LIMIT:.0e}")

    states = [
        replace(
            state,
            amplitudes=recorded[slot] * np.exp(-1j * levels * t),
            site_energies=site_energies,
            time=state.time + t,
        )
        for slot, t in enumerate(record)
    ]
    return Trajectory(times=record, states=states, norm_drift=norm_drift)


# ---------- Beobachtungsgrößen ----------


def quasimomentum(state: ArrayState) -> QuasimomentumResult:
    """
    Quasiimpuls als zirkulärer Mittelwert von arg(a_(i+1) a_i^*) über Plätze und Realisierungen.

    Rückgabe als Bruchteil der Brillouin-Zone in (-1/2, 1/2]; bei
    Resultantenlänge < 1e-3 ist die Phase undefiniert (defined=False).
    """
    fields = state.fields
    occupied = np.count_nonzero(np.abs(fields).sum(axis=0) > 0)
    if occupied < 2:
        raise DomainError("Quasiimpuls verlangt mindestens zwei besetzte Plätze")
    products = fields[:, 1:] * np.conj(fields[:, :-1])
    total = products.sum()
    weight = np.abs(products).sum()
    resultant = float(abs(total) / weight) if weight > 0 else 0.0
    fraction = float(np.angle(total) / (2.0 * math.pi))
    if fraction <= -0.5:
        fraction += 1.0
    defined = resultant >= UNDEFINED_PHASE_LENGTH
    if not defined:
        logger.debug("Phase undefiniert (Resultante %.2e)", resultant)
    return QuasimomentumResult(fraction=fraction, resultant=resultant, defined=defined)


def phase_coherence(state: ArrayState) -> float:
    """Ensemble-Kohärenz benachbarter Plätze |sum b_(i+1) b_i^*| / sum |b_(i+1)| |b_i|."""
    return quasimomentum(state).resultant


def mean_field_energy(state: ArrayState, params: HubbardParams) -> np.ndarray:
    """Energie sum (eps_i + V_i + g_beta N_tot |a_i|^2 / 2) |a_i|^2 je Realisierung (ohne Tunnelterm)."""
    density = np.abs(state.amplitudes) ** 2
    levels = state.site_energies + state.confinement
    return density @ levels + 0.5 * params.g_beta * state.atom_numbers * np.sum(density ** 2, axis=1)


def rephase_trajectory(
    state: ArrayState,
    params: HubbardParams,
    gradient_e: float,
    t_bloch: float,
    rephase_times,
    rephase_tunneling: bool = True,
    workers: int = 1,
    hold_coupling: float = 1.0,
) -> tuple[ArrayState, Trajectory]:
    """
    Dephasiert mit Gradient über t_bloch und hält danach ohne Gradient.

    Während des Haltens tunneln die Atome mit hold_coupling * gamma
    (0 ohne rephase_tunneling).

    Returns:
        (dephasierter Zustand, Trajektorie über die Rephasierzeiten)
    """
    if hold_coupling < 0:
        raise DomainError(f"Kopplungsfaktor darf nicht negativ sein, erhalten: {hold_coupling}")
    dephased = evolve(state, params, gradient_e, t_bloch, workers=workers).states[-1]
    hold_params = replace(params, gamma=params.gamma * hold_coupling if rephase_tunneling else 0.0)
    times = np.asarray(rephase_times, dtype=float)
    if times.size == 0:
        raise DomainError("Rephasierzeiten dürfen nicht leer sein")
    trajectory = evolve(
        dephased,
        hold_params,
        0.0,
        float(times.max()),
        record_times=times,
        workers=workers,
    )
    return dephased, trajectory
