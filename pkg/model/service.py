"""Service-Schicht: Simulations- und Auswerteketten für die Gitterexperimente."""

from __future__ import annotations

import logging
import math
from typing import Iterable, List, Sequence

import numpy as np

from factory.number_model_factory import NumberModelFactory
from model.analysis import (
    central_width,
    central_width_error,
    envelope_width,
    fit_coherence_time,
    fit_peaks,
    incoherent_fraction,
    incoherent_fraction_error,
    peak_weights,
)
from model.array_dynamics import (
    envelope_occupations,
    evolve,
    init_array,
    quasimomentum,
    rephase_trajectory,
    site_window,
)
from model.constants import (
    MIN_SCAN_POINTS,
    NUMBER_MODEL_COHERENT,
    NUMBER_MODEL_SQUEEZED,
    REPHASE_DEPHASED_FRACTION,
    SCAN_STATUS_OK,
    SCAN_STATUS_SATURATED,
    TWO_SITE_PERIODS,
    TWO_SITE_POINTS,
)
from model.entities import (
    ArrayState,
    BlochRun,
    CoherenceRun,
    DensityProfile,
    DepthScanRow,
    FitResult,
    GradientScanRow,
    HubbardParams,
    ImagingConfig,
    LatticeConfig,
    PeakModel,
    RephaseRun,
    SqueezingRow,
    WidthMeasurement,
)
from model.errors import ConvergenceError, DomainError, LatticeSimError
from model.lattice_params import bloch_period, derive_hubbard_params, parameter_table, zener_warning
from model.quantum_states import (
    array_coherence_time,
    coherence_time,
    josephson_frequency,
    make_fock_state,
    order_parameter,
    plasma_frequency,
    quantum_depletion,
    two_site_exact,
)
from model.run_config import RunConfig
from model.tof_imaging import (
    add_noise,
    add_shot_noise,
    kinematic_spacing,
    synthesize_profile,
    synthesize_shots,
)

logger = logging.getLogger(__name__)

SCAN_DEPTH_RANGE = (5.0, 24.0)
ORDER_PARAMETER_POINTS = 200


def snap_to_periods(times: np.ndarray, period: float) -> np.ndarray:
    """Rundet Zeiten auf ganze Bloch-Perioden (doppelte Werte entfallen)."""
    snapped = np.round(np.asarray(times, dtype=float) / period) * period
    return np.unique(snapped)


class ExperimentService:
    """
    Service für die Simulations- und Auswerteketten.

    Der Service koordiniert die Modellfunktionen zu vollständigen Läufen:
    - Leitet Gitterparameter aus der Laufkonfiguration ab
    - Zieht Ensembles, entwickelt sie und synthetisiert Flugzeitbilder
    - Passt Peaks und Dephasierungsgesetz an
    - Sammelt Fehler einzelner Scanpunkte, ohne den Scan abzubrechen

    Alle Zufallszahlen stammen aus dem Seed der Konfiguration; die Ergebnisse
    hängen nicht von der Anzahl der Worker ab.
    """

    def __init__(self, config: RunConfig) -> None:
        self._config = config

    @property
    def config(self) -> RunConfig:
        return self._config

    @property
    def config_hash(self) -> str:
        return self._config.config_hash()

    @property
    def seed(self) -> int:
        return self._config.ensemble.seed

    @property
    def central_occupation(self) -> float:
        """Besetzung des zentralen Platzes (aus total_atoms abgeleitet, falls gesetzt)."""
        return self._config.lattice_config().central_occupation

    # ---------- Parameter ----------

    def lattice(self, depth_u: float | None = None, gradient_hz: float | None = None) -> tuple[LatticeConfig, HubbardParams]:
        """LatticeConfig und abgeleitete Hubbard-Parameter."""
        config = self._config.lattice_config(depth_u, gradient_hz)
        return config, derive_hubbard_params(config)

    def parameter_table(self, depths: Iterable[float]) -> list[dict]:
        """Parametertabelle über die Tiefen."""
        return parameter_table(self._config.lattice_config(), list(depths))

    def _noise_seed(self, *keys: int) -> int:
        return int(np.random.SeedSequence([self.seed, *keys]).generate_state(1)[0])

    # ---------- Messung ----------

    def averaged_profile(
        self,
        state: ArrayState,
        imaging: ImagingConfig,
        params: HubbardParams,
        noise_seed: int,
    ) -> DensityProfile:
        """Mittel über Einzelschüsse, jeder mit eigenem Schussrauschen."""
        shots = add_shot_noise(synthesize_shots(state, imaging, params), imaging, noise_seed)
        return DensityProfile(
            positions=imaging.positions,
            density=shots.mean(axis=0),
            n_samples=state.n_samples,
            seed=self.seed,
            config_hash=self.config_hash,
        )

    def measure(
        self,
        profile: DensityProfile,
        imaging: ImagingConfig,
        params: HubbardParams,
        convention: str | None = None,
        initial: PeakModel | None = None,
    ) -> tuple[FitResult, WidthMeasurement]:
        """
        Peak-Fit und zentrale Breite eines Profils.

        Raises:
            ConvergenceError: wenn der Peak-Fit nicht konvergiert
        """
        analysis = self._config.analysis
        fit = fit_peaks(profile, kinematic_spacing(params, imaging.tof_time), analysis.max_iterations, initial)
        width = central_width(
            fit,
            params,
            imaging,
            convention or analysis.width_convention,
            analysis.resolution_limit,
            analysis.noise_floor,
        )
        return fit, width

    def measure_frames(
        self,
        states: Sequence[ArrayState],
        imaging: ImagingConfig,
        params: HubbardParams,
        noise_key: int,
        convention: str,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Breiten einer Bildfolge; jeder Fit startet zusätzlich vom letzten konvergierten Fit.

        Bilder ohne Konvergenz werden mit Warnung übersprungen (nan).

        Returns:
            (Breiten, 1-sigma-Fehler, Konvergenzmaske)
        """
        widths = np.full(len(states), math.nan)
        errors = np.full(len(states), math.nan)
        converged = np.zeros(len(states), dtype=bool)
        previous: PeakModel | None = None
        for slot, snapshot in enumerate(states):
            profile = self.averaged_profile(snapshot, imaging, params, self._noise_seed(noise_key, slot))
            try:
                fit, width = self.measure(profile, imaging, params, convention, previous)
            except ConvergenceError as exc:
                logger.warning("Bild %d (t = %.2f ms) übersprungen: %s", slot, snapshot.time * 1e3, exc)
                continue
            previous = fit.model
            widths[slot] = width.value
            errors[slot] = central_width_error(fit, width, convention)
            converged[slot] = True
            logger.debug(
                "t = %.2f ms: Breite %.4f, inkohärent %.3f", snapshot.time * 1e3, width.value, incoherent_fraction(fit)
            )
        return widths, errors, converged

    def fit_profile(self, profile: DensityProfile) -> tuple[FitResult, WidthMeasurement | None]:
        """
        Wertet ein (externes) Profil mit der Abbildungsgeometrie der Konfiguration aus.

        Ohne Konvergenz wird nur der Fit (bester Zwischenstand) zurückgegeben.
        """
        _, params = self.lattice()
        imaging = self._config.imaging_config(params)
        analysis = self._config.analysis
        fit = fit_peaks(profile, kinematic_spacing(params, imaging.tof_time), analysis.max_iterations)
        if not fit.converged:
            return fit, None
        width = central_width(
            fit, params, imaging, analysis.width_convention, analysis.resolution_limit, analysis.noise_floor
        )
        return fit, width

    # ---------- Kohärenzzeit ----------

    def theory_coherence_time(self, params: HubbardParams, number_model: str) -> float:
        """Geschlossene Kohärenzzeit 1 / (g_beta sigma_n) des zentralen Platzes."""
        model = NumberModelFactory.create_model(number_model, formula=self._config.atoms.squeezing_formula)
        stats = model.statistics(self.central_occupation, params.g_beta, params.gamma)
        return coherence_time(stats, params.g_beta)

    def array_theory_coherence_time(self, params: HubbardParams, number_model: str) -> float:
        """Kohärenzzeit des ganzen Arrays mit den Zahlbreiten aller besetzten Plätze."""
        lattice_cfg = self._config.lattice_config(params.depth_u)
        reach = int(math.ceil(5.0 * lattice_cfg.array_radius_sites))
        occupations = envelope_occupations(lattice_cfg, np.arange(-reach, reach + 1))
        occupations = occupations[occupations > 0]
        model = NumberModelFactory.create_model(number_model, formula=self._config.atoms.squeezing_formula)
        sigmas = model.site_sigmas(occupations, params.g_beta, params.gamma)
        return array_coherence_time(occupations, sigmas, params.g_beta)

    def order_parameter_curve(self, params: HubbardParams, number_model: str, t_end: float) -> tuple[np.ndarray, np.ndarray]:
        """Exakter Ordnungsparameter <a>(t) des zentralen Platzes von 0 bis t_end."""
        model = NumberModelFactory.create_model(number_model, formula=self._config.atoms.squeezing_formula)
        stats = model.statistics(self.central_occupation, params.g_beta, params.gamma)
        times = np.linspace(0.0, t_end, ORDER_PARAMETER_POINTS)
        return times, order_parameter(make_fock_state(stats), params.g_beta, times)

    def coherence_run(self, depth_u: float | None = None, number_model: str | None = None) -> CoherenceRun:
        """
        Vollständige Kette für eine Tiefe: Breiten w(t) und angepasstes tau_c.

        Die Haltezeiten reichen bis time_span_tau * tau(Theorie) und liegen
        auf ganzen Bloch-Perioden, damit die Peaks am Ruheort stehen. Bilder
        ohne konvergierten Peak-Fit gehen nicht in den w(t)-Fit ein.

        Raises:
            ConvergenceError: wenn weniger als 5 Bilder konvergieren
        """
        model = number_model or self._config.atoms.number_model
        lattice_cfg, params = self.lattice(depth_u)
        zener_warning(params, lattice_cfg.gradient_e, lattice_cfg.zener_fraction, lattice_cfg.plane_waves)
        imaging = self._config.imaging_config(params)
        analysis = self._config.analysis

        theory = self.theory_coherence_time(params, model)
        if not math.isfinite(theory):
            raise DomainError("Ohne Wechselwirkung gibt es keine Dephasierung")
        times = np.linspace(0.0, analysis.time_span_tau * theory, analysis.n_times)
        if lattice_cfg.gradient_e > 0:
            times = snap_to_periods(times, bloch_period(lattice_cfg.gradient_e))
        logger.info(
            "Kohärenzlauf U = %.2f E_R (%s): %d Zeitpunkte bis %.1f ms, %.0f Atome im Array",
            params.depth_u,
            model,
            times.size,
            times[-1] * 1e3,
            lattice_cfg.array_atoms,
        )

        half = site_window(lattice_cfg.array_radius_sites, params.gamma, lattice_cfg.gradient_e, float(times[-1]))
        state = init_array(lattice_cfg, params, self._config.ensemble_spec(model), half)
        trajectory = evolve(
            state,
            params,
            lattice_cfg.gradient_e,
            float(times[-1]),
            record_times=times,
            workers=self._config.ensemble.workers,
        )

        widths, errors, converged = self.measure_frames(
            trajectory.states, imaging, params, int(params.depth_u * 100), analysis.dephasing_convention
        )
        usable = int(np.count_nonzero(converged))
        if usable < MIN_SCAN_POINTS:
            raise ConvergenceError(
                f"Nur {usable} von {times.size} Bildern konvergiert; mindestens {MIN_SCAN_POINTS} nötig"
            )

        scan = fit_coherence_time(times[converged], widths[converged])
        if usable < times.size:
            scan.notes.append(f"{times.size - usable} Bilder ohne Konvergenz übersprungen")
        array_theory = self.array_theory_coherence_time(params, model)
        order_times, order_values = self.order_parameter_curve(params, model, float(times[-1]))
        logger.info(
            "tau_c = %.2f +- %.2f ms (Theorie %.2f ms, Array %.2f ms)",
            scan.tau_c * 1e3,
            scan.tau_c_err * 1e3,
            theory * 1e3,
            array_theory * 1e3,
        )
        return CoherenceRun(
            scan=scan,
            times=times,
            widths=widths,
            width_errors=errors,
            converged=converged,
            theory_tau=theory,
            array_theory_tau=array_theory,
            number_model=model,
            depth_u=params.depth_u,
            order_times=order_times,
            order_parameter=order_values,
        )

    def coherence_vs_depth(self, depths: Iterable[float]) -> List[DepthScanRow]:
        """
        Kohärenzzeit über die Gittertiefe für kohärente und gequetschte Statistik.

        Fehler einzelner Tiefen werden gesammelt und als Status vermerkt.
        """
        depths = [float(d) for d in depths]
        low, high = SCAN_DEPTH_RANGE
        outside = [d for d in depths if not low <= d <= high]
        if outside:
            raise DomainError(f"Tiefen außerhalb von [{low}, {high}] E_R: {outside}")

        rows: list[DepthScanRow] = []
        for depth in depths:
            results: dict[str, tuple[float, float]] = {}
            theory: dict[str, float] = {}
            failures: list[str] = []
            _, params = self.lattice(depth)
            for model in (NUMBER_MODEL_COHERENT, NUMBER_MODEL_SQUEEZED):
                theory[model] = self.theory_coherence_time(params, model)
                try:
                    run = self.coherence_run(depth, model)
                    results[model] = (run.scan.tau_c, run.scan.tau_c_err)
                except LatticeSimError as exc:
                    logger.warning("Tiefe %.2f E_R (%s) fehlgeschlagen: %s", depth, model, exc)
                    failures.append(f"{model}: {exc}")
                    results[model] = (math.nan, math.nan)
            rows.append(
                DepthScanRow(
                    depth_u=depth,
                    tau_coherent=results[NUMBER_MODEL_COHERENT][0],
                    tau_coherent_err=results[NUMBER_MODEL_COHERENT][1],
                    tau_squeezed=results[NUMBER_MODEL_SQUEEZED][0],
                    tau_squeezed_err=results[NUMBER_MODEL_SQUEEZED][1],
                    theory_coherent=theory[NUMBER_MODEL_COHERENT],
                    theory_squeezed=theory[NUMBER_MODEL_SQUEEZED],
                    status="; ".join(failures) if failures else SCAN_STATUS_OK,
                )
            )
        return rows

    # ---------- Squeezing ----------

    def squeezing_curve(self, depths: Iterable[float], number_model: str | None = None) -> List[SqueezingRow]:
        """
        Inkohärenter Anteil direkt nach dem Laden im Vergleich zur Bogoliubov-Depletion.

        Tiefen ohne konvergierten Fit erscheinen mit nan.
        """
        model_name = number_model or self._config.atoms.number_model
        model = NumberModelFactory.create_model(model_name, formula=self._config.atoms.squeezing_formula)
        occupation = self.central_occupation
        rows: list[SqueezingRow] = []
        for depth in depths:
            lattice_cfg, params = self.lattice(float(depth))
            imaging = self._config.imaging_config(params)
            state = init_array(lattice_cfg, params, self._config.ensemble_spec(model_name))
            profile = self.averaged_profile(state, imaging, params, self._noise_seed(int(float(depth) * 100)))
            try:
                fit, _ = self.measure(profile, imaging, params)
                fraction = incoherent_fraction(fit)
                fraction_err = incoherent_fraction_error(fit)
            except ConvergenceError as exc:
                logger.warning("U = %.2f E_R: Peak-Fit ohne Konvergenz (%s)", float(depth), exc)
                fraction = fraction_err = math.nan
            stats = model.statistics(occupation, params.g_beta, params.gamma)
            rows.append(
                SqueezingRow(
                    depth_u=float(depth),
                    incoherent_fraction=fraction,
                    fraction_err=fraction_err,
                    depletion=quantum_depletion(occupation, params.g_beta, params.gamma),
                    sigma_ratio=stats.squeezing_ratio,
                    below_noise_floor=fraction < self._config.analysis.noise_floor,
                )
            )
            logger.info("U = %.2f E_R: inkohärenter Anteil %.4f", float(depth), fraction)
        return rows

    # ---------- Gradient ----------

    def gradient_scan(self, gradients_hz: Iterable[float]) -> List[GradientScanRow]:
        """
        Breite nach fester Haltezeit scan_hold_ms über den Gradienten.

        Ist der zentrale Peak im Untergrund verschwunden oder breiter als die
        Auflösungsgrenze, steht die Breite auf dieser Grenze (Status "saturated").
        """
        hold = self._config.gradient.scan_hold_ms * 1e-3
        convention = self._config.analysis.width_convention
        rows: list[GradientScanRow] = []
        for index, gradient in enumerate(gradients_hz):
            try:
                lattice_cfg, params = self.lattice(gradient_hz=float(gradient))
                imaging = self._config.imaging_config(params)
                half = site_window(lattice_cfg.array_radius_sites, params.gamma, lattice_cfg.gradient_e, hold)
                state = init_array(lattice_cfg, params, self._config.ensemble_spec(), half)
                final = evolve(
                    state, params, lattice_cfg.gradient_e, hold, workers=self._config.ensemble.workers
                ).states[-1]
                profile = self.averaged_profile(final, imaging, params, self._noise_seed(7, index))
                fit, width = self.measure(profile, imaging, params, convention)
                rows.append(
                    GradientScanRow(
                        gradient_hz=float(gradient),
                        hold=hold,
                        width=width.value,
                        width_err=central_width_error(fit, width, convention),
                        incoherent_fraction=incoherent_fraction(fit),
                        status=SCAN_STATUS_SATURATED if width.saturated else SCAN_STATUS_OK,
                    )
                )
            except LatticeSimError as exc:
                logger.warning("Gradient %.1f Hz fehlgeschlagen: %s", float(gradient), exc)
                rows.append(GradientScanRow(float(gradient), hold, math.nan, math.nan, math.nan, status=str(exc)))
        return rows

    # ---------- Bloch ----------

    def bloch_run(self) -> BlochRun:
        """Bloch-Oszillation über bloch_periods Perioden mit frames_per_period Bildern je Periode."""
        times_cfg = self._config.times
        lattice_cfg, params = self.lattice()
        if lattice_cfg.gradient_e <= 0:
            raise DomainError("Bloch-Oszillation verlangt einen positiven Gradienten")
        zener_warning(params, lattice_cfg.gradient_e, lattice_cfg.zener_fraction, lattice_cfg.plane_waves)
        period = bloch_period(lattice_cfg.gradient_e)
        n_frames = times_cfg.bloch_periods * times_cfg.frames_per_period
        times = np.linspace(0.0, times_cfg.bloch_periods * period, n_frames + 1)

        imaging = self._config.imaging_config(params)
        half = site_window(lattice_cfg.array_radius_sites, params.gamma, lattice_cfg.gradient_e, float(times[-1]))
        state = init_array(lattice_cfg, params, self._config.ensemble_spec(), half)
        trajectory = evolve(
            state, params, lattice_cfg.gradient_e, float(times[-1]), record_times=times, workers=self._config.ensemble.workers
        )
        spacing = kinematic_spacing(params, imaging.tof_time)
        quasimomenta = []
        weights = np.empty((times.size, 3))
        profiles = []
        for slot, snapshot in enumerate(trajectory.states):
            quasimomenta.append(quasimomentum(snapshot))
            clean = synthesize_profile(snapshot, imaging, params, self.seed, self.config_hash)
            profile = add_noise(clean, imaging, self._noise_seed(11, slot))
            profiles.append(profile)
            weights[slot] = peak_weights(profile, spacing)
        logger.info("Bloch-Lauf: %d Bilder, T = %.3f ms", times.size, period * 1e3)
        return BlochRun(
            trajectory=trajectory,
            quasimomenta=quasimomenta,
            peak_weights=weights,
            profiles=profiles,
            bloch_period=period,
        )

    # ---------- Rephasierung ----------

    def rephase_run(
        self,
        t_bloch: float | None = None,
        rephase_times: np.ndarray | None = None,
        rephase_tunneling: bool = True,
    ) -> RephaseRun:
        """
        Dephasieren mit Gradient, danach Halten ohne Gradient; Breite über die Haltezeit.

        Während des Haltens tunneln die Atome mit rephase_coupling * gamma. Das
        Zwei-Platz-Paar mit 2 N Atomen und derselben Kopplung dient als Referenz
        für die Rephasierfrequenz. Ist die dephasierte Breite kleiner als 0.8 w_f,
        wird gewarnt und precondition_met=False gesetzt.
        """
        times_cfg = self._config.times
        lattice_cfg, params = self.lattice()
        imaging = self._config.imaging_config(params)
        t_bloch = times_cfg.t_bloch_ms * 1e-3 if t_bloch is None else float(t_bloch)
        if t_bloch < 0:
            raise DomainError("Dephasierzeit darf nicht negativ sein")
        if lattice_cfg.gradient_e > 0 and t_bloch >= bloch_period(lattice_cfg.gradient_e):
            t_bloch = float(snap_to_periods(np.array([t_bloch]), bloch_period(lattice_cfg.gradient_e))[0])
        if rephase_times is None:
            rephase_times = np.linspace(0.0, times_cfg.t_rephase_ms * 1e-3, self._config.analysis.rephase_points)
        rephase_times = np.asarray(rephase_times, dtype=float)
        coupling_factor = self._config.lattice.rephase_coupling
        hold_coupling = params.gamma * coupling_factor if rephase_tunneling else 0.0

        half = site_window(lattice_cfg.array_radius_sites, params.gamma, 0.0, float(rephase_times.max()))
        if lattice_cfg.gradient_e > 0:
            half += int(math.ceil(4.0 * params.gamma / lattice_cfg.gradient_e))
        state = init_array(lattice_cfg, params, self._config.ensemble_spec(), half)
        _, trajectory = rephase_trajectory(
            state,
            params,
            lattice_cfg.gradient_e,
            t_bloch,
            rephase_times,
            rephase_tunneling=rephase_tunneling,
            workers=self._config.ensemble.workers,
            hold_coupling=coupling_factor,
        )

        widths, _, _ = self.measure_frames(
            trajectory.states, imaging, params, 13, self._config.analysis.dephasing_convention
        )
        final_width = envelope_width(params)
        precondition = bool(widths[0] >= REPHASE_DEPHASED_FRACTION * final_width)
        if not precondition:
            logger.warning(
                "Dephasierte Breite %.3f liegt unter %.0f%% der Endbreite %.3f; Rephasierung kaum messbar",
                widths[0],
                REPHASE_DEPHASED_FRACTION * 100,
                final_width,
            )

        occupation = self.central_occupation
        n_pair = max(1, int(round(occupation)))
        omega_j = josephson_frequency(occupation, params.g_beta, params.gamma)
        two_site = two_site_exact(2 * n_pair, hold_coupling, params.g_beta, trajectory.times)
        two_site_frequency = math.nan
        if omega_j > 0 and hold_coupling > 0:
            dense = np.linspace(0.0, TWO_SITE_PERIODS * 2.0 * math.pi / omega_j, TWO_SITE_POINTS)
            two_site_frequency = two_site_exact(2 * n_pair, hold_coupling, params.g_beta, dense).frequency
        result = RephaseRun(
            times=trajectory.times,
            widths=widths,
            t_bloch=t_bloch,
            final_width=final_width,
            precondition_met=precondition,
            two_site=two_site,
            josephson_frequency=omega_j,
            plasma_frequency=plasma_frequency(2 * n_pair, hold_coupling, params.g_beta),
            two_site_frequency=two_site_frequency,
            hold_coupling=hold_coupling,
        )
        logger.info(
            "Rephasierung: minimale Breite bei %.2f ms (2 pi / omega_J = %.2f ms, Paar %.2f ms)",
            result.revival_time * 1e3,
            2.0 * math.pi / omega_j * 1e3 if omega_j > 0 else math.inf,
            2.0 * math.pi / two_site_frequency * 1e3 if two_site_frequency > 0 else math.inf,
        )
        return result
