"""Domänenobjekte für den Gitter-Simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from model.constants import (
    DEFAULT_ARRAY_RADIUS,
    DEFAULT_BLUR,
    DEFAULT_CENTRAL_OCCUPATION,
    DEFAULT_DEPTH_U,
    DEFAULT_GRADIENT_HZ,
    DEFAULT_PIXEL_SIZE,
    DEFAULT_PIXELS,
    DEFAULT_PLANE_WAVES,
    DEFAULT_SHOT_TO_SHOT_SIGMA,
    DEFAULT_SQUEEZING_FORMULA,
    DEFAULT_TOF,
    DEFAULT_TRANSVERSE_WIDTH,
    DEFAULT_WAVELENGTH,
    ENSEMBLE_MODELS,
    ENVELOPE_FLAT,
    ENVELOPE_GAUSSIAN,
    ENVELOPES,
    NUMBER_MODEL_COHERENT,
    NUMBER_MODEL_FOCK,
    NUMBER_MODELS,
    RB87_MASS,
    RB87_SCATTERING_LENGTH,
    SQUEEZING_FORMULAS,
    ZENER_FRACTION,
)
from model.errors import DomainError

# ---------- Gitter ----------


@dataclass(frozen=True)
class LatticeConfig:
    """
    Experimentelle Stellgrößen eines Gitterlaufs.

    Immutable Dataclass (frozen=True): Varianten (andere Tiefe, anderer
    Gradient) entstehen über dataclasses.replace().

    Attribute:
        depth_u: Gittertiefe U in Einheiten der Rückstoßenergie E_R
        wavelength: Gitterwellenlänge in m (Periode = wavelength / 2)
        atom_mass: Atommasse in kg
        scattering_length: s-Wellen-Streulänge in m
        total_atoms: Atomzahl im Array; 0 = aus central_occupation abgeleitet, sonst
            wird central_occupation so gesetzt, dass die Einhüllende total_atoms Atome trägt
        central_occupation: mittlere Besetzung N des zentralen Platzes
        array_radius_sites: 1/e-Radius R der Besetzungsverteilung (Plätze)
        gradient_e: Energiedifferenz benachbarter Plätze E/hbar in rad/s
        transverse_width: transversale Oszillatorlänge der Wannier-Funktion in m
        shot_to_shot_sigma: relative Atomzahlschwankung zwischen Schüssen
        plane_waves: Anzahl ebener Wellen der Bandstrukturrechnung
        envelope: Form der Besetzungsverteilung ("gaussian" oder "flat")
        balance_confinement: Falle gleicht das mittlere Wechselwirkungsprofil aus
        zener_fraction: Anteil der Bandlücke, ab dem vor Zener-Tunneln gewarnt wird
    """

    depth_u: float = DEFAULT_DEPTH_U
    wavelength: float = DEFAULT_WAVELENGTH
    atom_mass: float = RB87_MASS
    scattering_length: float = RB87_SCATTERING_LENGTH
    total_atoms: int = 0
    central_occupation: float = DEFAULT_CENTRAL_OCCUPATION
    array_radius_sites: float = DEFAULT_ARRAY_RADIUS
    gradient_e: float = 2.0 * math.pi * DEFAULT_GRADIENT_HZ
    transverse_width: float = DEFAULT_TRANSVERSE_WIDTH
    shot_to_shot_sigma: float = DEFAULT_SHOT_TO_SHOT_SIGMA
    plane_waves: int = DEFAULT_PLANE_WAVES
    envelope: str = ENVELOPE_GAUSSIAN
    balance_confinement: bool = True
    zener_fraction: float = ZENER_FRACTION

    def __post_init__(self) -> None:
        if self.depth_u <= 0:
            raise DomainError(f"Gittertiefe muss positiv sein, erhalten: {self.depth_u}")
        if self.wavelength <= 0 or self.atom_mass <= 0:
            raise DomainError("Wellenlänge und Atommasse müssen positiv sein")
        if self.scattering_length < 0:
            raise DomainError("Streulänge darf nicht negativ sein")
        if self.array_radius_sites <= 0:
            raise DomainError("Arrayradius muss positiv sein")
        if self.envelope not in ENVELOPES:
            raise DomainError(f"Unbekannte Einhüllende: '{self.envelope}'")
        if self.total_atoms < 0:
            raise DomainError(f"Atomzahl darf nicht negativ sein, erhalten: {self.total_atoms}")
        if self.total_atoms > 0:
            object.__setattr__(self, "central_occupation", self.total_atoms / self.envelope_sum)
        if self.central_occupation < 1:
            raise DomainError(
                f"Zentrale Besetzung muss mindestens 1 sein, erhalten: {self.central_occupation}"
            )
        if self.gradient_e < 0:
            raise DomainError("Gradient darf nicht negativ sein")
        if not 0 <= self.shot_to_shot_sigma < 1:
            raise DomainError("Schuss-zu-Schuss-Schwankung muss in [0, 1) liegen")

    @property
    def envelope_sum(self) -> float:
        """Summe der Einhüllenden pro Einheit zentraler Besetzung."""
        radius = self.array_radius_sites
        if self.envelope == ENVELOPE_FLAT:
            return float(2 * math.floor(radius) + 1)
        sites = np.arange(-math.ceil(5.0 * radius), math.ceil(5.0 * radius) + 1)
        return float(np.sum(np.exp(-(sites ** 2) / radius ** 2)))

    @property
    def array_atoms(self) -> float:
        """Mittlere Atomzahl im Array, central_occupation mal Summe der Einhüllenden."""
        return self.central_occupation * self.envelope_sum

    @property
    def gradient_hz(self) -> float:
        """Gradient als Frequenz E/h in Hz."""
        return self.gradient_e / (2.0 * math.pi)


@dataclass(frozen=True)
class HubbardParams:
    """
    Abgeleitete Bose-Hubbard-Parameter bei fester Gittertiefe.

    Energien sind als Kreisfrequenzen (Energie / hbar, rad/s) angegeben.
    Grenzfälle gamma = 0 oder g_beta = 0 sind für Modellrechnungen erlaubt.

    Attribute:
        depth_u: Gittertiefe in E_R
        gamma: Tunnelkopplung
        g_beta: Wechselwirkungsenergie pro Atompaar auf einem Platz
        recoil: Rückstoßenergie E_R
        site_spacing: Gitterperiode d in m
        bragg_momentum: Impuls 2 hbar k in kg m/s
        axial_width: axiale Oszillatorlänge der Wannier-Funktion in m
        atom_mass: Atommasse in kg
    """

    depth_u: float
    gamma: float
    g_beta: float
    recoil: float
    site_spacing: float
    bragg_momentum: float
    axial_width: float
    atom_mass: float = RB87_MASS

    def __post_init__(self) -> None:
        if self.gamma < 0 or self.g_beta < 0:
            raise DomainError("gamma und g_beta dürfen nicht negativ sein")
        if self.recoil <= 0 or self.site_spacing <= 0 or self.axial_width <= 0:
            raise DomainError("Rückstoßenergie, Gitterperiode und Orbitalbreite müssen positiv sein")


# ---------- Zahlstatistik ----------


@dataclass(frozen=True)
class NumberStatistics:
    """
    Atomzahlstatistik eines einzelnen Gitterplatzes.

    Attribute:
        mean_n: mittlere Besetzung N
        sigma_n: Standardabweichung der Besetzung
        regime: "coherent", "squeezed" oder "fock"
    """

    mean_n: float
    sigma_n: float
    regime: str = NUMBER_MODEL_COHERENT

    def __post_init__(self) -> None:
        if self.mean_n <= 0:
            raise DomainError(f"Mittlere Besetzung muss positiv sein, erhalten: {self.mean_n}")
        if self.regime not in NUMBER_MODELS:
            raise DomainError(f"Unbekanntes Statistikmodell: '{self.regime}'")
        limit = math.sqrt(self.mean_n)
        if self.sigma_n < 0 or self.sigma_n > limit * (1.0 + 1e-12):
            raise DomainError(
                f"Zahlbreite {self.sigma_n} liegt außerhalb von [0, sqrt(N) = {limit}]"
            )
        if self.sigma_n == 0 and self.regime != NUMBER_MODEL_FOCK:
            raise DomainError("Verschwindende Zahlbreite ist nur im Fock-Regime zulässig")
        if self.regime == NUMBER_MODEL_COHERENT and abs(self.sigma_n - limit) > 1e-12 * limit:
            raise DomainError("Kohärente Statistik verlangt sigma_n = sqrt(N)")

    @property
    def squeezing_ratio(self) -> float:
        """Verhältnis sqrt(N) / sigma_n (inf im Fock-Limes)."""
        return math.inf if self.sigma_n == 0 else math.sqrt(self.mean_n) / self.sigma_n


@dataclass(frozen=True, eq=False)
class FockState:
    """
    Auf ein Fenster n_min .. n_min + len - 1 beschränkter Fock-Zustand.

    Attribute:
        amplitudes: komplexe Amplituden c_n (normiert)
        n_min: kleinste enthaltene Besetzungszahl
        mean_n: mittlere Besetzung der Zielverteilung
        lost_norm: durch das Fenster abgeschnittene Norm
        alpha: kohärente Amplitude (nur für kohärente Zustände)
    """

    amplitudes: np.ndarray
    n_min: int
    mean_n: float
    lost_norm: float = 0.0
    alpha: complex | None = None

    @property
    def n_values(self) -> np.ndarray:
        """Besetzungszahlen des Fensters."""
        return np.arange(self.n_min, self.n_min + self.amplitudes.size)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class TwoSiteResult:
    """Exakte Zwei-Platz-Dynamik: Kohärenz <a1^dag a2>, Imbalance und Oszillationsfrequenz."""

    times: np.ndarray
    coherence: np.ndarray
    imbalance: np.ndarray
    frequency: float
    n_total: int


# ---------- Array und Ensemble ----------


@dataclass(frozen=True)
class EnsembleSpec:
    """
    Beschreibung eines klassischen Ensembles von Array-Realisierungen.

    Attribute:
        n_samples: Anzahl der Realisierungen
        number_sigma_model: "coherent" oder "squeezed"
        phase_sigma: feste Phasenbreite pro Platz; None = 1 / (2 sigma_n)
        master_seed: Startwert der Zufallsfolgen
        squeezing_formula: "half" (N g beta / 2 gamma) oder "full" (N g beta / gamma)
    """

    n_samples: int = 64
    number_sigma_model: str = NUMBER_MODEL_COHERENT
    phase_sigma: float | None = None
    master_seed: int = 0
    squeezing_formula: str = DEFAULT_SQUEEZING_FORMULA

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise DomainError(f"Ensemble braucht mindestens eine Realisierung, erhalten: {self.n_samples}")
        if self.number_sigma_model not in ENSEMBLE_MODELS:
            raise DomainError(f"Unbekanntes Ensemblemodell: '{self.number_sigma_model}'")
        if self.phase_sigma is not None and self.phase_sigma < 0:
            raise DomainError("Phasenbreite darf nicht negativ sein")
        if self.squeezing_formula not in SQUEEZING_FORMULAS:
            raise DomainError(f"Unbekannte Squeezing-Formel: '{self.squeezing_formula}'")


@dataclass(frozen=True, eq=False)
class ArrayState:
    """
    Klassische Feldamplituden eines 1D-Arrays für ein Ensemble von Realisierungen.

    Die Amplituden jeder Realisierung sind auf 1 normiert; die Besetzung
    von Platz i ist atom_numbers * |a_i|^2.

    Attribute:
        amplitudes: komplexe Amplituden, Form (samples, sites)
        atom_numbers: Gesamtatomzahl je Realisierung, Form (samples,)
        occupations: mittlere Besetzung N_i je Platz, Form (sites,)
        site_index: ganzzahliger Platzindex relativ zum Zentrum
        site_energies: Gradientenenergie E * i je Platz
        confinement: statisches Fallenpotential je Platz
        time: Zeitpunkt in s
    """

    amplitudes: np.ndarray
    atom_numbers: np.ndarray
    occupations: np.ndarray
    site_index: np.ndarray
    site_energies: np.ndarray
    confinement: np.ndarray
    time: float = 0.0

    @property
    def n_samples(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def n_sites(self) -> int:
        return int(self.amplitudes.shape[1])

    @property
    def populations(self) -> np.ndarray:
        """Besetzungen n_i je Realisierung."""
        return self.atom_numbers[:, None] * np.abs(self.amplitudes) ** 2

    @property
    def fields(self) -> np.ndarray:
        """Unnormierte Felder b_i = sqrt(N_tot) a_i mit |b_i|^2 = n_i."""
        return np.sqrt(self.atom_numbers)[:, None] * self.amplitudes


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Aufgezeichnete Zustände einer Zeitentwicklung."""

    times: np.ndarray
    states: list[ArrayState]
    norm_drift: float

    @property
    def norms(self) -> np.ndarray:
        """Mittlere Norm sum_i |a_i|^2 der Realisierungen je Bild."""
        return np.array([float(np.mean(np.sum(np.abs(s.amplitudes) ** 2, axis=1))) for s in self.states])


@dataclass(frozen=True)
class QuasimomentumResult:
    """
    Quasiimpuls als Bruchteil der Brillouin-Zone in (-1/2, 1/2].

    defined ist False, wenn die Resultantenlänge unter der Schwelle liegt.
    """

    fraction: float
    resultant: float
    defined: bool


# ---------- Abbildung ----------


@dataclass(frozen=True)
class ImagingConfig:
    """
    Parameter der Flugzeitabbildung.

    Attribute:
        onsite_width: axiale Oszillatorlänge der Wannier-Funktion in m
        tof_time: Flugzeit in s
        pixel_size: Pixelgröße in der Objektebene in m
        n_pixels: Anzahl der Pixel entlang der Gitterachse
        photon_shot: Poisson-Zählrauschen pro Pixel
        atom_shot: lognormale Atomzahlschwankung pro Schuss
        number_fluct_sigma: relative Breite der Atomzahlschwankung
        resolution_blur: Gauß-Auflösung der Optik (Standardabweichung) in m
    """

    onsite_width: float
    tof_time: float = DEFAULT_TOF
    pixel_size: float = DEFAULT_PIXEL_SIZE
    n_pixels: int = DEFAULT_PIXELS
    photon_shot: bool = False
    atom_shot: bool = False
    number_fluct_sigma: float = DEFAULT_SHOT_TO_SHOT_SIGMA
    resolution_blur: float = DEFAULT_BLUR

    def __post_init__(self) -> None:
        if self.onsite_width <= 0 or self.tof_time <= 0 or self.pixel_size <= 0:
            raise DomainError("Orbitalbreite, Flugzeit und Pixelgröße müssen positiv sein")
        if self.n_pixels < 3:
            raise DomainError(f"Mindestens 3 Pixel nötig, erhalten: {self.n_pixels}")
        if self.resolution_blur < 0 or self.number_fluct_sigma < 0:
            raise DomainError("Unschärfe und Schwankungsbreite dürfen nicht negativ sein")

    @property
    def positions(self) -> np.ndarray:
        """Pixelmitten in m, symmetrisch um 0."""
        return (np.arange(self.n_pixels) - (self.n_pixels - 1) / 2.0) * self.pixel_size

    @property
    def half_field(self) -> float:
        return 0.5 * self.n_pixels * self.pixel_size


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """
    Eindimensionales Dichteprofil in Atomen pro Pixel.

    Attribute:
        positions: Pixelmitten in m (äquidistant, aufsteigend)
        density: Atome pro Pixel
        n_samples: Anzahl gemittelter Schüsse
        seed: Startwert der Simulation (None bei externen Profilen)
        config_hash: Hash der erzeugenden Konfiguration
    """

    positions: np.ndarray
    density: np.ndarray
    n_samples: int = 1
    seed: int | None = None
    config_hash: str = ""

    def __post_init__(self) -> None:
        if self.positions.shape != self.density.shape or self.positions.size < 3:
            raise DomainError("Positionen und Dichte brauchen gleiche Länge (mindestens 3)")

    @property
    def pixel_size(self) -> float:
        return float(self.positions[1] - self.positions[0])

    @property
    def total_atoms(self) -> float:
        return float(np.sum(self.density))


# ---------- Fit-Modell ----------


@dataclass(frozen=True)
class GaussianPeak:
    """Gauß-Komponente mit Zentrum und Breite (Standardabweichung) in m, Fläche in Atomen."""

    center: float
    width: float
    area: float

    def height(self, pixel_size: float) -> float:
        """Maximale Dichte in Atomen pro Pixel."""
        return self.area * pixel_size / (math.sqrt(2.0 * math.pi) * self.width)


@dataclass(frozen=True)
class PeakModel:
    """
    Drei schmale Interferenzpeaks, ein breiter inkohärenter Untergrund und eine Konstante.

    Attribute:
        narrow: schmale Peaks, nach Zentrum sortiert (links, zentral, rechts)
        broad: breite Gauß-Komponente
        baseline: konstanter Untergrund in Atomen pro Pixel
        spacing_hint: erwarteter Peakabstand in m (optional, zur Prüfung)
    """

    narrow: tuple[GaussianPeak, ...]
    broad: GaussianPeak
    baseline: float = 0.0
    spacing_hint: float | None = None

    def __post_init__(self) -> None:
        widths = [p.width for p in self.narrow] + [self.broad.width]
        if min(widths) <= 0:
            raise DomainError("Peakbreiten müssen positiv sein")
        if self.broad.width < 2.0 * max(p.width for p in self.narrow):
            raise DomainError("Breite Komponente muss mindestens doppelt so breit sein wie jeder schmale Peak")
        centers = [p.center for p in self.narrow]
        if centers != sorted(centers):
            raise DomainError("Schmale Peaks müssen nach Zentrum sortiert sein")
        if self.spacing_hint is not None:
            for gap in np.diff(centers):
                if abs(gap - self.spacing_hint) > 0.2 * self.spacing_hint:
                    raise DomainError(
                        f"Peakabstand {gap:.3g} weicht mehr als 20% vom erwarteten Abstand ab"
                    )

    @property
    def central(self) -> GaussianPeak:
        return self.narrow[len(self.narrow) // 2]


@dataclass(frozen=True)
class FitResult:
    """
    Ergebnis einer Peakanpassung.

    variances enthält die Diagonale der Kovarianzmatrix je Parametername.
    """

    model: PeakModel
    residual_rms: float
    variances: dict[str, float]
    converged: bool
    n_iterations: int
    identifiability_warning: bool = False
    message: str = ""

    def std_err(self, name: str) -> float:
        return math.sqrt(max(self.variances.get(name, math.nan), 0.0))


@dataclass(frozen=True)
class WidthMeasurement:
    """Breite der zentralen Interferenzstruktur in Einheiten des Peakabstands.

    saturated ist True, wenn der Wert auf der Auflösungsgrenze steht.
    """

    value: float
    spacing: float
    kinematic_spacing: bool
    resolution_limit: float = 0.0
    saturated: bool = False


@dataclass(frozen=True, eq=False)
class CoherenceScan:
    """
    Breite über Haltezeit mit angepasstem Dephasierungsgesetz
    w(t) = w_f - (w_f - w_0) exp(-(t / tau_c)^2).
    """

    times: np.ndarray
    widths: np.ndarray
    tau_c: float
    w_0: float
    w_f: float
    tau_c_err: float = math.nan
    w_0_err: float = math.nan
    w_f_err: float = math.nan
    extrapolated: bool = False
    poor_fit: bool = False
    residual_rms: float = 0.0
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.tau_c <= 0:
            raise DomainError("Kohärenzzeit muss positiv sein")
        if not self.w_f > self.w_0:
            raise DomainError("Endbreite muss größer als Anfangsbreite sein")


# ---------- Ergebnisse der Pipelines ----------


@dataclass(frozen=True, eq=False)
class CoherenceRun:
    """
    Ergebnis der Kette Ensemble -> Entwicklung -> Flugzeitbild -> Peak-Fit -> w(t)-Fit.

    Attribute:
        scan: angepasstes Dephasierungsgesetz (nur konvergierte Bilder)
        times: alle Haltezeiten in s
        widths: Breiten je Haltezeit, nan für übersprungene Bilder
        width_errors: 1-sigma-Fehler der Breiten, nan für übersprungene Bilder
        converged: Maske der Bilder mit konvergiertem Peak-Fit
        theory_tau: geschlossene Kohärenzzeit 1 / (g_beta sigma_n) in s
        array_theory_tau: Kohärenzzeit des ganzen Arrays (atomzahlgewichtet) in s
        number_model: Zahlmodell des Ensembles
        depth_u: Gittertiefe in E_R
        order_times: Zeitgitter des Ordnungsparameters in s
        order_parameter: exakter Ordnungsparameter <a>(t) des zentralen Platzes
    """

    scan: CoherenceScan
    times: np.ndarray
    widths: np.ndarray
    width_errors: np.ndarray
    converged: np.ndarray
    theory_tau: float
    array_theory_tau: float
    number_model: str
    depth_u: float
    order_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    order_parameter: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    @property
    def skipped_frames(self) -> int:
        return int(np.count_nonzero(~self.converged))


@dataclass(frozen=True)
class DepthScanRow:
    """Eine Zeile des Kohärenzzeit-Tiefenscans (Zeiten in s, nan bei Fehlern)."""

    depth_u: float
    tau_coherent: float
    tau_coherent_err: float
    tau_squeezed: float
    tau_squeezed_err: float
    theory_coherent: float
    theory_squeezed: float
    status: str = "ok"


@dataclass(frozen=True)
class SqueezingRow:
    depth_u: float
    incoherent_fraction: float
    fraction_err: float
    depletion: float
    sigma_ratio: float
    below_noise_floor: bool


@dataclass(frozen=True)
class GradientScanRow:
    """Breite und inkohärenter Anteil nach fester Haltezeit bei einem Gradienten."""

    gradient_hz: float
    hold: float
    width: float
    width_err: float
    incoherent_fraction: float
    status: str = "ok"


@dataclass(frozen=True, eq=False)
class BlochRun:
    """Bloch-Oszillation: Quasiimpuls, Peakgewichte und Profile je Bild."""

    trajectory: Trajectory
    quasimomenta: list[QuasimomentumResult]
    peak_weights: np.ndarray
    profiles: list[DensityProfile]
    bloch_period: float


@dataclass(frozen=True, eq=False)
class RephaseRun:
    """
    Breite über die Rephasierzeit nach Abschalten des Gradienten.

    Attribute:
        times: Rephasierzeiten in s
        widths: zentrale Breite (Einheiten 2 hbar k)
        t_bloch: tatsächliche Dephasierzeit in s (ganze Bloch-Perioden)
        final_width: Breite eines vollständig dephasierten Arrays
        precondition_met: dephasierte Breite >= 0.8 final_width
        two_site: exakte Zwei-Platz-Dynamik auf demselben Zeitgitter
        josephson_frequency: sqrt(N g_beta gamma) in rad/s
        plasma_frequency: Kleinschwingungsfrequenz des Zwei-Platz-Modells in rad/s
        two_site_frequency: exakt diagonalisierte Schwingungsfrequenz des Paares in rad/s
        hold_coupling: Tunnelkopplung während des Haltens in rad/s
    """

    times: np.ndarray
    widths: np.ndarray
    t_bloch: float
    final_width: float
    precondition_met: bool
    two_site: TwoSiteResult
    josephson_frequency: float
    plasma_frequency: float
    two_site_frequency: float = math.nan
    hold_coupling: float = math.nan

    @property
    def revival_time(self) -> float:
        """Zeit der kleinsten Breite nach t = 0 (nan ohne gültige Zeitpunkte)."""
        later = self.widths[1:]
        if self.times.size < 2 or not np.any(np.isfinite(later)):
            return math.nan
        return float(self.times[1:][np.nanargmin(later)])
