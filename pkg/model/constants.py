"""Zentrale Konstanten für den Gitter-Simulator."""

from __future__ import annotations

import math

from scipy import constants as sc

# Naturkonstanten

HBAR: float = sc.hbar
PLANCK: float = sc.h

# Rb-87 (Masse in kg, s-Wellen-Streulänge in m)
RB87_MASS: float = 86.909180527 * sc.atomic_mass
RB87_SCATTERING_LENGTH: float = 5.3e-9

# Apparatur-Defaults

DEFAULT_WAVELENGTH: float = 852e-9
DEFAULT_DEPTH_U: float = 10.0
DEFAULT_CENTRAL_OCCUPATION: float = 150.0
DEFAULT_ARRAY_RADIUS: float = 8.0

# Kalibriert auf g*beta/hbar ~ 2pi x 1.19 Hz bei U = 10 E_R
DEFAULT_TRANSVERSE_WIDTH: float = 2.33e-6

DEFAULT_GRADIENT_HZ: float = 900.0
DEFAULT_SHOT_TO_SHOT_SIGMA: float = 0.20

# Bandstruktur

DEFAULT_PLANE_WAVES: int = 31
MIN_PLANE_WAVES: int = 11
PLANE_WAVE_CHECK_STEP: int = 10
BAND_CONVERGENCE_TOL: float = 1e-6
QUASIMOMENTUM_POINTS: int = 65
DEPTH_RANGE: tuple[float, float] = (1.0, 40.0)
ZENER_FRACTION: float = 0.5

# Zustände

TRUNCATION_SIGMAS: float = 10.0
FOCK_SIGMA_MIN: float = 1e-3
TWO_SITE_MAX_ATOMS: int = 2000
DEFAULT_DEPLETION_SITES: int = 32

# Erlaubte Statistikmodelle (für Validierung)
NUMBER_MODEL_COHERENT: str = "coherent"
NUMBER_MODEL_SQUEEZED: str = "squeezed"
NUMBER_MODEL_FOCK: str = "fock"
NUMBER_MODELS: set[str] = {NUMBER_MODEL_COHERENT, NUMBER_MODEL_SQUEEZED, NUMBER_MODEL_FOCK}
ENSEMBLE_MODELS: set[str] = {NUMBER_MODEL_COHERENT, NUMBER_MODEL_SQUEEZED}

# Squeezing-Formel: "half" -> N g beta / 2 gamma, "full" -> N g beta / gamma
SQUEEZING_FORMULAS: dict[str, float] = {"half": 0.5, "full": 1.0}
DEFAULT_SQUEEZING_FORMULA: str = "half"

# Array-Dynamik

ENVELOPE_GAUSSIAN: str = "gaussian"
ENVELOPE_FLAT: str = "flat"
ENVELOPES: set[str] = {ENVELOPE_GAUSSIAN, ENVELOPE_FLAT}

STEP_SAFETY: float = 50.0
NORM_DRIFT_LIMIT: float = 1e-6
TRUNCATION_BIAS_LIMIT: float = 0.01
UNDEFINED_PHASE_LENGTH: float = 1e-3
ENSEMBLE_CHUNK: int = 16
MAX_SITES: int = 257

# Abbildung

DEFAULT_TOF: float = 12e-3
DEFAULT_PIXEL_SIZE: float = 1e-6
DEFAULT_PIXELS: int = 801
DEFAULT_BLUR: float = 1e-6
DEFAULT_IMAGE_WIDTH: float = 40e-6
MIN_CAPTURED_FRACTION: float = 0.98
FOV_SPACINGS: float = 1.5
PGM_MAX: int = 65535

# Analyse

NARROW_PEAKS: int = 3
NARROW_MAX_WIDTH: float = 0.175
BROAD_MIN_WIDTH: float = 0.35
CENTER_TOLERANCE: float = 0.2
FIT_DIFF_STEP: float = 1e-6
FIT_GTOL: float = 1e-10
FIT_MAX_ITERATIONS: int = 200
FIT_TOLERANCE: float = 1e-12
MIN_SCAN_POINTS: int = 5
FWHM_PER_SIGMA: float = 2.0 * math.sqrt(2.0 * math.log(2.0))
WIDTH_SIGMA: str = "sigma"
WIDTH_FWHM: str = "fwhm"
WIDTH_EFFECTIVE: str = "effective"
WIDTH_CONVENTIONS: set[str] = {WIDTH_SIGMA, WIDTH_FWHM, WIDTH_EFFECTIVE}
DEFAULT_NOISE_FLOOR: float = 0.05


# Laufkonfiguration (Sektionen der Konfigurationsdatei)

CONFIG_SECTIONS: tuple[str, ...] = ("lattice", "atoms", "gradient", "times", "ensemble", "imaging", "analysis")
DEFAULT_CONFIG_FILE: str = "lattice_sim.ini"
DEFAULT_OUTPUT_DIR: str = "out"
DEFAULT_T_RAMP_MS: float = 350.0
DEFAULT_T_BLOCH_MS: float = 80.0
DEFAULT_T_REPHASE_MS: float = 30.0
DEFAULT_SCAN_HOLD_MS: float = 40.0
DEFAULT_BLOCH_PERIODS: int = 3
DEFAULT_FRAMES_PER_PERIOD: int = 24
DEFAULT_SAMPLES: int = 64
DEFAULT_SEED: int = 1234
DEFAULT_N_TIMES: int = 13
DEFAULT_TIME_SPAN_TAU: float = 3.0
DEFAULT_REPHASE_POINTS: int = 31
DEFAULT_DEPTHS: tuple[float, float, float] = (5.0, 24.0, 1.0)
REPHASE_DEPHASED_FRACTION: float = 0.8
DEFAULT_REPHASE_COUPLING: float = 0.25
TWO_SITE_PERIODS: int = 20
TWO_SITE_POINTS: int = 2048
SCAN_STATUS_OK: str = "ok"
SCAN_STATUS_SATURATED: str = "saturated"

# Ausgabe

ARTIFACT_VERSION: str = "1.0.0"
CSV_FLOAT_FORMAT: str = "{:.10g}"

PARAMS_COLUMNS: list[str] = [
    "depth_u",
    "gamma_hz",
    "g_beta_hz",
    "recoil_hz",
    "bloch_period_ms",
    "zener_flag",
]
TRAJECTORY_COLUMNS: list[str] = ["t_ms", "q_zone_fraction", "norm"]
PEAK_WEIGHT_COLUMNS: list[str] = ["t_ms", "left", "central", "right"]
GRADIENT_SCAN_COLUMNS: list[str] = [
    "gradient_hz",
    "hold_ms",
    "width",
    "width_err",
    "incoherent_fraction",
    "status",
]
SQUEEZING_COLUMNS: list[str] = [
    "depth_u",
    "incoherent_fraction",
    "fraction_err",
    "depletion",
    "sigma_ratio",
    "below_noise_floor",
]
WIDTH_COLUMNS: list[str] = ["t_ms", "mean_width", "sem_width"]
COHERENCE_FIT_COLUMNS: list[str] = [
    "tau_c_ms",
    "tau_c_err_ms",
    "w_0",
    "w_0_err",
    "w_f",
    "w_f_err",
    "extrapolated",
    "poor_fit",
    "theory_ms",
    "theory_array_ms",
    "skipped_frames",
]
DEPTH_SCAN_COLUMNS: list[str] = [
    "depth_u",
    "tau_coherent_ms",
    "tau_coherent_err_ms",
    "tau_squeezed_ms",
    "tau_squeezed_err_ms",
    "theory_coherent_ms",
    "theory_squeezed_ms",
    "status",
]
REPHASE_COLUMNS: list[str] = ["t_ms", "width"]
TWO_SITE_COLUMNS: list[str] = ["t_ms", "coherence", "imbalance"]
ORDER_PARAMETER_COLUMNS: list[str] = ["t_ms", "re", "im", "abs"]
FIT_REPORT_COLUMNS: list[str] = ["parameter", "value", "std_err"]

# Externe Profil-CSV (Spaltenvertrag)
PROFILE_X_COLUMN: str = "x_um"
PROFILE_DENSITY_COLUMN: str = "density"
PROFILE_COLUMNS: list[str] = [PROFILE_X_COLUMN, PROFILE_DENSITY_COLUMN]

# Exit-Codes der Kommandozeile
EXIT_OK: int = 0
EXIT_CONFIG: int = 2
EXIT_CONVERGENCE: int = 3
EXIT_IO: int = 4
EXIT_DOMAIN: int = 5
