"""
Auswertung von Interferenzprofilen.

Zerlegung in drei schmale Gauß-Peaks plus einen breiten Untergrund,
inkohärenter Anteil, Breite der zentralen Struktur und Anpassung des
Dephasierungsgesetzes w(t) = w_f - (w_f - w_0) exp(-(t / tau_c)^2).
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import least_squares
from scipy.signal import peak_widths

from model.constants import (
    BROAD_MIN_WIDTH,
    CENTER_TOLERANCE,
    FIT_DIFF_STEP,
    FIT_GTOL,
    FIT_MAX_ITERATIONS,
    FIT_TOLERANCE,
    FWHM_PER_SIGMA,
    MIN_SCAN_POINTS,
    NARROW_MAX_WIDTH,
    NARROW_PEAKS,
    WIDTH_CONVENTIONS,
    WIDTH_EFFECTIVE,
    WIDTH_FWHM,
    WIDTH_SIGMA,
)
from model.entities import (
    CoherenceScan,
    DensityProfile,
    FitResult,
    GaussianPeak,
    HubbardParams,
    ImagingConfig,
    PeakModel,
    WidthMeasurement,
)
from model.errors import ConvergenceError, DomainError
from model.tof_imaging import kinematic_spacing

logger = logging.getLogger(__name__)

PARAMETER_NAMES: list[str] = [
    f"narrow{j}_{part}" for j in range(NARROW_PEAKS) for part in ("center", "width", "area")
] + ["broad_center", "broad_width", "broad_area", "baseline"]

SQRT_2PI = math.sqrt(2.0 * math.pi)
RESOLVED_SIDE_FRACTION = 0.02
DEGENERATE_WIDTH_RATIO = 2.2
SATURATION_RATIO = 0.95


# ---------- Modell ----------


def _gaussian_sum(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Modell in normierten Koordinaten: Flächen-normierte Gauß-Peaks plus Konstante."""
    centers = p[0:-1:3]
    widths = p[1:-1:3]
    areas = p[2:-1:3]
    z = (u[:, None] - centers) / widths
    return np.exp(-0.5 * z * z) @ (areas / (SQRT_2PI * widths)) + p[-1]


def model_density(model: PeakModel, positions: np.ndarray) -> np.ndarray:
    """Dichte eines PeakModel in Atomen pro Pixel auf dem gegebenen Gitter."""
    pixel = float(positions[1] - positions[0])
    density = np.full(positions.shape, model.baseline, dtype=float)
    for peak in (*model.narrow, model.broad):
        density += peak.height(pixel) * np.exp(-0.5 * ((positions - peak.center) / peak.width) ** 2)
    return density


# ---------- Peak-Fit ----------


def _bounds(u: np.ndarray, c_mid: float, du: float) -> tuple[np.ndarray, np.ndarray]:
    lower: list[float] = []
    upper: list[float] = []
    for offset in (-1.0, 0.0, 1.0):
        nominal = c_mid + offset
        lower += [nominal - CENTER_TOLERANCE, 0.3 * du, 0.0]
        upper += [nominal + CENTER_TOLERANCE, NARROW_MAX_WIDTH, np.inf]
    lower += [c_mid - 0.5, BROAD_MIN_WIDTH, 0.0, -1.0]
    upper += [c_mid + 0.5, 20.0, np.inf, 1.0]
    return np.array(lower), np.array(upper)


def _initial_guess(u: np.ndarray, y: np.ndarray, du: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Startwerte aus geglätteten lokalen Maxima und Schranken (normierte Koordinaten)."""
    smoothed = gaussian_filter1d(y, sigma=max(1.0, 0.01 / du), mode="nearest")
    center_idx = int(np.argmax(smoothed))
    c_mid = u[center_idx]
    if c_mid - 1.0 - CENTER_TOLERANCE < u[0] or c_mid + 1.0 + CENTER_TOLERANCE > u[-1]:
        raise DomainError("Profil deckt nicht alle drei Interferenzpeaks ab")
    lo, hi = _bounds(u, c_mid, du)

    w_min = 0.3 * du
    total_area = float(np.sum(y) * du)
    second_moment = float(np.sum(y * (u - c_mid) ** 2) / np.sum(y))
    broad_width = float(np.clip(math.sqrt(max(second_moment, 0.0)), 1.2 * BROAD_MIN_WIDTH, 5.0))

    p0: list[float] = []
    narrow_area = 0.0
    for offset in (-1.0, 0.0, 1.0):
        nominal = c_mid + offset
        window = np.flatnonzero(np.abs(u - nominal) <= CENTER_TOLERANCE)
        idx = int(window[np.argmax(smoothed[window])])
        at_edge = idx in (window[0], window[-1])
        center = nominal if at_edge else float(u[idx])
        idx = int(np.argmin(np.abs(u - center)))
        # Sockel: Täler auf halbem Weg zu den Nachbarpeaks
        valleys = [smoothed[int(np.argmin(np.abs(u - (center + side))))] for side in (-0.5, 0.5)]
        pedestal = float(min(valleys))
        excess = max(smoothed[idx] - pedestal, 0.02 * smoothed[idx])
        width_px = peak_widths(smoothed - pedestal, [idx], rel_height=0.5)[0][0]
        width = float(np.clip(width_px * du / FWHM_PER_SIGMA, 2.0 * w_min, 0.9 * NARROW_MAX_WIDTH))
        area = excess * SQRT_2PI * width
        narrow_area += area
        p0 += [center, width, area]

    broad_area = max(total_area - narrow_area, 0.05 * total_area)
    p0 += [c_mid, broad_width, broad_area, 0.0]
    return np.clip(np.array(p0), lo, hi), lo, hi


def _incoherent_guess(p0: np.ndarray, y: np.ndarray, du: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Startwerte für ein dephasiertes Profil: fast alles im breiten Untergrund."""
    p = p0.copy()
    total_area = float(np.sum(y) * du)
    for j in range(NARROW_PEAKS):
        p[3 * j + 1] = 2.0 * 0.3 * du
        p[3 * j + 2] = 0.01 * total_area
    p[3 * NARROW_PEAKS + 2] = 0.97 * total_area
    return np.clip(p, lo, hi)


def _to_normalized(model: PeakModel, x_ref: float, spacing: float, area_scale: float, scale_d: float) -> np.ndarray:
    values: list[float] = []
    for peak in (*model.narrow, model.broad):
        values += [(peak.center - x_ref) / spacing, peak.width / spacing, peak.area / area_scale]
    values.append(model.baseline / scale_d)
    return np.array(values)


def fit_peaks(
    profile: DensityProfile,
    spacing_hint: float,
    max_iterations: int = FIT_MAX_ITERATIONS,
    initial: PeakModel | None = None,
) -> FitResult:
    """
    Passt drei schmale Gauß-Peaks, einen breiten Gauß-Untergrund und eine Konstante an.

    Gedämpftes Gauß-Newton-Verfahren (Trust-Region mit Schranken) mit numerischer
    Jacobi-Matrix (relativer Schritt 1e-6). Gerechnet wird in Koordinaten, die
    auf Peakabstand und Maximaldichte normiert sind. Gestartet wird aus der
    Heuristik, aus einem fast vollständig inkohärenten Modell und, falls
    gegeben, aus initial (z.B. dem Fit des vorigen Bildes); es gewinnt der
    konvergierte Lauf mit der kleinsten Residuennorm.

    Args:
        profile: Dichteprofil (Atome pro Pixel)
        spacing_hint: erwarteter Peakabstand in m
        max_iterations: Iterationen je Start; eine Iteration kostet eine
            Jacobi-Matrix, also n_params + 1 Modellauswertungen
        initial: optionales Startmodell

    Returns:
        FitResult; bei Nichtkonvergenz converged=False mit dem besten Zwischenstand
    """
    if spacing_hint <= 0:
        raise DomainError("Peakabstand muss positiv sein")
    if max_iterations < 1:
        raise DomainError(f"Mindestens eine Iteration nötig, erhalten: {max_iterations}")
    x = profile.positions
    scale_d = float(np.max(profile.density))
    if not scale_d > 0:
        raise DomainError("Profil enthält keine positive Dichte")
    x_ref = 0.5 * (x[0] + x[-1])
    u = (x - x_ref) / spacing_hint
    y = profile.density / scale_d
    du = float(u[1] - u[0])
    area_scale = scale_d * spacing_hint / profile.pixel_size

    p0, lo, hi = _initial_guess(u, y, du)
    starts = [p0, _incoherent_guess(p0, y, du, lo, hi)]
    if initial is not None:
        starts.append(np.clip(_to_normalized(initial, x_ref, spacing_hint, area_scale, scale_d), lo, hi))

    best = None
    for start in starts:
        result = least_squares(
            lambda p: _gaussian_sum(u, p) - y,
            start,
            bounds=(lo, hi),
            method="trf",
            x_scale="jac",
            diff_step=FIT_DIFF_STEP,
            ftol=FIT_TOLERANCE,
            xtol=FIT_TOLERANCE,
            gtol=FIT_GTOL,
            max_nfev=max_iterations * (start.size + 1),
        )
        ok = bool(result.status > 0 and np.isfinite(result.cost))
        if best is None or (ok, -result.cost) > (best[0], -best[1].cost):
            best = (ok, result)
    converged, result = best
    if not converged:
        logger.warning("Peak-Fit nicht konvergiert nach %d Auswertungen: %s", result.nfev, result.message)

    p = result.x
    dof = max(u.size - p.size, 1)
    residual_var = 2.0 * result.cost / dof
    covariance = np.linalg.pinv(result.jac.T @ result.jac) * residual_var
    unit = np.array([spacing_hint, spacing_hint, area_scale] * (NARROW_PEAKS + 1) + [scale_d])
    variances = {name: float(v) for name, v in zip(PARAMETER_NAMES, np.diag(covariance) * unit ** 2)}

    peaks = [
        GaussianPeak(
            center=x_ref + p[3 * j] * spacing_hint,
            width=p[3 * j + 1] * spacing_hint,
            area=p[3 * j + 2] * area_scale,
        )
        for j in range(NARROW_PEAKS + 1)
    ]
    model = PeakModel(narrow=tuple(peaks[:NARROW_PEAKS]), broad=peaks[NARROW_PEAKS], baseline=p[-1] * scale_d)

    degenerate = model.broad.width < DEGENERATE_WIDTH_RATIO * max(pk.width for pk in model.narrow)
    if degenerate and model.broad.area > 0:
        logger.warning(
            "Breite Komponente (%.3g m) kaum von schmalen Peaks unterscheidbar", model.broad.width
        )
    residual_rms = float(math.sqrt(2.0 * result.cost / u.size) * scale_d)
    return FitResult(
        model=model,
        residual_rms=residual_rms,
        variances=variances,
        converged=converged,
        n_iterations=int(result.nfev),
        identifiability_warning=bool(degenerate and model.broad.area > 0),
        message=str(result.message),
    )


# ---------- Kenngrößen ----------


def _clamped_areas(fit: FitResult) -> tuple[np.ndarray, float]:
    narrow = np.array([pk.area for pk in fit.model.narrow])
    broad = fit.model.broad.area
    if np.any(narrow < 0) or broad < 0:
        logger.warning("Negative Peakflächen auf 0 gesetzt")
    return np.maximum(narrow, 0.0), max(broad, 0.0)


def incoherent_fraction(fit: FitResult) -> float:
    """
    Anteil der Atome im breiten Untergrund: Fläche breit / Gesamtfläche, in [0, 1].

    Raises:
        ConvergenceError: wenn der Fit nicht konvergiert ist
    """
    if not fit.converged:
        raise ConvergenceError("Inkohärenter Anteil verlangt einen konvergierten Fit")
    narrow, broad = _clamped_areas(fit)
    total = narrow.sum() + broad
    if total <= 0:
        return 0.0
    return float(broad / total)


def incoherent_fraction_error(fit: FitResult) -> float:
    """1-sigma-Unsicherheit des inkohärenten Anteils (Kovarianzen vernachlässigt)."""
    narrow, broad = _clamped_areas(fit)
    total = narrow.sum() + broad
    if total <= 0:
        return math.nan
    var_broad = fit.variances["broad_area"]
    var_narrow = sum(fit.variances[f"narrow{j}_area"] for j in range(NARROW_PEAKS))
    d_broad = narrow.sum() / total ** 2
    d_narrow = broad / total ** 2
    return float(math.sqrt(max(d_broad ** 2 * var_broad + d_narrow ** 2 * var_narrow, 0.0)))


def central_weight(fit: FitResult) -> float:
    """Anteil der Atome im zentralen schmalen Peak an der gesamten angepassten Fläche."""
    narrow, broad = _clamped_areas(fit)
    total = narrow.sum() + broad
    if total <= 0:
        return 0.0
    return float(narrow[NARROW_PEAKS // 2] / total)


def central_width(
    fit: FitResult,
    params: HubbardParams,
    config: ImagingConfig,
    convention: str = WIDTH_SIGMA,
    resolution_limit: float = 0.0,
    noise_floor: float = 0.0,
) -> WidthMeasurement:
    """
    Breite der zentralen Interferenzstruktur in Einheiten von 2 hbar k.

    Konventionen:
        "sigma": Standardabweichung des zentralen schmalen Peaks
        "fwhm": dieselbe Breite als volle Halbwertsbreite
        "effective": (1 - F) w_zentral + F w_breit mit dem inkohärenten Anteil F

    Geteilt wird durch den angepassten Abstand der Seitenpeaks; sind diese
    nicht aufgelöst, durch den kinematischen Abstand. Für "sigma" und "fwhm"
    gilt die Breite als gesättigt, wenn der zentrale Peak unter noise_floor
    der Atome fällt oder die Auflösungsgrenze (ohne Angabe: obere Schranke
    der schmalen Peaks) erreicht; der Wert steht dann auf dieser Grenze.
    """
    if convention not in WIDTH_CONVENTIONS:
        raise DomainError(f"Unbekannte Breitenkonvention: '{convention}'")
    fraction = incoherent_fraction(fit)
    narrow, broad = _clamped_areas(fit)
    total = narrow.sum() + broad
    left, mid, right = fit.model.narrow
    resolved = total > 0 and min(narrow[0], narrow[-1]) >= RESOLVED_SIDE_FRACTION * total
    if resolved:
        spacing = 0.5 * (right.center - left.center)
    else:
        spacing = kinematic_spacing(params, config.tof_time)
        logger.info("Seitenpeaks nicht aufgelöst, kinematischer Abstand %.1f um", spacing * 1e6)

    if convention == WIDTH_EFFECTIVE:
        return WidthMeasurement(
            value=((1.0 - fraction) * mid.width + fraction * fit.model.broad.width) / spacing,
            spacing=spacing,
            kinematic_spacing=not resolved,
            resolution_limit=resolution_limit,
        )

    scale = FWHM_PER_SIGMA if convention == WIDTH_FWHM else 1.0
    value = scale * mid.width / spacing
    ceiling = scale * (resolution_limit if resolution_limit > 0 else NARROW_MAX_WIDTH)
    saturated = central_weight(fit) < noise_floor or value >= SATURATION_RATIO * ceiling
    if saturated:
        logger.info("Zentrale Breite gesättigt (Gewicht %.3f, Breite %.3g)", central_weight(fit), value)
    return WidthMeasurement(
        value=ceiling if saturated else value,
        spacing=spacing,
        kinematic_spacing=not resolved,
        resolution_limit=resolution_limit,
        saturated=saturated,
    )


def central_width_error(fit: FitResult, width: WidthMeasurement, convention: str = WIDTH_SIGMA) -> float:
    """1-sigma-Fehler der zentralen Breite aus der Varianz von sigma_zentral (0 bei Sättigung)."""
    if width.saturated:
        return 0.0
    error = fit.std_err(f"narrow{NARROW_PEAKS // 2}_width") / width.spacing
    if convention == WIDTH_FWHM:
        return float(FWHM_PER_SIGMA * error)
    if convention == WIDTH_EFFECTIVE:
        return float((1.0 - incoherent_fraction(fit)) * error)
    return float(error)


def transform_limited_width(radius_sites: float) -> float:
    """Breite (sigma, Einheiten 2 hbar k) des zentralen Peaks eines phasenstarren Gauß-Arrays."""
    return 1.0 / (2.0 * math.pi * math.sqrt(2.0) * radius_sites)


def envelope_width(params: HubbardParams) -> float:
    """Breite (sigma, Einheiten 2 hbar k) der Einzelplatz-Einhüllenden, Grenzwert eines dephasierten Arrays."""
    return params.site_spacing / (2.0 * math.pi * math.sqrt(2.0) * params.axial_width)


def peak_weights(profile: DensityProfile, spacing: float) -> tuple[float, float, float]:
    """Anteile der Atome in Fenstern der Breite spacing um -spacing, 0 und +spacing."""
    x = profile.positions
    total = profile.total_atoms
    if total <= 0:
        return (0.0, 0.0, 0.0)
    weights = []
    for center in (-spacing, 0.0, spacing):
        mask = np.abs(x - center) < 0.5 * spacing
        weights.append(float(profile.density[mask].sum() / total))
    return tuple(weights)  # type: ignore[return-value]


# ---------- Kohärenzzeit ----------


def dephasing_model(times: np.ndarray, w_0: float, w_f: float, tau_c: float) -> np.ndarray:
    """w(t) = w_f - (w_f - w_0) exp(-(t / tau_c)^2)."""
    return w_f - (w_f - w_0) * np.exp(-((np.asarray(times) / tau_c) ** 2))


def fit_coherence_time(times, widths) -> CoherenceScan:
    """
    Passt das Dephasierungsgesetz an (w_0, w_f, tau_c) mit Positivitätsschranken an.

    Raises:
        DomainError: bei weniger als 5 Punkten
        ConvergenceError: ohne Dephasierungssignal (w_f <= w_0)
    """
    t = np.asarray(times, dtype=float)
    w = np.asarray(widths, dtype=float)
    if t.size < MIN_SCAN_POINTS or t.shape != w.shape:
        raise DomainError(f"Mindestens {MIN_SCAN_POINTS} Zeitpunkte nötig, erhalten: {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))) or np.any(t < 0):
        raise DomainError("Zeiten und Breiten müssen endlich sein, Zeiten nichtnegativ")
    order = np.argsort(t, kind="stable")
    t, w = t[order], w[order]

    w0 = float(w[0])
    delta = max(float(w.max()) - w0, 1e-9 * max(abs(w0), 1.0))
    half = w0 + 0.5 * delta
    crossing = np.flatnonzero(w >= half)
    t_half = float(t[crossing[0]]) if crossing.size and t[crossing[0]] > 0 else 0.5 * float(t.max())
    tau0 = max(t_half / math.sqrt(math.log(2.0)), 1e-6 * float(t.max()))

    def residuals(p: np.ndarray) -> np.ndarray:
        return p[0] + p[1] * (1.0 - np.exp(-((t / p[2]) ** 2))) - w

    def jacobian(p: np.ndarray) -> np.ndarray:
        decay = np.exp(-((t / p[2]) ** 2))
        return np.column_stack([np.ones_like(t), 1.0 - decay, -2.0 * p[1] * decay * t ** 2 / p[2] ** 3])

    t_min = 1e-6 * float(t.max())
    result = least_squares(
        residuals,
        np.array([max(w0, 0.0), delta, tau0]),
        jac=jacobian,
        bounds=([0.0, 0.0, t_min], [np.inf, np.inf, np.inf]),
        method="trf",
        x_scale="jac",
        ftol=1e-15,
        xtol=1e-15,
        gtol=1e-15,
        max_nfev=1000,
    )
    w_0, span, tau_c = (float(v) for v in result.x)
    if not span > 0:
        raise ConvergenceError("Kein Dephasierungssignal: Endbreite nicht größer als Anfangsbreite")

    dof = max(t.size - 3, 1)
    residual_var = 2.0 * result.cost / dof
    covariance = np.linalg.pinv(result.jac.T @ result.jac) * residual_var
    rms = float(math.sqrt(2.0 * result.cost / t.size))

    positive = t[t > 0]
    extrapolated = bool(tau_c > t.max() or (positive.size and tau_c < positive.min()))
    tolerance = 3.0 * max(rms, 1e-12 * max(abs(w_0 + span), 1.0))
    poor_fit = bool(np.any(np.diff(w) < -tolerance))
    if extrapolated:
        logger.warning("Kohärenzzeit %.3g s liegt außerhalb des abgetasteten Bereichs", tau_c)
    if poor_fit:
        logger.warning("Breiten nicht monoton innerhalb des Rauschens; Fit fragwürdig")

    return CoherenceScan(
        times=t,
        widths=w,
        tau_c=tau_c,
        w_0=w_0,
        w_f=w_0 + span,
        tau_c_err=float(math.sqrt(max(covariance[2, 2], 0.0))),
        w_0_err=float(math.sqrt(max(covariance[0, 0], 0.0))),
        w_f_err=float(math.sqrt(max(covariance[0, 0] + covariance[1, 1] + 2.0 * covariance[0, 1], 0.0))),
        extrapolated=extrapolated,
        poor_fit=poor_fit,
        residual_rms=rms,
    )
