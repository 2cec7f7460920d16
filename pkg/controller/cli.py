"""
Kommandozeile des Gitter-Simulators.

Unterbefehle: init, params, bloch, squeezing, coherence, rephase, fit.
Exit-Codes: 0 Erfolg, 2 Konfiguration, 3 Konvergenz, 4 Ein-/Ausgabe, 5 sonstige Domänenfehler.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import List, Sequence

from controller.experiment_controller import ExperimentController
from model.constants import (
    DEFAULT_CONFIG_FILE,
    DEFAULT_DEPTHS,
    DEFAULT_OUTPUT_DIR,
    ENSEMBLE_MODELS,
    EXIT_CONFIG,
    EXIT_CONVERGENCE,
    EXIT_DOMAIN,
    EXIT_IO,
    EXIT_OK,
)
from model.errors import ArtifactIOError, ConfigurationError, ConvergenceError, LatticeSimError
from model.repository import IniConfigRepository
from model.run_config import RunConfig, build_run_config
from model.service import ExperimentService
from view.report_view import ReportView

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


# ---------- Argumente ----------


def parse_range(text: str) -> List[float]:
    """
    "A:B:STEP" -> [A, A + STEP, ..., B] (B eingeschlossen); "A" -> [A]; "A,B,C" -> Liste.
    """
    try:
        if "," in text:
            return [float(part) for part in text.split(",") if part.strip()]
        parts = [float(part) for part in text.split(":")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"ungültiger Bereich: '{text}'") from exc
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"Bereich muss A:B:STEP mit A <= B und STEP > 0 sein: '{text}'")
    start, stop, step = parts
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"keine ganze Zahl: '{text}'") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"muss mindestens 1 sein: {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="Konfigurationsdatei (INI)")
    common.add_argument("--seed", type=int, help="Startwert der Zufallsfolgen")
    common.add_argument("--samples", type=_positive_int, help="Anzahl der Ensemble-Realisierungen")
    common.add_argument("--out", metavar="DIR", default=DEFAULT_OUTPUT_DIR, help="Ausgabeverzeichnis")
    common.add_argument("--workers", type=_positive_int, help="Anzahl paralleler Threads")
    common.add_argument("--no-noise", action="store_true", help="Schuss- und Zählrauschen abschalten")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug-Ausgaben")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="nur Warnungen und Fehler")

    parser = argparse.ArgumentParser(
        prog="lattice-sim",
        description="Simulation und Auswertung eines BEC-Arrays im gekippten optischen Gitter",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    init = sub.add_parser("init", parents=[common], help="Default-Konfiguration schreiben")
    init.add_argument("--force", action="store_true", help="bestehende Datei überschreiben")

    params = sub.add_parser("params", parents=[common], help="Gitterparameter über die Tiefe")
    params.add_argument("--depths", type=parse_range, help="Tiefen A:B:STEP in E_R")

    bloch = sub.add_parser("bloch", parents=[common], help="Bloch-Oszillation und Gradienten-Scan")
    bloch.add_argument("--images", action="store_true", help="PGM-Bilder je Zeitpunkt schreiben")
    bloch.add_argument("--scan-gradient", type=parse_range, metavar="A:B:STEP", help="Gradienten in Hz")

    squeezing = sub.add_parser("squeezing", parents=[common], help="Inkohärenter Anteil vs. Depletion")
    squeezing.add_argument("--depths", type=parse_range, help="Tiefen A:B:STEP in E_R")
    squeezing.add_argument("--model", choices=sorted(ENSEMBLE_MODELS), help="Zahlmodell des Ensembles")

    coherence = sub.add_parser("coherence", parents=[common], help="Kohärenzzeit und Tiefenscan")
    coherence.add_argument("--depths", type=parse_range, help="Tiefen A:B:STEP in E_R für den Scan")
    coherence.add_argument("--model", choices=sorted(ENSEMBLE_MODELS), help="Zahlmodell des Einzellaufs")

    sub.add_parser("rephase", parents=[common], help="Rephasierung nach Abschalten des Gradienten")

    fit = sub.add_parser("fit", parents=[common], help="Externes Profil anpassen")
    fit.add_argument("--profile", required=True, metavar="PATH", help="Profil-CSV (x_um, density)")
    return parser


# ---------- Aufbau ----------


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < Datei < Kommandozeile."""
    config = RunConfig()
    if args.config:
        repo = IniConfigRepository(args.config)
        config = build_run_config(repo.load(), str(repo.path))
    overrides = {
        "ensemble": {"seed": args.seed, "n_samples": args.samples, "workers": args.workers},
    }
    if args.no_noise:
        overrides["imaging"] = {"photon_shot": False, "atom_shot": False}
    return config.with_overrides(overrides)


def _default_depths() -> List[float]:
    start, stop, step = DEFAULT_DEPTHS
    return parse_range(f"{start}:{stop}:{step}")


def run(args: argparse.Namespace) -> int:
    if args.command == "init":
        path = ExperimentController.init_config(args.config or DEFAULT_CONFIG_FILE, overwrite=args.force)
        print(f"Konfiguration geschrieben: {path}")
        return EXIT_OK

    config = load_run_config(args)
    # MVC Wiring - Dependency Injection
    service = ExperimentService(config)
    view = ReportView(args.out, config.config_hash(), config.ensemble.seed)
    controller = ExperimentController(service, view)

    if args.command == "params":
        controller.params(args.depths or _default_depths())
    elif args.command == "bloch":
        controller.bloch(images=args.images, scan_gradients=args.scan_gradient)
    elif args.command == "squeezing":
        controller.squeezing(args.depths or _default_depths(), args.model)
    elif args.command == "coherence":
        controller.coherence(args.depths, args.model)
    elif args.command == "rephase":
        controller.rephase()
    elif args.command == "fit":
        return controller.fit(args.profile)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Einstiegspunkt; gibt den Exit-Code zurück."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.verbose, args.quiet)

    try:
        return run(args)
    except ConfigurationError as exc:
        logger.error("Konfigurationsfehler: %s", exc)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        logger.error("Keine Konvergenz: %s", exc)
        return EXIT_CONVERGENCE
    except ArtifactIOError as exc:
        logger.error("Ein-/Ausgabefehler: %s", exc)
        return EXIT_IO
    except LatticeSimError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DOMAIN
