"""
End-to-End Tests für die Kommandozeile.

Die Unterbefehle laufen über controller.cli.main wie beim Aufruf von app.py;
geprüft werden Exit-Codes und die geschriebenen Artefakte.
"""

from __future__ import annotations

import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from controller.cli import build_parser, main, parse_range
from model.analysis import model_density
from model.entities import GaussianPeak, LatticeConfig, PeakModel
from model.lattice_params import derive_hubbard_params
from model.tof_imaging import kinematic_spacing

ROOT = Path(__file__).resolve().parent.parent


def read_rows(path: Path) -> list[dict]:
    """CSV-Datenzeilen ohne Kommentarkopf."""
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture
def workdir(tmp_path: Path) -> Path:
    """Arbeitsverzeichnis mit Default-Konfiguration."""
    assert main(["init", "--config", str(tmp_path / "lattice_sim.ini")]) == 0
    return tmp_path


@pytest.fixture
def small_config(workdir: Path) -> Path:
    """Verkleinerte Konfiguration für schnelle Läufe."""
    path = workdir / "small.ini"
    path.write_text(
        "[ensemble]\nn_samples = 32\n\n"
        "[analysis]\nn_times = 5\ntime_span_tau = 1.5\n\n"
        "[times]\nbloch_periods = 1\nframes_per_period = 4\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def profile_csv(tmp_path: Path) -> Path:
    """Synthetisches Profil mit drei Peaks und breitem Untergrund."""
    spacing = kinematic_spacing(derive_hubbard_params(LatticeConfig()), 12e-3)
    model = PeakModel(
        narrow=(
            GaussianPeak(-spacing, 0.03 * spacing, 250.0),
            GaussianPeak(0.0, 0.03 * spacing, 700.0),
            GaussianPeak(spacing, 0.03 * spacing, 250.0),
        ),
        broad=GaussianPeak(0.0, 0.6 * spacing, 300.0),
    )
    x_um = np.arange(-400, 401, dtype=float)
    density = model_density(model, x_um * 1e-6)
    path = tmp_path / "profile.csv"
    lines = ["x_um,density"] + [f"{x:.10g},{d:.10g}" for x, d in zip(x_um, density)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestArguments:
    """Tests für das Parsen der Argumente."""

    def test_parse_range(self):
        """Test: Bereiche, Einzelwerte und Listen."""
        assert parse_range("5:24:1") == [float(v) for v in range(5, 25)]
        assert parse_range("10") == [10.0]
        assert parse_range("5,10.5,24") == [5.0, 10.5, 24.0]
        assert parse_range("0:900:450") == [0.0, 450.0, 900.0]

    def test_invalid_arguments(self):
        """Test: ungültige Argumente enden mit Exit-Code 2."""
        assert main(["params", "--depths", "24:5:1"]) == 2
        assert main(["unbekannt"]) == 2
        assert main(["fit"]) == 2
        assert main(["params", "-v", "-q"]) == 2

    def test_help_lists_subcommands(self):
        """Test: alle Unterbefehle sind registriert."""
        text = build_parser().format_help()
        for command in ("init", "params", "bloch", "squeezing", "coherence", "rephase", "fit"):
            assert command in text


class TestInitAndParams:
    """E2E: Konfiguration anlegen und Parametertabelle schreiben."""

    def test_init_refuses_overwrite(self, workdir: Path):
        """Test: zweites init ohne --force ist ein Ein-/Ausgabefehler, mit --force erfolgreich."""
        config = str(workdir / "lattice_sim.ini")
        assert main(["init", "--config", config]) == 4
        assert main(["init", "--config", config, "--force"]) == 0

    def test_params_table(self, workdir: Path):
        """Test: 20 Tiefen von 5 bis 24 E_R mit Provenienzkopf."""
        out = workdir / "out"
        code = main(["params", "--config", str(workdir / "lattice_sim.ini"), "--depths", "5:24:1", "--out", str(out)])

        assert code == 0
        text = (out / "params.csv").read_text(encoding="utf-8")
        assert text.startswith("# config_hash=")
        rows = read_rows(out / "params.csv")
        assert len(rows) == 20
        row12 = next(r for r in rows if float(r["depth_u"]) == 12.0)
        expected = derive_hubbard_params(LatticeConfig(depth_u=12.0)).gamma / (2 * np.pi)
        assert float(row12["gamma_hz"]) == pytest.approx(expected, rel=1e-6)
        assert all(r["zener_flag"] == "false" for r in rows)

    def test_params_without_config_file_uses_defaults(self, tmp_path: Path):
        """Test: ohne --config gelten die eingebauten Defaults."""
        assert main(["params", "--depths", "10", "--out", str(tmp_path)]) == 0
        assert len(read_rows(tmp_path / "params.csv")) == 1

    def test_missing_or_bad_config(self, tmp_path: Path):
        """Test: fehlende Datei und unbekannter Schlüssel ergeben Exit-Code 2."""
        assert main(["params", "--config", str(tmp_path / "fehlt.ini"), "--out", str(tmp_path)]) == 2

        bad = tmp_path / "bad.ini"
        bad.write_text("[lattice]\ndepht_u = 10\n", encoding="utf-8")
        assert main(["params", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_unwritable_output(self, tmp_path: Path):
        """Test: Ausgabeverzeichnis unter einer Datei ergibt Exit-Code 4."""
        blocker = tmp_path / "blocker"
        blocker.write_text("x", encoding="utf-8")
        assert main(["params", "--depths", "10", "--out", str(blocker / "out")]) == 4


class TestFitCommand:
    """E2E: externes Profil anpassen."""

    def test_fit_report(self, profile_csv: Path, tmp_path: Path):
        """Test: Fit-Bericht mit allen Parametern und inkohärentem Anteil."""
        out = tmp_path / "out"
        assert main(["fit", "--profile", str(profile_csv), "--out", str(out)]) == 0

        rows = {r["parameter"]: r for r in read_rows(out / "fit_report.csv")}
        assert rows["converged"]["value"] == "true"
        assert float(rows["incoherent_fraction"]["value"]) == pytest.approx(300.0 / 1500.0, rel=1e-4)
        assert float(rows["narrow1_area"]["value"]) == pytest.approx(700.0, rel=1e-4)
        assert rows["kinematic_spacing"]["value"] == "false"

    def test_fit_without_convergence(self, profile_csv: Path, tmp_path: Path):
        """Test: zu wenige Iterationen ergeben Exit-Code 3 und trotzdem einen Bericht."""
        config = tmp_path / "short.ini"
        config.write_text("[analysis]\nmax_iterations = 1\n", encoding="utf-8")
        out = tmp_path / "out"
        assert main(["fit", "--profile", str(profile_csv), "--config", str(config), "--out", str(out)]) == 3
        rows = {r["parameter"]: r for r in read_rows(out / "fit_report.csv")}
        assert rows["converged"]["value"] == "false"

    def test_fit_input_errors(self, tmp_path: Path):
        """Test: fehlende Profildatei ergibt 4, fehlende Spalte 5."""
        assert main(["fit", "--profile", str(tmp_path / "fehlt.csv"), "--out", str(tmp_path)]) == 4

        broken = tmp_path / "broken.csv"
        broken.write_text("x,y\n1,2\n2,3\n3,4\n", encoding="utf-8")
        assert main(["fit", "--profile", str(broken), "--out", str(tmp_path)]) == 5


class TestSimulationCommands:
    """E2E: Simulationsläufe über die Kommandozeile."""

    def test_bloch_with_images(self, small_config: Path, tmp_path: Path):
        """Test: Trajektorie, Peakgewichte und ein PGM je Bild."""
        out = tmp_path / "bloch"
        code = main(["bloch", "--config", str(small_config), "--samples", "4", "--no-noise", "--images", "--out", str(out)])

        assert code == 0
        trajectory = read_rows(out / "trajectory.csv")
        assert len(trajectory) == 5
        assert list(trajectory[0]) == ["t_ms", "q_zone_fraction", "norm"]
        assert all(float(r["norm"]) == pytest.approx(1.0, abs=1e-6) for r in trajectory)
        assert len(read_rows(out / "peak_weights.csv")) == 5
        frames = sorted(out.glob("frame_*.pgm"))
        assert len(frames) == 5
        assert frames[0].read_bytes().startswith(b"P5\n")
        assert (out / "frame_000.txt").exists()
        profiles = sorted(out.glob("frame_*.csv"))
        assert len(profiles) == 5
        assert list(read_rows(profiles[0])[0]) == ["x_um", "density"]

    def test_gradient_scan(self, small_config: Path, tmp_path: Path):
        """Test: 20 Gradienten von 100 bis 2000 Hz, Breite monoton nicht fallend bei fester Haltezeit."""
        out = tmp_path / "scan"
        code = main(["bloch", "--config", str(small_config), "--samples", "32", "--scan-gradient", "100:2000:100", "--out", str(out)])

        assert code == 0
        rows = read_rows(out / "width_vs_gradient.csv")
        assert list(rows[0]) == ["gradient_hz", "hold_ms", "width", "width_err", "incoherent_fraction", "status"]
        assert [float(r["gradient_hz"]) for r in rows] == [100.0 * k for k in range(1, 21)]
        assert all(float(r["hold_ms"]) == pytest.approx(40.0) for r in rows)
        assert all(r["status"] in ("ok", "saturated") for r in rows)
        widths = [float(r["width"]) for r in rows]
        assert all(later >= earlier - 0.005 for earlier, later in zip(widths, widths[1:])), widths
        assert rows[-1]["status"] == "saturated"

    def test_squeezing(self, small_config: Path, tmp_path: Path):
        """Test: Squeezing-Kurve für zwei Tiefen."""
        out = tmp_path / "sq"
        code = main(["squeezing", "--config", str(small_config), "--depths", "5,24", "--no-noise", "--out", str(out)])

        assert code == 0
        rows = read_rows(out / "squeezing.csv")
        assert len(rows) == 2
        assert float(rows[0]["incoherent_fraction"]) < float(rows[1]["incoherent_fraction"])

    def test_coherence_is_reproducible(self, small_config: Path, tmp_path: Path):
        """Test: gleiche Eingaben mit 1 und 4 Threads ergeben byteidentische Dateien."""
        outputs = []
        for workers in ("1", "4"):
            out = tmp_path / f"coh{workers}"
            code = main(["coherence", "--config", str(small_config), "--workers", workers, "--model", "coherent", "--out", str(out)])
            assert code == 0
            outputs.append(out)

        for name in ("coherence_widths.csv", "coherence_fit.csv", "order_parameter.csv"):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
        rows = read_rows(outputs[0] / "coherence_widths.csv")
        assert len(rows) == 5
        assert list(rows[0]) == ["t_ms", "mean_width", "sem_width"]
        order = read_rows(outputs[0] / "order_parameter.csv")
        assert list(order[0]) == ["t_ms", "re", "im", "abs"]
        assert float(order[0]["abs"]) > float(order[-1]["abs"])

    def test_seed_changes_output(self, small_config: Path, tmp_path: Path):
        """Test: anderer Seed, anderer Hash im Kopf."""
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["params", "--config", str(small_config), "--depths", "10", "--out", str(first)]) == 0
        assert main(["params", "--config", str(small_config), "--depths", "10", "--seed", "99", "--out", str(second)]) == 0
        head_a = (first / "params.csv").read_text(encoding="utf-8").splitlines()[:2]
        head_b = (second / "params.csv").read_text(encoding="utf-8").splitlines()[:2]
        assert head_a != head_b
        assert head_b[1] == "# seed=99"


class TestApplicationEntryPoint:
    """E2E: Aufruf als Programm."""

    def test_app_runs_as_script(self, tmp_path: Path):
        """Test: python app.py params schreibt die Tabelle und endet mit 0."""
        result = subprocess.run(
            [sys.executable, str(ROOT / "app.py"), "params", "--depths", "5:6:1", "--out", str(tmp_path)],
            cwd=ROOT,
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert result.returncode == 0, result.stderr
        assert len(read_rows(tmp_path / "params.csv")) == 2
        assert "params.csv" in result.stdout
