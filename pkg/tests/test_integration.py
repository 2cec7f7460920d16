"""
Integration Tests für das Zusammenspiel der Schichten.

Konfigurationsdatei -> RunConfig, Profil-CSV -> Adapter -> Fit,
Ensemble -> Zeitentwicklung -> Flugzeitbild -> Auswertung.
"""

from __future__ import annotations

import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from adapter import ExternalProfile, ExternalProfileReader, ProfileAdapter
from model.analysis import fit_peaks, incoherent_fraction, model_density, transform_limited_width
from model.array_dynamics import evolve, init_array, phase_coherence
from model.entities import EnsembleSpec, GaussianPeak, HubbardParams, LatticeConfig, NumberStatistics, PeakModel
from model.errors import ArtifactIOError, ConfigurationError, DomainError
from model.lattice_params import derive_hubbard_params, parameter_table
from model.quantum_states import coherence_time
from model.repository import IniConfigRepository
from model.run_config import RunConfig, build_run_config
from model.tof_imaging import kinematic_spacing, synthesize_profile
from view.report_view import ReportView, format_cell


@pytest.fixture
def config_path(tmp_path: Path) -> Path:
    """Pfad einer frisch geschriebenen Default-Konfiguration."""
    path = tmp_path / "lattice_sim.ini"
    IniConfigRepository(path).write(RunConfig().to_sections())
    return path


@pytest.fixture(scope="module")
def params10() -> HubbardParams:
    """Hubbard-Parameter bei U = 10 E_R."""
    return derive_hubbard_params(LatticeConfig(depth_u=10.0))


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


class TestConfigRoundTrip:
    """Tests für Repository und Laufkonfiguration."""

    def test_default_file_round_trip(self, config_path: Path):
        """Test: geschriebene Defaults ergeben beim Lesen dieselbe Konfiguration und denselben Hash."""
        repo = IniConfigRepository(config_path)
        loaded = build_run_config(repo.load(), str(config_path))

        assert loaded == RunConfig()
        assert loaded.config_hash() == RunConfig().config_hash()
        assert len(loaded.config_hash()) == 16
        int(loaded.config_hash(), 16)

    def test_existing_file_is_not_overwritten(self, config_path: Path):
        """Test: init auf bestehender Datei nur mit overwrite."""
        repo = IniConfigRepository(config_path)
        with pytest.raises(ArtifactIOError):
            repo.write(RunConfig().to_sections())
        assert repo.write(RunConfig().to_sections(), overwrite=True) == config_path

    def test_missing_file(self, tmp_path: Path):
        """Test: fehlende Datei ist ein Konfigurationsfehler mit Hinweis auf init."""
        with pytest.raises(ConfigurationError, match="init"):
            IniConfigRepository(tmp_path / "fehlt.ini").load()

    def test_unknown_key_reports_line(self, tmp_path: Path):
        """Test: Tippfehler im Schlüssel wird mit Zeilennummer gemeldet."""
        path = write_text(tmp_path / "bad.ini", "[lattice]\ndepth_u = 12\ndepht_u = 10\n")
        raw = IniConfigRepository(path).load()
        with pytest.raises(ConfigurationError, match="Zeile 3"):
            build_run_config(raw, str(path))

    def test_unknown_section(self, tmp_path: Path):
        """Test: unbekannte Sektion wird abgelehnt."""
        path = write_text(tmp_path / "bad.ini", "[latice]\ndepth_u = 12\n")
        with pytest.raises(ConfigurationError, match="latice"):
            build_run_config(IniConfigRepository(path).load(), str(path))

    def test_malformed_value_and_syntax(self, tmp_path: Path):
        """Test: ungültiger Zahlenwert und Eintrag vor der ersten Sektion."""
        path = write_text(tmp_path / "bad.ini", "[lattice]\n\ndepth_u = zehn\n")
        with pytest.raises(ConfigurationError, match="Zeile 3"):
            build_run_config(IniConfigRepository(path).load(), str(path))

        path = write_text(tmp_path / "headless.ini", "depth_u = 10\n")
        with pytest.raises(ConfigurationError, match="Zeile 1"):
            IniConfigRepository(path).load()

    def test_invalid_values(self, tmp_path: Path):
        """Test: negative Zeiten und unbekannte Modelle sind Konfigurationsfehler."""
        path = write_text(tmp_path / "neg.ini", "[times]\nt_bloch_ms = -5\n")
        with pytest.raises(ConfigurationError, match="t_bloch_ms"):
            build_run_config(IniConfigRepository(path).load(), str(path))

        path = write_text(tmp_path / "model.ini", "[atoms]\nnumber_model = fock\n")
        with pytest.raises(ConfigurationError):
            build_run_config(IniConfigRepository(path).load(), str(path))

        path = write_text(tmp_path / "depth.ini", "[lattice]\ndepth_u = -1\n")
        with pytest.raises(ConfigurationError):
            build_run_config(IniConfigRepository(path).load(), str(path))

    def test_total_atoms_derives_central_occupation(self, tmp_path: Path):
        """Test: total_atoms aus der Datei legt die zentrale Besetzung über die Einhüllende fest."""
        path = write_text(tmp_path / "atoms.ini", "[atoms]\ntotal_atoms = 1500\n")
        config = build_run_config(IniConfigRepository(path).load(), str(path))
        lattice = config.lattice_config()

        assert config.atoms.total_atoms == 1500
        assert lattice.array_atoms == pytest.approx(1500.0)
        assert lattice.central_occupation == pytest.approx(1500.0 / lattice.envelope_sum)
        assert RunConfig().lattice_config().central_occupation == RunConfig().atoms.central_occupation

    def test_invalid_coupling_and_convention(self, tmp_path: Path):
        """Test: Kopplungsfaktor außerhalb [0, 1], unbekannte Breitenkonvention, negative Atomzahl."""
        path = write_text(tmp_path / "coupling.ini", "[lattice]\nrephase_coupling = 1.5\n")
        with pytest.raises(ConfigurationError, match="rephase_coupling"):
            build_run_config(IniConfigRepository(path).load(), str(path))

        path = write_text(tmp_path / "conv.ini", "[analysis]\ndephasing_convention = halbwert\n")
        with pytest.raises(ConfigurationError, match="Breitenkonvention"):
            build_run_config(IniConfigRepository(path).load(), str(path))

        path = write_text(tmp_path / "atoms.ini", "[atoms]\ntotal_atoms = -3\n")
        with pytest.raises(ConfigurationError, match="total_atoms"):
            build_run_config(IniConfigRepository(path).load(), str(path))

    def test_partial_file_keeps_defaults(self, tmp_path: Path):
        """Test: fehlende Schlüssel behalten ihre Defaults."""
        path = write_text(tmp_path / "part.ini", "[lattice]\ndepth_u = 22.5\n\n[ensemble]\nseed = 7\n")
        config = build_run_config(IniConfigRepository(path).load(), str(path))
        assert config.lattice.depth_u == 22.5
        assert config.ensemble.seed == 7
        assert config.times == RunConfig().times

    def test_override_precedence(self, tmp_path: Path):
        """Test: Datei < Kommandozeile, None-Werte ändern nichts, Hash folgt dem Seed."""
        path = write_text(tmp_path / "seed.ini", "[ensemble]\nseed = 7\nn_samples = 8\n")
        config = build_run_config(IniConfigRepository(path).load(), str(path))

        unchanged = config.with_overrides({"ensemble": {"seed": None, "n_samples": None}})
        assert unchanged == config

        overridden = config.with_overrides({"ensemble": {"seed": 99}})
        assert overridden.ensemble.seed == 99
        assert overridden.ensemble.n_samples == 8
        assert overridden.config_hash() != config.config_hash()

        with pytest.raises(ConfigurationError):
            config.with_overrides({"ensemble": {"sed": 1}})
        with pytest.raises(ConfigurationError):
            config.with_overrides({"optics": {"seed": 1}})

    def test_domain_objects(self):
        """Test: Umrechnung in SI-Einheiten."""
        config = RunConfig()
        lattice = config.lattice_config(depth_u=15.0, gradient_hz=450.0)
        assert lattice.depth_u == 15.0
        assert lattice.gradient_hz == pytest.approx(450.0)
        assert lattice.wavelength == pytest.approx(852e-9)

        params = derive_hubbard_params(lattice)
        imaging = config.imaging_config(params)
        assert imaging.tof_time == pytest.approx(12e-3)
        assert imaging.onsite_width == params.axial_width

        spec = config.ensemble_spec("coherent")
        assert spec.number_sigma_model == "coherent"
        assert spec.master_seed == config.ensemble.seed


class TestProfileAdapter:
    """Tests für das Einlesen externer Profile."""

    @pytest.fixture
    def profile_csv(self, tmp_path: Path, params10: HubbardParams) -> Path:
        """Profil-CSV mit drei Peaks und Kommentarkopf."""
        spacing = kinematic_spacing(params10, 12e-3)
        model = PeakModel(
            narrow=(
                GaussianPeak(-spacing, 0.03 * spacing, 200.0),
                GaussianPeak(0.0, 0.03 * spacing, 600.0),
                GaussianPeak(spacing, 0.03 * spacing, 200.0),
            ),
            broad=GaussianPeak(0.0, 0.6 * spacing, 300.0),
        )
        x_um = np.arange(-400, 401, dtype=float)
        density = model_density(model, x_um * 1e-6)
        lines = ["# aus einer anderen Auswertung", "x_um,density"]
        lines += [f"{x:.10g},{d:.10g}" for x, d in zip(x_um, density)]
        return write_text(tmp_path / "profile.csv", "\n".join(lines) + "\n")

    def test_read_and_adapt(self, profile_csv: Path):
        """Test: Mikrometer werden zu Meter, Kommentarzeilen werden übersprungen."""
        external = ExternalProfileReader().read(profile_csv)
        assert len(external.x_um) == 801
        assert external.source == str(profile_csv)

        profile = ProfileAdapter("cafe").adapt(external)
        assert profile.positions[0] == pytest.approx(-400e-6)
        assert profile.pixel_size == pytest.approx(1e-6)
        assert profile.config_hash == "cafe"
        assert profile.seed is None

    def test_adapted_profile_can_be_fitted(self, profile_csv: Path, params10: HubbardParams):
        """Test: eingelesenes Profil liefert den erwarteten inkohärenten Anteil."""
        profile = ProfileAdapter().adapt(ExternalProfileReader().read(profile_csv))
        fit = fit_peaks(profile, kinematic_spacing(params10, 12e-3))
        assert fit.converged
        assert incoherent_fraction(fit) == pytest.approx(300.0 / 1300.0, rel=1e-4)

    def test_rejects_bad_input(self, tmp_path: Path):
        """Test: fehlende Datei, fehlende Spalte, keine Zahl, ungleichmäßige Positionen."""
        with pytest.raises(ArtifactIOError):
            ExternalProfileReader().read(tmp_path / "fehlt.csv")

        path = write_text(tmp_path / "cols.csv", "x,density\n0,1\n1,2\n2,3\n")
        with pytest.raises(DomainError, match="x_um"):
            ExternalProfileReader().read(path)

        path = write_text(tmp_path / "text.csv", "x_um,density\n0,1\n1,viel\n")
        with pytest.raises(DomainError):
            ExternalProfileReader().read(path)

        uneven = ExternalProfile(x_um=[0.0, 1.0, 3.0], density=[1.0, 2.0, 1.0])
        with pytest.raises(DomainError):
            ProfileAdapter().adapt(uneven)
        descending = ExternalProfile(x_um=[2.0, 1.0, 0.0], density=[1.0, 2.0, 1.0])
        with pytest.raises(DomainError):
            ProfileAdapter().adapt(descending)
        short = ExternalProfile(x_um=[0.0, 1.0, 2.0], density=[1.0, 2.0])
        with pytest.raises(DomainError):
            ProfileAdapter().adapt(short)


class TestEnsembleToImage:
    """Tests für die Kette Ensemble -> Zeitentwicklung -> Bild -> Fit."""

    def test_locked_ensemble_is_coherent(self, params10: HubbardParams):
        """Test: phasenstarres Ensemble ohne Dynamik zeigt kaum inkohärenten Anteil."""
        config = RunConfig().with_overrides({"imaging": {"resolution_blur_um": 0.0}})
        imaging = config.imaging_config(params10)
        state = init_array(LatticeConfig(), params10, EnsembleSpec(n_samples=16, phase_sigma=0.0))

        profile = synthesize_profile(state, imaging, params10)
        spacing = kinematic_spacing(params10, imaging.tof_time)
        fit = fit_peaks(profile, spacing)

        assert fit.converged
        assert incoherent_fraction(fit) < 0.02
        assert fit.model.central.width / spacing == pytest.approx(transform_limited_width(8.0), rel=0.1)

    def test_collapse_without_tunneling_matches_closed_form(self, params10: HubbardParams):
        """Test: ohne Tunneln fällt die Nachbarkohärenz bei tau_c = 1 / (g beta sqrt(N)) auf 1/e (10%)."""
        local = replace(params10, gamma=0.0)
        lattice = LatticeConfig(envelope="flat")
        tau = coherence_time(NumberStatistics(150.0, math.sqrt(150.0)), local.g_beta)

        state = init_array(lattice, local, EnsembleSpec(n_samples=256, master_seed=5))
        times = np.linspace(0.0, 2.0 * tau, 41)
        trajectory = evolve(state, local, 0.0, times[-1], record_times=times)
        coherence = np.array([phase_coherence(s) for s in trajectory.states])

        crossing = int(np.flatnonzero(coherence < math.exp(-1.0))[0])
        t0, t1 = times[crossing - 1], times[crossing]
        c0, c1 = coherence[crossing - 1], coherence[crossing]
        t_e = t0 + (c0 - math.exp(-1.0)) * (t1 - t0) / (c0 - c1)
        assert t_e == pytest.approx(tau, rel=0.1)

    def test_dephased_array_is_broad(self, params10: HubbardParams):
        """Test: vollständig dephasiertes Ensemble hat überwiegend inkohärenten Anteil."""
        config = RunConfig()
        imaging = config.imaging_config(params10)
        state = init_array(LatticeConfig(), params10, EnsembleSpec(n_samples=128, phase_sigma=10.0))
        profile = synthesize_profile(state, imaging, params10)
        fit = fit_peaks(profile, kinematic_spacing(params10, imaging.tof_time))
        assert fit.converged
        assert incoherent_fraction(fit) > 0.7


class TestReportView:
    """Tests für die CSV-Ausgabe."""

    def test_header_and_format(self, tmp_path: Path):
        """Test: Provenienzkopf, Zahlenformat und Wahrheitswerte."""
        view = ReportView(tmp_path, "0123456789abcdef", 42, stream=io.StringIO())
        path = view.write_csv("demo.csv", ["a", "b", "c"], [(1.5, True, float("nan")), (np.float64(2.0), False, 3)])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# config_hash=0123456789abcdef"
        assert lines[1] == "# seed=42"
        assert lines[2].startswith("# artifact_version=")
        assert lines[3] == "a,b,c"
        assert lines[4] == "1.5,true,nan"
        assert lines[5] == "2,false,3"
        assert format_cell(1e-12) == "1e-12"

    def test_identical_inputs_give_identical_bytes(self, tmp_path: Path):
        """Test: zweimal dieselben Zeilen ergeben byteidentische Dateien."""
        rows = [(0.1 * k, k * k) for k in range(5)]
        first = ReportView(tmp_path / "a", "h", 1, stream=io.StringIO()).write_csv("x.csv", ["t", "v"], rows)
        second = ReportView(tmp_path / "b", "h", 1, stream=io.StringIO()).write_csv("x.csv", ["t", "v"], rows)
        assert first.read_bytes() == second.read_bytes()

    def test_params_and_summary(self, tmp_path: Path):
        """Test: Parametertabelle mit einer Zeile pro Tiefe und Konsolenzusammenfassung."""
        stream = io.StringIO()
        view = ReportView(tmp_path, "h", 1, stream=stream)
        config = RunConfig()
        path = view.write_params(parameter_table(config.lattice_config(), [5.0, 10.0]))
        data = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
        assert len(data) == 3
        assert "2 Tiefen" in stream.getvalue()

    def test_profile_csv_reads_back(self, tmp_path: Path, params10: HubbardParams):
        """Test: geschriebenes Profil-CSV wird vom Adapter unverändert eingelesen."""
        config = RunConfig()
        imaging = config.imaging_config(params10)
        state = init_array(LatticeConfig(), params10, EnsembleSpec(n_samples=4))
        profile = synthesize_profile(state, imaging, params10)

        path = ReportView(tmp_path, "h", 1, stream=io.StringIO()).write_profile("frame_000.csv", profile)
        header = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")][0]
        read_back = ProfileAdapter().adapt(ExternalProfileReader().read(path))

        assert header == "x_um,density"
        assert read_back.positions == pytest.approx(profile.positions, rel=1e-9)
        assert read_back.density == pytest.approx(profile.density, rel=1e-9, abs=1e-12)

    def test_unwritable_directory(self, tmp_path: Path):
        """Test: Ausgabeziel ist eine Datei -> Ein-/Ausgabefehler."""
        blocker = write_text(tmp_path / "blocker", "x")
        view = ReportView(blocker / "out", "h", 1, stream=io.StringIO())
        with pytest.raises(ArtifactIOError):
            view.write_csv("x.csv", ["a"], [(1,)])
