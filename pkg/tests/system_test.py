"""
Systemtests für den Gitter-Simulator.

Testet die kompletten Ketten der Service-Schicht (Konfiguration + Modell) ohne CLI.
"""

import math

import numpy as np
import pytest

from model.analysis import envelope_width, transform_limited_width
from model.quantum_states import josephson_frequency
from model.errors import DomainError
from model.run_config import RunConfig
from model.service import ExperimentService, snap_to_periods


def make_service(**sections) -> ExperimentService:
    """Service mit überschriebenen Sektionen der Default-Konfiguration."""
    return ExperimentService(RunConfig().with_overrides(sections))


class TestCoherenceTime:
    """
    Systemtest-Szenario: Kohärenzzeit aus simulierten Flugzeitbildern.

    Ensemble ziehen, im gekippten Gitter entwickeln, Bilder synthetisieren,
    Breiten anpassen und das Dephasierungsgesetz fitten.
    """

    def test_coherent_array_at_10_er(self):
        """
        Szenario: kohärente Zahlstatistik bei U = 10 E_R.

        Schritte:
        1. Service mit Default-Konfiguration aufsetzen
        2. Kohärenzlauf mit kohärentem Modell
        3. tau_c liegt im Band 14.2 ms +- 25%
        """
        # ARRANGE
        service = make_service()

        # ACT
        run = service.coherence_run(depth_u=10.0, number_model="coherent")

        # ASSERT
        assert 10.65e-3 <= run.scan.tau_c <= 17.75e-3, f"tau_c = {run.scan.tau_c * 1e3:.2f} ms"
        assert run.scan.w_f > run.scan.w_0
        assert run.theory_tau == pytest.approx(1.0 / (math.sqrt(150.0) * 2 * math.pi * 1.19), rel=0.1)
        assert run.width_errors.shape == run.times.shape == run.widths.shape
        assert np.count_nonzero(run.converged) >= 5
        assert run.array_theory_tau > run.theory_tau
        assert abs(run.order_parameter[0]) == pytest.approx(math.sqrt(150.0), rel=1e-3)

    def test_squeezed_array_at_22_5_er(self):
        """
        Szenario: gequetschte Zahlstatistik bei U = 22.5 E_R.

        Schritte:
        1. Kohärenzlauf mit gequetschtem Modell
        2. tau_c liegt im Band 19.3 ms (breit gefasst)
        3. Theoriewert länger als der kohärente
        """
        # ARRANGE
        service = make_service()

        # ACT
        run = service.coherence_run(depth_u=22.5, number_model="squeezed")
        _, params = service.lattice(22.5)

        # ASSERT
        assert 11.85e-3 <= run.scan.tau_c <= 28.5e-3, f"tau_c = {run.scan.tau_c * 1e3:.2f} ms"
        assert run.theory_tau > service.theory_coherence_time(params, "coherent")

    def test_squeezing_gain_against_coherent_array(self):
        """
        Szenario: Gewinn der gequetschten Statistik bei U = 22.5 E_R.

        Schritte:
        1. Kohärenzlauf mit gequetschtem Modell
        2. Vergleich mit der Kohärenzzeit eines kohärenten Arrays im selben Gitter
        3. Verhältnis 2.1 +- 0.4
        """
        # ARRANGE
        service = make_service()
        _, params = service.lattice(22.5)

        # ACT
        run = service.coherence_run(depth_u=22.5, number_model="squeezed")
        reference = service.array_theory_coherence_time(params, "coherent")

        # ASSERT
        ratio = run.scan.tau_c / reference
        assert 1.7 <= ratio <= 2.5, f"Verhältnis {ratio:.2f}"

    def test_result_does_not_depend_on_workers(self):
        """
        Szenario: gleiche Konfiguration mit 1, 4 und 8 Threads.

        Schritte:
        1. Drei Läufe mit gleichem Seed und unterschiedlicher Worker-Zahl
        2. Breiten sind bitgleich
        """
        # ARRANGE
        runs = []
        for workers in (1, 4, 8):
            service = make_service(
                ensemble={"n_samples": 48, "workers": workers},
                analysis={"n_times": 5, "time_span_tau": 1.0},
            )
            # ACT
            runs.append(service.coherence_run(number_model="coherent"))

        # ASSERT
        for other in runs[1:]:
            assert np.array_equal(runs[0].scan.widths, other.scan.widths)
            assert np.array_equal(runs[0].scan.times, other.scan.times)

    def test_hold_times_are_whole_bloch_periods(self):
        """Test: Haltezeiten liegen auf ganzen Bloch-Perioden."""
        period = 1.0 / 900.0
        snapped = snap_to_periods(np.array([0.0, 0.4 * period, 2.6 * period, 2.9 * period]), period)
        assert np.allclose(snapped / period, [0.0, 3.0])

    def test_depth_scan_rejects_outside_range(self):
        """Test: Tiefenscan nur in [5, 24] E_R."""
        with pytest.raises(DomainError):
            make_service().coherence_vs_depth([4.0, 10.0])


class TestSqueezingCurve:
    """
    Systemtest-Szenario: inkohärenter Anteil direkt nach dem Laden.
    """

    def test_fraction_grows_with_depth(self):
        """
        Szenario: gequetschtes Ensemble ohne Rauschen bei 5, 15 und 24 E_R.

        Schritte:
        1. Rauschen abschalten
        2. Squeezing-Kurve berechnen
        3. Anteil wächst mit der Tiefe und bleibt bei 5 E_R unter 5%
        """
        # ARRANGE
        service = make_service(imaging={"photon_shot": False, "atom_shot": False})

        # ACT
        rows = service.squeezing_curve([5.0, 15.0, 24.0])

        # ASSERT
        fractions = [row.incoherent_fraction for row in rows]
        assert fractions[0] < fractions[1] < fractions[2]
        assert fractions[0] < 0.05
        assert rows[0].depletion < rows[2].depletion
        assert rows[0].sigma_ratio < rows[2].sigma_ratio
        for row in rows:
            assert abs(row.incoherent_fraction - row.depletion) < 0.1

    def test_coherent_model_is_nearly_coherent(self):
        """Test: kohärente Statistik zeigt keinen nennenswerten inkohärenten Anteil."""
        service = make_service(imaging={"photon_shot": False, "atom_shot": False})
        rows = service.squeezing_curve([10.0], number_model="coherent")
        assert rows[0].incoherent_fraction < 0.05
        assert rows[0].sigma_ratio == pytest.approx(1.0)


class TestGradientScan:
    """
    Systemtest-Szenario: Breite nach fester Haltezeit über den Gradienten.
    """

    def test_width_grows_with_gradient(self):
        """
        Szenario: Gradienten von gamma / 16 bis 10 gamma bei 40 ms Haltezeit.

        Schritte:
        1. Gradienten-Scan über sechs Punkte
        2. Haltezeit exakt 40 ms, Breite monoton nicht fallend
        3. Unter gamma / 4 höchstens 1.5-fache Fourier-Grenze, ab 5 gamma gesättigt
        """
        # ARRANGE
        service = make_service(ensemble={"n_samples": 32})
        _, params = service.lattice()
        gamma_hz = params.gamma / (2 * math.pi)
        factors = [1 / 16, 1 / 8, 1.0, 2.0, 5.0, 10.0]

        # ACT
        rows = service.gradient_scan([f * gamma_hz for f in factors])

        # ASSERT
        widths = [row.width for row in rows]
        assert all(row.hold == pytest.approx(0.04) for row in rows)
        assert all(row.status in ("ok", "saturated") for row in rows), [row.status for row in rows]
        assert all(later >= earlier - 0.005 for earlier, later in zip(widths, widths[1:])), widths
        for row in rows[:2]:
            assert row.status == "ok"
            assert row.width <= 1.5 * transform_limited_width(8.0), widths
        assert [row.status for row in rows[-2:]] == ["saturated", "saturated"]
        assert rows[-1].width == pytest.approx(0.175)


class TestBlochOscillation:
    """
    Systemtest-Szenario: Bloch-Oszillation im gekippten Gitter.
    """

    def test_quasimomentum_sweeps_zone(self):
        """
        Szenario: eine Periode mit acht Bildern.

        Schritte:
        1. Bloch-Lauf berechnen
        2. Quasiimpuls nach einer Periode wieder am Start
        3. Bei halber Periode am Zonenrand, Gewichte in [0, 1]
        """
        # ARRANGE
        service = make_service(
            ensemble={"n_samples": 8},
            times={"bloch_periods": 1, "frames_per_period": 8},
            imaging={"photon_shot": False, "atom_shot": False},
        )

        # ACT
        run = service.bloch_run()

        # ASSERT
        assert run.bloch_period == pytest.approx(1.0 / 900.0)
        assert len(run.profiles) == 9
        q = [result.fraction for result in run.quasimomenta]
        assert abs(q[-1] - q[0]) < 0.02
        assert abs(abs(q[4] - q[0]) - 0.5) < 0.05
        assert np.all((run.peak_weights >= 0.0) & (run.peak_weights <= 1.0))
        assert run.peak_weights[0, 1] > run.peak_weights[0, 0]

    def test_requires_gradient(self):
        """Test: ohne Gradient keine Bloch-Oszillation."""
        with pytest.raises(DomainError):
            make_service(gradient={"gradient_hz": 0.0}).bloch_run()


class TestRephasing:
    """
    Systemtest-Szenario: Rephasierung nach Abschalten des Gradienten.
    """

    def test_dephased_start_and_frozen_hold(self):
        """
        Szenario: 80 ms dephasieren, danach ohne Tunneln halten.

        Schritte:
        1. Rephasierlauf ohne Tunnelkopplung in der Haltephase
        2. Startbreite erfüllt die Vorbedingung
        3. Breite bleibt nahe der dephasierten Breite
        """
        # ARRANGE
        service = make_service(ensemble={"n_samples": 128}, analysis={"rephase_points": 7})

        # ACT
        run = service.rephase_run(rephase_tunneling=False)

        # ASSERT
        assert run.precondition_met
        assert run.widths[0] >= 0.8 * run.final_width
        assert np.all(np.abs(run.widths / run.widths[0] - 1.0) < 0.1)
        assert run.t_bloch == pytest.approx(72 / 900.0)

    def test_without_dephasing_nothing_to_rephase(self):
        """
        Szenario: T_Bloch = 0.

        Schritte:
        1. Rephasierlauf ohne Dephasierzeit
        2. Breite startet klein und bleibt klein, Vorbedingung nicht erfüllt
        3. Zwei-Platz-Frequenzen werden mitgeliefert
        """
        # ARRANGE
        service = make_service(ensemble={"n_samples": 32}, analysis={"rephase_points": 9})
        _, params = service.lattice()

        # ACT
        run = service.rephase_run(t_bloch=0.0)

        # ASSERT
        assert not run.precondition_met
        assert run.widths[0] < 0.1
        assert run.widths.max() < 0.5 * envelope_width(params)
        assert run.josephson_frequency > 0 and run.plasma_frequency > 0
        assert run.two_site.coherence.shape == run.times.shape
        assert 0.0 < run.revival_time <= run.times[-1]

    def test_width_revives_near_josephson_period(self):
        """
        Szenario: 80 ms dephasieren, danach 30 ms mit Tunnelkopplung halten.

        Schritte:
        1. Rephasierlauf mit Default-Konfiguration
        2. Kleinste Breite nach 2 pi / omega_J (Faktor 1.5, etwa 9.6 ms)
        3. Zwei-Platz-Paar schwingt innerhalb 10% mit omega_J
        """
        # ARRANGE
        service = make_service()
        _, params = service.lattice()

        # ACT
        run = service.rephase_run()

        # ASSERT
        omega_j = josephson_frequency(150.0, params.g_beta, params.gamma)
        assert run.precondition_met
        assert 6.4e-3 <= run.revival_time <= 14.4e-3, f"Minimum bei {run.revival_time * 1e3:.2f} ms"
        assert run.widths.min() < run.widths[0]
        assert run.two_site_frequency == pytest.approx(omega_j, rel=0.1)
        assert run.hold_coupling == pytest.approx(0.25 * params.gamma)
