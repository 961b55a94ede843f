import math

import numpy as np
import pytest

from skinflow.experiments import (
    OscillationError,
    build_table1,
    build_table2,
    default_gamma_grid,
    detect_oscillation,
    onset_time,
    run_scissors,
    run_xi_scan,
    sublattice_layout_sites,
)
from skinflow.lattice import ModelParams, skin_profile
from skinflow.qlif import QlifSeries, default_time_grid


def sample_index(grid, t):
    return int(np.argmin(np.abs(np.asarray(grid) - t)))


def test_default_gamma_grid():
    grid = default_gamma_grid()
    assert len(grid) == 37
    assert max(abs(g) for g in grid) == pytest.approx(0.9)
    assert all((-g) in grid for g in grid)
    assert 0.0 in grid


class TestScissors:
    @pytest.fixture(scope="class")
    def result(self):
        return run_scissors()

    def test_regimes_annotated(self, result):
        assert result.regime_bounds == (4.0, 10.0)
        assert [c.gamma for c in result.curves] == [0.0, 0.3, -0.3]

    def test_hermitian_overlap_before_echoes(self, result):
        c0 = result.curves[0]
        early = c0.times <= 10.0
        assert np.max(np.abs(c0.delta[early])) < 1e-12

    def test_asymmetry_signs_at_t10(self, result):
        for curves, sign in ((result.curves[1], +1), (result.curves[2], -1)):
            val = curves.delta[sample_index(curves.times, 10.0)]
            assert math.copysign(1, val) == sign
            assert abs(val) > 1e-2

    def test_regime_one_quiescence(self, result):
        for curves in result.curves:
            early = curves.times < 0.5
            assert np.max(np.abs(curves.t_r_to_l[early])) < 1e-6
            assert np.max(np.abs(curves.t_l_to_r[early])) < 1e-6


class TestGammaScan:
    def test_zero_point_vanishes(self, gamma_scan):
        i0 = sample_index(gamma_scan.gammas, 0.0)
        assert abs(gamma_scan.delta_at_t[10.0][i0]) < 1e-12
        assert abs(gamma_scan.delta_at_t[15.0][i0]) < 1e-12

    def test_sign_rule_full_grid_at_t15(self, gamma_scan):
        vals = gamma_scan.delta_at_t[15.0]
        for g, v in zip(gamma_scan.gammas, vals):
            if 0.05 - 1e-12 <= abs(g) <= 0.9 + 1e-12:
                assert math.copysign(1, v) == math.copysign(1, g), f"gamma={g}: {v}"

    def test_sign_rule_moderate_range_at_t10(self, gamma_scan):
        vals = gamma_scan.delta_at_t[10.0]
        for g, v in zip(gamma_scan.gammas, vals):
            if 0.05 - 1e-12 <= abs(g) <= 0.45 + 1e-12:
                assert math.copysign(1, v) == math.copysign(1, g), f"gamma={g}: {v}"

    def test_peaks_at_moderate_gamma(self, gamma_scan):
        assert 0.1 <= gamma_scan.peak_gamma_pos <= 0.4
        assert -0.4 <= gamma_scan.peak_gamma_neg <= -0.1

    def test_decay_toward_unidirectional_limit(self, gamma_scan):
        vals = np.abs(gamma_scan.delta_at_t[10.0])
        gam = gamma_scan.gammas
        for sign in (+1, -1):
            peak = np.max(vals[np.sign(gam) == sign])
            edge = vals[sample_index(gam, 0.9 * sign)]
            assert edge < peak / 2


class TestXiScan:
    @pytest.fixture(scope="class")
    def pos(self):
        return run_xi_scan("gamma_pos")

    @pytest.fixture(scope="class")
    def neg(self):
        return run_xi_scan("gamma_neg")

    def test_invalid_branch(self):
        with pytest.raises(ValueError):
            run_xi_scan("left")

    def test_gamma_inversion_roundtrip(self, pos, neg):
        for scan in (pos, neg):
            for xi, gamma in zip(scan.xis, scan.gammas):
                assert skin_profile(ModelParams(gamma=gamma)).xi == pytest.approx(xi, abs=1e-9)
        assert np.all(pos.gammas > 0)
        assert np.all(neg.gammas < 0)

    def test_branch_signs_at_moderate_xi(self, pos, neg):
        window = (pos.xis >= 3.0) & (pos.xis <= 10.0)
        assert np.all(pos.delta_T[window] > 0)
        assert np.all(neg.delta_T[window] < 0)

    def test_interior_maximum_and_hermitian_approach(self, pos, neg):
        for scan in (pos, neg):
            mags = np.abs(scan.delta_T)
            peak = float(np.max(mags))
            assert mags[0] < peak / 2          # strong-localization side
            assert mags[-1] < peak / 2         # Hermitian side (largest xi)
            assert 1.0 < scan.xi_opt < 25.0

    def test_peak_position_at_later_sample_time(self):
        for branch in ("gamma_pos", "gamma_neg"):
            scan = run_xi_scan(branch, sample_time=15.0)
            assert 2.0 <= scan.xi_opt <= 6.0


class TestSublattice:
    def test_layout_sites(self):
        assert sublattice_layout_sites("aaa", 20, 6) == (20, 14, 26)
        assert sublattice_layout_sites("bbb", 20, 6) == (21, 15, 27)
        assert sublattice_layout_sites("aab", 20, 6) == (20, 14, 25)
        assert sublattice_layout_sites("aba", 20, 6) == (20, 15, 26)
        assert sublattice_layout_sites("abb", 20, 6) == (20, 15, 25)

    def test_pure_layouts_pass_through_origin(self, sublattice):
        i0 = sample_index(sublattice.gammas, 0.0)
        assert abs(sublattice.curves["aaa"][i0]) < 1e-12
        assert abs(sublattice.curves["bbb"][i0]) < 1e-12

    def test_mirror_relation_across_grid(self, sublattice):
        # bbb(gamma) = -aaa(-gamma), exact for the reflection-paired layouts
        gam = sublattice.gammas
        aaa, bbb = sublattice.curves["aaa"], sublattice.curves["bbb"]
        for i, g in enumerate(gam):
            j = sample_index(gam, -g)
            assert bbb[i] == pytest.approx(-aaa[j], abs=1e-9)

    def test_mixed_layouts_offset_at_origin(self, sublattice):
        i0 = sample_index(sublattice.gammas, 0.0)
        offsets = {label: sublattice.curves[label][i0]
                   for label in ("aab", "aba", "abb")}
        assert all(abs(v) > 1e-4 for v in offsets.values())
        assert 0.03 <= abs(offsets["abb"]) <= 0.12


class TestOnsetTime:
    def test_never_exceeding(self):
        times = default_time_grid(t_max=5.0)
        series = QlifSeries(times=times, values=np.zeros_like(times))
        assert onset_time(series) is None

    def test_step_series_crossing(self):
        times = default_time_grid(t_max=5.0)
        values = np.where(times >= 3.2, 1.0, 0.0)
        series = QlifSeries(times=times, values=values)
        t_star = onset_time(series, epsilon=1e-6)
        assert abs(t_star - 3.2) <= 0.05

    def test_interpolation_between_samples(self):
        times = np.array([0.0, 1.0, 2.0])
        series = QlifSeries(times=times, values=np.array([0.0, 0.0, 1.0]))
        assert onset_time(series, epsilon=0.5) == pytest.approx(1.5)


class TestLightcone:
    def test_velocity_ordering_default_epsilon(self, lightcone_default):
        v = {c.gamma: c.v_eff for c in lightcone_default}
        assert v[-0.3] > v[0.0] > v[0.3]

    def test_onsets_monotone_in_distance(self, lightcone_default):
        for curve in lightcone_default:
            ts = [t for t in curve.onset_times if t is not None]
            assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_quantitative_fit_at_stable_threshold(self, lightcone_fine):
        v = {c.gamma: c.v_eff for c in lightcone_fine}
        assert v[-0.3] > v[0.0] > v[0.3]
        assert 1.6 <= v[0.0] <= 2.2
        assert v[-0.3] == pytest.approx(2.35, abs=0.05)
        assert v[0.3] == pytest.approx(1.64, abs=0.05)

    def test_blocking_flags(self, lightcone_fine):
        flags = {c.gamma: c.blocking for c in lightcone_fine}
        assert flags[0.3] is True
        assert flags[0.0] is False
        assert flags[-0.3] is False

    def test_cell_based_velocity_reported(self, lightcone_fine):
        for curve in lightcone_fine:
            assert curve.v_eff_per_cell == pytest.approx(curve.v_eff / 2)

    def test_out_of_range_distance_rejected(self):
        from skinflow.experiments import run_lightcone

        with pytest.raises(ValueError):
            run_lightcone(gammas=(0.0,), distances=(2, 30))


class TestOscillation:
    def test_synthetic_sinusoid_period(self):
        times = default_time_grid(t_max=40.0)
        values = 0.1 * np.sin(2 * math.pi * times / 2.2)
        period, amplitude, n_peaks = detect_oscillation(times, values)
        assert period == pytest.approx(2.2, abs=0.02)
        assert n_peaks >= 10
        assert amplitude > 0

    def test_flat_series_rejected(self):
        times = default_time_grid(t_max=40.0)
        with pytest.raises(OscillationError):
            detect_oscillation(times, np.zeros_like(times))

    def test_short_window_rejected(self):
        times = default_time_grid(t_max=10.2)
        with pytest.raises(OscillationError):
            detect_oscillation(times, np.sin(times))

    def test_reference_period(self, oscillation_reports):
        rep = next(r for r in oscillation_reports if r.gamma == 0.3 and r.n_sites == 42)
        assert 1.9 <= rep.period <= 2.5
        assert rep.delta_E_implied == pytest.approx(2 * math.pi / rep.period)
        assert rep.n_peaks >= 3

    def test_period_size_stability(self, oscillation_reports):
        for gamma in (0.0, 0.3):
            periods = [r.period for r in oscillation_reports if r.gamma == gamma]
            spread = (max(periods) - min(periods)) / np.mean(periods)
            assert spread < 0.10, f"gamma={gamma}: {periods}"

    def test_sizes_compared_map(self, oscillation_reports):
        for rep in oscillation_reports:
            assert set(rep.sizes_compared) == {20, 42, 120}
            assert rep.sizes_compared[rep.n_sites] == rep.amplitude


class TestTables:
    @pytest.fixture(scope="class")
    def table1(self):
        return build_table1()

    @pytest.fixture(scope="class")
    def table2(self):
        return build_table2()

    def test_table1_skin_columns(self, table1):
        reference = {
            -0.4: (1.53, 2.4, "right"),
            -0.2: (1.22, 4.9, "right"),
            0.0: (1.00, math.inf, "none"),
            0.2: (0.82, 4.9, "left"),
            0.4: (0.65, 2.4, "left"),
        }
        for row in table1:
            r_ref, xi_ref, direction = reference[row.gamma]
            assert row.r == pytest.approx(r_ref, abs=0.01)
            if math.isinf(xi_ref):
                assert math.isinf(row.xi)
            else:
                assert row.xi == pytest.approx(xi_ref, abs=0.05)
            assert row.direction == direction

    def test_table1_ipr_mirror(self, table1):
        by_gamma = {row.gamma: row for row in table1}
        assert by_gamma[0.2].ipr_mean == pytest.approx(by_gamma[-0.2].ipr_mean, abs=1e-8)
        assert by_gamma[0.4].ipr_mean == pytest.approx(by_gamma[-0.4].ipr_mean, abs=1e-8)

    def test_table2_rows(self, table2):
        reference = {0.6: 0.60, 0.8: 0.80, 1.0: 1.00, 1.2: 1.00, 1.4: 1.00}
        labels = {0.6: "topological", 0.8: "topological", 1.0: "critical",
                  1.2: "trivial", 1.4: "trivial"}
        for row in table2:
            assert row.v_max_exact == pytest.approx(reference[row.t2], abs=1e-4)
            assert row.v_max_exact == pytest.approx(row.v_max_formula, abs=1e-6)
            assert row.phase == labels[row.t2]
