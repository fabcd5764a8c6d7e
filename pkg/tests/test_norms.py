import math

import numpy as np
import pytest

from hmflab.evolution import FieldSeries, Trajectory
from hmflab.norms import (
    a_infinity,
    analytic_norm,
    functional_J_K,
    functional_M,
    functional_N,
    functional_P_Q,
    profile_analytic_norm,
    solve_a,
    weighted_norm_p,
)
from hmflab.profiles import lorentzian, make_asymptotic_datum, maxwellian
from hmflab.spectral import FourierField, make_grid


GRID = make_grid(4, 24.0, 0.05, 20.0)


def gaussian_field(amplitude=1.0, width=1.0):
    return make_asymptotic_datum(amplitude, {1: 1.0, -1: 1.0}, width, GRID)


def single_entry_field(value=0.7):
    coeffs = np.zeros((GRID.n_modes, GRID.n_xi), dtype=complex)
    coeffs[GRID.mode_index(0), GRID.n_half] = value
    return FourierField(GRID, coeffs)


def make_traj(fields, times):
    zeta = np.array([f.mode(1)[GRID.n_half] for f in fields])
    return Trajectory(
        grid=GRID,
        times=np.asarray(times, dtype=float),
        snapshots=list(fields),
        series=FieldSeries(t=np.asarray(times, dtype=float), zeta1=zeta),
    )


class TestAnalyticNorm:
    def test_zero_field(self):
        rep = analytic_norm(FourierField.zeros(GRID), 0.3)
        assert rep.value == 0.0

    def test_gaussian_scan_oracle(self):
        fld = gaussian_field()
        mu = 0.2
        xi = np.linspace(-24, 24, 200001)
        oracle = np.max(np.exp(mu * np.sqrt(2 + xi**2)) * np.exp(-(xi**2) / 2))
        rep = analytic_norm(fld, mu)
        assert abs(rep.value - oracle) < 1e-4 * oracle
        assert rep.where[0] in (1, -1)

    def test_monotone_in_mu(self):
        fld = gaussian_field()
        values = [analytic_norm(fld, mu).value for mu in (0.0, 0.1, 0.2, 0.4)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_homogeneity(self):
        fld = gaussian_field()
        scaled = FourierField(GRID, 3.7 * fld.coeffs)
        assert analytic_norm(scaled, 0.25).value == pytest.approx(
            3.7 * analytic_norm(fld, 0.25).value, rel=1e-14
        )


class TestWeightedNormP:
    def test_p_zero_reduces(self):
        fld = gaussian_field()
        assert weighted_norm_p(fld, 0.2, 0).value == pytest.approx(
            analytic_norm(fld, 0.2).value, rel=1e-13
        )

    def test_zero_field(self):
        assert weighted_norm_p(FourierField.zeros(GRID), 0.2, 3).value == 0.0

    def test_refined_scan_oracle(self):
        fld = gaussian_field()
        lam, p = 0.2, 3
        xi = np.linspace(-24, 24, 200001)
        br = np.sqrt(2 + xi**2)
        oracle = np.max(np.exp(lam * br) * br**p * np.exp(-(xi**2) / 2))
        assert abs(weighted_norm_p(fld, lam, p).value - oracle) < 0.01 * oracle


class TestProfileNorm:
    def test_gaussian_any_weight(self):
        val = profile_analytic_norm(maxwellian(), 0.5)
        xi = np.linspace(0, 30, 300001)
        oracle = np.max(np.exp(0.5 * np.sqrt(1 + xi**2)) * np.exp(-(xi**2) / 2))
        assert abs(val - oracle) < 1e-6 * oracle

    def test_lorentzian_width_limit(self):
        assert profile_analytic_norm(lorentzian(), 1.2) == math.inf
        assert profile_analytic_norm(lorentzian(), 0.5) < math.inf


class TestSolveA:
    def test_terminal_condition_and_shape(self):
        w = solve_a(50.0, 1e-3, 0.01)
        assert w.a[-1] == 0.0
        assert np.all(w.a[:-1] > 0)
        assert np.all(np.diff(w.a) < 0)

    def test_cube_root_scaling(self):
        deltas = np.array([1e-4, 1e-3, 1e-2])
        a0s = [solve_a(200.0, d, 0.01).a0 for d in deltas]
        slope = np.polyfit(np.log(deltas), np.log(a0s), 1)[0]
        assert abs(slope - 1.0 / 3.0) <= 0.1

    def test_monotone_in_horizon(self):
        a0s = [solve_a(T, 1e-3, 0.01).a0 for T in (50.0, 100.0, 200.0)]
        assert a0s[0] < a0s[1] < a0s[2]

    def test_frozen_value(self):
        # regression value from the backward integration at d_t = 0.01
        assert solve_a(200.0, 1e-3, 0.01).a0 == pytest.approx(0.16735993683, abs=1e-8)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            solve_a(10.0, 0.0, 0.01)


class TestAInfinity:
    def test_positive_and_dominates_finite_horizons(self):
        w = a_infinity(1e-3, 100.0, 0.01)
        assert np.all(w.a > 0)
        for T in (50.0, 100.0, 200.0):
            assert w.a0 >= solve_a(T, 1e-3, 0.01).a0 - 1e-12

    def test_limit_value_band(self):
        # the limit function sits on the separatrix; its tail decays like
        # 3 log(t)/t, far above the naive "vanishing by t=100" reading
        w = a_infinity(1e-3, 100.0, 0.01)
        assert w.a0 == pytest.approx(0.1673696, abs=1e-5)
        assert 0.045 < float(w(100.0)) < 0.07


class TestFunctionalM:
    def test_zero(self):
        series = FieldSeries(t=np.linspace(0, 10, 101), zeta1=np.zeros(101, complex))
        assert functional_M(series, 0.3).value == 0.0

    def test_exact_cancellation(self):
        t = np.linspace(0, 10, 1001)
        series = FieldSeries(t=t, zeta1=np.exp(-0.3 * t) + 0j)
        assert functional_M(series, 0.3).value == pytest.approx(1.0, abs=1e-12)

    def test_decreasing_product_peaks_at_zero(self):
        t = np.linspace(0, 10, 1001)
        series = FieldSeries(t=t, zeta1=np.exp(-0.4 * t) + 0j)
        rep = functional_M(series, 0.3)
        assert rep.value == pytest.approx(1.0, abs=1e-12)
        assert rep.where[0] == 0.0


class TestFunctionalN:
    def test_zero_trajectory(self):
        traj = make_traj([FourierField.zeros(GRID)] * 3, [0.0, 1.0, 2.0])
        w = solve_a(2.0, 1e-3, 0.01)
        assert functional_N(traj, 0.3, w).value == 0.0

    def test_single_snapshot_closed_form(self):
        # only the (0, 0) entry is set, so ||h||_mu = c e^mu and the sup over
        # mu < lam - a(0) maximizes sqrt(lam - a(0) - mu) e^mu in one variable
        c = 0.7
        traj = make_traj([single_entry_field(c)], [0.0])
        w = solve_a(10.0, 1e-3, 0.01)
        lam = 0.3
        cap = lam - w.a0
        mu = np.linspace(0, cap, 400001)[:-1]
        oracle = np.max(np.sqrt(cap - mu) * c * np.exp(mu))
        got = functional_N(traj, lam, w).value
        assert got <= oracle * (1 + 1e-9)
        assert got > 0.98 * oracle

    def test_empty_domain_flagged(self):
        traj = make_traj([gaussian_field()], [0.0])
        w = solve_a(10.0, 1.0, 0.01)  # budget exceeds lam everywhere
        rep = functional_N(traj, 0.05, w)
        assert rep.empty

    def test_monotone_under_domination(self):
        small = gaussian_field(amplitude=0.5)
        large = gaussian_field(amplitude=0.8)
        w = solve_a(5.0, 1e-3, 0.01)
        n_small = functional_N(make_traj([small], [0.0]), 0.3, w).value
        n_large = functional_N(make_traj([large], [0.0]), 0.3, w).value
        assert n_small <= n_large

    def test_reported_location_admissible(self):
        traj = make_traj([gaussian_field(), gaussian_field(0.5)], [0.0, 1.0])
        w = solve_a(5.0, 1e-3, 0.01)
        lam = 0.3
        rep = functional_N(traj, lam, w)
        mu, t = rep.where
        assert lam - mu - float(w(t)) > 0


class TestFunctionalPQ:
    def test_mirror_m_case(self):
        t = np.linspace(0, 10, 1001)
        series = FieldSeries(t=t, zeta1=np.exp(-0.3 * t) + 0j)
        traj = make_traj([gaussian_field()], [10.0])
        w = solve_a(10.0, 1.0, 0.01)
        p_rep, q_rep = functional_P_Q(series, traj, 0.3, 0.15, 2.0, w, 0.5)
        assert p_rep.value == pytest.approx(1.0, abs=1e-12)
        assert p_rep.where[0] >= 2.0
        assert q_rep.value >= 0.0

    def test_window_restriction(self):
        t = np.linspace(0, 10, 1001)
        zeta = np.exp(-0.1 * t) + 0j
        series = FieldSeries(t=t, zeta1=zeta)
        traj = make_traj([gaussian_field()], [10.0])
        w = solve_a(10.0, 1.0, 0.01)
        p_all, _ = functional_P_Q(series, traj, 0.3, 0.15, 0.0, w, 0.5)
        p_late, _ = functional_P_Q(series, traj, 0.3, 0.15, 5.0, w, 0.5)
        assert p_late.value == pytest.approx(np.exp(0.2 * 10.0), rel=1e-10)
        assert p_all.value == p_late.value  # increasing weight dominates late

    def test_validation(self):
        series = FieldSeries(t=np.linspace(0, 5, 51), zeta1=np.ones(51, complex))
        traj = make_traj([gaussian_field()], [5.0])
        w = solve_a(5.0, 1.0, 0.01)
        with pytest.raises(ValueError):
            functional_P_Q(series, traj, 0.3, 0.4, 1.0, w, 0.5)
        with pytest.raises(ValueError):
            functional_P_Q(series, traj, 0.3, 0.15, 1.0, w, 0.0)


class TestFunctionalJK:
    def test_zero_inputs(self):
        series = FieldSeries(t=np.linspace(0, 5, 51), zeta1=np.zeros(51, complex))
        traj = make_traj([FourierField.zeros(GRID)] * 2, [0.0, 5.0])
        j_rep, k_rep = functional_J_K(series, traj, 0.5, 0.2, 6, 3)
        assert j_rep.value == 0.0
        assert k_rep.value == 0.0

    def test_rejects_large_delta(self):
        series = FieldSeries(t=np.linspace(0, 5, 51), zeta1=np.ones(51, complex))
        traj = make_traj([gaussian_field()], [0.0])
        with pytest.raises(ValueError):
            functional_J_K(series, traj, 0.5, 0.4, 6, 3)  # 0.4 >= 2*0.5/pi
        with pytest.raises(ValueError):
            functional_J_K(series, traj, 0.5, 0.2, 5, 3)  # p < q + 3
        with pytest.raises(ValueError):
            functional_J_K(series, traj, 0.5, 0.2, 6, 2)  # q < 3

    def test_matched_decay_bounded_near_one(self):
        lambda0, delta, p, q = 0.5, 0.05, 6, 3
        t = np.linspace(0, 30, 3001)
        bracket = np.sqrt(1 + t**2)
        series = FieldSeries(t=t, zeta1=np.exp(-lambda0 * t) / bracket**p + 0j)
        traj = make_traj([FourierField.zeros(GRID)], [0.0])
        j_rep, _ = functional_J_K(series, traj, lambda0, delta, p, q)
        # weight e^{lam t} <t>^p with lam < lambda0 cannot beat the datum decay by much
        assert 0.9 < j_rep.value <= 1.05

    def test_constant_field_separable(self):
        lambda0, delta, p, q = 0.5, 0.05, 6, 3
        fld = single_entry_field(0.4)
        times = [0.0, 1.0, 3.0]
        traj = make_traj([fld] * 3, times)
        series = FieldSeries(t=np.array(times), zeta1=np.zeros(3, complex))
        _, k_rep = functional_J_K(series, traj, lambda0, delta, p, q)
        # entry sits at bracket value 1: ||h||_{lam,p} = 0.4 e^lam for every p,
        # so both terms reduce to separable one-dimensional maximizations
        best3 = 0.0
        bestpq = 0.0
        for t in times:
            cap = lambda0 - delta * math.atan(t)
            lam = np.linspace(0, cap, 20001)[:-1]
            best3 = max(best3, np.max(0.4 * np.exp(lam)))
            bestpq = max(
                bestpq,
                np.max(np.sqrt(cap - lam) * 0.4 * np.exp(lam) / (1 + t * t) ** (q / 2)),
            )
        assert k_rep.value == pytest.approx(best3 + bestpq, rel=1e-3)


class TestHomogeneity:
    def test_all_functionals_scale(self):
        t = np.linspace(0, 5, 501)
        series = FieldSeries(t=t, zeta1=np.exp(-0.2 * t) * (1 + 0.5j))
        fld = gaussian_field(0.6)
        traj = make_traj([fld], [0.0])
        w = solve_a(5.0, 1e-3, 0.01)
        c = 2.5
        series_c = FieldSeries(t=t, zeta1=c * series.zeta1)
        traj_c = make_traj([FourierField(GRID, c * fld.coeffs)], [0.0])
        assert functional_M(series_c, 0.3).value == pytest.approx(
            c * functional_M(series, 0.3).value, rel=1e-12
        )
        assert functional_N(traj_c, 0.3, w).value == pytest.approx(
            c * functional_N(traj, 0.3, w).value, rel=1e-12
        )
        j1, k1 = functional_J_K(series, traj, 0.5, 0.1, 6, 3)
        j2, k2 = functional_J_K(series_c, traj_c, 0.5, 0.1, 6, 3)
        assert j2.value == pytest.approx(c * j1.value, rel=1e-12)
        assert k2.value == pytest.approx(c * k1.value, rel=1e-12)
