import numpy as np
import pytest
from scipy.special import ive

from hmflab.profiles import (
    bgk_to_field,
    kernel_j,
    lorentzian,
    make_asymptotic_datum,
    maxwellian,
    omega_of_nu,
    solve_bgk,
)
from hmflab.spectral import make_grid


class TestMaxwellian:
    def test_closed_forms(self):
        p = maxwellian()
        assert p.eta_hat(0.0) == 1.0
        assert abs(p.eta_hat(1.0) - np.exp(-0.5)) < 1e-15
        assert abs(p.eta_prime_hat(1.0) - 1j * np.exp(-0.5)) < 1e-15

    def test_derivative_rule(self):
        p = maxwellian(beta=2.5)
        xi = np.linspace(-8, 8, 161)
        assert np.max(np.abs(p.eta_prime_hat(xi) - 1j * xi * p.eta_hat(xi))) < 1e-14

    def test_decay_certificate(self):
        p = maxwellian()
        t = np.linspace(0, 30, 3001)
        j = kernel_j(p, 1)
        assert np.all(np.abs(j(t)) <= p.decay_coeff * np.exp(-p.decay_rate * t) + 1e-15)


class TestLorentzian:
    def test_closed_forms(self):
        p = lorentzian()
        assert p.eta_hat(0.0) == 1.0
        assert abs(p.eta_hat(2.0) - np.exp(-2.0)) < 1e-15
        assert p.analytic_width == 1.0

    def test_decay_certificate(self):
        p = lorentzian(scale=0.7)
        t = np.linspace(0, 40, 4001)
        j = kernel_j(p, 1)
        assert np.all(np.abs(j(t)) <= p.decay_coeff * np.exp(-p.decay_rate * t) + 1e-15)


class TestKernel:
    def test_maxwell_closed_form(self):
        j1 = kernel_j(maxwellian(), 1)
        t = np.linspace(0, 10, 501)
        expected = -(t / 2) * np.exp(-t**2 / 2)
        assert np.max(np.abs(j1(t) - expected)) < 1e-15

    def test_vanishes_at_zero(self):
        assert kernel_j(maxwellian(), 1)(0.0) == 0.0

    def test_conjugate_pair(self):
        p = maxwellian()
        j1, jm1 = kernel_j(p, 1), kernel_j(p, -1)
        t = np.linspace(0, 12, 241)
        assert np.max(np.abs(jm1(t) - np.conj(j1(t)))) < 1e-15

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            kernel_j(maxwellian(), 2)


class TestAsymptoticDatum:
    def setup_method(self):
        self.grid = make_grid(4, 24.0, 0.05, 20.0)

    def test_zero_amplitude(self):
        fld = make_asymptotic_datum(0.0, {1: 1.0, -1: 1.0}, 1.0, self.grid)
        assert fld.sup_norm() == 0.0

    def test_reality_and_mean_zero(self):
        fld = make_asymptotic_datum(0.5, {1: 1.0, -1: 1.0, 2: 0.3, -2: 0.3}, 1.0, self.grid)
        assert fld.reality_defect() == 0.0
        assert fld.mean_mode_at_zero() == 0.0

    def test_one_sided_weights_symmetrized(self):
        fld = make_asymptotic_datum(1.0, {1: 1.0}, 1.0, self.grid)
        assert fld.reality_defect() == 0.0

    def test_exponential_shape_tail(self):
        fld = make_asymptotic_datum(1.0, {1: 1.0, -1: 1.0}, 4.0, self.grid, shape="exponential")
        row = np.abs(fld.mode(1))
        xi = self.grid.xi
        expected = np.exp(-np.sqrt(1 + xi**2) / 4.0)
        assert np.max(np.abs(row - 0.5 * expected - 0.5 * expected)) < 1e-14

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_asymptotic_datum(1.0, {1: 1.0}, 0.0, self.grid)
        with pytest.raises(ValueError):
            make_asymptotic_datum(1.0, {0: 1.0}, 1.0, self.grid)
        with pytest.raises(ValueError):
            make_asymptotic_datum(1.0, {1: 1.0}, 1.0, self.grid, shape="boxcar")
        with pytest.raises(ValueError):
            make_asymptotic_datum(1.0, {7: 1.0}, 1.0, self.grid)


class TestOmegaOfNu:
    def test_zero_magnetization(self):
        assert omega_of_nu(3.0, 0.0) == 0.0

    def test_bessel_ratio_oracle(self):
        for beta, nu in ((3.0, 0.5), (3.0, 0.72), (1.5, 0.3), (2.5, 1.1)):
            z = beta * nu
            oracle = ive(1, z) / ive(0, z)
            assert abs(omega_of_nu(beta, nu) - oracle) < 1e-12

    def test_small_nu_slope(self):
        h = 1e-4
        for beta in (1.5, 2.0, 3.0):
            slope = (omega_of_nu(beta, h) - omega_of_nu(beta, -h)) / (2 * h)
            assert abs(slope - beta / 2) < 1e-3

    def test_saturates_at_one(self):
        assert omega_of_nu(3.0, 50.0) > 0.99

    def test_monotone_increasing(self):
        vals = [omega_of_nu(3.0, nu) for nu in np.linspace(0.01, 1.4, 60)]
        assert np.all(np.diff(vals) > 0)


class TestSolveBGK:
    def test_subcritical_none(self):
        assert solve_bgk(1.5) is None
        assert solve_bgk(2.0 - 1e-3) is None

    def test_beta3_fixed_point(self):
        state = solve_bgk(3.0)
        assert state is not None
        # frozen from the bisection against the quadrature oracle
        assert abs(state.nu - 0.7241587176) < 1e-6
        assert state.residual < 1e-10

    def test_just_above_bifurcation(self):
        state = solve_bgk(2.0 + 1e-6)
        assert state is not None
        assert 0.0 < state.nu < 0.01

    def test_scan_over_betas(self):
        for beta in (2.1, 2.5, 4.0):
            state = solve_bgk(beta)
            assert state is not None and state.residual < 1e-10


class TestBGKToField:
    def test_mode_ratios_match_bessel(self):
        grid = make_grid(4, 24.0, 0.05, 20.0)
        state = solve_bgk(3.0)
        fld, background = bgk_to_field(state, grid)
        z = state.beta * state.nu
        mid = grid.n_half
        for n in range(1, 5):
            oracle = ive(n, z) / ive(0, z)
            assert abs(fld.mode(n)[mid] - oracle) < 1e-10
        assert abs(fld.mode(1)[mid] - state.nu) < 1e-9  # self-consistency readout

    def test_mean_row_vanishes_and_reality(self):
        grid = make_grid(3, 24.0, 0.05, 20.0)
        state = solve_bgk(2.5)
        fld, background = bgk_to_field(state, grid)
        assert np.max(np.abs(fld.mode(0))) == 0.0
        assert fld.reality_defect() == 0.0

    def test_background_is_rescaled_gaussian(self):
        grid = make_grid(3, 24.0, 0.05, 20.0)
        state = solve_bgk(3.0)
        _, background = bgk_to_field(state, grid)
        xi = np.linspace(-5, 5, 101)
        assert np.max(np.abs(background.eta_hat(xi) - np.exp(-xi**2 / 6))) < 1e-14
