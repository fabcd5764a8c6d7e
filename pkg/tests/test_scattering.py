import numpy as np
import pytest

from hmflab.evolution import EvolutionParams, forward_solve
from hmflab.profiles import (
    bgk_to_field,
    kernel_j,
    make_asymptotic_datum,
    maxwellian,
    solve_bgk,
)
from hmflab.scattering import (
    ScatteringConfig,
    backward_solve,
    continue_in_T,
    fixed_point_residual,
    nonperturbative_solve,
)
from hmflab.spectral import FourierField, make_grid, sample_mode
from hmflab.volterra import solve_volterra


GRID = make_grid(4, 24.0, 0.05, 20.0)
PROFILE = maxwellian()


def datum(amplitude=0.5, width=1.0, grid=GRID, shape="gaussian"):
    return make_asymptotic_datum(amplitude, {1: 1.0, -1: 1.0}, width, grid, shape=shape)


def config(**kw):
    base = dict(
        terminal=datum(),
        background=PROFILE,
        epsilon=0.01,
        T=10.0,
        d_t=0.01,
        picard_tol=1e-8,
        snap_stride=10,
    )
    base.update(kw)
    return ScatteringConfig(**base)


class TestBackwardSolve:
    def test_zero_datum(self):
        cfg = config(terminal=FourierField.zeros(GRID))
        traj, trace = backward_solve(cfg)
        assert trace.converged
        assert trace.iterations == 1
        assert max(s.sup_norm() for s in traj.snapshots) == 0.0

    def test_linear_case_two_sweeps_and_volterra_match(self):
        cfg = config(epsilon=0.0)
        traj, trace = backward_solve(cfg)
        assert trace.converged
        assert trace.iterations <= 2
        # independent route: second-kind equation marched on the same grid
        kern = kernel_j(PROFILE, -1).sample(cfg.T, cfg.d_t / cfg.zeta_refine)
        g = sample_mode(cfg.terminal.coeffs, GRID, 1, kern.t)
        ref = solve_volterra(g, kern, "backward")
        assert np.max(np.abs(traj.series.zeta1 - ref[:: cfg.zeta_refine])) < 1e-6

    def test_weak_coupling_contracts(self):
        cfg = config()
        traj, trace = backward_solve(cfg)
        assert trace.converged
        assert trace.iterations <= 10
        assert all(r < 0.5 for r in trace.contraction_ratios)

    def test_terminal_condition_exact(self):
        cfg = config()
        traj, _ = backward_solve(cfg)
        assert np.array_equal(traj.final().coeffs, cfg.terminal.coeffs)

    def test_fixed_point_property(self):
        cfg = config()
        traj, trace = backward_solve(cfg)
        assert fixed_point_residual(cfg, traj) < cfg.picard_tol

    def test_round_trip_forward(self):
        cfg = config(picard_tol=1e-8)
        traj, _ = backward_solve(cfg)
        params = EvolutionParams(
            profile=PROFILE, epsilon=cfg.epsilon, d_t=cfg.d_t, t_final=cfg.T,
            snap_stride=1000,
        )
        fwd = forward_solve(traj.initial(), params)
        err = np.max(np.abs(fwd.final().coeffs - cfg.terminal.coeffs))
        assert err < 5 * 1e-6  # readout/march consistency floor, not the sweep tol

    def test_strong_coupling_reported_not_raised(self):
        cfg = config(
            terminal=datum(amplitude=40.0),
            epsilon=1.0,
            T=10.0,
            picard_max_iters=4,
            inner_max=10,
            overflow_cap=1e4,
        )
        traj, trace = backward_solve(cfg)
        assert trace.diverged
        assert not trace.converged
        assert trace.failure is not None

    def test_deviation_decreasing_over_last_quarter(self):
        cfg = config(
            terminal=datum(amplitude=0.5, width=2.0, shape="exponential"), T=16.0
        )
        traj, trace = backward_solve(cfg)
        assert trace.converged
        dev = np.array(
            [float(np.max(np.abs(s.coeffs - cfg.terminal.coeffs))) for s in traj.snapshots]
        )
        tail = dev[traj.times >= 12.0]
        assert np.all(np.diff(tail) <= 0)

    def test_reality_of_solution(self):
        cfg = config()
        traj, _ = backward_solve(cfg)
        assert max(s.reality_defect() for s in traj.snapshots) < 1e-12

    def test_mean_mode_conserved(self):
        cfg = config()
        traj, _ = backward_solve(cfg)
        assert traj.max_mean_drift() < 1e-12


class TestContinuation:
    def test_repeated_horizon_zero_diff(self):
        cfg = config(T=6.0, epsilon=0.0)
        res = continue_in_T(cfg, [6.0, 6.0])
        assert res.zeta_diffs[0] == 0.0
        assert res.h_diffs[0] == 0.0

    def test_linear_diffs_track_datum_tail(self):
        # exponential-tail datum: successive-window differences shrink at
        # roughly the datum readout rate
        cfg = config(
            terminal=datum(amplitude=0.5, width=2.0, shape="exponential"),
            epsilon=0.0,
            T=18.0,
        )
        res = continue_in_T(cfg, [6.0, 10.0, 14.0, 18.0])
        d = np.array(res.zeta_diffs)
        assert np.all(np.diff(np.log(d)) < 0)
        rate = -np.polyfit([6.0, 10.0, 14.0], np.log(d), 1)[0]
        assert 0.3 < rate < 0.7  # datum tail rate is 1/width = 0.5

    def test_weakly_nonlinear_monotone(self):
        cfg = config(terminal=datum(width=2.5), T=18.0)
        res = continue_in_T(cfg, [6.0, 12.0, 18.0])
        assert all(t.converged for t in res.traces)
        assert res.zeta_diffs[1] < res.zeta_diffs[0]
        assert res.h_diffs[1] < res.h_diffs[0]

    def test_horizon_beyond_grid_rejected(self):
        cfg = config()
        with pytest.raises(ValueError):
            continue_in_T(cfg, [10.0, 30.0])


class TestNonperturbative:
    def test_zero_datum(self):
        cfg = config(terminal=FourierField.zeros(GRID), epsilon=1.0, tau=2.0)
        traj, trace, split = nonperturbative_solve(cfg)
        assert trace.converged
        assert max(s.sup_norm() for s in traj.snapshots) == 0.0

    def test_requires_unit_epsilon(self):
        cfg = config(epsilon=0.5)
        with pytest.raises(ValueError):
            nonperturbative_solve(cfg)

    def test_bgk_late_window_converges(self):
        grid = make_grid(4, 24.0, 0.05, 20.0)
        state = solve_bgk(3.0)
        terminal, background = bgk_to_field(state, grid)
        cfg = ScatteringConfig(
            terminal=terminal,
            background=background,
            epsilon=1.0,
            T=20.0,
            tau=10.0,
            d_t=0.01,
            sign=-1.0,
            picard_tol=1e-8,
        )
        traj, trace, split = nonperturbative_solve(cfg)
        assert trace.converged
        assert all(r < 1.0 for r in trace.contraction_ratios)
        assert split is not None
        sups = split.sup_values()
        assert np.isfinite(sups["sup_b_plus"])
        # the mode-0 reconstruction identity holds on the converged run
        assert sups["reconstruction_defect"] <= 0.05 * max(sups["sup_b_plus"], 1e-30) + 1e-12

    def test_echo_split_zero_run(self):
        cfg = config(terminal=FourierField.zeros(GRID), epsilon=1.0, tau=2.0)
        traj, trace, split = nonperturbative_solve(cfg)
        assert np.max(np.abs(split.b_plus)) == 0.0
        assert np.max(np.abs(split.b_minus)) == 0.0


class TestConfigValidation:
    def test_window_ordering(self):
        with pytest.raises(ValueError):
            config(tau=10.0, T=10.0)

    def test_refine_must_be_even(self):
        with pytest.raises(ValueError):
            config(zeta_refine=3)

    def test_horizon_vs_grid(self):
        with pytest.raises(ValueError):
            config(T=24.5)

    def test_step_commensurate(self):
        with pytest.raises(ValueError):
            config(T=10.0, d_t=0.013)
