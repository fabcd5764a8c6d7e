"""Fourier-space dynamics in the free-streaming frame and the forward solver.

The coefficient system for the perturbation h around a background eta is

    d/dt h_n(t, xi) = sign * [ delta_{n,+-1} n (i/2) zeta_n(t) eta_prime_hat(xi - n t)
                               - eps sum_{k=+-1} k (zeta_k(t)/2) h_{n-k}(t, xi - k t) (xi - n t) ],

with the field read directly off the state, zeta_n(t) = h_n(t, n t) for
n = +-1 and zeta_{-1} = conj(zeta_1).  ``sign`` is +1 for the repulsive
force and -1 for the attractive variant.  The (n, xi) = (0, 0) entry has a
vanishing right-hand side, so the mean is conserved exactly; the system
also commutes with the reality mirror, so symmetry is preserved without
re-projection.

Time stepping is classical four-stage Runge-Kutta with the field extracted
from each stage state (the readout is explicit, so no predictor is needed).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from .profiles import Profile
from .spectral import (
    FourierField,
    Grid,
    TruncationCounters,
    sample_mode,
    shift_rows,
)


class BlowUpError(RuntimeError):
    """A coefficient passed the overflow cap: instability or under-resolution."""

    def __init__(self, t: float, magnitude: float):
        super().__init__(
            f"coefficient magnitude {magnitude:.3e} exceeded the overflow cap at t={t:.3f}"
        )
        self.t = t
        self.magnitude = magnitude


class RealityDriftError(RuntimeError):
    """Mirror-symmetry defect grew beyond tolerance during a run."""


@dataclass(frozen=True)
class EvolutionParams:
    """Settings for a time integration.

    ``sign`` selects the force convention (+1 repulsive, -1 attractive).
    Snapshots are stored every ``snap_stride`` steps; the field series is
    recorded at every step.
    """

    profile: Profile
    epsilon: float
    d_t: float
    t_final: float
    sign: float = 1.0
    snap_stride: int = 10
    overflow_cap: float = 1e6
    reality_check_every: int = 100
    reality_tol: float = 1e-10

    def __post_init__(self):
        if self.d_t <= 0 or self.d_t > 0.1:
            raise ValueError(f"d_t must lie in (0, 0.1], got {self.d_t}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.sign not in (1.0, -1.0, 1, -1):
            raise ValueError(f"sign must be +-1, got {self.sign}")
        if self.snap_stride < 1:
            raise ValueError("snap_stride must be >= 1")


@dataclass(frozen=True)
class FieldSeries:
    """Mode +1 field history; the -1 mode is its conjugate by reality."""

    t: np.ndarray
    zeta1: np.ndarray

    def __post_init__(self):
        if len(self.t) != len(self.zeta1):
            raise ValueError("time grid and field series length mismatch")

    @property
    def zeta_minus1(self) -> np.ndarray:
        return np.conj(self.zeta1)

    @property
    def d_t(self) -> float:
        return float(self.t[1] - self.t[0])

    def magnitude(self) -> np.ndarray:
        return np.abs(self.zeta1)


@dataclass(frozen=True)
class Trajectory:
    """Snapshot sequence plus the full-resolution field series."""

    grid: Grid
    times: np.ndarray
    snapshots: list[FourierField]
    series: FieldSeries
    counters: TruncationCounters = dfield(default_factory=TruncationCounters)

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise ValueError("snapshot times and snapshots length mismatch")

    def snapshot_at(self, t: float) -> FourierField:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 + 1e-9 * abs(t):
            raise KeyError(f"no snapshot stored at t={t}")
        return self.snapshots[i]

    def initial(self) -> FourierField:
        return self.snapshots[0]

    def final(self) -> FourierField:
        return self.snapshots[-1]

    def max_mean_drift(self) -> float:
        ref = self.snapshots[0].mean_mode_at_zero()
        return max(abs(s.mean_mode_at_zero() - ref) for s in self.snapshots)


def extract_zeta(
    state: FourierField | np.ndarray,
    grid: Grid | None = None,
    t: float = 0.0,
    check_tol: float | None = 1e-10,
    counters: TruncationCounters | None = None,
) -> complex:
    """Field readout zeta_1(t) = h_1(t, t) from a state.

    The conjugation shortcut zeta_{-1} = conj(zeta_1) is cross-checked
    against the direct mode -1 read at -t when ``check_tol`` is set.
    """
    if isinstance(state, FourierField):
        coeffs, grid = state.coeffs, state.grid
    else:
        if grid is None:
            raise ValueError("grid required when passing a raw coefficient array")
        coeffs = state
    if abs(t) > grid.xi_max:
        raise ValueError(f"readout time {t} beyond the frequency cutoff {grid.xi_max}")
    z1 = complex(sample_mode(coeffs, grid, 1, np.array([t]), counters)[0])
    if check_tol is not None:
        zm = complex(sample_mode(coeffs, grid, -1, np.array([-t]), counters)[0])
        defect = abs(np.conj(z1) - zm)
        if defect > check_tol:
            raise RealityDriftError(
                f"conjugation shortcut defect {defect:.3e} exceeds {check_tol:.1e} at t={t:.3f}"
            )
    return z1


def extract_zeta_pair(state, grid=None, t=0.0, **kw) -> tuple[complex, complex]:
    z1 = extract_zeta(state, grid, t, **kw)
    return z1, np.conj(z1)


def rhs_coeffs(
    coeffs: np.ndarray,
    t: float,
    zeta1: complex,
    grid: Grid,
    profile: Profile,
    epsilon: float,
    sign: float = 1.0,
) -> np.ndarray:
    """Right-hand side on raw coefficient arrays (hot path).

    The coupling reads h_{n-k}(xi - k t): the shift -k t is common to all
    rows, so one whole-array shifted read per k serves every mode.
    """
    inc = np.zeros_like(coeffs)
    xi = grid.xi
    zm1 = np.conj(zeta1)
    for n, zn in ((1, zeta1), (-1, zm1)):
        inc[grid.mode_index(n)] = (n * 0.5j * zn) * profile.eta_prime_hat(xi - n * t)
    if epsilon != 0.0:
        shifted_p = shift_rows(coeffs, grid, -t)  # values at xi - t   (k = +1)
        shifted_m = shift_rows(coeffs, grid, +t)  # values at xi + t   (k = -1)
        half_zp = 0.5 * epsilon * zeta1
        half_zm = 0.5 * epsilon * zm1
        for n in range(-grid.n_max, grid.n_max + 1):
            row = grid.mode_index(n)
            acc = None
            if abs(n - 1) <= grid.n_max:
                acc = half_zp * shifted_p[grid.mode_index(n - 1)]
            if abs(n + 1) <= grid.n_max:
                term = half_zm * shifted_m[grid.mode_index(n + 1)]
                acc = -term if acc is None else acc - term
            elif acc is None:
                continue
            inc[row] -= (xi - n * t) * acc
    if sign != 1.0:
        inc *= sign
    return inc


def rhs(
    state: FourierField,
    t: float,
    zeta: tuple[complex, complex],
    params: EvolutionParams,
) -> FourierField:
    """Field-level right-hand side with the field pair supplied explicitly."""
    z1, zm1 = zeta
    if abs(np.conj(z1) - zm1) > 1e-9:
        raise ValueError("zeta pair must satisfy zeta_{-1} = conj(zeta_1)")
    inc = rhs_coeffs(
        state.coeffs, t, complex(z1), state.grid, params.profile, params.epsilon, params.sign
    )
    return FourierField(state.grid, inc)


def _validate_initial(h0: FourierField, tol: float = 1e-10) -> None:
    defect = h0.reality_defect()
    if defect > tol:
        raise ValueError(f"initial state breaks reality symmetry by {defect:.3e}")
    mean = abs(h0.mean_mode_at_zero())
    if mean > tol:
        raise ValueError(f"initial state is not mean-zero: |h_0(0)| = {mean:.3e}")


def forward_solve(h0: FourierField, params: EvolutionParams) -> Trajectory:
    """Integrate the initial-value problem on [0, t_final].

    Returns snapshots every ``snap_stride`` steps (plus the endpoint) and
    the per-step field series.  Aborts with BlowUpError when any
    coefficient magnitude passes the overflow cap.
    """
    grid = h0.grid
    if params.t_final > grid.t_final + 1e-12:
        raise ValueError(
            f"t_final={params.t_final} exceeds the grid horizon {grid.t_final}"
        )
    _validate_initial(h0)
    n_steps = int(round(params.t_final / params.d_t))
    if abs(n_steps * params.d_t - params.t_final) > 1e-9:
        raise ValueError("t_final must be an integer number of steps")
    dt = params.d_t
    counters = TruncationCounters()
    c = h0.coeffs.copy()
    t = 0.0
    snap_times = [0.0]
    snapshots = [FourierField(grid, c)]
    zs = np.empty(n_steps + 1, dtype=np.complex128)
    zs[0] = extract_zeta(c, grid, 0.0, counters=counters)

    def f(state, tt):
        z = extract_zeta(state, grid, tt, check_tol=None, counters=counters)
        return rhs_coeffs(state, tt, z, grid, params.profile, params.epsilon, params.sign)

    for i in range(1, n_steps + 1):
        k1 = f(c, t)
        k2 = f(c + (0.5 * dt) * k1, t + 0.5 * dt)
        k3 = f(c + (0.5 * dt) * k2, t + 0.5 * dt)
        k4 = f(c + dt * k3, t + dt)
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = i * dt
        peak = np.max(np.abs(c))
        if peak > params.overflow_cap:
            raise BlowUpError(t, float(peak))
        if i % params.reality_check_every == 0:
            mirror = np.conj(c[::-1, ::-1])
            drift = float(np.max(np.abs(c - mirror)))
            if drift > params.reality_tol:
                raise RealityDriftError(
                    f"reality drift {drift:.3e} exceeds {params.reality_tol:.1e} at t={t:.3f}"
                )
        zs[i] = extract_zeta(c, grid, t, check_tol=None, counters=counters)
        if i % params.snap_stride == 0 or i == n_steps:
            snap_times.append(t)
            snapshots.append(FourierField(grid, c))
            edge = float(max(np.max(np.abs(c[:, 0])), np.max(np.abs(c[:, -1]))))
            if edge > counters.max_edge_magnitude:
                counters.max_edge_magnitude = edge

    series = FieldSeries(t=np.arange(n_steps + 1) * dt, zeta1=zs)
    return Trajectory(
        grid=grid,
        times=np.array(snap_times),
        snapshots=snapshots,
        series=series,
        counters=counters,
    )
