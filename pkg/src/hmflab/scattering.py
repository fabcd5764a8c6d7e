"""Terminal-value (scattering) solver via alternating field/transport passes.

Given a terminal datum imposed at time T, the solution on a window
[tau, T] is constructed by successive approximation: freeze the state
history h^(j) and solve the field equation

    zeta(t) = datum_1(t) + sign * int_t^T j_{-1}(s - t) zeta(s) ds + sign * Phi[zeta, h^(j)](t),

    Phi(t)  = -(eps/2) sum_{k=+-1} k int_t^T zeta_k(s) h^(j)_{1-k}(s, t - k s) (s - t) ds,

implicitly in zeta (the coupling term is linear in the pair
(zeta, conj zeta) once the history is frozen); then integrate the
coefficient system backward from the datum with that field frozen to get
h^(j+1).  Starting from the constant-in-time datum history, the sweep
contracts when the coupling is weak -- small eps, or a window starting
late enough that the field history is already tiny.

Continuation in T re-solves on growing windows and measures how fast the
solutions settle, which is the computable footprint of the T -> infinity
limit.  The large-window mode splits the coupling integral into its two
mode branches and re-expresses the branch through the conserved-mean mode
by the mode-0 reconstruction identity, the pair of diagnostics that
explains why late windows are echo-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .evolution import FieldSeries, Trajectory, rhs_coeffs
from .norms import functional_M, functional_N, solve_a
from .profiles import Profile, kernel_j
from .spectral import FourierField, TruncationCounters, sample_mode
from .volterra import solve_volterra

try:
    from numpy import trapezoid
except ImportError:  # numpy < 2.0
    from numpy import trapz as trapezoid


@dataclass(frozen=True)
class ScatteringConfig:
    """Backward-problem settings.

    ``zeta_refine`` subdivides the state step for the field solve (even,
    so half-step nodes exist for the Runge-Kutta stages).  The trace norms
    are evaluated at ``norm_lambda`` with budget parameter ``norm_delta``.
    """

    terminal: FourierField
    background: Profile
    epsilon: float
    T: float
    d_t: float
    tau: float = 0.0
    sign: float = 1.0
    picard_max_iters: int = 12
    picard_tol: float = 1e-6
    zeta_refine: int = 2
    snap_stride: int = 10
    inner_max: int = 40
    overflow_cap: float = 1e6
    norm_lambda: float = 0.3
    norm_delta: float = 1e-3
    trace_norm_stride: int = 4

    def __post_init__(self):
        if self.tau < 0 or self.tau >= self.T:
            raise ValueError(f"window needs 0 <= tau < T, got tau={self.tau}, T={self.T}")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.zeta_refine < 2 or self.zeta_refine % 2:
            raise ValueError("zeta_refine must be an even integer >= 2")
        if self.sign not in (1.0, -1.0, 1, -1):
            raise ValueError(f"sign must be +-1, got {self.sign}")
        n = (self.T - self.tau) / self.d_t
        if abs(n - round(n)) > 1e-9:
            raise ValueError("window length must be an integer number of steps")
        if self.T > self.terminal.grid.t_final + 1e-12:
            raise ValueError(
                f"T={self.T} exceeds the grid horizon {self.terminal.grid.t_final}"
            )


@dataclass
class PicardTrace:
    """Per-sweep convergence record."""

    sup_diffs: list[float] = dfield(default_factory=list)
    contraction_ratios: list[float] = dfield(default_factory=list)
    m_norms: list[float] = dfield(default_factory=list)
    n_norms: list[float] = dfield(default_factory=list)
    inner_iterations: list[int] = dfield(default_factory=list)
    inner_converged: list[bool] = dfield(default_factory=list)
    converged: bool = False
    diverged: bool = False
    iterations: int = 0
    failure: str | None = None

    def as_dict(self) -> dict:
        return {
            "sup_diffs": self.sup_diffs,
            "contraction_ratios": self.contraction_ratios,
            "m_norms": self.m_norms,
            "n_norms": self.n_norms,
            "inner_iterations": self.inner_iterations,
            "inner_converged": self.inner_converged,
            "converged": self.converged,
            "diverged": self.diverged,
            "iterations": self.iterations,
            "failure": self.failure,
        }


@dataclass(frozen=True)
class EchoSplit:
    """Mode-branch split of the field coupling integral on the window.

    ``b_plus`` couples through the conserved-mean mode, ``b_minus``
    through mode 2; ``b_plus_reconstructed`` recomputes the former with
    the mode-0 row replaced by its own coupling-integral reconstruction.
    """

    t: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray
    b_plus_reconstructed: np.ndarray

    def sup_values(self) -> dict:
        return {
            "sup_b_plus": float(np.max(np.abs(self.b_plus))),
            "sup_b_minus": float(np.max(np.abs(self.b_minus))),
            "sup_b_plus_reconstructed": float(np.max(np.abs(self.b_plus_reconstructed))),
            "reconstruction_defect": float(
                np.max(np.abs(self.b_plus - self.b_plus_reconstructed))
            ),
        }


@dataclass(frozen=True)
class ContinuationResult:
    """Differences between successive growing-window solutions."""

    t_values: list[float]
    zeta_diffs: list[float]
    h_diffs: list[float]
    extension_zeta_diffs: list[float]
    traces: list[PicardTrace]
    series: list[FieldSeries]
    last_trajectory: Trajectory | None


class _Workspace:
    """Shared precomputations for one backward solve."""

    def __init__(self, cfg: ScatteringConfig):
        self.cfg = cfg
        self.grid = cfg.terminal.grid
        self.n_steps = int(round((cfg.T - cfg.tau) / cfg.d_t))
        self.t_fine = cfg.tau + np.arange(self.n_steps + 1) * cfg.d_t
        zr = cfg.zeta_refine
        self.d_tz = cfg.d_t / zr
        self.t_z = cfg.tau + np.arange(self.n_steps * zr + 1) * self.d_tz
        self.kernel = (
            kernel_j(cfg.background, -1)
            .sample(cfg.T - cfg.tau, self.d_tz)
            .scaled(cfg.sign)
        )
        self.counters = TruncationCounters()
        self.datum_readout = sample_mode(
            cfg.terminal.coeffs, self.grid, 1, self.t_z, self.counters
        )
        idx = list(range(0, self.n_steps + 1, cfg.snap_stride))
        if idx[-1] != self.n_steps:
            idx.append(self.n_steps)
        self.snap_idx = np.array(idx)
        self.snap_times = self.t_fine[self.snap_idx]
        self.weight = solve_a(cfg.T, cfg.norm_delta, cfg.d_t)

    def coupling_forcing(self, snaps: list[np.ndarray], zeta_z: np.ndarray) -> np.ndarray:
        """Phi on the field grid from stored snapshots (trapezoid over them).

        The integrand vanishes at s = t, so the partial leading interval
        only needs the value at the first snapshot past t.
        """
        cfg, grid = self.cfg, self.grid
        if cfg.epsilon == 0.0:
            return np.zeros(len(self.t_z), dtype=np.complex128)
        t = self.t_z
        m_count = len(self.snap_times)
        integrand = np.empty((m_count, len(t)), dtype=np.complex128)
        for m, (si, s) in enumerate(zip(self.snap_idx, self.snap_times)):
            z1 = zeta_z[si * cfg.zeta_refine]
            c = snaps[m]
            row_p = sample_mode(c, grid, 0, t - s, self.counters)
            row_m = sample_mode(c, grid, 2, t + s, self.counters)
            integrand[m] = (z1 * row_p - np.conj(z1) * row_m) * (s - t)
        # reverse cumulative trapezoid over snapshots
        cum = np.zeros_like(integrand)
        for m in range(m_count - 2, -1, -1):
            ds = self.snap_times[m + 1] - self.snap_times[m]
            cum[m] = cum[m + 1] + 0.5 * ds * (integrand[m] + integrand[m + 1])
        first = np.searchsorted(self.snap_times, t - 1e-12)
        first = np.minimum(first, m_count - 1)
        cols = np.arange(len(t))
        partial = 0.5 * (self.snap_times[first] - t) * integrand[first, cols]
        phi = partial + cum[first, cols]
        return -(cfg.epsilon / 2.0) * phi

    def solve_field(
        self, snaps: list[np.ndarray], zeta_init: np.ndarray | None
    ) -> tuple[np.ndarray, int, bool]:
        """Implicit field solve for frozen history, by inner substitution."""
        cfg = self.cfg
        zeta = (
            zeta_init.copy()
            if zeta_init is not None
            else np.zeros(len(self.t_z), dtype=np.complex128)
        )
        inner_tol = 0.1 * cfg.picard_tol
        for inner in range(1, cfg.inner_max + 1):
            forcing = self.datum_readout + cfg.sign * self.coupling_forcing(snaps, zeta)
            new = solve_volterra(forcing, self.kernel, direction="backward")
            dz = float(np.max(np.abs(new - zeta)))
            zeta = new
            if np.max(np.abs(zeta)) > cfg.overflow_cap:
                return zeta, inner, False
            if cfg.epsilon == 0.0 or dz < inner_tol:
                return zeta, inner, True
        return zeta, cfg.inner_max, False

    def transport(self, zeta_z: np.ndarray) -> list[np.ndarray]:
        """Backward Runge-Kutta pass with the field frozen; returns snapshots."""
        cfg, grid = self.cfg, self.grid
        zr = cfg.zeta_refine
        dt = cfg.d_t
        c = self.cfg.terminal.coeffs.copy()
        snaps: list[np.ndarray | None] = [None] * len(self.snap_idx)
        pos = {int(i): m for m, i in enumerate(self.snap_idx)}
        snaps[pos[self.n_steps]] = c.copy()
        h = -dt
        prof, eps, sign = cfg.background, cfg.epsilon, cfg.sign
        for i in range(self.n_steps, 0, -1):
            t = self.t_fine[i]
            z_a = zeta_z[i * zr]
            z_mid = zeta_z[i * zr - zr // 2]
            z_b = zeta_z[(i - 1) * zr]
            k1 = rhs_coeffs(c, t, z_a, grid, prof, eps, sign)
            k2 = rhs_coeffs(c + (0.5 * h) * k1, t + 0.5 * h, z_mid, grid, prof, eps, sign)
            k3 = rhs_coeffs(c + (0.5 * h) * k2, t + 0.5 * h, z_mid, grid, prof, eps, sign)
            k4 = rhs_coeffs(c + h * k3, t + h, z_b, grid, prof, eps, sign)
            c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if (i - 1) in pos:
                peak = float(np.max(np.abs(c)))
                if peak > cfg.overflow_cap:
                    raise _TransportBlowUp(self.t_fine[i - 1], peak)
                edge = float(max(np.max(np.abs(c[:, 0])), np.max(np.abs(c[:, -1]))))
                if edge > self.counters.max_edge_magnitude:
                    self.counters.max_edge_magnitude = edge
                snaps[pos[i - 1]] = c.copy()
        return snaps  # type: ignore[return-value]


class _TransportBlowUp(RuntimeError):
    def __init__(self, t, magnitude):
        super().__init__(f"transport pass overflowed at t={t:.3f} (|h|={magnitude:.3e})")
        self.t = t
        self.magnitude = magnitude


def _trace_norms(ws: _Workspace, zeta_z, snaps) -> tuple[float, float]:
    cfg = ws.cfg
    stride = max(1, cfg.trace_norm_stride)
    sub = list(range(0, len(ws.snap_times), stride))
    if sub[-1] != len(ws.snap_times) - 1:
        sub.append(len(ws.snap_times) - 1)
    traj = Trajectory(
        grid=ws.grid,
        times=ws.snap_times[sub],
        snapshots=[FourierField(ws.grid, snaps[m]) for m in sub],
        series=FieldSeries(t=ws.t_fine, zeta1=zeta_z[:: cfg.zeta_refine]),
    )
    m_val = functional_M(traj.series, cfg.norm_lambda).value
    n_val = functional_N(traj, cfg.norm_lambda, ws.weight, mu_points=32).value
    return m_val, n_val


def backward_solve(
    config: ScatteringConfig,
    require_stability: bool = False,
) -> tuple[Trajectory, PicardTrace]:
    """Solve the terminal-value problem on [tau, T] by Picard sweeps.

    Convergence is declared when the sup change of both the field series
    and the stored snapshots falls under ``picard_tol``; the trace records
    the change, the contraction ratios and the weighted norms of each
    iterate.  Non-convergence (including overflow) is a reportable
    outcome, returned as a trace marked diverged, not an exception.

    When ``require_stability`` is set, a margin scan of the window kernel
    is run first and a failing kernel raises StabilityViolation.
    """
    if require_stability:
        from .volterra import StabilityViolation, stability_margin

        report = stability_margin(_window_kernel(config), 30.0, 1201)
        if not report.satisfied:
            raise StabilityViolation(
                f"kernel margin {report.margin:.3f} below threshold {report.threshold}"
            )
    ws = _Workspace(config)
    trace = PicardTrace()
    datum = config.terminal.coeffs
    snaps = [datum.copy() for _ in ws.snap_idx]
    zeta_prev: np.ndarray | None = None
    zeta = None
    for it in range(1, config.picard_max_iters + 1):
        trace.iterations = it
        zeta, inner_n, inner_ok = ws.solve_field(snaps, zeta_prev)
        trace.inner_iterations.append(inner_n)
        trace.inner_converged.append(inner_ok)
        if not inner_ok and float(np.max(np.abs(zeta))) > config.overflow_cap:
            trace.diverged = True
            trace.failure = "field solve overflowed"
            break
        try:
            new_snaps = ws.transport(zeta)
        except _TransportBlowUp as exc:
            trace.diverged = True
            trace.failure = str(exc)
            break
        dh = max(
            float(np.max(np.abs(a - b))) for a, b in zip(new_snaps, snaps)
        )
        dz = (
            float(np.max(np.abs(zeta - zeta_prev)))
            if zeta_prev is not None
            else math.inf
        )
        diff = max(dh, dz if math.isfinite(dz) else dh)
        if trace.sup_diffs:
            trace.contraction_ratios.append(diff / trace.sup_diffs[-1])
        trace.sup_diffs.append(diff)
        m_val, n_val = _trace_norms(ws, zeta, new_snaps)
        trace.m_norms.append(m_val)
        trace.n_norms.append(n_val)
        snaps = new_snaps
        zeta_prev = zeta
        if diff < config.picard_tol:
            trace.converged = True
            break
    if not trace.converged and not trace.diverged:
        trace.diverged = True
        trace.failure = f"no convergence in {config.picard_max_iters} iterations"
    traj = Trajectory(
        grid=ws.grid,
        times=ws.snap_times.copy(),
        snapshots=[FourierField(ws.grid, s) for s in snaps],
        series=FieldSeries(t=ws.t_fine.copy(), zeta1=zeta[:: config.zeta_refine].copy()),
        counters=ws.counters,
    )
    return traj, trace


def _window_kernel(config: ScatteringConfig):
    return (
        kernel_j(config.background, -1)
        .sample(max(25.0, config.T - config.tau), min(config.d_t, 5e-3))
        .scaled(config.sign)
    )


def fixed_point_residual(config: ScatteringConfig, traj: Trajectory) -> float:
    """Sup change of the field under one extra sweep from a converged run.

    The field equation is re-solved against the converged snapshots from
    scratch and compared with the stored series on its own nodes, so the
    residual measures the fixed-point property, not interpolation noise.
    """
    ws = _Workspace(config)
    snaps = [s.coeffs for s in traj.snapshots]
    new, _, _ = ws.solve_field(snaps, None)
    return float(np.max(np.abs(new[:: config.zeta_refine] - traj.series.zeta1)))


def continue_in_T(config: ScatteringConfig, t_values) -> ContinuationResult:
    """Re-solve on growing windows and difference successive solutions.

    All runs share the terminal datum's grid, step and snapshot cadence,
    so fields and series are comparable node-by-node on the overlap
    [tau, min(T, T')].  Each solution is extended by the datum beyond its
    own window; the extension's field mismatch over (T, T'] is reported
    separately.
    """
    t_values = sorted(float(T) for T in t_values)
    if any(T > config.terminal.grid.t_final + 1e-12 for T in t_values):
        raise ValueError("every continuation horizon must fit the grid")
    traces: list[PicardTrace] = []
    series: list[FieldSeries] = []
    zeta_diffs: list[float] = []
    h_diffs: list[float] = []
    ext_diffs: list[float] = []
    prev_snaps: dict[float, np.ndarray] | None = None
    prev_series: FieldSeries | None = None
    last_traj = None
    for T in t_values:
        cfg = _with_T(config, T)
        traj, trace = backward_solve(cfg)
        traces.append(trace)
        series.append(traj.series)
        snap_map = {round(float(t), 9): s.coeffs for t, s in zip(traj.times, traj.snapshots)}
        if prev_series is not None:
            n_common = len(prev_series.t)
            zeta_diffs.append(
                float(np.max(np.abs(traj.series.zeta1[:n_common] - prev_series.zeta1)))
            )
            common = [k for k in snap_map if k in prev_snaps]
            h_diffs.append(
                max(float(np.max(np.abs(snap_map[k] - prev_snaps[k]))) for k in common)
            )
            # extension of the previous run by the datum, measured on (T_prev, T]
            mask = traj.series.t > prev_series.t[-1] + 1e-12
            ext_readout = sample_mode(
                config.terminal.coeffs, config.terminal.grid, 1, traj.series.t[mask]
            )
            ext_diffs.append(
                float(np.max(np.abs(traj.series.zeta1[mask] - ext_readout)))
                if np.any(mask)
                else 0.0
            )
        prev_snaps = snap_map
        prev_series = traj.series
        last_traj = traj
    return ContinuationResult(
        t_values=t_values,
        zeta_diffs=zeta_diffs,
        h_diffs=h_diffs,
        extension_zeta_diffs=ext_diffs,
        traces=traces,
        series=series,
        last_trajectory=last_traj,
    )


def _with_T(config: ScatteringConfig, T: float) -> ScatteringConfig:
    return ScatteringConfig(
        terminal=config.terminal,
        background=config.background,
        epsilon=config.epsilon,
        T=T,
        d_t=config.d_t,
        tau=config.tau,
        sign=config.sign,
        picard_max_iters=config.picard_max_iters,
        picard_tol=config.picard_tol,
        zeta_refine=config.zeta_refine,
        snap_stride=config.snap_stride,
        inner_max=config.inner_max,
        overflow_cap=config.overflow_cap,
        norm_lambda=config.norm_lambda,
        norm_delta=config.norm_delta,
        trace_norm_stride=config.trace_norm_stride,
    )


def nonperturbative_solve(
    config: ScatteringConfig,
) -> tuple[Trajectory, PicardTrace, EchoSplit | None]:
    """Late-window solve with an order-one datum (no small parameter).

    The coupling runs at full strength (epsilon must be 1); the datum is
    the mean-zero part of the target state and the background its x-mean.
    Convergence rests on the window start, not on amplitude smallness, so
    the kernel margin is recorded by the caller rather than enforced.
    Returns the mode-branch echo split of the converged solution (None if
    the run diverged).
    """
    if config.epsilon != 1.0:
        raise ValueError("the non-perturbative mode runs at epsilon = 1")
    traj, trace = backward_solve(config)
    split = echo_split(traj, config) if trace.converged else None
    return traj, trace, split


def echo_split(traj: Trajectory, config: ScatteringConfig) -> EchoSplit:
    """Split the coupling integral of the mode-1 field equation by branch.

    On snapshot times t_m:

        B_+(t) =  int_t^T zeta_1(s)  h_0(s, t - s) (t - s) ds
        B_-(t) = -int_t^T zeta_-1(s) h_2(s, t + s) (t - s) ds

    and B_+ again with h_0 replaced by its coupling reconstruction

        h_0(s, u) = sign * sum_k (k/2) int_s^T zeta_k(l) h_{-k}(l, u - k l) u dl,

    valid because the datum mean-zero row makes the terminal term vanish.
    All integrals ride the snapshot grid; u-offsets land on nodes exactly.
    """
    grid = traj.grid
    ts = traj.times
    m_count = len(ts)
    du = ts[1] - ts[0]
    zeta_at = np.interp(ts, traj.series.t, traj.series.zeta1.real) + 1j * np.interp(
        ts, traj.series.t, traj.series.zeta1.imag
    )
    # u-grid: t - s for t, s in snapshot times -> multiples of du in [-(T-tau), 0]
    u = -(ts[::-1] - ts[0])
    u_index = lambda t_i, s_m: int(round((t_i - s_m) / du)) + m_count - 1

    # reads of h_0(s, u) and h_2(s, t + s) rows
    h0_read = np.empty((m_count, m_count), dtype=np.complex128)  # [s_m, u]
    h2_read = np.empty((m_count, m_count), dtype=np.complex128)  # [s_m, t_i]
    for m, (s, snap) in enumerate(zip(ts, traj.snapshots)):
        h0_read[m] = sample_mode(snap.coeffs, grid, 0, u)
        h2_read[m] = sample_mode(snap.coeffs, grid, 2, ts + s)

    # mode-0 reconstruction on (s_m, u): reverse cumulative trapezoid over l
    rec_rows = np.empty((m_count, m_count), dtype=np.complex128)
    for m, (l, snap) in enumerate(zip(ts, traj.snapshots)):
        r_p = sample_mode(snap.coeffs, grid, -1, u - l)
        r_m = sample_mode(snap.coeffs, grid, 1, u + l)
        rec_rows[m] = zeta_at[m] * r_p - np.conj(zeta_at[m]) * r_m
    h0_rec = np.zeros_like(rec_rows)
    for m in range(m_count - 2, -1, -1):
        dl = ts[m + 1] - ts[m]
        h0_rec[m] = h0_rec[m + 1] + 0.5 * dl * (rec_rows[m] + rec_rows[m + 1])
    h0_rec *= config.sign * config.epsilon * 0.5 * u[None, :]

    b_plus = np.zeros(m_count, dtype=np.complex128)
    b_minus = np.zeros(m_count, dtype=np.complex128)
    b_plus_rec = np.zeros(m_count, dtype=np.complex128)
    for i, t_i in enumerate(ts):
        rng = np.arange(i, m_count)
        uu = np.array([u_index(t_i, ts[m]) for m in rng])
        w_plus = zeta_at[rng] * h0_read[rng, uu] * (t_i - ts[rng])
        w_rec = zeta_at[rng] * h0_rec[rng, uu] * (t_i - ts[rng])
        w_minus = -np.conj(zeta_at[rng]) * h2_read[rng, i] * (t_i - ts[rng])
        if len(rng) > 1:
            b_plus[i] = trapezoid(w_plus, ts[rng])
            b_minus[i] = trapezoid(w_minus, ts[rng])
            b_plus_rec[i] = trapezoid(w_rec, ts[rng])
    return EchoSplit(t=ts.copy(), b_plus=b_plus, b_minus=b_minus, b_plus_reconstructed=b_plus_rec)
