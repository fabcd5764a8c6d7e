"""Exponential-weight norms and the time-dependent regularity budget.

The analytic norm of a phase-space function is the weighted coefficient sup

    ||g||_mu = sup_{n, xi} e^{mu <n, xi>} |g_n(xi)|,   <n, xi> = sqrt(1 + n^2 + xi^2),

finite exactly when g extends analytically to a strip of width mu.  The
terminal-value estimates spend analytic radius over time through the
budget function a(t), the backward solution of

    da/dt = -delta e^{-a(t) t} (1 + t),   a(T) = 0,

which is positive, decreasing, grows like delta^(1/3) at t = 0 and has a
well-defined T -> infinity limit.  The weighted functionals below combine
the field history and snapshot norms over the admissible region where the
remaining budget alpha = lam - mu - a(t) stays positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .evolution import FieldSeries, Trajectory
from .profiles import Profile
from .spectral import FourierField, Grid


@dataclass(frozen=True)
class NormReport:
    """Value of a sup functional plus where the sup was attained."""

    value: float
    where: tuple | None = None
    empty: bool = False

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class WeightFunction:
    """Sampled regularity budget a(t) with its defining parameters.

    ``big_t`` is the terminal time, math.inf for the extrapolated limit
    function.
    """

    big_t: float
    delta: float
    t: np.ndarray
    a: np.ndarray

    def __call__(self, tq):
        return np.interp(tq, self.t, self.a)

    @property
    def a0(self) -> float:
        return float(self.a[0])


def _rk4_scalar(f, y0: float, t0: float, t1: float, n_steps: int) -> np.ndarray:
    h = (t1 - t0) / n_steps
    ys = np.empty(n_steps + 1)
    ys[0] = y = y0
    t = t0
    for i in range(n_steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h * k1 / 2)
        k3 = f(t + h / 2, y + h * k2 / 2)
        k4 = f(t + h, y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t = t0 + (i + 1) * h
        ys[i + 1] = y
    return ys


def solve_a(T: float, delta: float, d_t: float) -> WeightFunction:
    """Backward integration of the budget equation from a(T) = 0."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    n = int(round(T / d_t))
    f = lambda t, a: -delta * math.exp(-a * t) * (1.0 + t)
    ys = _rk4_scalar(f, 0.0, T, 0.0, n)[::-1]
    if np.any(ys[:-1] <= 0.0):
        raise RuntimeError("budget integration lost positivity on [0, T)")
    # equality allowed: once a*t is large the decay underflows one ulp per step
    if np.any(np.diff(ys) > 0.0):
        raise RuntimeError("budget integration lost monotonicity")
    return WeightFunction(big_t=T, delta=delta, t=np.arange(n + 1) * d_t, a=ys)


def a_infinity(
    delta: float,
    t_max: float,
    d_t: float,
    t_list: tuple[float, ...] | None = None,
    max_retries: int = 3,
) -> WeightFunction:
    """Limit budget function on [0, t_max].

    The initial value is the extrapolated limit of the terminal-problem
    values a_T(0) over increasing T (they increase and converge fast);
    forward integration from it stays positive while it tracks the
    separatrix.  A positivity failure means the extrapolation undershot;
    the horizon list is doubled and the estimate repeated.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if t_list is None:
        base = max(2.0 * t_max, 100.0)
        t_list = (base, 2.0 * base, 4.0 * base)
    horizons = tuple(float(T) for T in t_list)
    for _ in range(max_retries + 1):
        a0s = [solve_a(T, delta, d_t).a0 for T in horizons]
        a_ext = _aitken(a0s)
        n = int(round(t_max / d_t))
        f = lambda t, a: -delta * math.exp(-a * t) * (1.0 + t)
        ys = _rk4_scalar(f, a_ext, 0.0, t_max, n)
        if np.all(ys > 0.0):
            return WeightFunction(
                big_t=math.inf, delta=delta, t=np.arange(n + 1) * d_t, a=ys
            )
        horizons = tuple(2.0 * T for T in horizons)
    raise RuntimeError(
        f"limit budget stayed nonpositive on [0, {t_max}] after {max_retries} retries"
    )


def _aitken(seq) -> float:
    a0, a1, a2 = seq[-3], seq[-2], seq[-1]
    denom = (a2 - a1) - (a1 - a0)
    if denom == 0.0 or not math.isfinite(denom):
        return a2
    ext = a2 - (a2 - a1) ** 2 / denom
    # the sequence increases to its limit; never extrapolate below the data
    return max(ext, a2)


@lru_cache(maxsize=32)
def _bracket(grid: Grid) -> np.ndarray:
    """<n, xi> on the full lattice, rows indexed like field coefficients."""
    n = np.arange(-grid.n_max, grid.n_max + 1, dtype=float)[:, None]
    xi = grid.xi[None, :]
    return np.sqrt(1.0 + n * n + xi * xi)


def _log_abs(coeffs: np.ndarray) -> np.ndarray:
    out = np.full(coeffs.shape, -np.inf)
    nz = coeffs != 0
    out[nz] = np.log(np.abs(coeffs[nz]))
    return out


def _located_max(arr: np.ndarray, grid: Grid) -> tuple[float, tuple[int, float]]:
    k = int(np.argmax(arr))
    i, j = np.unravel_index(k, arr.shape)
    return float(arr[i, j]), (int(i - grid.n_max), float(grid.xi[j]))


def analytic_norm(fld: FourierField, mu: float) -> NormReport:
    """sup e^{mu <n, xi>} |h_n(xi)| over the lattice, with the maximizer."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    if not np.any(fld.coeffs):
        return NormReport(0.0, None)
    logv = mu * _bracket(fld.grid) + _log_abs(fld.coeffs)
    val, where = _located_max(logv, fld.grid)
    return NormReport(float(np.exp(val)), where)


def weighted_norm_p(fld: FourierField, lam: float, p: int) -> NormReport:
    """sup e^{lam <n, xi>} <n, xi>^p |h_n(xi)|; p = 0 reduces to analytic_norm."""
    if lam < 0 or p < 0:
        raise ValueError("lam and p must be nonnegative")
    if not np.any(fld.coeffs):
        return NormReport(0.0, None)
    br = _bracket(fld.grid)
    logv = lam * br + p * np.log(br) + _log_abs(fld.coeffs)
    val, where = _located_max(logv, fld.grid)
    return NormReport(float(np.exp(val)), where)


def profile_analytic_norm(profile: Profile, lam: float) -> float:
    """sup e^{lam <xi>} |eta_hat(xi)| of a closed-form background (mode 0)."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam > profile.analytic_width:
        return math.inf
    xi = np.linspace(0.0, 400.0, 40001)
    vals = np.exp(lam * np.sqrt(1.0 + xi * xi)) * np.abs(profile.eta_hat(xi))
    k = int(np.argmax(vals))
    lo = xi[max(0, k - 1)]
    hi = xi[min(len(xi) - 1, k + 1)]
    for _ in range(80):  # golden-section refine
        m1 = lo + 0.381966 * (hi - lo)
        m2 = hi - 0.381966 * (hi - lo)
        f1 = math.exp(lam * math.sqrt(1 + m1 * m1)) * abs(profile.eta_hat(m1))
        f2 = math.exp(lam * math.sqrt(1 + m2 * m2)) * abs(profile.eta_hat(m2))
        if f1 < f2:
            lo = m1
        else:
            hi = m2
    m = 0.5 * (lo + hi)
    return float(
        max(
            vals[k],
            math.exp(lam * math.sqrt(1 + m * m)) * abs(profile.eta_hat(m)),
        )
    )


def functional_M(zeta: FieldSeries, lam: float) -> NormReport:
    """sup_t e^{lam t} |zeta_1(t)| over the stored window."""
    vals = np.exp(lam * zeta.t) * np.abs(zeta.zeta1)
    k = int(np.argmax(vals))
    return NormReport(float(vals[k]), (float(zeta.t[k]),))


def _boundary_refined_fractions(n_points: int) -> np.ndarray:
    """Fractions of the admissible interval, geometrically packed near 1.

    The integrand alpha^(1/2) ||h||_mu typically peaks close to the
    alpha = 0 boundary; a geometric approach resolves it at fixed cost.
    """
    tail = 1.0 - np.geomspace(1.0, 1.0 / 512.0, n_points - 1)
    return np.concatenate([[0.0], tail[1:], [1.0 - 1.0 / 1024.0]])


def _weighted_snapshot_sup(
    traj: Trajectory,
    lam: float,
    budget_at,
    t_window: tuple[float, float],
    mu_points: int,
) -> NormReport:
    """sup over admissible (mu, t) of (lam - mu - budget(t))^(1/2) ||h(t)||_mu."""
    fractions = _boundary_refined_fractions(mu_points)
    br = _bracket(traj.grid)
    best_val = None
    best_where = None
    for t, snap in zip(traj.times, traj.snapshots):
        if t < t_window[0] - 1e-12 or t > t_window[1] + 1e-12:
            continue
        mu_cap = lam - float(budget_at(t))
        if mu_cap <= 0.0:
            continue
        if best_val is None:
            best_val, best_where = 0.0, (0.0, float(t))
        logh = _log_abs(snap.coeffs)
        if not np.any(np.isfinite(logh)):
            continue  # zero snapshot contributes 0
        for f in fractions:
            mu = f * mu_cap
            alpha = mu_cap - mu
            if alpha <= 0.0:
                continue
            val = math.exp(float(np.max(mu * br + logh)) + 0.5 * math.log(alpha))
            if val > best_val:
                best_val, best_where = val, (float(mu), float(t))
    if best_val is None:
        return NormReport(0.0, None, empty=True)
    return NormReport(best_val, best_where)


def functional_N(
    traj: Trajectory,
    lam: float,
    weight: WeightFunction,
    mu_points: int = 64,
) -> NormReport:
    """Budget-weighted snapshot norm sup alpha^(1/2) ||h(t)||_mu.

    alpha(mu, t) = lam - mu - a(t); the reported value is a lower bound on
    the continuum sup (mu scanned on a boundary-refined grid per time).
    """
    lo = float(traj.times[0])
    hi = float(traj.times[-1])
    return _weighted_snapshot_sup(traj, lam, weight, (lo, hi), mu_points)


def functional_P_Q(
    zeta: FieldSeries,
    traj: Trajectory,
    lam: float,
    lam_prime: float,
    tau: float,
    weight: WeightFunction,
    a_inf_at_tau: float,
) -> tuple[NormReport, NormReport]:
    """Windowed field sup and rescaled-budget snapshot sup for [tau, T].

    P = sup_{[tau, T]} e^{lam t} |zeta_1|; Q uses the budget consumed at
    rate Delta = lam_prime / a_inf(tau) (Delta grows as tau does, which is
    what makes the large-window regime contract without a small factor).
    """
    if not 0.0 < lam_prime < lam:
        raise ValueError("need 0 < lam_prime < lam")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if a_inf_at_tau <= 0:
        raise ValueError("a_inf(tau) must be positive")
    mask = zeta.t >= tau - 1e-12
    vals = np.exp(lam * zeta.t[mask]) * np.abs(zeta.zeta1[mask])
    k = int(np.argmax(vals))
    p_report = NormReport(float(vals[k]), (float(zeta.t[mask][k]),))
    delta_scale = lam_prime / a_inf_at_tau
    scaled = lambda t: delta_scale * weight(t)
    q_report = _weighted_snapshot_sup(
        traj, lam, scaled, (tau, float(traj.times[-1])), 64
    )
    return p_report, q_report


def functional_J_K(
    zeta: FieldSeries,
    traj: Trajectory,
    lambda0: float,
    delta: float,
    p: int,
    q: int,
    lambda_points: int = 64,
) -> tuple[NormReport, NormReport]:
    """Initial-value-problem functionals with the arctan regularity loss.

    beta(lam, t) = lambda0 - lam - delta arctan(t); the field functional is
    sup e^{lam t} <t>^p |zeta_1| over beta > 0, and the state functional
    adds a plain cubic-weight sup to the budgeted <t>^q-discounted sup of
    the (p+1)-weighted norm (two terms; the cubic one absorbs the
    resonant mode pairs).  Requires delta < 2 lambda0 / pi, p >= q + 3,
    q >= 3.
    """
    if not 0 < delta < 2.0 * lambda0 / math.pi:
        raise ValueError(f"need 0 < delta < 2 lambda0/pi = {2*lambda0/math.pi:.4f}")
    if q < 3 or p < q + 3:
        raise ValueError("need q >= 3 and p >= q + 3")
    fractions = _boundary_refined_fractions(lambda_points)

    # field part: scan (lam, t) over the series
    t_arr = zeta.t
    absz = np.abs(zeta.zeta1)
    lam_cap = lambda0 - delta * np.arctan(t_arr)
    bracket_t = np.sqrt(1.0 + t_arr * t_arr)
    best_j = 0.0
    where_j = None
    nz = absz > 0
    if np.any(nz):
        logz = np.log(absz[nz])
        tv = t_arr[nz]
        capv = lam_cap[nz]
        logbr = np.log(bracket_t[nz])
        for f in fractions:
            lamv = f * capv
            logs = lamv * tv + p * logbr + logz
            k = int(np.argmax(logs))
            v = float(np.exp(logs[k]))
            if v > best_j:
                best_j, where_j = v, (float(lamv[k]), float(tv[k]))
    j_report = NormReport(best_j, where_j, empty=not np.any(nz))

    # state part: K = sup ||h||_{lam,3} + sup beta^(1/2) ||h||_{lam,p+1} / <t>^q
    br = _bracket(traj.grid)
    log_br = np.log(br)
    best_k3 = -math.inf
    best_kpq = -math.inf
    where_k = None
    found = False
    for t, snap in zip(traj.times, traj.snapshots):
        cap = lambda0 - delta * math.atan(t)
        if cap <= 0:
            continue
        found = True
        logh = _log_abs(snap.coeffs)
        if not np.any(np.isfinite(logh)):
            continue  # zero snapshot contributes 0 to both sups
        log_t_disc = q * 0.5 * math.log(1.0 + t * t)
        for f in fractions:
            lam = f * cap
            beta = cap - lam
            if beta <= 0:
                continue
            base = lam * br + logh
            v3 = float(np.max(base + 3 * log_br))
            vp = float(np.max(base + (p + 1) * log_br)) + 0.5 * math.log(beta) - log_t_disc
            if v3 > best_k3:
                best_k3 = v3
            if vp > best_kpq:
                best_kpq = vp
                where_k = (float(lam), float(t))
    if not found:
        return j_report, NormReport(0.0, None, empty=True)
    k3 = math.exp(best_k3) if math.isfinite(best_k3) else 0.0
    kpq = math.exp(best_kpq) if math.isfinite(best_kpq) else 0.0
    return j_report, NormReport(k3 + kpq, where_k)
