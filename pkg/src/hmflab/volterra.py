"""Convolution Volterra machinery for the self-consistent field.

Both the forward and the terminal-value problems reduce the field mode to
a second-kind equation with a causal convolution kernel,

    zeta(t) = g(t) + int K(|t - s|) zeta(s) ds      (over [0, t] or [t, T]).

Solvability and decay hinge on the Laplace transform of the kernel staying
away from 1 on the closed right half-plane; the resolvent kernel r with
r + K*r = K then inverts the equation as f = g - r*g.  Everything here is
trapezoidal on uniform time grids: second order, with predictable error
constants at the step sizes the solvers use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

try:
    from numpy import trapezoid
except ImportError:  # numpy < 2.0
    from numpy import trapz as trapezoid


class StabilityViolation(RuntimeError):
    """Resolvent mass blew past the cap: the kernel fails the stability test."""


class DegenerateStepError(ValueError):
    """Implicit diagonal 1 - (d_t/2) K(0) is numerically singular."""


@dataclass(frozen=True)
class KernelFunction:
    """Closed-form kernel with an exponential decay certificate.

    |fn(t)| <= decay_coeff * exp(-decay_rate * t) for t >= 0.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    decay_rate: float
    decay_coeff: float
    label: str = "kernel"

    def __call__(self, t):
        return self.fn(t)

    def sample(self, t_max: float, d_t: float) -> "KernelOnGrid":
        n = int(round(t_max / d_t))
        t = np.arange(n + 1) * d_t
        return KernelOnGrid(
            t=t,
            values=np.asarray(self.fn(t), dtype=np.complex128),
            decay_rate=self.decay_rate,
            decay_coeff=self.decay_coeff,
            label=self.label,
        )


@dataclass(frozen=True)
class KernelOnGrid:
    """Kernel values on a uniform time grid plus the decay certificate."""

    t: np.ndarray
    values: np.ndarray
    decay_rate: float
    decay_coeff: float
    label: str = "kernel"

    def __post_init__(self):
        if len(self.t) != len(self.values):
            raise ValueError("kernel grid and values length mismatch")
        if len(self.t) < 2:
            raise ValueError("kernel grid needs at least two nodes")
        if self.decay_rate <= 0:
            raise ValueError("decay certificate requires a positive rate")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("kernel values must be finite")

    @property
    def d_t(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def l1_norm(self) -> float:
        return float(trapezoid(np.abs(self.values), dx=self.d_t))

    def scaled(self, factor: complex) -> "KernelOnGrid":
        return KernelOnGrid(
            t=self.t,
            values=factor * self.values,
            decay_rate=self.decay_rate,
            decay_coeff=abs(factor) * self.decay_coeff,
            label=self.label,
        )

    def tail_bound(self, re_sigma: float = 0.0) -> float:
        """Rigorous bound on the neglected integral beyond t_max."""
        rate = self.decay_rate + re_sigma
        return self.decay_coeff * np.exp(-rate * self.t_max) / rate


@dataclass(frozen=True)
class LaplaceValue:
    value: complex
    tail_bound: float


@dataclass(frozen=True)
class StabilityReport:
    """Distance of the kernel transform from the critical value 1.

    ``margin`` is the scan minimum of |1 - L[K](sigma)| over the imaginary
    axis plus a coarse grid into the right half-plane; ``satisfied`` holds
    when the margin clears the configured threshold.  When a sup bound M
    on the background transform is supplied, the sufficient smallness
    bound pi^2 M / lambda^2 is evaluated alongside.
    """

    margin: float
    satisfied: bool
    threshold: float
    argmin_sigma: complex
    omega_max: float
    n_scan: int
    sufficient_bound: float | None = None
    sufficient_ok: bool | None = None

    def as_dict(self) -> dict:
        d = {
            "margin": self.margin,
            "satisfied": self.satisfied,
            "threshold": self.threshold,
            "argmin_sigma_re": self.argmin_sigma.real,
            "argmin_sigma_im": self.argmin_sigma.imag,
            "omega_max": self.omega_max,
            "n_scan": self.n_scan,
        }
        if self.sufficient_bound is not None:
            d["sufficient_bound"] = self.sufficient_bound
            d["sufficient_ok"] = self.sufficient_ok
        return d


def _simpson_weights(n_nodes: int, d_t: float) -> np.ndarray:
    """Composite Simpson weights; a trailing trapezoid panel absorbs an odd
    interval count (the tail integrand there is already exponentially small)."""
    w = np.zeros(n_nodes)
    n_int = n_nodes - 1
    m = n_int if n_int % 2 == 0 else n_int - 1
    if m >= 2:
        w[0] += d_t / 3.0
        w[m] += d_t / 3.0
        w[1:m:2] += 4.0 * d_t / 3.0
        w[2:m:2] += 2.0 * d_t / 3.0
    if m != n_int:
        w[-2] += 0.5 * d_t
        w[-1] += 0.5 * d_t
    return w


def laplace(kernel: KernelOnGrid, sigma: complex) -> LaplaceValue:
    """L[K](sigma) = int_0^inf e^{-sigma t} K(t) dt, Re sigma >= 0.

    Composite Simpson over the stored grid; the decay certificate bounds
    the discarded tail rigorously and is reported with the value.
    """
    sigma = complex(sigma)
    if sigma.real < 0:
        raise ValueError(f"laplace requires Re sigma >= 0, got {sigma}")
    w = _simpson_weights(len(kernel.t), kernel.d_t)
    integrand = np.exp(-sigma * kernel.t) * kernel.values
    value = complex(np.dot(w, integrand))
    return LaplaceValue(value=value, tail_bound=kernel.tail_bound(sigma.real))


def _laplace_many(kernel: KernelOnGrid, sigmas: np.ndarray) -> np.ndarray:
    ph = np.exp(-np.outer(sigmas, kernel.t))
    w = _simpson_weights(len(kernel.t), kernel.d_t)
    return ph @ (w * kernel.values)


def stability_margin(
    kernel: KernelOnGrid,
    omega_max: float,
    n_scan: int,
    threshold: float = 0.05,
    m_bound: float | None = None,
    lam: float | None = None,
) -> StabilityReport:
    """Scan min |1 - L[K](sigma)| over the right half-plane boundary.

    sigma = i w on n_scan nodes of [-omega_max, omega_max], a fine line on
    the positive real axis (where attraction-type criticality of a real
    kernel sits), plus a coarse interior grid in Re sigma in
    [0, decay_rate].  The transform decays both into the half-plane and
    along the axis, so the boundary scan controls the infimum; this is a
    numerical verification, not a proof.  Requires omega_max beyond the
    point where an integration-by-parts bound pushes |L[K]| under 1/2.
    """
    # |L[K](i w)| <= (|K(0)| + int |K'|) / |w|, with int |K'| from the grid
    variation = float(np.sum(np.abs(np.diff(kernel.values)))) + kernel.tail_bound()
    bound_at_omega = (abs(kernel.values[0]) + variation) / omega_max
    if bound_at_omega > 0.5:
        raise ValueError(
            f"omega_max={omega_max} too small: |L| bound {bound_at_omega:.3f} > 1/2 beyond scan"
        )
    ws = np.linspace(-omega_max, omega_max, n_scan)
    sigmas = [1j * ws, np.linspace(0.0, kernel.decay_rate, n_scan) + 0j]
    w_coarse = np.unique(np.concatenate([ws[:: max(1, n_scan // 64)], [0.0]]))
    for re in np.linspace(0.0, kernel.decay_rate, 9)[1:]:
        sigmas.append(re + 1j * w_coarse)
    sig = np.concatenate(sigmas)
    dist = np.abs(1.0 - _laplace_many(kernel, sig))
    k = int(np.argmin(dist))
    margin = float(dist[k])
    sufficient_bound = None
    sufficient_ok = None
    if m_bound is not None:
        if lam is None or lam <= 0:
            raise ValueError("the sufficient bound needs a positive weight lam")
        sufficient_bound = float(np.pi ** 2 * m_bound / lam ** 2)
        sufficient_ok = sufficient_bound < 1.0
    return StabilityReport(
        margin=margin,
        satisfied=margin > threshold,
        threshold=threshold,
        argmin_sigma=complex(sig[k]),
        omega_max=omega_max,
        n_scan=n_scan,
        sufficient_bound=sufficient_bound,
        sufficient_ok=sufficient_ok,
    )


def resolvent(kernel: KernelOnGrid, l1_cap: float = 1e3) -> KernelOnGrid:
    """Solve r + K*r = K by forward substitution with trapezoid weights.

    The discrete L1 mass of r is monitored; exceeding ``l1_cap`` flags a
    stability violation (the continuum resolvent is integrable exactly
    when L[K] avoids -1 on the closed right half-plane).
    """
    k = kernel.values
    dt = kernel.d_t
    n = len(k)
    denom = 1.0 + 0.5 * dt * k[0]
    if abs(denom) < 1e-8:
        raise DegenerateStepError(f"1 + (d_t/2) K(0) = {denom} is numerically singular")
    r = np.empty(n, dtype=np.complex128)
    r[0] = k[0]
    mass = 0.0
    for i in range(1, n):
        acc = 0.5 * k[i] * r[0]
        if i > 1:
            acc += np.dot(k[i - 1 : 0 : -1], r[1:i])
        r[i] = (k[i] - dt * acc) / denom
        mass += abs(r[i]) * dt
        if mass > l1_cap:
            raise StabilityViolation(
                f"resolvent L1 mass exceeded {l1_cap} at t={kernel.t[i]:.3f}; "
                f"kernel {kernel.label} fails the stability condition"
            )
    return KernelOnGrid(
        t=kernel.t,
        values=r,
        decay_rate=kernel.decay_rate,
        decay_coeff=kernel.decay_coeff,
        label=f"resolvent[{kernel.label}]",
    )


def convolve_causal(kernel: KernelOnGrid, series: np.ndarray) -> np.ndarray:
    """(K*f)(t_i) = int_0^{t_i} K(t_i - s) f(s) ds by trapezoid."""
    k = kernel.values
    dt = kernel.d_t
    n = len(series)
    out = np.zeros(n, dtype=np.complex128)
    for i in range(1, n):
        acc = 0.5 * (k[i] * series[0] + k[0] * series[i])
        if i > 1:
            acc += np.dot(k[i - 1 : 0 : -1], series[1:i])
        out[i] = dt * acc
    return out


def solve_volterra(
    forcing: np.ndarray,
    kernel: KernelOnGrid,
    direction: str = "forward",
) -> np.ndarray:
    """March the second-kind equation zeta = g + K-convolution of zeta.

    forward:  zeta(t) = g(t) + int_0^t K(t-s) zeta(s) ds, marching up;
    backward: zeta(t) = g(t) + int_t^T K(s-t) zeta(s) ds, marching down
    (equivalent to the forward march on time-reversed forcing).  The
    diagonal is implicit: each step divides by 1 - (d_t/2) K(0).
    """
    g = np.asarray(forcing, dtype=np.complex128)
    if len(g) != len(kernel.t):
        raise ValueError(
            f"forcing length {len(g)} does not match kernel grid {len(kernel.t)}"
        )
    if direction == "backward":
        return solve_volterra(g[::-1], kernel, "forward")[::-1]
    if direction != "forward":
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    k = kernel.values
    dt = kernel.d_t
    denom = 1.0 - 0.5 * dt * k[0]
    if abs(denom) < 1e-8:
        raise DegenerateStepError(f"1 - (d_t/2) K(0) = {denom} is numerically singular")
    n = len(g)
    z = np.empty(n, dtype=np.complex128)
    z[0] = g[0]
    for i in range(1, n):
        acc = 0.5 * k[i] * z[0]
        if i > 1:
            acc += np.dot(k[i - 1 : 0 : -1], z[1:i])
        z[i] = (g[i] + dt * acc) / denom
    return z
