"""Truncated Fourier phase-space representations.

A distribution perturbation h(x, v) on S^1 x R is stored through its
coefficients

    h_n(xi) = (1/2pi) int e^{-i n x} e^{-i v xi} h(x, v) dx dv

on a uniform frequency grid |xi| <= xi_max with spacing d_xi and integer
modes |n| <= n_max.  Free streaming turns into the frequency shifts
xi -> xi - k t, which generically fall between nodes; off-grid values are
obtained by four-point cubic Lagrange interpolation and reads beyond the
frequency cutoff return zero (compact-support truncation).

Reality of h is the mirror symmetry h_{-n}(-xi) = conj(h_n(xi)), which in
array terms is a combined reversal of both axes plus conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numpy import trapezoid
except ImportError:  # numpy < 2.0
    from numpy import trapz as trapezoid


class GridError(ValueError):
    """Invalid grid geometry."""


@dataclass(frozen=True)
class Grid:
    """Mode / frequency lattice supporting a time horizon.

    The field readout samples xi = +-t, so the frequency cutoff must
    exceed the horizon with room for the interpolation stencil:
    xi_max >= t_final + 4.  The node set always contains xi = 0 so the
    conserved mode-0 coefficient can be checked exactly.
    """

    n_max: int
    xi_max: float
    d_xi: float
    t_final: float

    def __post_init__(self):
        if self.n_max < 2:
            raise GridError(f"n_max must be >= 2, got {self.n_max}")
        if self.d_xi <= 0:
            raise GridError(f"d_xi must be positive, got {self.d_xi}")
        if self.xi_max < self.t_final + 4.0:
            raise GridError(
                f"xi_max={self.xi_max} cannot support horizon t_final="
                f"{self.t_final}: field readout needs xi_max >= t_final + 4"
            )
        ratio = self.xi_max / self.d_xi
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise GridError(
                f"xi_max={self.xi_max} is not an integer multiple of d_xi={self.d_xi}"
            )

    @property
    def n_half(self) -> int:
        return int(round(self.xi_max / self.d_xi))

    @property
    def n_xi(self) -> int:
        return 2 * self.n_half + 1

    @property
    def n_modes(self) -> int:
        return 2 * self.n_max + 1

    @property
    def xi(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1) * self.d_xi

    def mode_index(self, n: int) -> int:
        if abs(n) > self.n_max:
            raise GridError(f"mode {n} outside |n| <= {self.n_max}")
        return n + self.n_max


def make_grid(n_max: int, xi_max: float, d_xi: float, t_final: float) -> Grid:
    """Validated grid constructor; rejects horizons the grid cannot support."""
    return Grid(n_max=n_max, xi_max=float(xi_max), d_xi=float(d_xi), t_final=float(t_final))


class TruncationCounters:
    """Running tally of out-of-range frequency reads.

    ``out_of_range_reads`` counts requested points beyond the cutoff (all
    returned as zero); ``max_edge_magnitude`` tracks the largest stored
    coefficient magnitude in the two outermost frequency columns seen at
    read time, which bounds the error the truncation rule can introduce.
    """

    __slots__ = ("out_of_range_reads", "max_edge_magnitude")

    def __init__(self):
        self.out_of_range_reads = 0
        self.max_edge_magnitude = 0.0

    def merge(self, other: "TruncationCounters") -> None:
        self.out_of_range_reads += other.out_of_range_reads
        self.max_edge_magnitude = max(self.max_edge_magnitude, other.max_edge_magnitude)

    def as_dict(self) -> dict:
        return {
            "out_of_range_reads": self.out_of_range_reads,
            "max_edge_magnitude": self.max_edge_magnitude,
        }


@dataclass(frozen=True)
class FourierField:
    """Immutable snapshot of phase-space Fourier coefficients.

    ``coeffs`` has shape (n_modes, n_xi) and is row-indexed by n + n_max.
    Construction copies by default; treat instances as read-only.
    """

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n_modes, self.grid.n_xi):
            raise GridError(
                f"coefficient shape {c.shape} does not match grid "
                f"({self.grid.n_modes}, {self.grid.n_xi})"
            )
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> "FourierField":
        return cls(grid, np.zeros((grid.n_modes, grid.n_xi), dtype=np.complex128))

    def mode(self, n: int) -> np.ndarray:
        return self.coeffs[self.grid.mode_index(n)]

    def reality_defect(self) -> float:
        """Max deviation from the mirror symmetry h_{-n}(-xi) = conj h_n(xi)."""
        mirror = np.conj(self.coeffs[::-1, ::-1])
        return float(np.max(np.abs(self.coeffs - mirror))) if self.coeffs.size else 0.0

    def mean_mode_at_zero(self) -> complex:
        return complex(self.coeffs[self.grid.mode_index(0), self.grid.n_half])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def _cubic_weights(u):
    """Lagrange weights on four consecutive nodes for a target in [node1, node2].

    u is the fractional offset from the second node; reproduces node values
    exactly at u = 0 and is O(d_xi^4) accurate for C^4 data.
    """
    return (
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u * u - 1.0) * (u - 2.0) / 2.0,
        -u * (u + 1.0) * (u - 2.0) / 2.0,
        u * (u * u - 1.0) / 6.0,
    )


def shift_rows(coeffs: np.ndarray, grid: Grid, delta: float) -> np.ndarray:
    """Sample every mode row at xi + delta (cubic, zero beyond the cutoff).

    The shift is common to all rows, so the interpolation reduces to four
    shifted slice accumulations with scalar weights.
    """
    s = delta / grid.d_xi
    if abs(s - round(s)) < 1e-9:  # snap so on-node shifts reproduce stored values
        s = float(round(s))
    b = int(np.floor(s))
    w = _cubic_weights(s - b)
    n = grid.n_xi
    out = np.zeros_like(coeffs)
    for m, wm in zip((-1, 0, 1, 2), w):
        off = b + m
        lo = max(0, -off)
        hi = min(n, n - off)
        if lo < hi:
            out[..., lo:hi] += wm * coeffs[..., lo + off : hi + off]
    # compact-support truncation: columns sampled beyond the cutoff are zero
    j_min = int(np.ceil(-s - 1e-9))
    j_max = int(np.floor(2 * grid.n_half - s + 1e-9))
    if j_min > 0:
        out[..., : min(j_min, n)] = 0.0
    if j_max < n - 1:
        out[..., max(j_max + 1, 0) :] = 0.0
    return out


def sample_mode(
    coeffs: np.ndarray,
    grid: Grid,
    n: int,
    points: np.ndarray,
    counters: TruncationCounters | None = None,
) -> np.ndarray:
    """Cubic read of one mode row at arbitrary frequencies (vectorized).

    Points beyond |xi_max| contribute zero; stencil nodes outside the grid
    are treated as zero, consistent with the compact-support truncation.
    """
    row = coeffs[grid.mode_index(n)]
    pts = np.asarray(points, dtype=float)
    out = np.zeros(pts.shape, dtype=np.complex128)
    inside = np.abs(pts) <= grid.xi_max
    if counters is not None:
        n_out = int(pts.size - np.count_nonzero(inside))
        if n_out:
            counters.out_of_range_reads += n_out
        edge = max(abs(row[0]), abs(row[-1]))
        if edge > counters.max_edge_magnitude:
            counters.max_edge_magnitude = float(edge)
    if not np.any(inside):
        return out
    s = (pts[inside] + grid.xi_max) / grid.d_xi
    near = np.abs(s - np.round(s)) < 1e-9  # snap node reads to the stored values
    s[near] = np.round(s[near])
    b = np.floor(s).astype(np.int64)
    w = _cubic_weights(s - b)
    acc = np.zeros(b.shape, dtype=np.complex128)
    for m, wm in zip((-1, 0, 1, 2), w):
        idx = b + m
        ok = (idx >= 0) & (idx < grid.n_xi)
        if np.any(ok):
            acc[ok] += wm[ok] * row[idx[ok]]
    out[inside] = acc
    return out


def eval_shifted(
    fld: FourierField,
    n: int,
    xi: float,
    counters: TruncationCounters | None = None,
) -> complex:
    """Coefficient of mode n at an off-grid frequency xi.

    Returns the stored value exactly when xi is a node, the cubic
    interpolant otherwise, and 0 beyond the frequency cutoff.
    """
    val = sample_mode(fld.coeffs, fld.grid, n, np.array([xi]), counters)
    return complex(val[0])


def enforce_reality(fld: FourierField) -> FourierField:
    """Project onto the mirror symmetry by averaging conjugate pairs.

    Idempotent; commutes with multiplication by real scalars.
    """
    mirror = np.conj(fld.coeffs[::-1, ::-1])
    return FourierField(fld.grid, 0.5 * (fld.coeffs + mirror))


@dataclass(frozen=True)
class PhysicalSamples:
    """Real-space reconstruction on a (x, v) product lattice."""

    x: np.ndarray
    v: np.ndarray
    values: np.ndarray
    max_imag_residue: float


def to_physical(fld: FourierField, nx: int, nv: int, v_max: float) -> PhysicalSamples:
    """Invert the transform on a nx-by-nv lattice, x in [0, 2pi), |v| <= v_max.

    The inverse carries the 1/2pi on the frequency integral so that
    forward followed by inverse is the identity on band-limited data:
    h(x, v) = sum_n e^{i n x} (1/2pi) int e^{i v xi} h_n(xi) dxi.
    """
    grid = fld.grid
    x = np.linspace(0.0, 2.0 * np.pi, nx, endpoint=False)
    v = np.linspace(-v_max, v_max, nv)
    xi = grid.xi
    # (nv, n_xi) phase matrix, then trapezoid over xi per v node
    phase = np.exp(1j * np.outer(v, xi))
    vals = np.zeros((nx, nv), dtype=np.complex128)
    for n in range(-grid.n_max, grid.n_max + 1):
        row = fld.coeffs[grid.mode_index(n)]
        vslice = trapezoid(phase * row[None, :], dx=grid.d_xi, axis=1) / (2.0 * np.pi)
        vals += np.outer(np.exp(1j * n * x), vslice)
    residue = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    return PhysicalSamples(x=x, v=v, values=vals.real.copy(), max_imag_residue=residue)
