"""Complex fields on a uniform periodic grid and the functionals acting on them.

Integrals use the rectangle rule, derivatives are spectral. The H^1 inner
product is (u, w) = Re int u conj(w) + Re int u' conj(w'), evaluated in
Fourier space.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft, optimize

from .nonlinearity import Nonlinearity, eval_F_grad


@dataclass(frozen=True)
class Grid:
    """Periodic grid x_j = -L/2 + j h, j = 0..n-1."""

    L: float
    n: int

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * fft.fftfreq(self.n, d=self.h)

    @property
    def center(self) -> int:
        """Index of x = 0."""
        return self.n // 2

    def mirror_index(self) -> np.ndarray:
        """Index map j -> index of -x_j."""
        return (-np.arange(self.n)) % self.n

    def __hash__(self):
        return hash((self.L, self.n))


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)  # copy: never freeze the caller's array
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ComplexField":
        return cls(grid, fn(grid.x))

    def _same_grid(self, other: "ComplexField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._same_grid(other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._same_grid(other)
        return ComplexField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ComplexField(self.grid, self.values * c)

    __rmul__ = __mul__

    def shifted(self, y: float) -> "ComplexField":
        """Spectral translate: returns u(x - y)."""
        return ComplexField(self.grid, spectral_shift(self.grid, self.values, y))

    def to_csv(self, path):
        write_field_csv(path, self)

    def to_binary(self, path):
        write_field_binary(path, self)


def as_values(u, grid: Grid | None = None) -> np.ndarray:
    if isinstance(u, ComplexField):
        if grid is not None and u.grid != grid:
            raise ValueError("fields live on different grids")
        return u.values
    return np.asarray(u)


def spectral_shift(grid: Grid, values, y: float) -> np.ndarray:
    vh = fft.fft(values)
    out = fft.ifft(vh * np.exp(-1j * grid.k * y))
    return out if np.iscomplexobj(values) else out.real


def derivative(grid: Grid, values, order: int = 1) -> np.ndarray:
    vh = fft.fft(values)
    k = grid.k
    if order == 1:
        k = k.copy()
        k[grid.n // 2] = 0.0  # Nyquist mode has no odd derivative
        out = fft.ifft(1j * k * vh)
    else:
        out = fft.ifft((1j * k) ** order * vh)
    return out if np.iscomplexobj(values) else out.real


def mass(u: ComplexField) -> float:
    return float(u.grid.h * np.sum(np.abs(u.values) ** 2))


def kinetic(u: ComplexField) -> float:
    """||u'||_2^2 by Parseval."""
    g = u.grid
    uh = fft.fft(u.values)
    return float(g.h / g.n * np.sum(g.k**2 * np.abs(uh) ** 2))


def energy(u: ComplexField, nl: Nonlinearity) -> float:
    """E(u) = 1/2 ||u'||^2 + int G(|u|)."""
    return 0.5 * kinetic(u) + float(u.grid.h * np.sum(nl.G(np.abs(u.values))))


def energy_gradient(u: ComplexField, nl: Nonlinearity) -> ComplexField:
    """L^2 representative of dE(u): -u'' + F'(u)."""
    lap = derivative(u.grid, u.values, order=2)
    return ComplexField(u.grid, -lap + eval_F_grad(nl, u.values))


def l2_inner(u: ComplexField, w: ComplexField) -> complex:
    u._same_grid(w)
    return complex(u.grid.h * np.sum(u.values * np.conj(w.values)))


def h1_inner_complex(u: ComplexField, w: ComplexField) -> complex:
    """int u conj(w) + u' conj(w'), spectrally (real part is the H^1 product)."""
    u._same_grid(w)
    g = u.grid
    uh, wh = fft.fft(u.values), fft.fft(w.values)
    return complex(g.h / g.n * np.sum((1.0 + g.k**2) * uh * np.conj(wh)))


def h1_norm(u: ComplexField) -> float:
    return float(np.sqrt(max(h1_inner_complex(u, u).real, 0.0)))


def lp_norm_power(u: ComplexField, d: float) -> float:
    """||u||_d^d."""
    return float(u.grid.h * np.sum(np.abs(u.values) ** d))


def hessian_form(v, R0, nl: Nonlinearity) -> float:
    """xi(v) = int |v'|^2 + (G''(R0) + omega0) v^2 for a real direction v.

    ``R0`` is a ProfileSolution; ``v`` a real array or field on its grid.
    """
    grid = R0.grid
    v = np.real(as_values(v, grid)).astype(float)
    pot = nl.d2G(R0.R) + R0.omega
    vf = ComplexField(grid, v)
    return kinetic(vf) + float(grid.h * np.sum(pot * v**2))


# --------------------------------------------------------------------------
# vanishing diagnostic


def _interval_masses(u: ComplexField) -> tuple[np.ndarray, np.ndarray]:
    """L^2 mass of u on each integer interval (k, k+1) inside the period.

    The primitive of |u|^2 is evaluated through its trigonometric interpolant,
    so interval boundaries need not fall on grid points.
    """
    g = u.grid
    f = np.abs(u.values) ** 2
    fh = fft.fft(f) / g.n
    k = g.k
    lo = int(np.ceil(-0.5 * g.L))
    hi = int(np.floor(0.5 * g.L))
    ks = np.arange(lo, hi)
    if ks.size == 0:
        return ks, np.zeros(0)
    pts = np.arange(lo, hi + 1, dtype=float)
    nz = k != 0
    coef = fh[nz] / (1j * k[nz])
    phase = np.exp(1j * np.outer(pts - g.x[0], k[nz]))
    prim = (phase @ coef).real + fh[0].real * (pts - g.x[0])
    return ks, np.diff(prim)


def vanishing_sup(u: ComplexField) -> float:
    """sup_k ||u||_{L^2(k, k+1)} over integer intervals within the grid."""
    _, m = _interval_masses(u)
    if m.size == 0:
        return 0.0
    return float(np.sqrt(max(np.max(m), 0.0)))


def vanishing_ratio(u: ComplexField, d: float) -> float:
    """Smallest constant s for which the vanishing inequality holds for u."""
    lhs = lp_norm_power(u, d)
    if lhs == 0.0:
        return 0.0
    sup = vanishing_sup(u)
    h1 = h1_norm(u)
    if d >= 6:
        rhs = sup ** (d - 2) * h1**2
    else:
        rhs = sup ** ((d + 2) / 2) * h1 ** ((d - 2) / 2)
    return float((lhs / rhs) ** (1.0 / d))


def verify_vanishing_inequality(u: ComplexField, d: float, s_const: float) -> bool:
    if d < 2:
        raise ValueError("exponent d must be >= 2")
    return vanishing_ratio(u, d) <= s_const


def random_field_corpus(grid: Grid, count: int = 100, seed: int = 0) -> list[ComplexField]:
    """Seeded H^1-normalized fields built from a few modulated Gaussian bumps.

    Widths, centres, carrier wavenumbers and complex weights are random;
    bumps stay well inside the period so the tails are negligible.
    """
    rng = np.random.default_rng(seed)
    x = grid.x
    out = []
    for _ in range(count):
        v = np.zeros(grid.n, dtype=complex)
        for _ in range(rng.integers(1, 5)):
            w = rng.uniform(0.3, 3.0)
            c = rng.uniform(-0.25, 0.25) * grid.L
            kc = rng.uniform(-2.0, 2.0)
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            v += amp * np.exp(-0.5 * ((x - c) / w) ** 2 + 1j * kc * x)
        f = ComplexField(grid, v)
        out.append(f * (1.0 / h1_norm(f)))
    return out


def sgn_ratio(u: ComplexField, d: float) -> float:
    """Smallest S with ||u||_d^d <= S^d ||u||_2^{(d+2)/2} ||u'||_2^{(d-2)/2}."""
    lhs = lp_norm_power(u, d)
    if lhs == 0.0:
        return 0.0
    rhs = mass(u) ** ((d + 2) / 4) * kinetic(u) ** ((d - 2) / 4)
    return float((lhs / rhs) ** (1.0 / d))


# --------------------------------------------------------------------------
# modulation


@dataclass
class OrbitDistanceResult:
    distance: float
    shift: float
    phase: complex
    degenerate_phase: bool = False


def _profile_values(R, grid: Grid) -> np.ndarray:
    if isinstance(R, ComplexField):
        if R.grid == grid:
            return R.values
        src_x, src_v = R.grid.x, R.values
    else:
        if R.grid == grid:
            return np.asarray(R.R, dtype=float)
        src_x, src_v = R.grid.x, np.asarray(R.R, dtype=float)
    return (np.interp(grid.x, src_x, np.real(src_v), left=0.0, right=0.0)
            + 1j * np.interp(grid.x, src_x, np.imag(src_v), left=0.0, right=0.0))


def _trig_eval(grid: Grid, coef_hat: np.ndarray, y: float) -> complex:
    """Trigonometric interpolant (1/n) sum_k c_k exp(i k (y - x_0)) at a point."""
    return complex(np.sum(coef_hat * np.exp(1j * grid.k * (y - grid.x[0]))) / grid.n)


def _refine_peak(fn, y0: float, h: float) -> float:
    """Maximizer of a smooth fn within one grid step of the grid maximizer y0."""
    res = optimize.minimize_scalar(lambda y: -fn(y), bounds=(y0 - h, y0 + h), method="bounded",
                                   options={"xatol": 1e-12 * max(1.0, h)})
    return float(res.x) if -res.fun >= fn(y0) else y0


def orbit_distance(u: ComplexField, R, refine: bool = True) -> OrbitDistanceResult:
    """H^1 distance from u to the orbit {z R(. - y)}.

    For fixed y the best phase is the normalized H^1 overlap; the shift is
    found from the cross-correlation on grid shifts and, with ``refine``,
    polished by maximizing the trigonometric interpolant of |overlap|.
    """
    g = u.grid
    rv = _profile_values(R, g)
    uh, rh = fft.fft(u.values), fft.fft(rv)
    w = (1.0 + g.k**2)
    corr_hat = w * uh * np.conj(rh)
    nu2 = float(g.h / g.n * np.sum(w * np.abs(uh) ** 2))
    nr2 = float(g.h / g.n * np.sum(w * np.abs(rh) ** 2))
    c = g.h * fft.ifft(corr_hat)  # c[m]: overlap with R(. - m h)
    m = int(np.argmax(np.abs(c)))
    y = m * g.h
    best = complex(c[m])
    if refine and abs(best) > 0:
        def overlap(s):
            return complex(g.h / g.n * np.sum(corr_hat * np.exp(1j * g.k * s)))

        y = _refine_peak(lambda s: abs(overlap(s)), y, g.h)
        best = overlap(y)
    y = (y + 0.5 * g.L) % g.L - 0.5 * g.L
    degenerate = abs(best) <= 1e-12 * np.sqrt(nu2 * nr2)
    z = 1.0 + 0j if degenerate else best / abs(best)
    d2 = nu2 + nr2 - 2.0 * (np.conj(z) * best).real
    return OrbitDistanceResult(float(np.sqrt(max(d2, 0.0))), float(y), complex(z), bool(degenerate))


@dataclass
class AlignResult:
    values: np.ndarray  # real profile, peak at x = 0
    shift: float
    phase: complex
    residual: float  # ||Im||_2 / ||u||_2 after alignment

    def field(self, grid: Grid) -> ComplexField:
        return ComplexField(grid, self.values)


def recenter_align(u: ComplexField) -> AlignResult:
    """Move the peak of |u| to x = 0 and rotate away the phase found there."""
    g = u.grid
    a = np.abs(u.values)
    norm = float(np.sqrt(np.sum(a**2)))
    if norm == 0.0:
        raise ValueError("cannot align the zero field")
    m = int(np.argmax(a))
    uh = fft.fft(u.values)
    peak_x = _refine_peak(lambda y: abs(_trig_eval(g, uh, y)), float(g.x[m]), g.h)
    v = spectral_shift(g, u.values, -peak_x) if peak_x != 0.0 else u.values.copy()
    pv = v[g.center]
    phase = pv / abs(pv) if abs(pv) > 0 else 1.0 + 0j
    v = v / phase
    resid = float(np.sqrt(np.sum(v.imag**2)) / norm)
    return AlignResult(v.real.copy(), float(peak_x), complex(phase), resid)


def symmetry_defect(values: np.ndarray, grid: Grid) -> float:
    v = np.asarray(values)
    return float(np.linalg.norm(v - v[grid.mirror_index()]) / np.linalg.norm(v))


# --------------------------------------------------------------------------
# snapshots

_BIN_HEADER = struct.Struct("<Qd")


def write_field_csv(path, u: ComplexField):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "re", "im"])
        for x, v in zip(u.grid.x, u.values):
            wr.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path, L: float) -> ComplexField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ComplexField(Grid(L, data.shape[0]), data[:, 1] + 1j * data[:, 2])


def write_field_binary(path, u: ComplexField):
    """Little-endian: uint64 n, float64 L, then n interleaved (re, im) float64 pairs."""
    inter = np.empty(2 * u.grid.n, dtype="<f8")
    inter[0::2] = u.values.real
    inter[1::2] = u.values.imag
    Path(path).write_bytes(_BIN_HEADER.pack(u.grid.n, u.grid.L) + inter.tobytes())


def read_field_binary(path) -> ComplexField:
    raw = Path(path).read_bytes()
    n, L = _BIN_HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f8", count=2 * n, offset=_BIN_HEADER.size)
    return ComplexField(Grid(L, int(n)), data[0::2] + 1j * data[1::2])
