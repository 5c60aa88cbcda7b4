"""The linearized operator L+ v = -v'' + (G''(R0) + omega0) v and its spectrum.

Both Laplacians are periodic circulants on the profile grid, which makes the
reflection x -> -x an exact symmetry. Even and odd subspaces are represented
by the half-grid samples x = 0, h, ..., X (even) and h, ..., X - h (odd);
in these coordinates the restricted operators are symmetrized with the
quadrature weights of the folded grid.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy import fft, linalg

from .errors import SingularSolve
from .field import Grid
from .nonlinearity import Nonlinearity
from .profile import ProfileSolution, mass_derivative

RCOND_FLOOR = 1e-12  # reciprocal condition number below which L+ w = R0 is refused


def _laplacian_column(grid: Grid, kind: str) -> np.ndarray:
    """First column c of the circulant second-derivative matrix, (D2 v)_i = sum_j c[i-j] v_j."""
    n = grid.n
    if kind == "spectral":
        return fft.ifft(-(grid.k**2)).real
    if kind == "fd2":
        c = np.zeros(n)
        c[0], c[1], c[-1] = -2.0, 1.0, 1.0
        return c / grid.h**2
    raise ValueError(f"unknown laplacian {kind!r}")


@dataclass
class LPlusOperator:
    grid: Grid
    potential: np.ndarray
    omega: float
    laplacian: str = "spectral"

    @cached_property
    def _col(self) -> np.ndarray:
        return _laplacian_column(self.grid, self.laplacian)

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.laplacian == "spectral":
            lap = fft.ifft(-(self.grid.k**2) * fft.fft(v)).real
        else:
            lap = (np.roll(v, 1) - 2 * v + np.roll(v, -1)) / self.grid.h**2
        return -lap + self.potential * v

    def pair(self, v) -> float:
        """<L+ v, v>_{L^2}."""
        v = np.asarray(v, dtype=float)
        return float(self.grid.h * np.dot(self.apply(v), v))

    def matrix(self) -> np.ndarray:
        """Full n x n symmetric matrix (dense)."""
        A = -linalg.circulant(self._col)
        A[np.diag_indices_from(A)] += self.potential
        return A

    # parity-reduced forms --------------------------------------------------

    def _half(self):
        n = self.grid.n
        half = n // 2
        c = self._col
        a = np.arange(half + 1)
        return n, half, c, a

    def even_block(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric matrix of L+ on even functions, and the folding weights.

        A vector y in these coordinates corresponds to samples v = y / sqrt(w)
        on x = 0, h, ..., X, with w = 1 at the two self-mirrored points and 2
        elsewhere; then y.T A y = <L+ v, v> / h.
        """
        n, half, c, a = self._half()
        lap = c[(a[:, None] - a[None, :]) % n] + c[(a[:, None] + a[None, :]) % n]
        lap[:, 0] = c[a % n]
        lap[:, half] = c[(a - half) % n]
        op = -lap
        idx = self.grid.center + a
        op[a, a] += self.potential[idx % n]
        w = np.full(half + 1, 2.0)
        w[0] = w[half] = 1.0
        sw = np.sqrt(w)
        A = sw[:, None] * op / sw[None, :]
        return 0.5 * (A + A.T), w

    def odd_block(self) -> np.ndarray:
        n, half, c, _ = self._half()
        a = np.arange(1, half)
        lap = c[(a[:, None] - a[None, :]) % n] - c[(a[:, None] + a[None, :]) % n]
        op = -lap
        op[np.arange(half - 1), np.arange(half - 1)] += self.potential[self.grid.center + a]
        return 0.5 * (op + op.T)

    def even_coords(self, v) -> np.ndarray:
        """Folded coordinates y of an even grid function v."""
        _, half, _, a = self._half()
        w = np.full(half + 1, 2.0)
        w[0] = w[half] = 1.0
        vals = np.asarray(v, dtype=float)[(self.grid.center + a) % self.grid.n]
        return np.sqrt(w) * vals

    def even_unfold(self, y) -> np.ndarray:
        n, half, _, a = self._half()
        w = np.full(half + 1, 2.0)
        w[0] = w[half] = 1.0
        half_vals = np.asarray(y) / np.sqrt(w)
        out = np.empty(n)
        c0 = self.grid.center
        out[(c0 + a) % n] = half_vals
        out[(c0 - a) % n] = half_vals
        return out


def assemble(R0: ProfileSolution, nl: Nonlinearity, laplacian: str = "spectral") -> LPlusOperator:
    pot = nl.d2G(R0.R) + R0.omega
    return LPlusOperator(R0.grid, np.asarray(pot, dtype=float), R0.omega, laplacian)


def kernel_residual(op: LPlusOperator, R0: ProfileSolution, direction=None) -> float:
    """||L+ v|| / ||v|| with v = R0' by default."""
    v = R0.dR if direction is None else np.asarray(direction, dtype=float)
    return float(np.linalg.norm(op.apply(v)) / np.linalg.norm(v))


def spectrum(op: LPlusOperator, k: int = 1, parity: str = "all", vectors: bool = False):
    """Lowest ``k`` eigenvalues of L+ on the requested parity subspace.

    Eigenvectors, when requested, are returned as full grid functions with unit
    L^2 norm.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if parity not in ("even", "odd", "all"):
        raise ValueError(f"parity must be even, odd or all, got {parity!r}")
    parts = []
    if parity in ("even", "all"):
        A, _ = op.even_block()
        m = min(k, A.shape[0])
        vals, vecs = linalg.eigh(A, subset_by_index=(0, m - 1))
        fulls = [op.even_unfold(vecs[:, i]) for i in range(m)] if vectors else [None] * m
        parts += list(zip(vals, fulls))
    if parity in ("odd", "all"):
        B = op.odd_block()
        m = min(k, B.shape[0])
        vals, vecs = linalg.eigh(B, subset_by_index=(0, m - 1))
        fulls = []
        if vectors:
            n, c0 = op.grid.n, op.grid.center
            a = np.arange(1, n // 2)
            for i in range(m):
                f = np.zeros(n)
                f[c0 + a] = vecs[:, i] / np.sqrt(2.0)
                f[c0 - a] = -vecs[:, i] / np.sqrt(2.0)
                fulls.append(f)
        else:
            fulls = [None] * m
        parts += list(zip(vals, fulls))
    parts.sort(key=lambda t: t[0])
    parts = parts[:k]
    evals = np.array([p[0] for p in parts])
    if not vectors:
        return evals
    h = op.grid.h
    vecs = [p[1] / np.sqrt(h * np.sum(p[1] ** 2)) for p in parts]
    return evals, vecs


@dataclass
class SpectrumReport:
    omega: float
    even_lowest: list
    odd_lowest: list
    kernel_residual: float
    constrained_min: float
    resolvent_pairing: float  # <R0, L+^{-1} R0>, equals -lambda'/2 in this sign convention
    domega_pairing: float  # <R0, d_omega R> with L+ (d_omega R) = -R0
    dlambda_half: float  # lambda'(omega0) / 2 from the quadrature route
    relative_mismatch: float  # |domega_pairing - dlambda_half| / |dlambda_half|

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def constrained_even_minimum(op: LPlusOperator, R0: ProfileSolution) -> float:
    """min xi(v) over even v with <v, R0> = 0 and ||v|| = 1."""
    A, _ = op.even_block()
    r = op.even_coords(R0.R)
    r /= np.linalg.norm(r)
    # orthonormal basis of the complement of r: Householder reflector
    e = np.zeros_like(r)
    e[0] = 1.0
    u = r - e if r[0] < 0 else r + e
    u /= np.linalg.norm(u)
    Q = np.eye(r.size) - 2.0 * np.outer(u, u)
    basis = Q[:, 1:]
    B = basis.T @ A @ basis
    return float(linalg.eigh(0.5 * (B + B.T), eigvals_only=True, subset_by_index=(0, 0))[0])


def resolvent_pairing(op: LPlusOperator, R0: ProfileSolution) -> float:
    """<R0, w> where L+ w = R0 on the even subspace."""
    A, _ = op.even_block()
    r = op.even_coords(R0.R)
    try:
        lu = linalg.lu_factor(A, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSolve(str(exc)) from exc
    gecon = linalg.get_lapack_funcs("gecon", (A,))
    rcond, info = gecon(lu[0], np.linalg.norm(A, 1), norm="1")
    if info != 0 or rcond < RCOND_FLOOR:
        raise SingularSolve(f"even-subspace L+ is numerically singular (rcond={rcond:.2e})")
    y = linalg.lu_solve(lu, r)
    # y.T A y = <L+ v, v>/h, so <R0, w>_{L^2} = h r.T y
    return float(op.grid.h * np.dot(r, y))


def nondegeneracy_certificate(op: LPlusOperator, R0: ProfileSolution, nl: Nonlinearity,
                              k: int = 3) -> SpectrumReport:
    cmin = constrained_even_minimum(op, R0)
    pairing = resolvent_pairing(op, R0)
    half = 0.5 * mass_derivative(nl, R0.omega)
    # differentiating -R'' + G'(R) + omega R = 0 in omega gives L+ (d_omega R) = -R
    domega = -pairing
    return SpectrumReport(
        omega=R0.omega,
        even_lowest=spectrum(op, k, "even").tolist(),
        odd_lowest=spectrum(op, k, "odd").tolist(),
        kernel_residual=kernel_residual(op, R0),
        constrained_min=cmin,
        resolvent_pairing=pairing,
        domega_pairing=domega,
        dlambda_half=half,
        relative_mismatch=abs(domega - half) / abs(half),
    )
