"""Minimization of the energy on the mass sphere S(lambda).

The descent is a normalized gradient flow: a preconditioned gradient step
followed by rescaling to mass lambda, with Armijo backtracking on E.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, optimize

from .errors import Degenerate, NLSWaveError, NoDescent, NoRoot
from .field import (ComplexField, Grid, energy, energy_gradient, h1_norm, kinetic,
                    mass, recenter_align, symmetry_defect)
from .nonlinearity import Nonlinearity, eval_F_grad
from .profile import build_profile, mass_of_omega


@dataclass
class MinimizeOptions:
    tol: float = 1e-8  # L^2 norm of the projected gradient
    max_iter: int = 5000
    tau0: float = 0.5
    tau_max: float = 1.0  # preconditioned Hessian is ~1 on high modes
    backtrack: float = 0.5
    growth: float = 1.1
    armijo: float = 1e-4
    shift_floor: float = 0.05  # lower bound of the preconditioner shift
    energy_tol: float = 1e-10  # energies above -energy_tol count as "no descent"
    inits: tuple = ("gaussian", "profile")


@dataclass
class MinimizeResult:
    u: ComplexField  # recentered, phase-aligned minimizer
    raw: ComplexField  # minimizer as produced by the descent
    lam: float
    I_value: float
    omega: float
    iterations: int
    residual: float
    converged: bool
    align_residual: float = math.nan
    symmetry: float = math.nan
    init: str = ""
    energies: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"lambda": self.lam, "I": self.I_value, "omega": self.omega,
                "iterations": self.iterations, "residual": self.residual,
                "converged": self.converged, "phase_residual": self.align_residual,
                "symmetry_defect": self.symmetry, "init": self.init,
                "L": self.u.grid.L, "n": self.u.grid.n}


def _project(u: np.ndarray, lam: float, h: float) -> np.ndarray:
    return u * math.sqrt(lam / (h * np.sum(np.abs(u) ** 2)))


def multiplier(u: ComplexField, nl: Nonlinearity) -> float:
    """omega from the pairing of the Euler-Lagrange equation with u."""
    lam = mass(u)
    nonlin = float(u.grid.h * np.sum(np.real(eval_F_grad(nl, u.values) * np.conj(u.values))))
    return -(kinetic(u) + nonlin) / lam


def gaussian_init(grid: Grid, lam: float, width: float = 1.0) -> ComplexField:
    g = np.exp(-0.5 * (grid.x / width) ** 2).astype(complex)
    return ComplexField(grid, _project(g, lam, grid.h))


def profile_init(nl: Nonlinearity, grid: Grid, lam: float) -> ComplexField | None:
    """Soliton profile whose quadrature mass equals lam, if one can be bracketed."""
    om = omega_for_mass(nl, lam)
    if om is None:
        return None
    try:
        pr = build_profile(nl, om, X=0.5 * grid.L, n=grid.n)
    except (NLSWaveError, ValueError):
        return None
    return ComplexField(grid, _project(pr.R.astype(complex), lam, grid.h))


def omega_for_mass(nl: Nonlinearity, lam: float, lo: float = 1e-3, hi: float = 1e3):
    def f(om):
        try:
            return mass_of_omega(nl, om) - lam
        except (NoRoot, Degenerate):
            return math.nan

    omegas = np.geomspace(lo, hi, 61)
    vals = [f(o) for o in omegas]
    for a, b, fa, fb in zip(omegas, omegas[1:], vals, vals[1:]):
        if math.isfinite(fa) and math.isfinite(fb) and fa * fb <= 0:
            return float(optimize.brentq(f, a, b, xtol=1e-14, rtol=1e-13))
    return None


def descend(u0: ComplexField, nl: Nonlinearity, lam: float, opts: MinimizeOptions):
    """Run the normalized gradient flow from u0; returns (u, iterations, residual, energies)."""
    grid = u0.grid
    h, k2 = grid.h, grid.k**2
    u = _project(u0.values.astype(complex), lam, h)
    uf = ComplexField(grid, u)
    E = energy(uf, nl)
    energies = [E]
    tau = opts.tau0
    res = math.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = energy_gradient(uf, nl).values
        om = -float(h * np.sum(np.real(g * np.conj(u)))) / lam
        r = g + om * u
        res = float(math.sqrt(h * np.sum(np.abs(r) ** 2)))
        if res < opts.tol:
            it -= 1
            break
        prec = 1.0 / (k2 + max(om, opts.shift_floor))
        pg = fft.ifft(prec * fft.fft(g))
        pu = fft.ifft(prec * fft.fft(u))
        alpha = float(np.sum(np.real(pg * np.conj(u)))) / float(np.sum(np.real(pu * np.conj(u))))
        d = pg - alpha * pu
        slope = float(h * np.sum(np.real(g * np.conj(d))))
        while True:
            cand = _project(u - tau * d, lam, h)
            cf = ComplexField(grid, cand)
            Ec = energy(cf, nl)
            # slack: decreases below round-off in E cannot be resolved
            if Ec <= E - opts.armijo * tau * slope + 1e-14 * max(1.0, abs(E)):
                break
            tau *= opts.backtrack
            if tau < 1e-14:
                return uf, it, res, energies
        u, uf, E = cand, cf, Ec
        energies.append(E)
        tau = min(tau * opts.growth, opts.tau_max)
    return uf, it, res, energies


def _finish(u: ComplexField, nl, lam, it, res, energies, converged, init) -> MinimizeResult:
    al = recenter_align(u)
    aligned = ComplexField(u.grid, al.values)
    return MinimizeResult(
        u=aligned, raw=u, lam=lam, I_value=energy(u, nl), omega=multiplier(u, nl),
        iterations=it, residual=res, converged=converged, align_residual=al.residual,
        symmetry=symmetry_defect(al.values, u.grid), init=init, energies=energies)


def minimize_energy(nl: Nonlinearity, lam: float, grid: Grid, opts: MinimizeOptions | None = None,
                    warm: ComplexField | None = None) -> MinimizeResult:
    """Minimize E on S(lam) from a portfolio of initial states.

    Raises NoDescent (carrying the best candidate) if no start reaches
    negative energy.
    """
    if not lam > 0:
        raise ValueError(f"mass must be positive, got {lam}")
    opts = opts or MinimizeOptions()
    starts = []
    if warm is not None:
        starts.append(("warm", warm))
    for name in opts.inits:
        if name == "gaussian":
            starts.append(("gaussian", gaussian_init(grid, lam)))
        elif name == "profile":
            starts.append(("profile", None))  # built lazily, only if needed
        else:
            raise ValueError(f"unknown initialization {name!r}")

    best = None
    for name, u0 in starts:
        if u0 is None:
            u0 = profile_init(nl, grid, lam)
            if u0 is None:
                continue
        u, it, res, energies = descend(u0, nl, lam, opts)
        cand = _finish(u, nl, lam, it, res, energies, res < opts.tol, name)
        if best is None or cand.I_value < best.I_value:
            best = cand
        if cand.converged and cand.I_value < -opts.energy_tol:
            return cand
    if best.I_value >= -opts.energy_tol:
        raise NoDescent(f"no initialization reached negative energy at lambda={lam} "
                        f"(best E={best.I_value:.3e})", best=best)
    return best


@dataclass
class ICurvePoint:
    lam: float
    I_value: float
    omega: float
    residual: float
    iterations: int
    status: str


@dataclass
class ICurve:
    points: list
    lambda_star: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lambda", "I", "omega", "residual", "iterations", "status"])
            for p in self.points:
                wr.writerow([repr(p.lam), repr(p.I_value), repr(p.omega), repr(p.residual),
                             p.iterations, p.status])


def I_curve(nl: Nonlinearity, lams, grid: Grid, opts: MinimizeOptions | None = None) -> ICurve:
    """I(lambda) over ascending masses, warm-starting each from the previous minimizer."""
    lams = [float(v) for v in lams]
    if any(v <= 0 for v in lams) or sorted(lams) != lams:
        raise ValueError("masses must be positive and ascending")
    pts, prev = [], None
    for lam in lams:
        warm = None
        if prev is not None:
            warm = ComplexField(grid, _project(prev.values, lam, grid.h))
        try:
            r = minimize_energy(nl, lam, grid, opts, warm=warm)
            status = "converged" if r.converged else "max-iter"
            prev = r.u
        except NoDescent as exc:
            r, status = exc.best, "no-descent"
        pts.append(ICurvePoint(lam, r.I_value, r.omega, r.residual, r.iterations, status))
    zero = [p.lam for p in pts if abs(p.I_value) < 1e-6]
    return ICurve(pts, max(zero) if zero else 0.0)


def existence_identity_check(res: MinimizeResult, nl: Nonlinearity | None = None) -> float:
    """Relative defect of 2(||u'||^2 - I) = omega lambda."""
    lhs = 2.0 * (kinetic(res.raw) - res.I_value)
    return abs(lhs - res.omega * res.lam) / (abs(res.omega) * res.lam)


def cross_validate(res: MinimizeResult, nl: Nonlinearity) -> float:
    """Relative H^1 mismatch between the aligned minimizer and the shooting profile."""
    grid = res.u.grid
    pr = build_profile(nl, res.omega, X=0.5 * grid.L, n=grid.n)
    al = recenter_align(res.u)
    diff = ComplexField(grid, al.values - pr.R)
    return h1_norm(diff) / h1_norm(pr.as_field())


def subadditivity_gap(nl: Nonlinearity, lam: float, theta: float, grid: Grid,
                      opts: MinimizeOptions | None = None) -> float:
    """I(theta lam) - theta I(lam); non-positive when I is subadditive."""
    a = minimize_energy(nl, lam, grid, opts).I_value
    b = minimize_energy(nl, theta * lam, grid, opts).I_value
    return b - theta * a


__all__ = ["MinimizeOptions", "MinimizeResult", "minimize_energy", "I_curve", "ICurve",
           "existence_identity_check", "cross_validate", "multiplier", "descend",
           "gaussian_init", "profile_init", "omega_for_mass", "subadditivity_gap"]
