"""Soliton amplitude R*(omega), profiles R_omega(x) and the mass curve.

The mass lambda(omega) = ||R_omega||^2 and its derivative are computed by
one-dimensional quadrature in the amplitude variable theta = rho / R*, after
the substitution theta = 1 - tau^2 that removes the square-root singularity at
theta = 1.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import ConsistencyFailure, Degenerate, NoRoot, QuadratureFailure, TailBlowup
from .field import ComplexField, Grid
from .nonlinearity import CombinedPower, Nonlinearity, eval_dQ, eval_H, eval_Q

SCAN_POINTS = 4000
DEGENERACY_TOL = 1e-8
QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
QUAD_ACCEPT = 1e-8  # absolute error accepted when quad cannot meet QUAD_OPTS


def _scan_max(nl: Nonlinearity) -> float:
    if isinstance(nl, CombinedPower) and nl.b > 0 and nl.a > 0:
        return max(1e3, 10.0 * (nl.a / nl.b) ** (1.0 / (nl.q - nl.p)))
    return 1e3


def r_star(nl: Nonlinearity, omega: float) -> float:
    """Smallest s > 0 with Q(omega, s) = 0, required to be a transversal crossing."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    s = np.geomspace(1e-6, _scan_max(nl), SCAN_POINTS)
    q = eval_Q(nl, omega, s)
    neg = np.flatnonzero(q <= 0)
    if neg.size == 0:
        raise NoRoot(f"Q(omega={omega}, s) > 0 on [1e-6, {s[-1]:.3g}]")
    i = int(neg[0])
    if i == 0:
        raise NoRoot(f"Q(omega={omega}, s) is not positive near s = 0")
    if q[i] == 0.0:
        root = float(s[i])
    else:
        root = optimize.brentq(lambda t: float(eval_Q(nl, omega, t)), s[i - 1], s[i],
                               xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    dq = float(eval_dQ(nl, omega, root))
    scale = 2.0 * omega * root + 2.0 * abs(float(nl.dG(root)))
    if abs(dq) < DEGENERACY_TOL * scale or dq > 0:
        raise Degenerate(f"tangential amplitude root at omega={omega}: dQ/ds = {dq:.3e}")
    return root


def r_star_derivative(nl: Nonlinearity, omega: float) -> float:
    """dR*/domega from implicit differentiation of Q(omega, R*(omega)) = 0."""
    rs = r_star(nl, omega)
    denom = 2.0 * float(nl.dG(rs)) + 2.0 * omega * rs
    if abs(denom) < DEGENERACY_TOL * (2.0 * omega * rs + 2.0 * abs(float(nl.dG(rs)))):
        raise Degenerate(f"vanishing denominator at omega={omega}")
    return -rs**2 / denom


def psi(nl: Nonlinearity, theta, s: float, omega: float):
    """Psi(theta, s, omega) = omega theta^2 s^-4 + 2 s^-6 G(s theta)."""
    if not s > 0:
        raise ValueError("amplitude s must be positive")
    theta = np.asarray(theta, dtype=float)
    return omega * theta**2 / s**4 + 2.0 * nl.G(s * theta) / s**6


def capital_I(nl: Nonlinearity, omega: float, theta, rs: float | None = None):
    """I(omega, theta) = 2 H(R* theta) - 2 theta^2 H(R*)."""
    if rs is None:
        rs = r_star(nl, omega)
    theta = np.asarray(theta, dtype=float)
    return 2.0 * eval_H(nl, rs * theta) - 2.0 * theta**2 * eval_H(nl, rs)


def dpsi_domega_raw(nl: Nonlinearity, theta, omega: float):
    """d/domega of Psi(theta, R*(omega), omega), expanded term by term."""
    rs = r_star(nl, omega)
    drs = r_star_derivative(nl, omega)
    theta = np.asarray(theta, dtype=float)
    bracket = (-4.0 * omega * theta**2 / rs**5
               - 12.0 * nl.G(rs * theta) / rs**7
               + 2.0 * theta * nl.dG(rs * theta) / rs**6)
    return theta**2 / rs**4 + bracket * drs


def dpsi_domega(nl: Nonlinearity, theta, omega: float):
    """Same derivative written as (R*'/R*^7) I(omega, theta); no cancellation at theta=1."""
    rs = r_star(nl, omega)
    drs = r_star_derivative(nl, omega)
    return drs / rs**7 * capital_I(nl, omega, theta, rs)


def _psi_root(nl, theta, rs, omega):
    # Psi shifted by its (round-off) value at theta = 1 so that it vanishes there exactly
    return (eval_Q(nl, omega, rs * theta) - eval_Q(nl, omega, rs)) / rs**6


def _check_node(val, tau):
    if not math.isfinite(val):
        raise QuadratureFailure(f"non-finite integrand at tau={tau:.6g}")
    return val


def mass_of_omega(nl: Nonlinearity, omega: float) -> float:
    """lambda(omega) = 2 int_0^1 theta^2 / sqrt(Psi) dtheta."""
    rs = r_star(nl, omega)

    def f(tau):
        theta = 1.0 - tau * tau
        ps = float(_psi_root(nl, theta, rs, omega))
        if ps <= 0.0:
            raise QuadratureFailure(f"Psi <= 0 inside (0, 1) at theta={theta:.6g}")
        return _check_node(4.0 * tau * theta**2 / math.sqrt(ps), tau)

    return _quad(f)


def _quad(f) -> float:
    # integrands that cancel to roundoff (e.g. the slope at a critical power)
    # cannot reach the relative tolerance; accept them if the absolute error is small
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(f, 0.0, 1.0, **QUAD_OPTS)
    if caught and not err <= QUAD_ACCEPT:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g}: {caught[0].message}")
    return float(val)


def _mass_derivative_integral(nl: Nonlinearity, omega: float) -> float:
    rs = r_star(nl, omega)
    drs = r_star_derivative(nl, omega)
    Hs = float(eval_H(nl, rs))
    fac = drs / rs**7

    def f(tau):
        theta = 1.0 - tau * tau
        ps = float(_psi_root(nl, theta, rs, omega))
        if ps <= 0.0:
            raise QuadratureFailure(f"Psi <= 0 inside (0, 1) at theta={theta:.6g}")
        i_val = 2.0 * float(eval_H(nl, rs * theta)) - 2.0 * theta**2 * Hs
        return _check_node(-2.0 * tau * theta**2 * fac * i_val / ps**1.5, tau)

    return _quad(f)


def mass_derivative_fd(nl: Nonlinearity, omega: float, rel_step: float = 1e-4) -> float:
    eps = rel_step * omega
    return (mass_of_omega(nl, omega + eps) - mass_of_omega(nl, omega - eps)) / (2 * eps)


def mass_derivative(nl: Nonlinearity, omega: float, check: bool = True) -> float:
    """lambda'(omega) = -int theta^2 dPsi/domega Psi^{-3/2} dtheta.

    With ``check`` the value is compared against a central difference of
    :func:`mass_of_omega`; the comparison is skipped if a neighbouring
    frequency has no transversal root.
    """
    nl.d2G(1.0)  # capability probe
    val = _mass_derivative_integral(nl, omega)
    if check:
        try:
            fd = mass_derivative_fd(nl, omega)
        except (NoRoot, Degenerate):
            return val
        scale = max(abs(val), abs(fd), mass_of_omega(nl, omega) / omega)
        if abs(val - fd) > 1e-4 * scale:
            raise ConsistencyFailure(
                f"lambda'({omega}): integral {val:.10g} vs finite difference {fd:.10g}")
    return val


# --------------------------------------------------------------------------
# profiles


@dataclass
class ProfileSolution:
    omega: float
    r_star: float
    grid: Grid
    R: np.ndarray
    dR: np.ndarray
    clamp_x: float = math.nan  # where the exponential tail takes over
    first_integral_defect: float = math.nan

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def X(self) -> float:
        return 0.5 * self.grid.L

    def discrete_mass(self) -> float:
        return float(self.grid.h * np.sum(self.R**2))

    def as_field(self) -> ComplexField:
        return ComplexField(self.grid, self.R)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "R", "dR"])
            for row in zip(self.x, self.R, self.dR):
                wr.writerow([repr(float(v)) for v in row])

    def to_dict(self) -> dict:
        return {"omega": self.omega, "r_star": self.r_star, "X": self.X, "n": self.grid.n,
                "clamp_x": self.clamp_x, "first_integral_defect": self.first_integral_defect,
                "mass": self.discrete_mass(),
                "x": self.x.tolist(), "R": self.R.tolist(), "dR": self.dR.tolist()}


def default_halfwidth(omega: float) -> float:
    return max(20.0, 24.0 / math.sqrt(omega))


def _rk4_step(f, y0, y1, dt):
    k1a, k1b = f(y0, y1)
    k2a, k2b = f(y0 + 0.5 * dt * k1a, y1 + 0.5 * dt * k1b)
    k3a, k3b = f(y0 + 0.5 * dt * k2a, y1 + 0.5 * dt * k2b)
    k4a, k4b = f(y0 + dt * k3a, y1 + dt * k3b)
    return (y0 + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a),
            y1 + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b))


def _scalar_dG(nl: Nonlinearity):
    if isinstance(nl, CombinedPower):
        a, b, p, q = nl.a, nl.b, nl.p, nl.q
        return lambda s: -a * p * abs(s) ** (p - 1) * math.copysign(1.0, s) \
            + b * q * abs(s) ** (q - 1) * math.copysign(1.0, s)
    return lambda s: float(nl.dG(s))


def build_profile(nl: Nonlinearity, omega: float, X: float | None = None, n: int = 4096,
                  max_step: float = 2.5e-3, clamp: float = 1e-8, guard: float = 1e-6,
                  tail_tol: float = 1e-6) -> ProfileSolution:
    """Shoot R'' = G'(R) + omega R from (R*, 0) and mirror to [-X, X).

    RK4 runs on a refinement of the output grid. Forward integration of the
    homoclinic orbit amplifies round-off like (R*/R)^2, so once the relative
    first-integral defect exceeds ``guard`` the remaining descent follows the
    stable branch R' = -sqrt(Q(omega, R)); below ``clamp`` the tail is the
    exponential R(x_c) exp(-sqrt(omega)(x - x_c)).
    """
    if X is None:
        X = default_halfwidth(omega)
    rs = r_star(nl, omega)
    grid = Grid(2.0 * X, n)
    h = grid.h
    half = n // 2
    sub = max(1, math.ceil(h * math.sqrt(max(omega, 1.0)) / max_step))
    dt = h / sub
    dG = _scalar_dG(nl)

    def G(r):
        return float(nl.G(r))

    def rhs(r, v):
        return v, dG(r) + omega * r

    def slope(r):
        return -math.sqrt(max(omega * r * r + 2.0 * G(r), 0.0))

    def rk4_first_order(r):
        k1 = slope(r)
        k2 = slope(r + 0.5 * dt * k1)
        k3 = slope(r + 0.5 * dt * k2)
        k4 = slope(r + dt * k3)
        return r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    # Taylor seed from R'(0) = R'''(0) = 0
    c = dG(rs) + omega * rs
    c4 = (float(nl.d2G(rs)) + omega) * c if nl.has_second_derivative else 0.0
    R = np.empty(half + 1)
    dR = np.empty(half + 1)
    R[0], dR[0] = rs, 0.0
    r = rs + 0.5 * c * dt**2 + c4 * dt**4 / 24.0
    v = c * dt + c4 * dt**3 / 6.0
    kappa = math.sqrt(omega)
    clamp_x = math.nan
    stable_branch = False
    m_done = 0
    steps_in_cell = 1
    for m in range(1, half + 1):
        for _ in range(sub - steps_in_cell):
            if stable_branch:
                r = rk4_first_order(r)
                v = slope(r)
                continue
            r_new, v_new = _rk4_step(rhs, r, v, dt)
            if v_new > 0 or r_new > r:
                raise TailBlowup(f"profile turned upward at x~{(m - 1) * h:.4g} (R={r_new:.3e})")
            r, v = r_new, v_new
            if abs(v * v - omega * r * r - 2.0 * G(r)) > guard * omega * r * r:
                if r > 0.5 * rs:
                    raise TailBlowup(f"first integral lost near the turning point (R={r:.3e}); "
                                     "step too coarse")
                stable_branch = True
        steps_in_cell = 0
        R[m], dR[m] = r, v
        m_done = m
        if r < clamp:
            clamp_x = m * h
            break
    if m_done < half:
        xs = h * np.arange(m_done + 1, half + 1)
        R[m_done + 1:] = R[m_done] * np.exp(-kappa * (xs - clamp_x))
        dR[m_done + 1:] = -kappa * R[m_done + 1:]
    if R[-1] >= tail_tol * rs:
        raise ValueError(f"half-width X={X} too small: R(X)/R* = {R[-1] / rs:.2e}")

    full_R = np.empty(n)
    full_dR = np.empty(n)
    c0 = grid.center
    full_R[c0:] = R[:half]
    full_dR[c0:] = dR[:half]
    full_R[:c0 + 1] = R[::-1]
    full_dR[:c0 + 1] = -dR[::-1]
    full_dR[0] = 0.0  # x = -X is its own mirror on the periodic grid
    fi = float(np.max(np.abs(full_dR**2 - eval_Q(nl, omega, full_R))))
    return ProfileSolution(omega, rs, grid, full_R, full_dR, clamp_x, fi)


# --------------------------------------------------------------------------
# mass curve


@dataclass
class MassCurve:
    omega: np.ndarray
    lam: np.ndarray
    dlam: np.ndarray
    method: dict = field(default_factory=lambda: {"lambda": "quadrature", "dlambda": "quadrature"})
    dlam_fd: np.ndarray | None = None

    def rows(self):
        return zip(self.omega.tolist(), self.lam.tolist(), self.dlam.tolist())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["omega", "lambda", "dlambda"])
            for row in self.rows():
                wr.writerow([repr(v) for v in row])

    def to_dict(self):
        out = {"omega": self.omega.tolist(), "lambda": self.lam.tolist(),
               "dlambda": self.dlam.tolist(), "method": self.method}
        if self.dlam_fd is not None:
            out["dlambda_fd"] = self.dlam_fd.tolist()
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def _curve_point(args):
    nl, om = args
    return (mass_of_omega(nl, om), mass_derivative(nl, om, check=False),
            mass_derivative_fd(nl, om))


def mass_curve(nl: Nonlinearity, omegas, jobs: int = 1) -> MassCurve:
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise ValueError("empty omega sample")
    if np.any(np.diff(omegas) <= 0) or omegas[0] <= 0:
        raise ValueError("omega samples must be positive and ascending")
    tasks = [(nl, float(om)) for om in omegas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            res = list(ex.map(_curve_point, tasks))
    else:
        res = [_curve_point(t) for t in tasks]
    lam, dlam, fd = (np.array(col) for col in zip(*res))
    return MassCurve(omegas, lam, dlam, dlam_fd=fd)


def transversal_interval(nl: Nonlinearity, omegas) -> tuple[float, float] | None:
    """Largest contiguous run of sampled frequencies with a transversal root."""
    ok = []
    for om in omegas:
        try:
            r_star(nl, float(om))
            ok.append(True)
        except (NoRoot, Degenerate):
            ok.append(False)
    best, cur = None, None
    for om, flag in zip(omegas, ok):
        if flag:
            cur = (cur[0], float(om)) if cur else (float(om), float(om))
            if best is None or cur[1] - cur[0] > best[1] - best[0]:
                best = cur
        else:
            cur = None
    return best
