"""Nonlinear potential G and the scalar functions built from it.

The NLS nonlinearity is f(u) = G'(|u|) u / |u| with G even and G(0) = 0.
Everything here works on real amplitudes s >= 0 extended evenly; the complex
gradient F'(u) is handled by :func:`eval_F_grad`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate

from .errors import CapabilityError

# G1 witness search grid
G1_GRID = np.logspace(-4.0, 4.0, 512)
G3_REL_TOL = 1e-10


class Nonlinearity(ABC):
    """Interface for an even nonlinear potential G.

    Subclasses implement the one-sided functions ``_G``, ``_dG``, ``_d2G`` for
    ``s >= 0``; the public methods apply the even extension.
    """

    p: float
    q: float
    has_second_derivative: bool = True

    @abstractmethod
    def _G(self, s: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _dG(self, s: np.ndarray) -> np.ndarray: ...

    def _d2G(self, s: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} declares no second derivative")

    @property
    def C(self) -> float:
        """Bound constant for the growth conditions (G2)/(G4)."""
        return 1.0

    def G(self, s):
        return self._G(np.abs(np.asarray(s, dtype=float)))

    def dG(self, s):
        s = np.asarray(s, dtype=float)
        return np.sign(s) * self._dG(np.abs(s))

    def d2G(self, s):
        if not self.has_second_derivative:
            raise CapabilityError(f"{type(self).__name__} declares no second derivative")
        return self._d2G(np.abs(np.asarray(s, dtype=float)))

    def phase(self, r):
        """G'(r)/r for r >= 0, with the removable singularity at 0 set to 0."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        mask = r >= 1e-15
        out[mask] = self._dG(r[mask]) / r[mask]
        return out

    def antiderivative(self, s0: float, s1: float) -> float:
        """Integral of G over [s0, s1] (s0, s1 >= 0)."""
        val, _ = integrate.quad(lambda t: float(self._G(np.asarray(t))), s0, s1,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def scale(self, s) -> np.ndarray:
        """Magnitude reference for tolerances at amplitude s."""
        s = np.abs(np.asarray(s, dtype=float))
        return 1.0 + s**self.q


@dataclass(frozen=True)
class CombinedPower(Nonlinearity):
    """G(s) = -a|s|^p + b|s|^q.

    ``b = 0`` gives the pure power family; ``q`` then defaults to ``p``.
    Out-of-range exponents are accepted here so that the condition checker can
    reject them with a witness.
    """

    a: float
    b: float = 0.0
    p: float = 4.0
    q: float | None = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        for name in ("a", "b", "p", "q"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.a < 0 or self.b < 0:
            raise ValueError("coefficients a, b must be non-negative")
        if self.p <= 1:
            raise ValueError(f"exponent p must exceed 1, got {self.p}")
        if self.b > 0 and self.q <= self.p:
            raise ValueError(f"need q > p when b > 0 (p={self.p}, q={self.q})")

    has_second_derivative = True

    @classmethod
    def cubic(cls) -> "CombinedPower":
        """The focusing cubic NLS, G(s) = -s^4/4."""
        return cls(a=0.25, b=0.0, p=4.0)

    @property
    def C(self) -> float:
        a, b, p, q = self.a, self.b, self.p, self.q
        return max(a * p, b * q, a * p * abs(p - 1), b * q * abs(q - 1), 1e-300)

    def _G(self, s):
        return -self.a * s**self.p + self.b * s**self.q

    def _dG(self, s):
        return -self.a * self.p * s ** (self.p - 1) + self.b * self.q * s ** (self.q - 1)

    def _d2G(self, s):
        a, b, p, q = self.a, self.b, self.p, self.q
        return -a * p * (p - 1) * s ** (p - 2) + b * q * (q - 1) * s ** (q - 2)

    def phase(self, r):
        r = np.asarray(r, dtype=float)
        return -self.a * self.p * r ** (self.p - 2) + self.b * self.q * r ** (self.q - 2)

    def antiderivative(self, s0, s1):
        a, b, p, q = self.a, self.b, self.p, self.q

        def prim(s):
            return -a * s ** (p + 1) / (p + 1) + b * s ** (q + 1) / (q + 1)

        return prim(s1) - prim(s0)

    def L_closed_form(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        a, b, p, q = self.a, self.b, self.p, self.q
        return a * (p - 2) * (6 - p) * s**p - b * (q - 2) * (6 - q) * s**q

    def H_closed_form(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        a, b, p, q = self.a, self.b, self.p, self.q
        return a * (6 - p) * s**p + b * (q - 6) * s**q

    def to_spec(self) -> dict[str, Any]:
        return {"family": "combined_power", "a": self.a, "b": self.b, "p": self.p, "q": self.q}


def from_spec(spec: dict[str, Any]) -> CombinedPower:
    """Build a nonlinearity from its JSON description."""
    if not isinstance(spec, dict):
        raise ValueError("nonlinearity spec must be a JSON object")
    family = spec.get("family")
    if family != "combined_power":
        raise ValueError(f"unknown nonlinearity family {family!r}")
    unknown = set(spec) - {"family", "a", "b", "p", "q"}
    if unknown:
        raise ValueError(f"unknown keys in nonlinearity spec: {sorted(unknown)}")
    try:
        a = float(spec["a"])
        p = float(spec["p"])
    except KeyError as exc:
        raise ValueError(f"nonlinearity spec missing {exc.args[0]!r}") from None
    b = float(spec.get("b", 0.0))
    q = spec.get("q")
    return CombinedPower(a=a, b=b, p=p, q=None if q is None else float(q))


# --------------------------------------------------------------------------
# scalar condition functions


def eval_V(nl: Nonlinearity, s):
    """V(s) = -2 G(s) / s^2, defined for s > 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("V is defined only for s > 0")
    return -2.0 * nl.G(s) / s**2


def eval_dV(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("V is defined only for s > 0")
    return -2.0 * nl.dG(s) / s**2 + 4.0 * nl.G(s) / s**3


def eval_Q(nl: Nonlinearity, omega, s):
    s = np.asarray(s, dtype=float)
    return omega * s**2 + 2.0 * nl.G(s)


def eval_dQ(nl: Nonlinearity, omega, s):
    """Partial derivative of Q in s."""
    s = np.asarray(s, dtype=float)
    return 2.0 * omega * s + 2.0 * nl.dG(s)


def eval_L(nl: Nonlinearity, s):
    """L(s) = 12G - 7sG' + s^2 G''."""
    s = np.asarray(s, dtype=float)
    return 12.0 * nl.G(s) - 7.0 * s * nl.dG(s) + s**2 * nl.d2G(s)


def eval_H(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    closed = getattr(nl, "H_closed_form", None)
    if closed is not None:
        # avoids the cancellation that is exact at p = 6
        return closed(s)
    return -6.0 * nl.G(s) + s * nl.dG(s)


def eval_F_grad(nl: Nonlinearity, u):
    """F'(u) = G'(|u|) u/|u| for complex u, with F'(0) = 0."""
    u = np.asarray(u, dtype=complex)
    return nl.phase(np.abs(u)) * u


# --------------------------------------------------------------------------
# splitting G = G1 + G2


@dataclass(frozen=True)
class SplitPart(Nonlinearity):
    """One half of the cutoff splitting of a parent nonlinearity.

    ``part == 1`` keeps the small-amplitude piece (sigma * G'), ``part == 2``
    the large-amplitude remainder.
    """

    parent: Nonlinearity
    r1: float
    r2: float
    part: int

    @property
    def p(self):
        return self.parent.p if self.part == 1 else self.parent.q

    @property
    def q(self):
        return self.p

    @property
    def has_second_derivative(self):
        return self.parent.has_second_derivative

    @property
    def C(self):
        return 2.0 ** (self.parent.q - self.parent.p + 1) * self.parent.C

    def sigma(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.clip((self.r2 - s) / (self.r2 - self.r1), 0.0, 1.0)

    def dsigma(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.where((s > self.r1) & (s < self.r2), -1.0 / (self.r2 - self.r1), 0.0)

    def _G1(self, s):
        s = np.atleast_1d(s)
        out = np.empty_like(s)
        par = self.parent
        width = self.r2 - self.r1
        for i, si in enumerate(s):
            if si <= self.r1:
                out[i] = par._G(si)
            else:
                top = min(si, self.r2)
                out[i] = (float(self.sigma(top)) * par._G(top)
                          + par.antiderivative(self.r1, top) / width)
        return out

    def _G(self, s):
        s = np.asarray(s, dtype=float)
        g1 = self._G1(s).reshape(s.shape)
        return g1 if self.part == 1 else self.parent._G(s) - g1

    def _dG(self, s):
        sig = self.sigma(s)
        if self.part == 2:
            sig = 1.0 - sig
        return sig * self.parent._dG(s)

    def _d2G(self, s):
        par = self.parent
        sig, dsig = self.sigma(s), self.dsigma(s)
        if self.part == 2:
            sig, dsig = 1.0 - sig, -dsig
        return sig * par._d2G(s) + dsig * par._dG(s)


def split_G(nl: Nonlinearity, r1: float = 1.0, r2: float = 2.0) -> tuple[SplitPart, SplitPart]:
    """Split G into a part supported near 0 and a part vanishing near 0."""
    if not 0 < r1 < r2:
        raise ValueError(f"need 0 < r1 < r2, got r1={r1}, r2={r2}")
    return SplitPart(nl, r1, r2, 1), SplitPart(nl, r1, r2, 2)


# --------------------------------------------------------------------------
# hypothesis checker


@dataclass
class ConditionVerdict:
    verdict: str  # "pass" | "fail" | "not-checked"
    witness: Any = None
    detail: str = ""

    def to_dict(self):
        return {"verdict": self.verdict, "witness": self.witness, "detail": self.detail}


@dataclass
class ConditionReport:
    verdicts: dict[str, ConditionVerdict] = field(default_factory=dict)
    nonlinearity: dict[str, Any] | None = None

    def __getitem__(self, key):
        return self.verdicts[key]

    def passed(self, names=("G1", "G2", "G3", "G4", "G5")) -> bool:
        return all(self.verdicts[n].verdict == "pass" for n in names)

    def to_dict(self):
        out = {k: v.to_dict() for k, v in self.verdicts.items()}
        if self.nonlinearity is not None:
            out["nonlinearity"] = self.nonlinearity
        return out


def _check_growth(nl: CombinedPower) -> tuple[ConditionVerdict, ConditionVerdict]:
    p, q, b = nl.p, nl.q, nl.b
    if p <= 2:
        w = {"exponent": p, "bound": "p > 2"}
        return (ConditionVerdict("fail", w, "exponent p must exceed 2"),
                ConditionVerdict("fail", w, "exponent p must exceed 2"))
    g4 = ConditionVerdict("pass", {"p": p, "q": q, "C": nl.C})
    if b == 0 and p >= 6:
        # G' = -a p s^{p-1} has no lower bound -C s^{p*-1} with p* < 6
        return ConditionVerdict("fail", {"exponent": p, "bound": "p* < 6"},
                                "pure power at or above the critical exponent 6"), g4
    if b > 0:
        pstar = min(p, 5.5)
    else:
        pstar = p
    return ConditionVerdict("pass", {"p": p, "q": q, "p_star": pstar, "C": nl.C}), g4


def check_conditions(nl: CombinedPower, omega_range=(0.1, 10.0), n_samples: int = 64) -> ConditionReport:
    """Check (G1)-(G5) for a combined power nonlinearity.

    G2/G4 are decided by exponent inspection. G3 and G5 are sampled over the
    given frequency range, restricted to frequencies that admit a transversal
    amplitude root.
    """
    from .errors import Degenerate, NoRoot
    from .profile import r_star

    lo, hi = map(float, omega_range)
    if not 0 < lo < hi:
        raise ValueError(f"omega range must satisfy 0 < lo < hi, got {omega_range}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")

    report = ConditionReport(nonlinearity=nl.to_spec() if hasattr(nl, "to_spec") else None)

    g = nl.G(G1_GRID)
    neg = np.flatnonzero(g < 0)
    if neg.size:
        s0 = float(G1_GRID[neg[0]])
        report.verdicts["G1"] = ConditionVerdict("pass", {"s0": s0, "G(s0)": float(g[neg[0]])})
    else:
        i = int(np.argmin(g))
        report.verdicts["G1"] = ConditionVerdict(
            "fail", {"s": float(G1_GRID[i]), "min_G": float(g[i])}, "G >= 0 on the search grid")

    g2, g4 = _check_growth(nl)
    report.verdicts["G2"], report.verdicts["G4"] = g2, g4

    omegas = np.linspace(lo, hi, n_samples)
    roots = []
    for om in omegas:
        try:
            roots.append(r_star(nl, float(om)))
        except (NoRoot, Degenerate):
            roots.append(None)
    valid = [i for i, r in enumerate(roots) if r is not None]

    if not valid:
        for name in ("G3", "G5"):
            report.verdicts[name] = ConditionVerdict(
                "not-checked", {"omega_range": [lo, hi]}, "no amplitude root in range")
        return report

    min_L, min_at, worst = math.inf, None, None
    for i in valid:
        s = np.linspace(roots[i] / 256, roots[i], 256)
        Lv = eval_L(nl, s)
        tol = -G3_REL_TOL * nl.scale(s)
        j = int(np.argmin(Lv))
        if Lv[j] < min_L:
            min_L, min_at = float(Lv[j]), (float(omegas[i]), float(s[j]))
        bad = np.flatnonzero(Lv < tol)
        if bad.size and worst is None:
            worst = {"omega": float(omegas[i]), "s": float(s[bad[0]]), "L": float(Lv[bad[0]])}
    g3_wit = {"min_L": min_L, "at_omega_s": list(min_at),
              "max_r_star": float(max(roots[i] for i in valid))}
    if worst is None:
        report.verdicts["G3"] = ConditionVerdict("pass", g3_wit)
    else:
        report.verdicts["G3"] = ConditionVerdict("fail", {**g3_wit, "violation": worst},
                                                 "L(s) < 0 below an amplitude root")

    in_A = [i for i in valid if float(eval_dV(nl, roots[i])) > 0]
    a_wit = {"omega_range": [lo, hi],
             "A_estimate": [float(omegas[in_A[0]]), float(omegas[in_A[-1]])] if in_A else None,
             "n_in_A": len(in_A)}
    gaps = [k for k in range(1, len(in_A)) if in_A[k] != in_A[k - 1] + 1]
    if not in_A:
        report.verdicts["G5"] = ConditionVerdict("fail", {**a_wit, "omega": float(omegas[valid[0]])},
                                                 "V' <= 0 at every sampled root")
    elif gaps:
        k = gaps[0]
        report.verdicts["G5"] = ConditionVerdict(
            "fail", {**a_wit, "gap_between": [float(omegas[in_A[k - 1]]), float(omegas[in_A[k]])]},
            "sampled set A is not contiguous")
    else:
        report.verdicts["G5"] = ConditionVerdict("pass", a_wit)
    return report
