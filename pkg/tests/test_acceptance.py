"""The twelve acceptance criteria, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear in
the "acceptance criteria" section at the end of the session.
"""

import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from nlswave import evolve as ev
from nlswave.field import (ComplexField, Grid, energy_gradient, mass, orbit_distance,
                           random_field_corpus, vanishing_ratio, verify_vanishing_inequality)
from nlswave.minimize import I_curve, existence_identity_check, minimize_energy
from nlswave.nonlinearity import CombinedPower, check_conditions
from nlswave.profile import build_profile, mass_derivative, mass_of_omega, r_star, transversal_interval
from nlswave.spectral import assemble, nondegeneracy_certificate
from oracles import brute_orbit_distance, fd_gradient_check, orbit_corpus

CUBIC = CombinedPower.cubic()


def record(num, title, ok, detail, elapsed=None, bound=None):
    timing = ""
    if elapsed is not None:
        timing = f"; {elapsed:.2f} s" + (f" (bound {bound} s)" if bound else "")
        if bound is not None and elapsed >= bound:
            ok, detail = False, detail + "; over time budget"
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}{timing}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


OMEGAS = (0.25, 1.0, 4.0)


@pytest.fixture(scope="module")
def minimizer():
    t0 = time.perf_counter()
    res = minimize_energy(CUBIC, 4.0, Grid(40.0, 2048))
    return res, time.perf_counter() - t0


class TestAcceptance:
    def test_01_amplitude_oracle(self):
        with Timer() as t:
            err = max(abs(r_star(CUBIC, om) - math.sqrt(2 * om)) for om in OMEGAS)
        record(1, "amplitude oracle R*(omega) = sqrt(2 omega)", err < 1e-10,
               f"max error {err:.1e}", t.elapsed, 1)

    def test_02_mass_curve_oracle(self):
        with Timer() as t:
            lam_err = max(abs(mass_of_omega(CUBIC, om) - 4 * math.sqrt(om)) for om in OMEGAS)
            d = [mass_derivative(CUBIC, om) for om in OMEGAS]
        d_err = max(abs(v - 2 / math.sqrt(om)) for v, om in zip(d, OMEGAS))
        ok = lam_err < 1e-6 and d_err < 1e-4 and min(d) > 0
        record(2, "mass curve 4 sqrt(omega), slope 2/sqrt(omega) > 0", ok,
               f"lambda error {lam_err:.1e}, slope error {d_err:.1e}", t.elapsed, 1)

    def test_03_critical_degeneracy(self):
        nl = CombinedPower(a=1.0 / 6.0, p=6.0)
        with Timer() as t:
            lams = [mass_of_omega(nl, om) for om in OMEGAS]
            d = max(abs(mass_derivative(nl, om)) for om in OMEGAS)
        spread = max(lams) - min(lams)
        record(3, "critical power: lambda constant, slope 0", spread < 1e-6 and d < 1e-4,
               f"lambda spread {spread:.1e}, max |slope| {d:.1e}", t.elapsed, 1)

    def test_04_two_route_profile(self):
        with Timer() as t:
            pr = build_profile(CUBIC, 1.0, X=20.0, n=4096)
            quad = mass_of_omega(CUBIC, 1.0)
        mass_gap = abs(pr.discrete_mass() - quad)
        pt = float(np.max(np.abs(pr.R - math.sqrt(2) / np.cosh(pr.x))))
        record(4, "shooting profile vs quadrature mass and sqrt(2) sech", mass_gap < 1e-3 and pt < 1e-3,
               f"mass gap {mass_gap:.1e}, max pointwise error {pt:.1e}", t.elapsed, 1)

    def test_05_minimization_oracle(self, minimizer):
        res, t_min = minimizer
        with Timer() as t:
            curve = I_curve(CUBIC, [1.0, 2.0, 4.0, 8.0], Grid(40.0, 2048))
        rel = max(abs(p.I_value + p.lam**3 / 96) / (p.lam**3 / 96) for p in curve.points)
        ident = existence_identity_check(res)
        ok = (abs(res.I_value + 2 / 3) < 1e-3 and abs(res.omega - 1) < 1e-3 and rel < 1e-2
              and ident < 1e-3)
        record(5, "minimizer I(4) = -2/3, omega = 1, I(lambda) = -lambda^3/96", ok,
               f"I = {res.I_value:.8f}, omega = {res.omega:.8f}, curve rel error {rel:.1e}, "
               f"identity defect {ident:.1e}", t_min + t.elapsed, 60)

    def test_06_minimizer_structure(self, minimizer):
        res, _ = minimizer
        positive = bool(np.all(res.u.values.real > 0))
        ok = res.align_residual < 1e-6 and res.symmetry < 1e-4 and positive
        record(6, "minimizer is a positive, even, constant-phase profile", ok,
               f"phase residual {res.align_residual:.1e}, symmetry defect {res.symmetry:.1e}, "
               f"min value {res.u.values.real.min():.1e}")

    def test_07_condition_checker(self):
        comb = CombinedPower(a=1.0, b=1.0, p=3.0, q=5.0)
        with Timer() as t:
            cubic_ok = check_conditions(CUBIC).passed()
            lo, hi = transversal_interval(comb, np.linspace(0.01, 1.0, 100))
            rep = check_conditions(comb, omega_range=(lo, hi))
            p6 = check_conditions(CombinedPower(a=1.0, p=6.0))
        min_L = rep["G3"].witness["min_L"]
        ok = cubic_ok and rep["G3"].verdict == "pass" and min_L >= -1e-8 and p6["G2"].verdict == "fail"
        record(7, "checker: cubic passes, combined power G3, p=6 rejected", ok,
               f"combined range [{lo:.2f}, {hi:.2f}], min L {min_L:.1e}, p=6 G2 {p6['G2'].verdict}",
               t.elapsed, 5)

    def test_08_spectral_certificate(self):
        with Timer() as t:
            pr = build_profile(CUBIC, 1.0, X=20.0, n=4096)
            rep = nondegeneracy_certificate(assemble(pr, CUBIC), pr, CUBIC)
        ok = (abs(rep.even_lowest[0] + 3) < 1e-2 and abs(rep.odd_lowest[0]) < 1e-3
              and rep.kernel_residual < 1e-4 and abs(rep.domega_pairing - 1) < 1e-2
              and abs(rep.domega_pairing - rep.dlambda_half) < 1e-2 and rep.constrained_min > 0)
        record(8, "L+ spectrum -3 / 0, kernel R', <R, d_omega R> = lambda'/2, constrained min > 0", ok,
               f"even {rep.even_lowest[0]:.6f}, odd {rep.odd_lowest[0]:.1e}, "
               f"kernel residual {rep.kernel_residual:.1e}, <R, d_omega R> {rep.domega_pairing:.6f} "
               f"(<R, L+^-1 R> = {rep.resolvent_pairing:.6f}), constrained min {rep.constrained_min:.4f}",
               t.elapsed, 30)

    def test_09_evolution_conservation(self):
        g = Grid(40.0, 256)
        pr = build_profile(CUBIC, 1.0, X=20.0, n=256)
        with Timer() as t:
            tr = ev.evolve(pr.as_field(), ev.EvolveConfig(1e-3, 10.0, g, CUBIC, 100), reference=pr)
            half = ev.evolve(pr.as_field(), ev.EvolveConfig(5e-4, 10.0, g, CUBIC, 200))
            # the resting soliton's energy error sits at round-off, so the order of
            # the scheme is measured on a breathing soliton
            breathing = ComplexField(g, 1.1 * pr.R)
            d1 = ev.evolve(breathing, ev.EvolveConfig(1e-3, 10.0, g, CUBIC, 100)).energy_drift()
            d2 = ev.evolve(breathing, ev.EvolveConfig(5e-4, 10.0, g, CUBIC, 200)).energy_drift()
        ratio = d1 / d2
        md, ed, dist = tr.mass_drift(), tr.energy_drift(), max(tr.dist)
        ok = md < 1e-12 and ed < 1e-6 and dist < 1e-3 and 3 <= ratio <= 5
        record(9, "split-step conservation and second-order energy error", ok,
               f"mass drift {md:.1e}, energy drift {ed:.1e}, max distance {dist:.1e}, "
               f"halving ratio {ratio:.3f} (resting soliton: {tr.energy_drift() / half.energy_drift():.2f})",
               t.elapsed, 60)

    def test_10_stability_regression(self):
        base = json.loads(resources.files("nlswave").joinpath("data/stability_baseline.json").read_text())
        g = Grid(base["L"], base["n"])
        with Timer() as t:
            rep = ev.stability_experiment(CombinedPower(**{k: v for k, v in base["nonlinearity"].items()
                                                          if k != "family"}),
                                          base["lambda"], [(base["perturbation"], base["eps"])],
                                          T=base["T"], grid=g, dt=base["dt"],
                                          record_every=base["record_every"])
        sup = rep.outcomes[0].sup_distance
        ok = math.isfinite(sup) and sup < 2 * base["sup_distance"]
        record(10, "eps = 0.01 amplitude perturbation stays near the orbit", ok,
               f"sup distance {sup:.4e}, baseline {base['sup_distance']:.4e}, "
               f"initial {rep.outcomes[0].initial_distance:.4e}", t.elapsed)

    def test_11_brute_force_equivalences(self):
        g = Grid(32.0, 64)
        pr = build_profile(CUBIC, 1.0, X=16.0, n=64)
        with Timer() as t:
            orbit_err, quant_ok = 0.0, True
            for u in orbit_corpus(pr.R, g, count=20):
                ours = orbit_distance(u, pr, refine=False).distance
                exact, coarse, c = brute_orbit_distance(u.values, pr.R, g)
                orbit_err = max(orbit_err, abs(exact - ours))
                bound = c * (1 - math.cos(math.pi / 1024)) / ours
                quant_ok &= ours - 1e-12 <= coarse <= ours + bound + 1e-12
            rng = np.random.default_rng(20)
            gg = Grid(30.0, 256)
            nl = CombinedPower(a=1.0, b=0.5, p=3.0, q=5.0)
            grad_err = 0.0
            for u, h in zip(random_field_corpus(gg, 20, seed=21), random_field_corpus(gg, 20, seed=22)):
                u = u * rng.uniform(0.5, 3.0)
                fd, an = fd_gradient_check(u, h, nl)
                scale = math.sqrt(mass(energy_gradient(u, nl)) * mass(h))
                grad_err = max(grad_err, abs(fd - an) / scale)
        ok = orbit_err < 1e-6 and quant_ok and grad_err < 1e-6
        record(11, "orbit distance vs exhaustive search; gradient vs finite differences", ok,
               f"orbit max gap {orbit_err:.1e}, 1024-phase scan within quantization bound: {quant_ok}, "
               f"gradient max relative error {grad_err:.1e}", t.elapsed)

    def test_12_vanishing_diagnostic(self):
        g = Grid(40.0, 512)
        with Timer() as t:
            corpus = random_field_corpus(g, 100, seed=0)
            held_out = random_field_corpus(g, 100, seed=1)
            results = {}
            for d in (3.0, 4.0, 8.0):
                s = 2 * max(vanishing_ratio(u, d) for u in corpus)
                results[d] = (s, all(verify_vanishing_inequality(u, d, s) for u in corpus),
                              all(verify_vanishing_inequality(u, d, s) for u in held_out))
        ok = all(a and b for _, a, b in results.values())
        detail = ", ".join(f"d={int(d)}: s={s:.3f}" for d, (s, _, _) in results.items())
        record(12, "vanishing inequality with doubled corpus constant (also on a held-out corpus)", ok,
               detail, t.elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
