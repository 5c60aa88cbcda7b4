import math

import numpy as np
import pytest

from nlswave.errors import NoDescent
from nlswave.field import Grid, energy, mass
from nlswave.minimize import (I_curve, MinimizeOptions, cross_validate, existence_identity_check,
                              gaussian_init, minimize_energy, multiplier, omega_for_mass,
                              profile_init, subadditivity_gap)
from nlswave.nonlinearity import CombinedPower
from nlswave.profile import build_profile, mass_of_omega

CUBIC = CombinedPower.cubic()
COMBINED = CombinedPower(a=1.0, b=1.0, p=3.0, q=5.0)
G = Grid(40.0, 1024)


@pytest.fixture(scope="module")
def cubic_min():
    return minimize_energy(CUBIC, 4.0, G)


class TestCubicMinimizer:
    def test_energy_and_multiplier(self, cubic_min):
        res = cubic_min
        assert res.converged
        assert res.I_value == pytest.approx(-4.0**3 / 96, abs=1e-8)
        assert res.omega == pytest.approx(1.0, abs=1e-7)
        assert mass(res.u) == pytest.approx(4.0, rel=1e-12)

    def test_structure(self, cubic_min):
        res = cubic_min
        assert res.align_residual < 1e-10
        assert res.symmetry < 1e-8
        assert np.all(res.u.values.real > 0)

    def test_energy_is_monotone(self, cubic_min):
        e = np.asarray(cubic_min.energies)
        assert np.all(np.diff(e) <= 1e-13 * max(1.0, abs(e[0])))

    def test_identity_and_cross_validation(self, cubic_min):
        assert existence_identity_check(cubic_min) < 1e-7
        assert cross_validate(cubic_min, CUBIC) < 1e-6

    @pytest.mark.parametrize("lam", [2.0, 6.0])
    def test_scaling_law(self, lam):
        res = minimize_energy(CUBIC, lam, G)
        assert res.I_value == pytest.approx(-(lam**3) / 96, rel=1e-5)
        assert res.omega == pytest.approx(lam**2 / 16, rel=1e-5)

    def test_warm_start_reused(self, cubic_min):
        res = minimize_energy(CUBIC, 4.0, G, warm=cubic_min.u)
        assert res.init == "warm"
        assert res.iterations <= 2


class TestCombinedPower:
    @pytest.mark.parametrize("lam", [0.5, 1.5])
    def test_matches_quadrature_profile(self, lam):
        g = Grid(80.0, 1024)
        res = minimize_energy(COMBINED, lam, g)
        assert res.converged and res.I_value < 0
        assert mass_of_omega(COMBINED, res.omega) == pytest.approx(lam, rel=1e-6)
        assert cross_validate(res, COMBINED) < 1e-5


class TestFailureModes:
    def test_defocusing_has_no_descent(self):
        nl = CombinedPower(a=0.0, b=0.25, p=3.0, q=4.0)
        with pytest.raises(NoDescent) as info:
            minimize_energy(nl, 4.0, Grid(40.0, 256), MinimizeOptions(max_iter=300))
        best = info.value.best
        # the flow spreads mass toward the uniform state of energy b lam^2 / L
        assert best.I_value >= 0
        assert best.I_value <= energy(gaussian_init(Grid(40.0, 256), 4.0), nl)

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            minimize_energy(CUBIC, 0.0, G)

    def test_rejects_unknown_init(self):
        with pytest.raises(ValueError):
            minimize_energy(CUBIC, 1.0, G, MinimizeOptions(inits=("sine",)))


class TestHelpers:
    def test_multiplier_of_soliton(self):
        pr = build_profile(CUBIC, 2.25, X=20.0, n=1024)
        assert multiplier(pr.as_field(), CUBIC) == pytest.approx(2.25, rel=1e-8)

    def test_omega_for_mass(self):
        assert omega_for_mass(CUBIC, 6.0) == pytest.approx(36 / 16, rel=1e-10)
        assert omega_for_mass(CombinedPower(a=0.0, b=0.25, p=3.0, q=4.0), 1.0) is None

    def test_inits_have_requested_mass(self):
        assert mass(gaussian_init(G, 3.0)) == pytest.approx(3.0)
        assert mass(profile_init(CUBIC, G, 3.0)) == pytest.approx(3.0)

    def test_subadditivity(self):
        g = Grid(40.0, 512)
        gap = subadditivity_gap(CUBIC, 2.0, 2.0, g)
        # I(4) - 2 I(2) = -2/3 + 1/6
        assert gap == pytest.approx(-0.5, rel=1e-4)


class TestICurve:
    def test_cubic_curve(self, tmp_path):
        lams = [1.0, 2.0, 4.0]
        curve = I_curve(CUBIC, lams, G)
        for p in curve.points:
            assert p.status == "converged"
            assert p.I_value == pytest.approx(-(p.lam**3) / 96, rel=1e-2)
        assert curve.lambda_star == 0.0
        curve.to_csv(tmp_path / "i.csv")
        assert (tmp_path / "i.csv").read_text().splitlines()[0].startswith("lambda,I,omega")

    def test_requires_ascending(self):
        with pytest.raises(ValueError):
            I_curve(CUBIC, [2.0, 1.0], G)

    def test_records_no_descent(self):
        nl = CombinedPower(a=0.0, b=0.25, p=3.0, q=4.0)
        curve = I_curve(nl, [1.0], Grid(40.0, 256), MinimizeOptions(max_iter=100))
        assert curve.points[0].status == "no-descent"
        assert math.isfinite(curve.points[0].I_value)
