import json

import numpy as np
import pytest
from scipy.special import erfinv

from lochom.asymptotics import SweepSettings, estimate_rate, localization_metric, mvt_check, run_sweep
from lochom.coefficients import Box, make_spec
from lochom.fd import BoxGrid
from lochom.regions import ParameterPoint, UnsupportedRegion

EPS = [1 / 40, 1 / 80, 1 / 160]
BOX1 = Box((-1.0,), (1.0,))


class TestRate:
    def test_square(self):
        r = estimate_rate([(e, e**2) for e in (0.1, 0.05, 0.025, 0.0125)])
        assert r.slope == pytest.approx(2.0, abs=0.01) and r.half_width < 0.01

    def test_sqrt(self):
        assert estimate_rate([(e, 3 * e**0.5) for e in (0.1, 0.05, 0.025)]).slope == pytest.approx(0.5)

    def test_zero_error_flagged(self):
        assert estimate_rate([(0.1, 1.0), (0.05, 0.0), (0.025, 0.1)]).status == "converged below tolerance"

    def test_too_few(self):
        with pytest.raises(ValueError):
            estimate_rate([(0.1, 1.0), (0.05, 0.5)])


class TestLocalization:
    @pytest.mark.parametrize("eps", [1e-3, 1e-4, 1e-5])
    def test_gaussian_radius_constant(self, eps):
        gamma = 0.25
        g = BoxGrid.cube(1.0, 4000, 1)
        x = g.inner_points()[:, 0]
        u = np.exp(-x**2 / (2 * eps ** (2 * gamma)))
        loc = localization_metric(u, g, eps, gamma, [0.0])
        assert loc.radius == pytest.approx(erfinv(0.99), rel=0.05)
        assert loc.localized

    def test_flat_not_localized(self):
        g = BoxGrid.cube(1.0, 200, 1)
        loc = localization_metric(np.ones(199), g, 1e-3, 0.25, [0.0])
        assert not loc.localized
        assert loc.radius > 0.9 * 1e-3**-0.25

    def test_mass_bounds(self):
        g = BoxGrid.cube(1.0, 16, 1)
        with pytest.raises(ValueError):
            localization_metric(np.ones(15), g, 0.1, 0.2, [0.0], mass=1.0)
        with pytest.raises(ValueError):
            localization_metric(np.zeros(15), g, 0.1, 0.2, [0.0])


class TestMvt:
    def test_zero_g(self):
        rep = mvt_check("0", BOX1, [1 / 8, 1 / 16, 1 / 32])
        assert max(rep.integrals) <= 1e-14

    def test_nonzero_mean_rejected(self):
        with pytest.raises(ValueError, match="y-mean"):
            mvt_check("1 + sin(2*pi*y1)", BOX1, [0.1, 0.05, 0.025])

    @pytest.mark.parametrize("g", ["sin(2*pi*y1)", "(1 + x1^2)*cos(2*pi*y1)"])
    def test_eps_squared_bound(self, g):
        # eps^2 is an upper bound: I(eps) / eps^2 must stay bounded
        rep = mvt_check(g, BOX1, [1 / 8, 1 / 16, 1 / 32, 1 / 64])
        assert max(rep.bound_ratio) <= 1.0
        assert rep.bound_ratio[-1] <= rep.bound_ratio[0]

    def test_2d_runs(self):
        rep = mvt_check("sin(2*pi*(y1 + y2))", Box((-1.0, -1.0), (1.0, 1.0)), [1 / 4, 1 / 8, 1 / 16])
        assert max(rep.bound_ratio) <= 1.0


def test_unsupported_sweep():
    s = make_spec(1, [(-1, 1)], a="1", b="1", c="1 + x1^2")
    with pytest.raises(UnsupportedRegion):
        run_sweep(s, ParameterPoint.of(2, 2), EPS, 1)


def test_eps_order_enforced():
    s = make_spec(1, [(-1, 1)], a="1", b="1", c="1 + x1^2")
    with pytest.raises(ValueError):
        run_sweep(s, ParameterPoint.of("1/3", 1), [1 / 80, 1 / 40], 1)


def test_constant_coefficient_sweep():
    # correctors vanish and every term rescales with the same power of eps,
    # so eta^eps equals eta up to discretization and roundoff (eps_mach*|A|
    # with |A| ~ h^-4 is about 1e-4 in eta here)
    s = make_spec(1, [(-4, 4)], a="1", b="1", c="1 + x1^2")
    res = run_sweep(s, ParameterPoint.of("1/3", 1), EPS, 2, SweepSettings(effective_points=512))
    assert np.all(res.errors[:, 0] < 1e-3 * res.eta_eff[0])


@pytest.fixture(scope="module")
def reference_sweep():
    from lochom.config import load_config

    cfg = load_config("configs/r2_reference.toml")
    return run_sweep(cfg.problem.spec(), cfg.problem.point(), EPS, 3, cfg.solver.sweep_settings())


def test_reference_sweep_trends(reference_sweep):
    r = reference_sweep
    assert r.monotone_error(0)
    e = r.errors[:, 0]
    assert max(e[-2:]) <= min(e[:2]) or e[-1] <= e[0]
    assert r.shift_ratio[-1, 0] <= 0.2
    assert r.rates[0].slope > 0
    assert np.all(np.isfinite(r.angles))


def test_reference_sweep_reproducible(reference_sweep):
    from lochom.config import load_config

    cfg = load_config("configs/r2_reference.toml")
    again = run_sweep(cfg.problem.spec(), cfg.problem.point(), EPS, 3, cfg.solver.sweep_settings())
    dump = lambda r: json.dumps(r.to_dict(), sort_keys=True, default=float)
    assert dump(again) == dump(reference_sweep)


def test_parallel_matches_serial():
    s = make_spec(1, [(-4, 4)], a="1", b="1", c="1 + x1^2")
    p = ParameterPoint.of("1/3", 1)
    serial = run_sweep(s, p, EPS[:2], 1, SweepSettings(effective_points=256))
    par = run_sweep(s, p, EPS[:2], 1, SweepSettings(effective_points=256, workers=2))
    assert np.array_equal(serial.eigenvalues, par.eigenvalues)
