import dataclasses

import numpy as np
import pytest

from harmonikos import make_prepotential
from harmonikos.fields import SumField, DSLField, parse
from harmonikos.flatspace import real_to_x
from harmonikos.verify import (bianchi_yangmills_exact, central_sampler, check_analytic_gauge,
                               check_asd, check_bianchi_yangmills, check_lift_conditions,
                               check_normalized, frame_residuals, leznov_residual,
                               solve_normalization_frame, tolerance_profile)

from conftest import points


def test_profiles():
    assert tolerance_profile()["fd"] == 1e-4
    assert tolerance_profile({"fd": 1e-3})["ode"] == 1e-7
    with pytest.raises(ValueError):
        tolerance_profile("sloppy")


def test_reconstruction_passes_core_suites(gd_sl2):
    x, U = points(31, 4)
    assert check_analytic_gauge(gd_sl2, x, U).passed
    assert leznov_residual(gd_sl2.second_prepotential, gd_sl2.prepotential, x, U).passed
    assert check_lift_conditions(gd_sl2, x, U).passed
    rep = check_asd(gd_sl2.second_prepotential, x, U)
    assert rep.passed and rep.meta["norm_F"] > 0.1


def _corrupted(Gd, sl2):
    bad = DSLField(parse("0.05*T1*xp1*xm2", dim=3), sl2)
    bad.charge = 2
    App = SumField(Gd.second_prepotential, bad)
    App.algebra = sl2
    return dataclasses.replace(Gd, second_prepotential=App)


def test_charge_zero_corruption_is_flagged(gd_sl2, sl2):
    x, U = points(32, 4)
    rep = check_analytic_gauge(_corrupted(gd_sl2, sl2), x, U)
    assert "charge_App" in rep.failing()


def test_mismatched_leznov_pair_fails(gd_sl2, sl2):
    x, U = points(33, 4)
    other = make_prepotential("0.5*T2*xm1*xm2", sl2)
    rep = leznov_residual(gd_sl2.second_prepotential, other, x, U)
    assert not rep.passed


def test_exact_bianchi_and_yang_mills(gd_sl2):
    x, _ = points(34, 2)
    rep = bianchi_yangmills_exact(gd_sl2, x, 1e-9)
    assert rep.passed, rep


def test_fd_yang_mills_fourth_order(gd_sl2, sl2):
    sites = np.array([[0.1, -0.2, 0.15, 0.05]])
    rep = check_bianchi_yangmills(central_sampler(gd_sl2), sites, 0.05, sl2)
    assert rep.passed, rep
    assert abs(rep.meta["ym_rate"] - 4) < 0.3


def test_fd_richardson_gate_far_from_origin(gd_sl2, sl2):
    sites = np.array([[0.45, -0.4, 0.42, -0.38]])
    rep = check_bianchi_yangmills(central_sampler(gd_sl2), sites, 0.05, sl2)
    print("fd raw", rep.max("yang_mills"), "richardson", rep.max("yang_mills_richardson"))
    assert rep.max("yang_mills_richardson") < 0.05 * rep.max("yang_mills")
    assert rep.passed and rep["yang_mills"]["tol"] is None


def test_fd_flags_inconsistent_curvature(gd_sl2, sl2):
    base = central_sampler(gd_sl2)

    def noisy(y):
        A, F = base(y)
        return A, F * (1 + 0.01 * np.asarray(y)[..., :1, None, None, None])

    rep = check_bianchi_yangmills(noisy, np.zeros((1, 4)), 0.05, sl2)
    assert not rep.passed


def test_normalization_frame_and_conditions(sl2):
    x0 = real_to_x(np.zeros(4))
    fr = solve_normalization_frame(x0, np.eye(2))
    rng = np.random.default_rng(5)
    x, U = fr.sample(rng, 12)
    base = fr.base_leaf(rng, 8)
    rep = frame_residuals(fr, x, U, base)
    assert rep.passed, rep.failing()
    # the literal H0 conditions are informational only
    assert rep["H0_mu_literal"]["tol"] is None
    good = make_prepotential("0.5*T2*xm1*xm2 + 0.4*T3*xm1^2", sl2)
    assert check_normalized(good, fr, None, x, U, base).passed
    bad = make_prepotential("0.3*T1*um1^2", sl2)
    rep = check_normalized(bad, fr, None, x, U, base)
    assert "boundary_value" in rep.failing()
