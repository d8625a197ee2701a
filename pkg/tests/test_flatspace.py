import numpy as np

from harmonikos.flatspace import (TwoForm, asd_residual, decompose_two_form, from_frame_curvature,
                                  random_two_form, real_to_x, reality_residual, x_to_real)
from harmonikos.harmonics import random_su2


def test_real_coordinates_round_trip():
    y = np.random.default_rng(0).standard_normal((10, 4))
    x = real_to_x(y)
    assert np.allclose(x_to_real(x), y)
    assert reality_residual(x) < 1e-14


def test_decomposition_is_a_projection():
    rng = np.random.default_rng(1)
    F = TwoForm(random_two_form(rng, dim=2), None)
    F1, F2 = decompose_two_form(F)
    assert np.allclose(F1.F + F2.F, F.F)
    G1, G2 = decompose_two_form(F1)
    assert np.allclose(G2.F, 0)


def test_frame_curvature_is_asd(sl2):
    rng = np.random.default_rng(2)
    S = rng.standard_normal((2, 2, 3)) + 1j * rng.standard_normal((2, 2, 3))
    S = S + np.swapaxes(S, 0, 1)
    F = TwoForm(from_frame_curvature(S), sl2)
    U = random_su2(rng, 30)
    assert asd_residual(F, U).passed
    _, F2 = decompose_two_form(F)
    assert F2.norm() < 1e-14


def test_generic_two_form_fails_asd(sl2):
    rng = np.random.default_rng(3)
    F = TwoForm(random_two_form(rng, dim=3), sl2)
    rep = asd_residual(F, random_su2(rng, 10))
    assert not rep.passed
    assert "F_pp" in rep.failing()
