import numpy as np
import pytest

from harmonikos import make_prepotential
from harmonikos.harmonics import (Harmonic, HarmonicError, euler_grid, fiber_ck_norm, flow,
                                  grid_from_spec, haar_integrate, harmonic_derivative,
                                  operator_commutator, random_su2)

from conftest import SL2_EXAMPLE, points


def test_random_su2_is_unitary_unimodular():
    U = random_su2(np.random.default_rng(0), 50)
    assert np.allclose(U @ np.conj(np.swapaxes(U, -1, -2)), np.eye(2))
    assert np.allclose(np.linalg.det(U), 1)


def test_harmonic_rejects_non_unimodular():
    with pytest.raises(HarmonicError):
        Harmonic(2 * np.eye(2))
    h = Harmonic(np.eye(2))
    assert h.is_su2()


def test_euler_grid_is_probability_measure():
    g = euler_grid(6)
    assert abs(g.weights.sum() - 1) < 1e-13
    # Haar mean of |U_00|^2 over SU(2) is 1/2
    assert abs(haar_integrate(lambda U: np.abs(U[:, 0, 0]) ** 2, g) - 0.5) < 1e-12


def test_grid_spec_forms():
    assert len(grid_from_spec("euler:4")) == 64
    assert len(grid_from_spec({"type": "euler", "n": 3})) == 27
    assert len(grid_from_spec("mc:100:1")) == 100
    with pytest.raises(HarmonicError):
        grid_from_spec("lattice:3")


@pytest.mark.parametrize("a,b,expected", [("H0", "Hpp", ("Hpp", 2)), ("H0", "Hmm", ("Hmm", -2)),
                                          ("Hpp", "Hmm", ("H0", 1))])
def test_operator_commutators_on_charged_field(sl2, a, b, expected):
    f = make_prepotential(SL2_EXAMPLE, sl2)
    x, U = points(11, 20)
    lhs = operator_commutator(f, a, b, x, U)
    gen, c = expected
    rhs = c * harmonic_derivative(f, gen, x, U)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_flow_is_right_multiplication():
    U = random_su2(np.random.default_rng(2))
    t = 0.3
    V = flow(U, "Hpp", t)
    assert np.allclose(V, U @ np.array([[1, t], [0, 1]]))


def test_fiber_norm_rejects_high_order(u1):
    f = make_prepotential("T1*xm1*xm2", u1)
    with pytest.raises(HarmonicError):
        fiber_ck_norm(f, np.zeros((2, 2)), 3, euler_grid(2))
