import numpy as np

from harmonikos.harmonics import flow
from harmonikos.oracle import bilinear_oracle, trivial_curvature

from conftest import points


def _dflow(fn, gen, x, U, h=1e-4):
    return (fn(x, flow(U, gen, h)) - fn(x, flow(U, gen, -h))) / (2 * h)


def test_psi_solves_its_defining_system(u1):
    orc = bilinear_oracle(1.0, u1)
    x, U = points(50, 8)
    _, xm = (np.einsum("nia,ni->na", x, U[:, :, k]) for k in (0, 1))
    assert np.abs(_dflow(orc.psi, "Hmm", x, U) - xm[:, 0] * xm[:, 1]).max() < 1e-7
    assert np.abs(_dflow(orc.psi, "H0", x, U)).max() < 1e-7
    assert np.abs(orc.psi(x, np.broadcast_to(np.eye(2), U.shape))).max() < 1e-14


def test_second_prepotential_from_bridge(sl2):
    orc = bilinear_oracle(0.4, sl2, generator=2)
    x, U = points(51, 5)
    g = orc.g(x, U)
    dg = (orc.g(x, flow(U, "Hpp", 1e-5)) - orc.g(x, flow(U, "Hpp", -1e-5))) / 2e-5
    App = -dg @ np.linalg.inv(g)
    assert np.abs(App - orc.App(x, U)).max() < 1e-8


def test_trivial_curvature_shape():
    F = trivial_curvature(np.zeros((3, 2, 2)), np.eye(2), d=2)
    assert F.shape == (3, 2, 2, 2, 2) and not F.any()
