"""Closed forms for prepotentials whose values commute.

For A-- = c T x-^1 x-^2 with a fixed matrix T (any u(1) datum, or a single
generator of a larger algebra) the bridge is g = exp(-c psi T) with

    psi = (x+^1 x-^2 + x-^1 x+^2) / 2 - (x^{11} x^{22} + x^{21} x^{12}) / 2

(upper indices 1-based, x+-^a = x^{ia} u+-_i), so that Hmm psi = x-^1 x-^2,
H0 psi = 0 and psi(x, I) = 0.  Then A++ = c T x+^1 x+^2,
A_{+a} = -e_{-a} A++ and F_{+a|-b} = c T for a != b, 0 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm


def _xpm(x, U):
    x, U = np.asarray(x), np.asarray(U)
    xp = np.einsum("...ia,...i->...a", x, U[..., :, 0])
    xm = np.einsum("...ia,...i->...a", x, U[..., :, 1])
    return xp, xm


@dataclass(frozen=True)
class BilinearOracle:
    c: complex
    T: np.ndarray

    @property
    def expression(self):
        return "c*T*xm1*xm2"

    def psi(self, x, U):
        xp, xm = _xpm(x, U)
        x = np.asarray(x)
        central = 0.5 * (x[..., 0, 0] * x[..., 1, 1] + x[..., 1, 0] * x[..., 0, 1])
        return 0.5 * (xp[..., 0] * xm[..., 1] + xm[..., 0] * xp[..., 1]) - central

    def Amm(self, x, U):
        _, xm = _xpm(x, U)
        return self.c * (xm[..., 0] * xm[..., 1])[..., None, None] * self.T

    def g(self, x, U):
        p = np.asarray(self.psi(x, U))
        flat = p.reshape(-1)
        out = np.stack([expm(-self.c * v * self.T) for v in flat])
        return out.reshape(p.shape + self.T.shape)

    def App(self, x, U):
        xp, _ = _xpm(x, U)
        return self.c * (xp[..., 0] * xp[..., 1])[..., None, None] * self.T

    def Aplus(self, x, U):
        """(..., 2, d, d): A_{+a} = -c T (delta_{a1} x+^2 + delta_{a2} x+^1)."""
        xp, _ = _xpm(x, U)
        return -self.c * np.stack([xp[..., 1], xp[..., 0]], axis=-1)[..., None, None] * self.T

    def F_pm(self, x, U):
        shape = np.broadcast_shapes(np.shape(x)[:-2], np.shape(U)[:-2])
        S = np.array([[0.0, 1.0], [1.0, 0.0]])
        return np.broadcast_to(self.c * S[:, :, None, None] * self.T, shape + (2, 2) + self.T.shape)


def bilinear_oracle(c, algebra, generator=0):
    return BilinearOracle(complex(c), np.asarray(algebra.matrices[generator]))


def trivial_curvature(x, U, d=1):
    """Curvature of any x-independent prepotential (the instanton is flat)."""
    shape = np.broadcast_shapes(np.shape(x)[:-2], np.shape(U)[:-2])
    return np.zeros(shape + (2, 2, d, d), complex)
