"""Flat model R^{4n} in adapted coordinates x^{ia}, frames and two-forms.

``x`` arrays have shape (..., 2, 2n): row i in {0, 1}, column a in {0..2n-1}.
Frame fields are e_{+a} = u+^i d/dx^{ia} and e_{-a} = u-^i d/dx^{ia}; with the
index conventions of :mod:`harmonikos.harmonics` this gives e_{-a} x-^b = 0 and
[Hpp, e_{-a}] = e_{+a}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import EPS_DOWN, EPS_UP, raise_index
from .residuals import ResidualReport


class GeometryError(ValueError):
    pass


def _eps_ab(two_n):
    e = np.zeros((two_n, two_n))
    for k in range(0, two_n, 2):
        e[k, k + 1] = -1.0
        e[k + 1, k] = 1.0
    return e


def reality_residual(x):
    """max |conj(x^{ia}) - eps_ij eps_ab x^{jb}| for the Euclidean involution."""
    x = np.asarray(x)
    e = _eps_ab(x.shape[-1])
    img = np.einsum("ij,ab,...jb->...ia", EPS_DOWN, e, x)
    return float(np.max(np.abs(np.conj(x) - img)))


def real_to_x(y):
    """Real coordinates y (..., 4n) -> complex x (..., 2, 2n) on the real slice."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1] // 4
    x = np.empty(y.shape[:-1] + (2, 2 * n), complex)
    for k in range(n):
        y1, y2, y3, y4 = (y[..., 4 * k + m] for m in range(4))
        x[..., 0, 2 * k] = y1 + 1j * y2
        x[..., 0, 2 * k + 1] = y3 + 1j * y4
        x[..., 1, 2 * k] = -y3 + 1j * y4
        x[..., 1, 2 * k + 1] = y1 - 1j * y2
    return x


def x_to_real(x):
    x = np.asarray(x)
    n = x.shape[-1] // 2
    y = np.empty(x.shape[:-2] + (4 * n,))
    for k in range(n):
        y[..., 4 * k] = x[..., 0, 2 * k].real
        y[..., 4 * k + 1] = x[..., 0, 2 * k].imag
        y[..., 4 * k + 2] = x[..., 0, 2 * k + 1].real
        y[..., 4 * k + 3] = x[..., 0, 2 * k + 1].imag
    return y


def real_jacobian(n=1):
    """M[mu, i, a] = d x^{ia} / d y_mu (constant)."""
    eye = np.eye(4 * n)
    return real_to_x(eye)


@dataclass(frozen=True, eq=False)
class PointX:
    x: np.ndarray
    n: int = 1
    reality_flag: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex)
        if x.shape != (2, 2 * self.n):
            raise GeometryError(f"point must have shape (2, {2 * self.n})")
        if self.reality_flag and reality_residual(x) > 1e-12:
            raise GeometryError("point violates the reality condition")
        object.__setattr__(self, "x", x)

    @classmethod
    def from_real(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(real_to_x(y), len(y) // 4, True)

    def x_minus(self, U):
        return self.x.T @ np.asarray(U)[:, 1]

    def x_plus(self, U):
        return self.x.T @ np.asarray(U)[:, 0]


@dataclass(frozen=True)
class FrameDirection:
    sign: str
    a: int
    at: np.ndarray

    def vector(self, n=1):
        """Components v^{ia} of the tangent vector e_{sign a}."""
        v = np.zeros((2, 2 * n), complex)
        v[:, self.a] = frame_vector(self.at, self.sign)
        return v


def frame_vector(U, sign):
    U = np.asarray(U)
    return raise_index(U[..., :, 0] if sign == "+" else U[..., :, 1])


def frame_derivative(f, direction, x):
    """u^{+-i} d f / d x^{ia} at (x, direction.at), exact via jets; returns matrices."""
    from .probe import seed
    sp, xj, Uj = seed(x, direction.at, [("frame", [(direction.sign, direction.a)], 1)])
    out = f.evaluate(xj, Uj)
    return out.data[sp.var(0)]


def frame_commutator(f, d1, d2, x, U):
    """(V1 V2 - V2 V1) f for probe items d1, d2, each ``(kind, item)``."""
    from .probe import seed
    res = []
    for a, b in ((d1, d2), (d2, d1)):
        sp, xj, Uj = seed(x, U, [(a[0], [a[1]], 1), (b[0], [b[1]], 1)])
        res.append(f.evaluate(xj, Uj).coeff((1, 1)))
    return res[0] - res[1]


class TwoForm:
    """F_{ia,jb} stored as array (..., 2, 2n, 2, 2n, dim) of algebra coefficients."""

    def __init__(self, F, algebra=None):
        F = np.asarray(F, dtype=complex)
        if F.ndim < 5 or F.shape[-5] != 2 or F.shape[-3] != 2 or F.shape[-4] != F.shape[-2]:
            raise GeometryError("two-form must have shape (..., 2, 2n, 2, 2n, dim)")
        self.F = F
        self.algebra = algebra

    @property
    def n(self):
        return self.F.shape[-4] // 2

    def antisymmetry_residual(self):
        return float(np.max(np.abs(self.F + np.swapaxes(np.swapaxes(self.F, -5, -3), -4, -2))))

    def norm_entries(self):
        if self.algebra is None:
            return np.linalg.norm(self.F, axis=-1)
        return self.algebra.norm(self.F)

    def norm(self):
        return float(np.max(self.norm_entries(), initial=0.0))

    def __add__(self, other):
        return TwoForm(self.F + other.F, self.algebra)

    def __sub__(self, other):
        return TwoForm(self.F - other.F, self.algebra)

    def frame_component(self, U, s1, s2):
        """F_{s1 a | s2 b} = u^{s1 i} u^{s2 j} F_{ia,jb} at harmonics U (..., 2, 2)."""
        u1 = frame_vector(U, s1)
        u2 = frame_vector(U, s2)
        return np.einsum("...i,...j,...iajbk->...abk", u1, u2, self.F)


def from_frame_curvature(S, n=None):
    """Central two-form F_{ia,jb} = -eps_ij S_ab for an ASD field with F_{+a|-b} = S_ab."""
    S = np.asarray(S)
    return np.einsum("ij,...abk->...iajbk", -EPS_DOWN, S)


def decompose_two_form(F):
    """Split F = F1 + F2 with F1 the eps_ij-proportional summand."""
    # F1_{ia,jb} = -1/2 eps_ij eps^{kl} F_{ka,lb}; the -1/2 is fixed by eps^{kl} eps_kl = -2
    c = np.einsum("kl,...kalbd->...abd", EPS_UP, F.F)
    F1 = -0.5 * np.einsum("ij,...abd->...iajbd", EPS_DOWN, c)
    return TwoForm(F1, F.algebra), TwoForm(F.F - F1, F.algebra)


def asd_components(F, U):
    comps = {}
    for s1 in "+-":
        for s2 in "+-":
            comps[s1 + s2] = F.frame_component(U, s1, s2)
    return comps


def asd_residual_values(F, U_samples):
    """Per-sample residual norms of the four anti-self-duality conditions."""
    U = np.asarray(U_samples)
    c = asd_components(F, U)
    nrm = (lambda a: F.algebra.norm(a)) if F.algebra is not None else (lambda a: np.linalg.norm(a, axis=-1))
    pm = c["+-"]
    return {
        "F_pp": nrm(c["++"]),
        "F_mm": nrm(c["--"]),
        "F_pm_plus_mp": nrm(pm + c["-+"]),
        "F_pm_symmetry": nrm(pm - np.swapaxes(pm, -2, -3)),
    }


def asd_residual(F, U_samples, tol=1e-8):
    rep = ResidualReport("asd")
    for name, vals in asd_residual_values(F, U_samples).items():
        rep.add(name, vals, tol)
    return rep


def random_two_form(rng, n=1, dim=1, batch=()):
    shape = batch + (2, 2 * n, 2, 2 * n, dim)
    G = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return G - np.swapaxes(np.swapaxes(G, -5, -3), -4, -2)
