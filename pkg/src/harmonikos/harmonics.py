"""The SL2(C) fiber: harmonics, right-multiplication flows, Haar quadrature.

Conventions
-----------
A harmonic is a matrix ``U`` whose first column is ``u+_i`` and second column
``u-_i`` (lower index i = row).  Indices are raised with ``eps^{12} = 1``, so
``u^{1} = u_2`` and ``u^{2} = -u_1``.  ``H_alpha`` acts by ``U -> U exp(t H_alpha)``;
the induced vector fields are left invariant and satisfy
``[H0, Hpp] = 2 Hpp``, ``[H0, Hmm] = -2 Hmm``, ``[Hpp, Hmm] = H0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lie import H0, HMM, HPP

GENERATORS = {
    "H0": H0,
    "Hpp": HPP,
    "Hmm": HMM,
    "G0": 1j * H0,
    "G1": HPP - HMM,
    "G2": 1j * (HPP + HMM),
}
REAL_DIRECTIONS = ("G0", "G1", "G2")
CHARGE_SHIFT = {"H0": 0, "Hpp": 2, "Hmm": -2}

# eps^{ij} with eps^{12} = 1, and eps_{ij} with eps_{12} = -1
EPS_UP = np.array([[0.0, 1.0], [-1.0, 0.0]])
EPS_DOWN = -EPS_UP


class HarmonicError(ValueError):
    pass


def raise_index(v):
    """v^i = eps^{ij} v_j along the last axis (works on arrays and jets)."""
    return v[..., [1, 0]] * np.array([1.0, -1.0])


@dataclass(frozen=True, eq=False)
class Harmonic:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise HarmonicError("a harmonic is a 2x2 matrix")
        if abs(np.linalg.det(m) - 1) > 1e-10:
            raise HarmonicError("harmonic must have unit determinant")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_rows(cls, u_plus, u_minus):
        return cls(np.column_stack([u_plus, u_minus]))

    @property
    def u_plus(self):
        return self.matrix[:, 0]

    @property
    def u_minus(self):
        return self.matrix[:, 1]

    def raised(self, sign):
        return raise_index(self.u_plus if sign == "+" else self.u_minus)

    def normalization(self):
        """u+^i u-_i; equal to -det U with these index conventions."""
        return complex(self.raised("+") @ self.u_minus)

    def is_su2(self, tol=1e-12):
        m = self.matrix
        return bool(np.max(np.abs(m @ m.conj().T - np.eye(2))) <= tol)

    def reality_residual(self):
        """|u-_i + conj(u+^i)|: zero exactly on SU(2)."""
        return float(np.max(np.abs(self.u_minus + np.conj(self.raised("+")))))


def flow(U, generator, t):
    """U exp(t H) for a named generator; accepts Harmonic or raw matrices."""
    m = U.matrix if isinstance(U, Harmonic) else np.asarray(U)
    out = m @ scipy.linalg.expm(t * GENERATORS[generator])
    return Harmonic(out) if isinstance(U, Harmonic) else out


def random_su2(rng, n=None):
    shape = () if n is None else (n,)
    z = rng.standard_normal(shape + (4,))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    a = z[..., 0] + 1j * z[..., 1]
    b = z[..., 2] + 1j * z[..., 3]
    out = np.empty(shape + (2, 2), complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def random_sl2(rng, n=None, spread=0.5):
    """Random SL2(C) matrices near SU(2): SU(2) times exp of a small Hermitian part."""
    shape = () if n is None else (n,)
    k = random_su2(rng, n)
    c = spread * rng.standard_normal(shape + (3,))
    h = np.einsum("...a,aij->...ij", c, np.array([H0, HPP + HMM, 1j * (HMM - HPP)]))
    w, v = np.linalg.eigh(h)
    p = np.einsum("...ij,...j,...kj->...ik", v, np.exp(w), np.conj(v))
    return k @ p


@dataclass(frozen=True, eq=False)
class HaarGrid:
    nodes: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __len__(self):
        return len(self.weights)


def _rz(theta):
    out = np.zeros(theta.shape + (2, 2), complex)
    out[..., 0, 0] = np.exp(-0.5j * theta)
    out[..., 1, 1] = np.exp(0.5j * theta)
    return out


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.zeros(theta.shape + (2, 2), complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def euler_grid(na=12, nb=None, ng=None):
    """Rz(a) Ry(b) Rz(g): trapezoid in a, g over [0, 4pi), Gauss-Legendre in cos b."""
    nb = na if nb is None else nb
    ng = na if ng is None else ng
    a = 4 * np.pi * np.arange(na) / na
    g = 4 * np.pi * np.arange(ng) / ng
    xc, wc = np.polynomial.legendre.leggauss(nb)
    b = np.arccos(xc)
    A, B, G = np.meshgrid(a, b, g, indexing="ij")
    nodes = _rz(A.ravel()) @ _ry(B.ravel()) @ _rz(G.ravel())
    W = np.broadcast_to(wc[None, :, None], A.shape).ravel()
    return HaarGrid(nodes, W / W.sum(), f"euler:{na}x{nb}x{ng}")


def mc_grid(n=100000, seed=7):
    rng = np.random.default_rng(seed)
    return HaarGrid(random_su2(rng, n), np.full(n, 1.0 / n), f"mc:{n}:{seed}")


def grid_from_spec(spec):
    """Accepts ``{"type": "euler", "n": [..]}``, ``{"type": "mc", ...}``, ``euler:8`` or ``mc:N:seed``."""
    if isinstance(spec, HaarGrid):
        return spec
    if isinstance(spec, str):
        parts = spec.split(":")
        if parts[0] == "euler":
            ns = [int(v) for v in parts[1].split("x")] if len(parts) > 1 else [12]
            return euler_grid(*ns)
        if parts[0] == "mc":
            n = int(parts[1]) if len(parts) > 1 else 100000
            seed = int(parts[2]) if len(parts) > 2 else 7
            return mc_grid(n, seed)
        raise HarmonicError(f"unknown grid spec {spec!r}")
    kind = spec.get("type", "euler")
    if kind == "euler":
        n = spec.get("n", [12, 12, 12])
        n = [n] * 3 if isinstance(n, int) else list(n)
        return euler_grid(*n)
    if kind == "mc":
        return mc_grid(int(spec.get("n", 100000)), int(spec.get("seed", 7)))
    raise HarmonicError(f"unknown grid type {kind!r}")


def haar_integrate(f, grid):
    """Weighted sum of f over the grid nodes; f maps (N, 2, 2) -> (N, ...)."""
    vals = np.asarray(f(grid.nodes))
    if vals.ndim == 0:
        return vals * 1.0
    return np.tensordot(grid.weights, vals, axes=([0], [0]))


class ChargedField:
    """A g-valued function of (x, U) with an H0 charge.

    Subclasses implement ``evaluate(xj, Uj)`` on jets ``xj`` (..., 2, 2n) and
    ``Uj`` (..., 2, 2) from one JetSpace, returning a matrix jet (..., d, d)
    in the algebra's representation.
    """

    charge: int = 0
    algebra = None
    domain_box = None

    def evaluate(self, xj, Uj):
        raise NotImplementedError

    def values(self, x, U):
        from .jets import Jet, jet_space
        sp = jet_space(())
        return self.evaluate(Jet.const(sp, np.asarray(x, complex)),
                             Jet.const(sp, np.asarray(U, complex))).value

    def __call__(self, x, U):
        return self.values(x, U)


def harmonic_derivative(f, generator, x, U):
    """d/dt f(x, U exp(t H)) at t = 0, exact via jets; returns matrices."""
    from .probe import seed
    sp, xj, Uj = seed(x, U, [("flow", [generator], 1)])
    out = f.evaluate(xj, Uj)
    return out.data[sp.var(0)] if out.nz[sp.var(0)] else np.zeros_like(out.value)


def operator_commutator(f, first, second, x, U):
    """(V_first V_second - V_second V_first) f."""
    from .probe import seed
    res = []
    for a, b in ((first, second), (second, first)):
        sp, xj, Uj = seed(x, U, [("flow", [a], 1), ("flow", [b], 1)])
        out = f.evaluate(xj, Uj)
        res.append(out.coeff((1, 1)))
    return res[0] - res[1]


def fiber_jet_norms(f, x, k, grid):
    """Per-node sums sum_{j<=k} |nabla^j f|_h in exponential coordinates.

    x is a single point (2, 2n).  Returns an array over grid nodes.
    """
    from math import factorial

    from .probe import seed
    if k not in (0, 1, 2):
        raise HarmonicError("fiber C^k norms support k in {0, 1, 2}")
    alg = f.algebra
    sp, xj, Uj = seed(np.asarray(x)[None], grid.nodes, [("expcoord", list(REAL_DIRECTIONS), k)])
    out = f.evaluate(xj, Uj)
    coeffs = alg.from_matrix(out.data, check=False)
    norms2 = np.zeros((k + 1, len(grid)))
    for c, m in enumerate(sp.monomials):
        j = sum(m)
        alpha_fact = np.prod([factorial(v) for v in m])
        norms2[j] += factorial(j) * alpha_fact * alg.norm(coeffs[c]) ** 2
    return np.sqrt(norms2).sum(axis=0)


def fiber_ck_norm(f, x, k, grid):
    """Sup over grid nodes of the fiber C^k norm at fixed x."""
    return float(np.max(fiber_jet_norms(f, x, k, grid)))
