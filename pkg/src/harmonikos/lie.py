"""Complexified compact Lie algebras in a fixed basis.

Two bases ship with the package: ``u1`` (one generator) and ``sl2``.  The
sl2 basis is the compact triple G0 = iH0, G1 = Hpp - Hmm, G2 = i(Hpp + Hmm),
so every generator lies in su(2) and ``[G_a, G_b] = 2 eps_abc G_c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

JACOBI_TOL = 1e-12
KILLING_TOL = 1e-10
COND_GUARD = 1e12


class AlgebraError(ValueError):
    pass


class AlgebraBasis:
    """Structure constants ``f[i, j, k]`` with ``[T_i, T_j] = sum_k f[i, j, k] T_k``.

    ``compact`` flags mark generators lying in the compact real form; the
    others are taken to lie in i times it.  ``matrices`` is a faithful
    representation used by exp/Ad; when absent the adjoint representation is
    used, which requires a trivial center.
    """

    def __init__(self, name, structure_constants, compact, inner_product, matrices=None,
                 validate=True):
        self.name = str(name)
        f = np.asarray(structure_constants, dtype=complex)
        self.dim = f.shape[0]
        if f.shape != (self.dim,) * 3:
            raise AlgebraError("structure constants must have shape (dim, dim, dim)")
        self.f = f
        self.compact = np.asarray(compact, dtype=bool)
        self.ip = np.asarray(inner_product, dtype=complex)
        if self.compact.shape != (self.dim,) or self.ip.shape != (self.dim, self.dim):
            raise AlgebraError("compact flags / inner product have the wrong size")
        if matrices is None:
            if np.linalg.matrix_rank(self._ad_stack().reshape(self.dim, -1)) < self.dim:
                raise AlgebraError(f"{name}: algebra has a center; supply representation matrices")
            matrices = self._ad_stack()
        self.matrices = np.asarray(matrices, dtype=complex)
        # real-form coefficients are c * phase
        self._phase = np.where(self.compact, 1.0, 1j)
        self._ip_real = self.ip.real
        flat = self.matrices.reshape(self.dim, -1).T
        self._proj = np.linalg.pinv(flat)
        self._flat = flat
        if validate:
            self.validate()

    def _ad_stack(self):
        # (ad_k)_{ij} = f[k, j, i]
        return np.transpose(self.f, (0, 2, 1))

    # checks -----------------------------------------------------------
    def jacobi_residual(self):
        f = self.f
        # sum_m f_ijm f_mkl + cyclic
        t = np.einsum("ijm,mkl->ijkl", f, f)
        cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
        return float(np.max(np.abs(cyc))) if cyc.size else 0.0

    def killing(self):
        return np.einsum("ajk,bkj->ab", self.f, self.f)

    def center_mask(self):
        ad = self._ad_stack().reshape(self.dim, -1)
        return np.array([np.allclose(row, 0, atol=1e-14) for row in ad])

    def killing_residual(self):
        semi = ~self.center_mask()
        K = self.killing()
        diff = (self.ip + K)[np.ix_(semi, semi)]
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def validate(self):
        anti = np.max(np.abs(self.f + np.transpose(self.f, (1, 0, 2)))) if self.dim else 0.0
        if anti > JACOBI_TOL:
            raise AlgebraError("structure constants are not antisymmetric")
        if self.jacobi_residual() > JACOBI_TOL:
            raise AlgebraError("structure constants violate the Jacobi identity")
        if self.killing_residual() > KILLING_TOL:
            raise AlgebraError("inner product differs from minus the Killing form on the semisimple part")
        if np.max(np.abs(self.ip - self.ip.conj().T)) > 1e-12:
            raise AlgebraError("inner product matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(self.ip)) <= 0:
            raise AlgebraError("inner product matrix is not positive definite")
        # the representation must respect the brackets
        M = self.matrices
        comm = np.einsum("iab,jbc->ijac", M, M) - np.einsum("jab,ibc->ijac", M, M)
        rhs = np.einsum("ijk,kac->ijac", self.f, M)
        if np.max(np.abs(comm - rhs)) > 1e-10:
            raise AlgebraError("representation matrices do not satisfy the brackets")

    # coefficient-level operations ------------------------------------
    def to_matrix(self, coeffs):
        """Coefficient array (..., dim) -> matrices (..., n, n)."""
        return np.tensordot(np.asarray(coeffs), self.matrices, axes=([-1], [0]))

    def from_matrix(self, mats, check=True):
        mats = np.asarray(mats)
        n = self.matrices.shape[-1]
        flat = mats.reshape(mats.shape[:-2] + (n * n,))
        c = flat @ self._proj.T
        if check:
            back = c @ self._flat.T
            if np.max(np.abs(back - flat), initial=0.0) > 1e-9 * (1 + np.max(np.abs(flat), initial=0.0)):
                raise AlgebraError("matrix does not lie in the algebra")
        return c

    def real_form_coeffs(self, coeffs):
        return np.asarray(coeffs) * self._phase

    def norm(self, coeffs):
        """Hermitian norm sqrt(|X|^2 + |Y|^2) for coefficient arrays (..., dim)."""
        c = self.real_form_coeffs(coeffs)
        re, im = c.real, c.imag
        q = np.einsum("...i,ij,...j->...", re, self._ip_real, re)
        q = q + np.einsum("...i,ij,...j->...", im, self._ip_real, im)
        return np.sqrt(np.maximum(q, 0.0))

    def matrix_norm(self, mats):
        return self.norm(self.from_matrix(mats, check=False))

    def bracket_coeffs(self, a, b):
        return np.einsum("...i,...j,ijk->...k", a, b, self.f)

    def element(self, coeffs):
        return AlgebraElement(self, np.asarray(coeffs, dtype=complex))

    def generator(self, k):
        c = np.zeros(self.dim, complex)
        c[k] = 1.0
        return AlgebraElement(self, c)

    def random_element(self, rng, real=False):
        c = rng.standard_normal(self.dim) + (0 if real else 1j * rng.standard_normal(self.dim))
        if real:
            c = c / self._phase
        return AlgebraElement(self, c)

    def to_json(self):
        f = [[i + 1, j + 1, k + 1, v.real, v.imag]
             for (i, j, k), v in np.ndenumerate(self.f) if v != 0]
        return {
            "name": self.name,
            "dim": self.dim,
            "f": f,
            "compact_flags": self.compact.tolist(),
            "ip": self.ip.real.tolist(),
        }

    def __repr__(self):
        return f"AlgebraBasis({self.name!r}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    basis: AlgebraBasis
    coeffs: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.coeffs)):
            raise AlgebraError("non-finite coefficients")

    def _check(self, other):
        if other.basis is not self.basis:
            raise AlgebraError("elements belong to different bases")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.basis, self.coeffs - other.coeffs)

    def __neg__(self):
        return AlgebraElement(self.basis, -self.coeffs)

    def __mul__(self, scalar):
        return AlgebraElement(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def matrix(self):
        return self.basis.to_matrix(self.coeffs)

    def in_real_form(self, tol=1e-12):
        c = self.basis.real_form_coeffs(self.coeffs)
        return bool(np.max(np.abs(c.imag), initial=0.0) <= tol)

    def norm(self):
        return float(self.basis.norm(self.coeffs))


def bracket(X, Y):
    X._check(Y)
    return AlgebraElement(X.basis, X.basis.bracket_coeffs(X.coeffs, Y.coeffs))


def hermitian_norm(X):
    return X.norm()


@dataclass(frozen=True, eq=False)
class GroupElement:
    matrix: np.ndarray

    def det(self):
        return complex(np.linalg.det(self.matrix))

    def is_unitary(self, tol=1e-12):
        m = self.matrix
        return bool(np.max(np.abs(m @ m.conj().T - np.eye(len(m)))) <= tol)

    def inverse(self):
        return GroupElement(_checked_inv(self.matrix))

    def __matmul__(self, other):
        return GroupElement(self.matrix @ other.matrix)


def _checked_inv(m):
    if np.linalg.cond(m) > COND_GUARD:
        raise AlgebraError("group element is numerically singular")
    return np.linalg.inv(m)


def group_exp(X):
    return GroupElement(scipy.linalg.expm(X.matrix()))


def adjoint(g, X):
    m = g.matrix @ X.matrix() @ _checked_inv(g.matrix)
    return AlgebraElement(X.basis, X.basis.from_matrix(m))


def random_unitary(basis, rng, scale=1.0):
    return group_exp(basis.random_element(rng, real=True) * scale)


# shipped bases ---------------------------------------------------------

H0 = np.array([[1, 0], [0, -1]], dtype=complex)
HPP = np.array([[0, 1], [0, 0]], dtype=complex)
HMM = np.array([[0, 0], [1, 0]], dtype=complex)


def _levi_civita():
    e = np.zeros((3, 3, 3))
    for (a, b, c), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (1, 0, 2): -1, (0, 2, 1): -1, (2, 1, 0): -1}.items():
        e[a, b, c] = s
    return e


def sl2():
    mats = np.array([1j * H0, HPP - HMM, 1j * (HPP + HMM)])
    return AlgebraBasis("sl2", 2 * _levi_civita(), [True, True, True], 8 * np.eye(3), mats)


def u1():
    return AlgebraBasis("u1", np.zeros((1, 1, 1)), [True], np.eye(1), np.array([[[1j]]]))


_SHIPPED = {"u1": u1, "sl2": sl2}
_CACHE: dict = {}


def load_algebra_file(path):
    doc = json.loads(Path(path).read_text())
    try:
        dim = int(doc["dim"])
        f = np.zeros((dim, dim, dim), complex)
        given = set()
        for i, j, k, re, im in doc["f"]:
            i, j, k = int(i) - 1, int(j) - 1, int(k) - 1
            f[i, j, k] = complex(re, im)
            given.add((i, j, k))
        for i, j, k in list(given):
            if (j, i, k) not in given:
                f[j, i, k] = -f[i, j, k]
        mats = None
        if "rep" in doc:
            mats = np.array([[[complex(*e) if isinstance(e, list) else complex(e) for e in row]
                              for row in m] for m in doc["rep"]])
        return AlgebraBasis(doc["name"], f, doc["compact_flags"], doc["ip"], mats)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, AlgebraError):
            raise
        raise AlgebraError(f"malformed algebra file {path}: {exc}") from exc


def get_algebra(selector):
    """``u1``, ``sl2`` or ``file:<path>``."""
    if selector in _SHIPPED:
        if selector not in _CACHE:
            _CACHE[selector] = _SHIPPED[selector]()
        return _CACHE[selector]
    if isinstance(selector, str) and selector.startswith("file:"):
        return load_algebra_file(selector[5:])
    raise AlgebraError(f"unknown algebra {selector!r}")
