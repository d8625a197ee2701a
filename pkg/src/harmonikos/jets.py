"""Truncated multivariate Taylor arithmetic ("jets") over numpy arrays.

A jet carries every Taylor coefficient of a quantity in a handful of
infinitesimal parameters eps_1..eps_m, truncated per group of parameters
at a total degree.  Data has shape ``(ncomp, *shape)``; component 0 is the
value.  A boolean mask ``nz`` records which components may be nonzero so
products skip structural zeros.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


def _group_monomials(nvars, max_degree):
    out = []
    for total in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), total):
            m = [0] * nvars
            for v in combo:
                m[v] += 1
            out.append(tuple(m))
    return out


class JetSpace:
    """The set of monomials retained by a family of truncation groups.

    ``groups`` is a sequence of ``(nvars, max_degree)`` pairs.  Variables are
    numbered consecutively across groups.
    """

    def __init__(self, groups):
        self.groups = tuple((int(n), int(d)) for n, d in groups)
        self.nvars = sum(n for n, _ in self.groups)
        per = [_group_monomials(n, d) for n, d in self.groups]
        monos = [sum(parts, ()) for parts in itertools.product(*per)]
        monos.sort(key=lambda m: (sum(m), tuple(-v for v in m)))
        self.monomials = monos
        self.ncomp = len(monos)
        self.index = {m: k for k, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])

        pairs = []
        for s, ms in enumerate(monos):
            for t, mt in enumerate(monos):
                r = self.index.get(tuple(a + b for a, b in zip(ms, mt)))
                if r is not None:
                    pairs.append((s, t, r))
        self.pairs = pairs
        # vectorised product tables: for fixed s the map t -> r is injective
        by_s = [([], []) for _ in range(self.ncomp)]
        by_t = [([], []) for _ in range(self.ncomp)]
        for s, t, r in pairs:
            by_s[s][0].append(t)
            by_s[s][1].append(r)
            by_t[t][0].append(s)
            by_t[t][1].append(r)
        self.by_s = [(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) for a, b in by_s]
        self.by_t = [(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) for a, b in by_t]
        # pairs grouped by output, excluding those with s == 0 (used by inverses)
        self.by_out = [[] for _ in range(self.ncomp)]
        for s, t, r in pairs:
            if s != 0:
                self.by_out[r].append((s, t))

    def __repr__(self):
        return f"JetSpace({list(self.groups)}, ncomp={self.ncomp})"

    def var(self, k):
        """Component index of the monomial eps_k."""
        m = [0] * self.nvars
        m[k] = 1
        return self.index[tuple(m)]

    def extend(self, nvars=1, max_degree=1):
        return jet_space(self.groups + ((nvars, max_degree),))


@lru_cache(maxsize=None)
def jet_space(groups):
    return JetSpace(groups)


@lru_cache(maxsize=None)
def _embedding(parent, child):
    """Indices in ``child`` of the monomials of ``parent`` (child extends parent)."""
    pad = (0,) * (child.nvars - parent.nvars)
    return np.array([child.index[m + pad] for m in parent.monomials])


@lru_cache(maxsize=None)
def _shift_table(space, k):
    """Pairs (dst, src) with mono[src] = mono[dst] + e_k and mono[dst]_k = 0."""
    dst, src = [], []
    for d, m in enumerate(space.monomials):
        if m[k]:
            continue
        mm = list(m)
        mm[k] += 1
        s = space.index.get(tuple(mm))
        if s is not None:
            dst.append(d)
            src.append(s)
    return np.array(dst, dtype=np.int64), np.array(src, dtype=np.int64)


@lru_cache(maxsize=None)
def _free_of(space, k):
    return np.array([m[k] == 0 for m in space.monomials])


def _matmul(a, b):
    """np.matmul, with an unrolled kernel for stacks of 2x2 matrices (much faster)."""
    if a.shape[-2:] != (2, 2) or b.shape[-2:] != (2, 2):
        return np.matmul(a, b)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), np.result_type(a, b))
    for k in (0, 1):
        out[..., :, k] = a[..., :, 0] * b[..., None, 0, k] + a[..., :, 1] * b[..., None, 1, k]
    return out


def _pad(data, nd):
    """Insert axes after the component axis so trailing shape has ``nd`` dims."""
    extra = nd - (data.ndim - 1)
    if extra <= 0:
        return data
    return data.reshape((data.shape[0],) + (1,) * extra + data.shape[1:])


class Jet:
    __slots__ = ("space", "data", "nz")
    __array_ufunc__ = None

    def __init__(self, space, data, nz=None):
        self.space = space
        self.data = data
        if nz is None:
            nz = np.array([np.any(d != 0) for d in data]) if data.size else np.zeros(len(data), bool)
            nz[0] = True
        self.nz = nz

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, space, value):
        value = np.asarray(value)
        data = np.zeros((space.ncomp,) + value.shape, dtype=np.result_type(value, complex))
        data[0] = value
        nz = np.zeros(space.ncomp, bool)
        nz[0] = True
        return cls(space, data, nz)

    @classmethod
    def variable(cls, space, k, value=0.0):
        j = cls.const(space, value)
        c = space.var(k)
        j.data[c] = 1.0
        j.nz[c] = True
        return j

    def _wrap(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets from different spaces")
            return other
        return Jet.const(self.space, other)

    # shape helpers ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape[1:]

    @property
    def value(self):
        return self.data[0]

    def coeff(self, monomial):
        return self.data[self.space.index[tuple(monomial)]]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.data[(slice(None),) + idx], self.nz)

    def map(self, fn):
        """Apply a linear map acting on all array axes; axis 0 indexes components."""
        return Jet(self.space, fn(self.data), self.nz)

    def _sparse_map(self, fn):
        # like map, but only touches the components flagged in nz
        idx = np.flatnonzero(self.nz)
        if len(idx) == len(self.nz):
            return Jet(self.space, fn(self.data), self.nz)
        part = fn(self.data[idx])
        out = np.zeros((len(self.nz),) + part.shape[1:], part.dtype)
        out[idx] = part
        return Jet(self.space, out, self.nz.copy())

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self.map(lambda d: d.reshape((d.shape[0],) + tuple(shape)))

    def transpose_last(self):
        return self.map(lambda d: np.swapaxes(d, -1, -2))

    def conj_transpose_value(self):
        return np.conj(np.swapaxes(self.value, -1, -2))

    def sum(self, axis):
        ax = axis + 1 if axis >= 0 else axis
        return self.map(lambda d: d.sum(axis=ax))

    def broadcast_to(self, shape):
        return self.map(lambda d: np.broadcast_to(d, (d.shape[0],) + tuple(shape)))

    def copy(self):
        return Jet(self.space, self.data.copy(), self.nz.copy())

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            o = self._wrap(other)
            nd = max(len(self.shape), len(o.shape))
            a, b = _pad(self.data, nd), _pad(o.data, nd)
            nz = self.nz | o.nz
            if nz.all():
                return Jet(self.space, a + b, nz)
            idx = np.flatnonzero(nz)
            part = a[idx] + b[idx]
            out = np.zeros((len(nz),) + part.shape[1:], part.dtype)
            out[idx] = part
            return Jet(self.space, out, nz)
        other = np.asarray(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        data = np.array(np.broadcast_to(_pad(self.data, len(shape)), (self.space.ncomp,) + shape),
                        dtype=np.result_type(self.data, other, complex))
        data[0] += other
        return Jet(self.space, data, self.nz)

    __radd__ = __add__

    def __neg__(self):
        return self._sparse_map(np.negative)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _product(self, other, op):
        a, b = self.data, other.data
        nd = max(a.ndim, b.ndim) - 1
        a, b = _pad(a, nd), _pad(b, nd)
        na, nb = self.nz, other.nz
        v0 = op(a[0], b[0])
        sp = self.space
        out = np.zeros((sp.ncomp,) + v0.shape, dtype=v0.dtype)
        nz = np.zeros(sp.ncomp, bool)
        if np.count_nonzero(na) <= np.count_nonzero(nb):
            for s in np.flatnonzero(na):
                ts, rs = sp.by_s[s]
                m = nb[ts]
                if not m.any():
                    continue
                ts, rs = ts[m], rs[m]
                out[rs] += op(a[s][None], b[ts])
                nz[rs] = True
        else:
            for t in np.flatnonzero(nb):
                ss, rs = sp.by_t[t]
                m = na[ss]
                if not m.any():
                    continue
                ss, rs = ss[m], rs[m]
                out[rs] += op(a[ss], b[t][None])
                nz[rs] = True
        nz[0] = True
        return Jet(sp, out, nz)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return self._product(self._wrap(other), np.multiply)
        other = np.asarray(other)
        return self._sparse_map(lambda d: _pad(d, other.ndim) * other)

    def __rmul__(self, other):
        if isinstance(other, Jet):
            return other._product(self, np.multiply)
        other = np.asarray(other)
        return self._sparse_map(lambda d: other * _pad(d, other.ndim))

    def __matmul__(self, other):
        if isinstance(other, Jet):
            return self._product(self._wrap(other), _matmul)
        other = np.asarray(other)
        return self._sparse_map(lambda d: d @ other)

    def __rmatmul__(self, other):
        other = np.asarray(other)
        return self._sparse_map(lambda d: other @ d)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other)
        return self._sparse_map(lambda d: _pad(d, other.ndim) / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            return self.reciprocal() ** (-n)
        out = Jet.const(self.space, np.ones(self.shape, dtype=self.data.dtype))
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def _recursive_inverse(self, x0, apply_left):
        """Shared recursion x_r = -x0 * sum_{s>0} a_s x_t for inverses."""
        sp = self.space
        out = np.zeros((sp.ncomp,) + x0.shape, dtype=np.result_type(x0, self.data))
        out[0] = x0
        nz = np.zeros(sp.ncomp, bool)
        nz[0] = True
        for r in range(1, sp.ncomp):
            acc = None
            for s, t in sp.by_out[r]:
                if self.nz[s] and nz[t]:
                    term = apply_left(self.data[s], out[t])
                    acc = term if acc is None else acc + term
            if acc is not None:
                out[r] = -apply_left(x0, acc)
                nz[r] = True
        return Jet(sp, out, nz)

    def reciprocal(self):
        return self._recursive_inverse(1.0 / self.data[0], np.multiply)

    def inv(self):
        """Matrix inverse over the last two axes."""
        return self._recursive_inverse(np.linalg.inv(self.data[0]), _matmul)

    def solve(self, rhs):
        """Solve self @ X = rhs (matrices over the last two axes)."""
        rhs = self._wrap(rhs)
        sp = self.space
        a0inv = np.linalg.inv(self.data[0])
        out = np.zeros((sp.ncomp,) + (a0inv @ rhs.data[0]).shape,
                       dtype=np.result_type(a0inv, rhs.data))
        nz = np.zeros(sp.ncomp, bool)
        for r in range(sp.ncomp):
            acc = rhs.data[r] if rhs.nz[r] else None
            for s, t in sp.by_out[r]:
                if self.nz[s] and nz[t]:
                    term = self.data[s] @ out[t]
                    acc = -term if acc is None else acc - term
            if acc is not None:
                out[r] = a0inv @ acc
                nz[r] = True
        return Jet(sp, out, nz)

    # derivatives with respect to the infinitesimal parameters ----------
    def restrict(self, k):
        """Drop every term involving eps_k."""
        free = _free_of(self.space, k)
        return Jet(self.space, self.data * free.reshape((-1,) + (1,) * len(self.shape)),
                   self.nz & free)

    def derivative(self, k):
        """d/d eps_k at eps_k = 0, as a jet free of eps_k."""
        dst, src = _shift_table(self.space, k)
        data = np.zeros_like(self.data)
        data[dst] = self.data[src]
        nz = np.zeros(self.space.ncomp, bool)
        nz[dst] = self.nz[src]
        nz[0] = True
        return Jet(self.space, data, nz)

    def embed(self, child):
        idx = _embedding(self.space, child)
        data = np.zeros((child.ncomp,) + self.shape, dtype=self.data.dtype)
        data[idx] = self.data
        nz = np.zeros(child.ncomp, bool)
        nz[idx] = self.nz
        return Jet(child, data, nz)

    def project(self, parent):
        """Inverse of ``embed``; terms in the extra variables are dropped."""
        idx = _embedding(parent, self.space)
        return Jet(parent, self.data[idx], self.nz[idx].copy())

    def taylor_coefficient(self, monomial):
        return self.coeff(monomial)

    def abs_max(self):
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def as_jet(space, value):
    return value if isinstance(value, Jet) else Jet.const(space, value)


def expm_nilpotent(X, order=None):
    """exp of a matrix jet whose value part is zero (a pure infinitesimal)."""
    if order is None:
        order = int(X.space.degree.max())
    n = X.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=complex), X.shape)
    out = Jet.const(X.space, eye)
    term = out
    for k in range(1, order + 1):
        term = (term @ X) / k
        out = out + term
    return out


def stack(jets, axis=0):
    space = jets[0].space
    ax = axis + 1 if axis >= 0 else axis
    nz = np.logical_or.reduce([j.nz for j in jets])
    if nz.all():
        return Jet(space, np.stack([j.data for j in jets], axis=ax), nz)
    idx = np.flatnonzero(nz)
    part = np.stack([j.data[idx] for j in jets], axis=ax)
    out = np.zeros((len(nz),) + part.shape[1:], part.dtype)
    out[idx] = part
    return Jet(space, out, nz)


def concatenate(jets, axis=0):
    space = jets[0].space
    ax = axis + 1 if axis >= 0 else axis
    nz = np.logical_or.reduce([j.nz for j in jets])
    return Jet(space, np.concatenate([j.data for j in jets], axis=ax), nz)


def einsum(spec, jet, *consts):
    """Linear contraction of one jet with constant arrays."""
    lhs, rhs = spec.split("->")
    terms = lhs.split(",")
    letters = "".join(sorted(set(spec) - set(",->.")))
    free = next(c for c in "ZYXWVUTSRQ" if c not in letters)
    new = free + terms[0] + "," + ",".join(terms[1:]) + "->" + free + rhs
    if not terms[1:]:
        new = free + terms[0] + "->" + free + rhs
    return jet.map(lambda d: np.einsum(new, d, *consts))
