"""Reconstruction of an instanton from a prepotential A-- .

The bridge g(x, U) solves H0 g = 0, Hmm g = -A-- g with g(x, I) = e.  It is
built on each fiber SL2(C) over x from two pieces:

* Borel-orbit transport.  Lower Borel orbits are labelled by w = U01/U11.
  In the north chart a representative path is P(w, t) = [[1 + wt, w], [t, 1]]
  and G_N(w, tau) solves dG/ds = -tau A(x, P(w, tau s)) G, G(0) = e, where
  tau = U10 U11.  The south chart uses J P(w', t) with w' = -1/w.
* Gluing.  On |w| = 1 the two transports differ by h(w) = G_N(w, -1/w).  A
  truncated block-Toeplitz solve gives k_N holomorphic inside the circle and
  k_S holomorphic outside with h k_N = k_S, so g = G_N k_N = G_S k_S is a
  single function on the fiber.

All quantities are jets, so derivatives in x and along the fiber flows
propagate exactly through the ODE solves and the linear algebra.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import probe
from .harmonics import ChargedField, GENERATORS
from .jets import Jet, _pad, jet_space, stack
from .ode import Tolerances, integrate

J = np.array([[0, -1], [1, 0]], dtype=complex)
J_INV = np.array([[0, 1], [-1, 0]], dtype=complex)


class ReconstructionError(RuntimeError):
    pass


@dataclass
class BridgeOptions:
    circle_nodes: int = 64
    order: int = 20
    tol: Tolerances = field(default_factory=Tolerances)
    cache_size: int = 32
    chunk: int = 96
    sample_chunk: int = 8192

    def __post_init__(self):
        if self.circle_nodes < 2 * self.order + 2:
            raise ValueError("circle_nodes must exceed 2*order + 1")


def _matrix_from_entries(e00, e01, e10, e11):
    row0 = stack([e00, e01], axis=-1)
    row1 = stack([e10, e11], axis=-1)
    return stack([row0, row1], axis=-2)


def chart_path(w, t, south=False):
    """P(w, t) = [[1 + w t, w], [t, 1]] (north) or J P(w, t) (south)."""
    one = Jet.const(w.space, np.ones(np.broadcast_shapes(w.shape, t.shape), complex))
    wt = w * t
    P = _matrix_from_entries(one + wt, w + 0 * t, t + 0 * w, one)
    return J @ P if south else P


def _horner(coeffs, z):
    """sum_n coeffs[..., n, :, :] z^n with z a scalar jet (...)."""
    N = coeffs.shape[-3] - 1
    out = coeffs[..., N, :, :]
    zz = z[..., None, None]
    for n in range(N - 1, -1, -1):
        out = out * zz + coeffs[..., n, :, :]
    return out


@dataclass
class Fiber:
    """Gluing data of the bridge over a batch of points x."""
    a: Jet            # (X, N+1, d, d) north series coefficients
    b: Jet            # (X, N+1, d, d) south series coefficients
    tail: np.ndarray  # per x, largest |h_n| beyond the truncation order
    gluing_residual: np.ndarray  # per x, max |h k_N - k_S| on the circle


class Bridge:
    """The bridge of a charge -2 field, evaluable on jets."""

    def __init__(self, field, options=None):
        if getattr(field, "charge", -2) != -2:
            raise ReconstructionError("bridge requires a charge -2 field")
        self.field = field
        self.algebra = field.algebra
        self.options = options or BridgeOptions()
        self._cache = OrderedDict()
        self.stats = {"fibers": 0, "transports": 0, "steps": 0, "rejected": 0}

    # transport along Borel orbits -----------------------------------
    def transport(self, xj, w, tau, south):
        """G(w, tau) for jets xj (..., 2, 2n), w and tau (...)."""
        d = self.algebra.matrices.shape[-1]
        batch = np.broadcast_shapes(xj.shape[:-2], w.shape, tau.shape)
        G0 = Jet.const(xj.space, np.broadcast_to(np.eye(d, dtype=complex), batch + (d, d)).copy())
        tau_m = tau[..., None, None]
        field_ = self.field

        def rhs(s, G):
            P = chart_path(w, tau * s, south)
            A = field_.evaluate(xj, P)
            return -((A * tau_m) @ G)

        G, traj = integrate(rhs, G0, 1.0, self.options.tol)
        self.stats["transports"] += 1
        self.stats["steps"] += traj.n_steps
        self.stats["rejected"] += traj.n_rejected
        return G

    # gluing ---------------------------------------------------------
    def fiber(self, xj):
        """Gluing data for xj of shape (X, 2, 2n)."""
        key = (id(xj.space), xj.shape, xj.data.tobytes(), xj.nz.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        fib = self._solve_fiber(xj)
        self._cache[key] = fib
        if len(self._cache) > self.options.cache_size:
            self._cache.popitem(last=False)
        self.stats["fibers"] += 1
        return fib

    def _solve_fiber(self, xj):
        M, N = self.options.circle_nodes, self.options.order
        d = self.algebra.matrices.shape[-1]
        sp = xj.space
        wm = np.exp(2j * np.pi * np.arange(M) / M)
        w = Jet.const(sp, wm)
        tau = Jet.const(sp, -1.0 / wm)
        H = self.transport(xj[:, None], w, tau, False)  # (X, M, d, d)
        X = H.shape[0]

        hn = H.map(lambda a: np.fft.fft(a, axis=2) / M)
        n_idx = np.arange(1, N + 1)
        D = (n_idx[:, None] - n_idx[None, :]) % M
        T = hn.map(lambda a: a[:, :, D].transpose(0, 1, 2, 4, 3, 5).reshape(a.shape[0], X, N * d, N * d))
        rhs = -hn.map(lambda a: a[:, :, n_idx].reshape(a.shape[0], X, N * d, d))
        sol = T.solve(rhs).map(lambda a: a.reshape(a.shape[0], X, N, d, d))
        eye = Jet.const(sp, np.broadcast_to(np.eye(d, dtype=complex), (X, 1, d, d)).copy())
        a_coef = _concat(eye, sol)

        Hinv = H.inv()
        gn = Hinv.map(lambda a: np.fft.fft(a, axis=2) / M)
        r_idx = np.arange(N + 1)
        D2 = (r_idx[None, :] - r_idx[:, None]) % M
        Q = gn.map(lambda a: a[:, :, D2].transpose(0, 1, 2, 4, 3, 5)
                   .reshape(a.shape[0], X, (N + 1) * d, (N + 1) * d))
        e0 = np.zeros((X, (N + 1) * d, d), complex)
        e0[:, :d, :] = np.eye(d)
        b_coef = Q.solve(Jet.const(sp, e0)).map(lambda a: a.reshape(a.shape[0], X, N + 1, d, d))

        # diagnostics on values only
        h0 = hn.value
        tail_idx = [k for k in range(N + 1, M // 2 + 1)] + [M - k for k in range(N + 1, M // 2)]
        tail = np.max(np.abs(h0[:, tail_idx]), axis=(1, 2, 3)) if tail_idx else np.zeros(X)
        kN = np.einsum("xnij,mn->xmij", a_coef.value, wm[:, None] ** np.arange(N + 1)[None, :])
        kS = np.einsum("xnij,mn->xmij", b_coef.value, wm[:, None] ** (-np.arange(N + 1))[None, :])
        glue = np.max(np.abs(H.value @ kN - kS), axis=(1, 2, 3))
        st = self.stats
        st["gluing_max"] = max(st.get("gluing_max", 0.0), float(glue.max(initial=0.0)))
        st["tail_max"] = max(st.get("tail_max", 0.0), float(tail.max(initial=0.0)))
        return Fiber(a_coef, b_coef, tail, glue)

    def _fibers(self, xflat):
        """Fiber data for many points, solved in chunks to bound memory."""
        X, c = xflat.shape[0], self.options.chunk
        if X > 1 and getattr(self.field, "x_independent", False):
            # the gluing data does not see x: solve once and share
            one = self.fiber(xflat[:1])
            rep = lambda j: Jet(j.space, np.broadcast_to(j.data, (j.data.shape[0], X) + j.data.shape[2:]), j.nz)
            return Fiber(rep(one.a), rep(one.b), np.repeat(one.tail, X), np.repeat(one.gluing_residual, X))
        if X <= c:
            return self.fiber(xflat)
        parts = [self.fiber(xflat[k:k + c]) for k in range(0, X, c)]
        cat = lambda js: Jet(js[0].space, np.concatenate([j.data for j in js], axis=1),
                             np.logical_or.reduce([j.nz for j in js]))
        return Fiber(cat([p.a for p in parts]), cat([p.b for p in parts]),
                     np.concatenate([p.tail for p in parts]),
                     np.concatenate([p.gluing_residual for p in parts]))

    # evaluation -----------------------------------------------------
    def g(self, xj, Uj):
        """Bridge values on jets; batch shapes of xj and Uj broadcast."""
        bx, bu = xj.shape[:-2], Uj.shape[:-2]
        B = np.broadcast_shapes(bx, bu)
        X = int(np.prod(bx, dtype=int))
        xflat = xj.reshape((X,) + xj.shape[-2:])
        xidx = np.broadcast_to(np.arange(X).reshape((1,) * (len(B) - len(bx)) + bx), B).ravel()
        U = Uj.map(lambda a: np.broadcast_to(_pad(a, len(B) + 2), (a.shape[0],) + B + (2, 2))) \
            .reshape((-1, 2, 2))
        fib = self._fibers(xflat)
        d = self.algebra.matrices.shape[-1]
        Bt = U.shape[0]
        u0 = U.value
        south = np.abs(u0[:, 0, 1]) > np.abs(u0[:, 1, 1])
        sp = xj.space
        out = np.zeros((sp.ncomp, Bt, d, d), complex)
        nz = np.zeros(sp.ncomp, bool)
        nz[0] = True
        for is_south in (False, True):
            sel = np.nonzero(south == is_south)[0]
            for lo in range(0, sel.size, self.options.sample_chunk):
                idx = sel[lo:lo + self.options.sample_chunk]
                self._eval_chart(U, xflat, xidx, idx, fib, is_south, out, nz)
        return Jet(sp, out, nz).reshape(B + (d, d))

    def _eval_chart(self, U, xflat, xidx, idx, fib, is_south, out, nz):
        """Chart transport times the fiber series for the samples ``idx`` (written into ``out``)."""
        Us = U[idx]
        xs = xflat[xidx[idx]]
        if is_south:
            w = Us[:, 1, 1] / (-Us[:, 0, 1])
            tau = Us[:, 0, 0] * Us[:, 0, 1]
            z = -w
            coef = fib.b[xidx[idx]]
        else:
            w = Us[:, 0, 1] / Us[:, 1, 1]
            tau = Us[:, 1, 0] * Us[:, 1, 1]
            z = w
            coef = fib.a[xidx[idx]]
        G = self.transport(xs, w, tau, is_south)
        res = G @ _horner(coef, z)
        out[:, idx] = res.data
        nz |= res.nz

    def values(self, x, U):
        sp = jet_space(())
        return self.g(Jet.const(sp, np.asarray(x, complex)), Jet.const(sp, np.asarray(U, complex))).value

    def g_and_App(self, xj, Uj):
        """(g, A++) on jets, sharing one set of solves."""
        k = xj.space.nvars
        sp, xe, Ue = probe.extend(xj, Uj, [("flow", ["Hpp"], 1)])
        ge = self.g(xe, Ue)
        R = ge.restrict(k)
        Dg = ge.derivative(k)
        App = -(Dg @ R.inv())
        return R.project(xj.space), App.project(xj.space)


def _concat(first, rest):
    return Jet(rest.space, np.concatenate([first.data, rest.data], axis=2), first.nz | rest.nz)


class SecondPrepotential(ChargedField):
    """A++ = -(Hpp g) g^{-1}; charge +2."""

    charge = 2

    def __init__(self, bridge):
        self.bridge = bridge
        self.algebra = bridge.algebra

    def evaluate(self, xj, Uj):
        return self.bridge.g_and_App(xj, Uj)[1]


class PlusPotential(ChargedField):
    """A_{+a} = -e_{-a} A++ = -u-^i d A++ / d x^{ia}; charge +1."""

    charge = 1

    def __init__(self, App, a):
        self.App = App
        self.a = a
        self.algebra = App.algebra

    def evaluate(self, xj, Uj):
        k = xj.space.nvars
        sp, xe, Ue = probe.extend(xj, Uj, [("x", [(0, self.a), (1, self.a)], 1)])
        val = self.App.evaluate(xe, Ue)
        um = Ue[..., :, 1]
        out = None
        for i, v in ((0, 1), (1, 0)):
            # u-^i = eps^{ij} u-_j: u-^1 = u-_2, u-^2 = -u-_1
            coef = um[..., v] * (1.0 if i == 0 else -1.0)
            term = coef[..., None, None] * val.derivative(k + i)
            out = term if out is None else out + term
        return (-out).project(xj.space)


class MirrorField(ChargedField):
    """P(V) = -A++(x, V J^{-1}): charge -2 data whose bridge recovers A--."""

    charge = -2

    def __init__(self, App):
        self.App = App
        self.algebra = App.algebra

    def evaluate(self, xj, Vj):
        return -self.App.evaluate(xj, Vj @ J_INV)


class RecoveredPrepotential(ChargedField):
    """B--(U) = -A^P++(x, U J) for the mirror data P of a given A++."""

    charge = -2

    def __init__(self, App, options=None):
        self.App = App
        self.algebra = App.algebra
        self.mirror_bridge = Bridge(MirrorField(App), options)
        self._App_mirror = SecondPrepotential(self.mirror_bridge)

    def evaluate(self, xj, Uj):
        return -self._App_mirror.evaluate(xj, Uj @ J)


@dataclass
class GaugeData:
    prepotential: ChargedField
    bridge: Bridge
    second_prepotential: SecondPrepotential
    plus_components: list

    @property
    def algebra(self):
        return self.prepotential.algebra


def reconstruct(A, options=None):
    """Assemble the analytic-gauge record for a prepotential."""
    bridge = Bridge(A, options)
    App = SecondPrepotential(bridge)
    n2 = 2
    return GaugeData(A, bridge, App, [PlusPotential(App, a) for a in range(n2)])


def second_prepotential(A, sample_set=None, options=None):
    return SecondPrepotential(Bridge(A, options))


def plus_potential(App, n=1):
    return [PlusPotential(App, a) for a in range(2 * n)]


# single-path bridge with dense output ---------------------------------

@dataclass
class BridgeSolution:
    base_point: tuple
    t_end: complex
    trajectory: object
    tolerances: Tolerances
    field: ChargedField

    def g(self, t):
        s = (t / self.t_end).real if self.t_end != 0 else 0.0
        return self.trajectory(s).value

    def det_residual(self):
        return float(max(abs(np.linalg.det(y.value) - 1) for y in self.trajectory.y))

    def invariant_residual(self, t=None):
        """|Ad_{g^-1} A-- + g^{-1} (Hmm g)| at flow time t, Hmm g by AD through a re-solve."""
        t = self.t_end if t is None else t
        x, U = self.base_point
        sp = jet_space(((1, 1),))
        tj = Jet.variable(sp, 0, t)
        g = _path_solve(self.field, x, U, tj, self.tolerances)
        gv = g.value
        dg = g.data[sp.var(0)]
        Ut = U @ np.array([[1, 0], [t, 1]])
        A = self.field.values(x, Ut)
        gi = np.linalg.inv(gv)
        return float(self.field.algebra.matrix_norm(gi @ A @ gv + gi @ dg))


def _path_solve(field_, x, U, t_end, tol, dense=False):
    sp = t_end.space
    d = field_.algebra.matrices.shape[-1]
    xj = Jet.const(sp, np.asarray(x, complex))
    Uj = Jet.const(sp, np.asarray(U, complex))
    hmm = GENERATORS["Hmm"]
    eye2 = np.eye(2)

    def rhs(s, G):
        P = Uj @ (eye2 + (t_end * s)[..., None, None] * hmm)
        return -((field_.evaluate(xj, P) * t_end[..., None, None]) @ G)

    G0 = Jet.const(sp, np.eye(d, dtype=complex))
    out, traj = integrate(rhs, G0, 1.0, tol, dense=dense)
    return (out, traj) if dense else out


def solve_bridge(A, x, U, t_end, tol=None):
    """Integrate dg/dt = -A(x, U exp(t Hmm)) g from 0 to t_end along a straight segment."""
    tol = tol or Tolerances()
    sp = jet_space(())
    tj = Jet.const(sp, complex(t_end))
    _, traj = _path_solve(A, np.asarray(x, complex), np.asarray(U, complex), tj, tol, dense=True)
    return BridgeSolution((np.asarray(x, complex), np.asarray(U, complex)), complex(t_end), traj, tol, A)


def transport_along(A, x, U, increments, tol=None):
    """Product of Hmm-flow transports along successive segments from U."""
    tol = tol or Tolerances()
    d = A.algebra.matrices.shape[-1]
    g = np.eye(d, dtype=complex)
    Ucur = np.asarray(U, complex)
    for dt in increments:
        sol = solve_bridge(A, x, Ucur, dt, tol)
        g = sol.g(dt) @ g
        Ucur = Ucur @ np.array([[1, 0], [dt, 1]])
    return g


# curvature and central gauge -----------------------------------------

def x_items(n=1):
    return [(i, a) for i in range(2) for a in range(2 * n)]


def hessian_from_jet(jet, n=1, first=0):
    """Second x-derivatives d_{ia} d_{jb} from a jet seeded with x_items(n) at ``first``."""
    items = x_items(n)
    m = len(items)
    sp = jet.space
    out = np.zeros((2, 2 * n, 2, 2 * n) + jet.shape, complex)
    for p in range(m):
        for q in range(m):
            mono = [0] * sp.nvars
            mono[first + p] += 1
            mono[first + q] += 1
            c = jet.coeff(mono)
            if p == q:
                c = 2 * c
            (i, a), (j, b) = items[p], items[q]
            out[i, a, j, b] = c
    return out


def gradient_from_jet(jet, n=1, first=0):
    items = x_items(n)
    out = np.zeros((2, 2 * n) + jet.shape, complex)
    for p, (i, a) in enumerate(items):
        out[i, a] = jet.data[jet.space.var(first + p)]
    return out


@dataclass
class CurvatureSample:
    x: np.ndarray
    U: np.ndarray
    F_pm: np.ndarray          # (..., 2n, 2n, d, d): F_{+a|-b}
    F_central: object = None

    def symmetry_residual(self, algebra):
        diff = self.F_pm - np.swapaxes(self.F_pm, -3, -4)
        return algebra.matrix_norm(diff)


def _um_raised(U):
    U = np.asarray(U)
    return np.stack([U[..., 1, 1], -U[..., 0, 1]], axis=-1)


def _frame_jets(jet, m, order=2):
    """First and second e_- derivatives from a jet seeded with frame items ("-", a)."""
    sp = jet.space
    d1 = np.stack([jet.data[sp.var(a)] if jet.nz[sp.var(a)] else np.zeros(jet.shape, complex)
                   for a in range(m)], axis=-3)
    if order < 2:
        return d1, None
    d2 = np.zeros(jet.shape[:-2] + (m, m) + jet.shape[-2:], complex)
    for a in range(m):
        for b in range(m):
            mono = [0] * sp.nvars
            mono[a] += 1
            mono[b] += 1
            d2[..., a, b, :, :] = jet.coeff(mono) * (2 if a == b else 1)
    return d1, d2


def curvature(App, x, U, n=1):
    """F_{+a|-b} = e_{-b} e_{-a} A++ from exact second frame derivatives.

    x (..., 2, 2n) and U (..., 2, 2) broadcast.
    """
    m = 2 * n
    sp, xj, Uj = probe.seed(x, U, [("frame", [("-", a) for a in range(m)], 2)])
    val = App.evaluate(xj, Uj)
    _, F = _frame_jets(val, m)
    return CurvatureSample(np.asarray(x), np.asarray(U), F)


def sample_fields(Gd, x, U, n=1):
    """g, A++, A_{+a} (..., 2n, d, d) and F_{+a|-b} at (x, U) from one set of solves."""
    m = 2 * n
    sp, xj, Uj = probe.seed(x, U, [("frame", [("-", a) for a in range(m)], 2)])
    g, App = Gd.bridge.g_and_App(xj, Uj)
    d1, d2 = _frame_jets(App, m)
    return {"g": g.value, "App": App.value, "Aplus": -d1, "F_pm": d2}


@dataclass
class CentralExtraction:
    A_central: np.ndarray      # (2, 2n, d, d) Haar mean of the per-node values
    F_central: np.ndarray      # (2, 2n, 2, 2n, d, d)
    A_defect: float
    F_defect: float
    A_nodes: np.ndarray
    F_nodes: np.ndarray
    g_nodes: np.ndarray
    F_pm_nodes: np.ndarray
    nodes: np.ndarray

    def two_form(self, algebra):
        from .flatspace import TwoForm
        return TwoForm(algebra.from_matrix(self.F_central, check=False), algebra)


def analytic_jets(Gd, x, U, n=1, order=2):
    """g and A++ jets seeded with all x-directions up to ``order``."""
    sp, xj, Uj = probe.seed(x, U, [("x", x_items(n), order)])
    g, App = Gd.bridge.g_and_App(xj, Uj)
    return g, App


def central_from_jets(g, App, U, n=1):
    """Per-node central potential and curvature from second-order x-jets."""
    gv = g.value
    gi = np.linalg.inv(gv)
    dg = gradient_from_jet(g, n)           # (2, 2n, ..., d, d)
    dApp = gradient_from_jet(App, n)
    H = hessian_from_jet(App, n)
    Ub = np.broadcast_to(U, gv.shape[:-2] + (2, 2))
    um = _um_raised(Ub)
    Aplus = -np.einsum("...i,ia...kl->a...kl", um, dApp)     # (2n, ..., d, d)
    S = np.einsum("...i,...j,iajb...kl->...abkl", um, um, H)  # (..., 2n, 2n, d, d)
    umin = Ub[..., :, 1]                                   # u-_i (lower)
    Ac = np.einsum("...km,ia...mn->...iakn", gi, dg)
    adj = np.einsum("...km,a...mn,...nl->...akl", gi, Aplus, gv)
    Ac = Ac - np.einsum("...i,...akl->...iakl", umin, adj)
    from .harmonics import EPS_DOWN
    Sg = np.einsum("...km,...abmn,...nl->...abkl", gi, S, gv)
    Fc = -np.einsum("ij,...abkl->...iajbkl", EPS_DOWN, Sg)
    return Ac, Fc, S


def extract_central(Gd, x, grid, n=1):
    """Central-gauge potential and curvature at x by Haar projection."""
    U = grid.nodes
    g, App = analytic_jets(Gd, np.asarray(x)[None], U, n)
    Ac, Fc, S = central_from_jets(g, App, U, n)
    w = grid.weights
    Am = np.tensordot(w, Ac, axes=([0], [0]))
    Fm = np.tensordot(w, Fc, axes=([0], [0]))
    alg = Gd.algebra
    A_def = float(np.max(alg.matrix_norm(Ac - Am), initial=0.0))
    F_def = float(np.max(alg.matrix_norm(Fc - Fm), initial=0.0))
    return CentralExtraction(Am, Fm, A_def, F_def, Ac, Fc, g.value, S, U)


def central_at_identity(Gd, xs, n=1):
    """Central potential and curvature at U = I for a batch of points.

    There g(x, I) = e and e_{-a} = d/dx^{0a}, so A_{ia} = u-_i e_{-a} A++ and
    F_{ia,jb} = -eps_ij e_{-b} e_{-a} A++; only frame jets are needed.
    """
    from .harmonics import EPS_DOWN
    xs = np.asarray(xs)
    U = np.broadcast_to(np.eye(2, dtype=complex), xs.shape[:-2] + (2, 2))
    m = 2 * n
    sp, xj, Uj = probe.seed(xs, U, [("frame", [("-", a) for a in range(m)], 2)])
    App = Gd.second_prepotential.evaluate(xj, Uj)
    first = np.stack([App.data[sp.var(a)] for a in range(m)], axis=-3)      # (..., 2n, d, d)
    S = np.zeros(App.shape[:-2] + (m, m) + App.shape[-2:], complex)
    for a in range(m):
        for b in range(m):
            mono = [0] * m
            mono[a] += 1
            mono[b] += 1
            S[..., a, b, :, :] = App.coeff(mono) * (2 if a == b else 1)
    Ac = np.stack([np.zeros_like(first), first], axis=-4)
    Fc = -np.einsum("ij,...abkl->...iajbkl", EPS_DOWN, S)
    return Ac, Fc
