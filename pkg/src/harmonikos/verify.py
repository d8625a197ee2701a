"""Residual suites for the identities satisfied by a reconstructed instanton."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from itertools import product

import numpy as np

from . import probe
from .flatspace import asd_residual, decompose_two_form, real_jacobian, TwoForm
from .harmonics import raise_index, random_sl2
from .jets import Jet
from .reconstruct import central_at_identity, curvature, x_items
from .residuals import ResidualReport

__all__ = [
    "ResidualReport", "TOL_PROFILES", "tolerance_profile", "check_analytic_gauge",
    "leznov_residual", "check_lift_conditions", "asd_suite", "check_asd", "central_sampler",
    "check_bianchi_yangmills", "bianchi_yangmills_exact", "NormalizationFrame",
    "solve_normalization_frame", "check_normalized",
]

TOL_PROFILES = {
    "default": {"algebraic": 1e-8, "symmetry": 1e-9, "ode": 1e-7, "bianchi": 1e-6, "fd": 1e-4, "drift": 0.05},
    "strict": {"algebraic": 1e-10, "symmetry": 1e-11, "ode": 1e-9, "bianchi": 1e-8, "fd": 1e-5, "drift": 0.02},
    "loose": {"algebraic": 1e-6, "symmetry": 1e-7, "ode": 1e-5, "bianchi": 1e-4, "fd": 1e-3, "drift": 0.1},
}


def tolerance_profile(name="default"):
    if isinstance(name, dict):
        return {**TOL_PROFILES["default"], **name}
    try:
        return dict(TOL_PROFILES[name])
    except KeyError:
        raise ValueError(f"unknown tolerance profile {name!r}") from None


# derivative helpers --------------------------------------------------

def _d(f, kind, item, x, U):
    """V f for one probe direction; matrices with the batch shape of (x, U)."""
    sp, xj, Uj = probe.seed(x, U, [(kind, [item], 1)])
    out = f.evaluate(xj, Uj)
    v = sp.var(0)
    return out.data[v] if out.nz[v] else np.zeros_like(out.value)


def _flow(f, gen, x, U):
    return _d(f, "flow", gen, x, U)


def _frame(f, sign, a, x, U):
    return _d(f, "frame", (sign, a), x, U)


def _comm(a, b):
    return a @ b - b @ a


def _n_of(x):
    return np.asarray(x).shape[-1] // 2


# analytic gauge --------------------------------------------------------

def check_analytic_gauge(Gd, x, U, tol=1e-8):
    """A(H0) = A(e_-a) = 0 (by representation) and the charges of A-- and A++."""
    alg = Gd.algebra
    rep = ResidualReport("analytic_gauge")
    x, U = np.asarray(x), np.asarray(U)
    batch = np.broadcast_shapes(x.shape[:-2], U.shape[:-2])
    rep.add("A0", np.zeros(batch), tol, exact=True)
    rep.add("A_minus_a", np.zeros(batch), tol, exact=True)
    Amm, App = Gd.prepotential, Gd.second_prepotential
    r = _flow(Amm, "H0", x, U) + 2 * Amm.values(x, U)
    rep.add("charge_Amm", alg.matrix_norm(r), tol)
    r = _flow(App, "H0", x, U) - 2 * App.values(x, U)
    rep.add("charge_App", alg.matrix_norm(r), tol)
    return rep


def leznov_residual(App, Amm, x, U, tol=1e-8):
    """|| Hpp A-- - Hmm A++ + [A++, A--] || over the samples."""
    alg = Amm.algebra
    a, b = App.values(x, U), Amm.values(x, U)
    r = _flow(Amm, "Hpp", x, U) - _flow(App, "Hmm", x, U) + _comm(a, b)
    rep = ResidualReport("leznov")
    rep.add("leznov", alg.matrix_norm(r), tol)
    return rep


def check_lift_conditions(Gd, x, U, tol=1e-7):
    """Components F'(V, W) = V A(W) - W A(V) + [A(V), A(W)] - A([V, W]) that must vanish.

    Only non-trivial components are listed; F'(Hpp, e_-a) vanishes by the
    definition of A_{+a} and is reported as exact.
    """
    alg = Gd.algebra
    x, U = np.asarray(x), np.asarray(U)
    n = _n_of(x)
    Amm, App = Gd.prepotential, Gd.second_prepotential
    Ap = Gd.plus_components
    vm, vp = Amm.values(x, U), App.values(x, U)
    vpa = [f.values(x, U) for f in Ap]
    nrm = alg.matrix_norm
    rep = ResidualReport("lift")
    batch = vm.shape[:-2]

    rep.add("F_Hpp_Hmm", nrm(_flow(Amm, "Hpp", x, U) - _flow(App, "Hmm", x, U) + _comm(vp, vm)), tol)
    rep.add("F_H0_Hpp", nrm(_flow(App, "H0", x, U) - 2 * vp), tol)
    rep.add("F_H0_Hmm", nrm(_flow(Amm, "H0", x, U) + 2 * vm), tol)
    h0p, hmp, hpp, emm, epa = [], [], [], [], []
    for a in range(2 * n):
        h0p.append(nrm(_flow(Ap[a], "H0", x, U) - vpa[a]))
        emm.append(nrm(_frame(Amm, "-", a, x, U)))
        hmp.append(nrm(_flow(Ap[a], "Hmm", x, U) - _frame(Amm, "+", a, x, U) + _comm(vm, vpa[a])))
        hpp.append(nrm(_flow(Ap[a], "Hpp", x, U) - _frame(App, "+", a, x, U) + _comm(vp, vpa[a])))
        for b in range(a + 1, 2 * n):
            epa.append(nrm(_frame(Ap[b], "+", a, x, U) - _frame(Ap[a], "+", b, x, U)
                           + _comm(vpa[a], vpa[b])))
    rep.add("F_H0_e+", np.stack(h0p), tol)
    rep.add("F_Hmm_e-", np.stack(emm), tol)
    rep.add("F_Hpp_e-", np.zeros(batch), tol, exact=True)
    rep.add("F_H0_e-", np.zeros(batch), tol, exact=True)
    rep.add("F_Hmm_e+", np.stack(hmp), tol)
    rep.add("F_Hpp_e+", np.stack(hpp), tol)
    rep.add("F_e+_e+", np.stack(epa), tol)
    return rep


def asd_suite(F_pm, U, algebra, tol=1e-8, sym_tol=1e-9, U_test=None):
    """Self-duality checks for the two-form rebuilt from F_{+a|-b} samples.

    The central two-form -eps_ij S_ab (S = F_{+a|-b}) is tested for its frame
    components at the sample harmonics, or at every harmonic of ``U_test``
    (K, 2, 2) when given; also the size of its non-eps part relative to |F|
    and the symmetry of S.
    """
    from .flatspace import from_frame_curvature
    F_pm = np.asarray(F_pm)
    S = algebra.from_matrix(F_pm, check=False)
    F = TwoForm(from_frame_curvature(S), algebra)
    if U_test is None:
        rep = asd_residual(F, np.broadcast_to(U, S.shape[:-3] + (2, 2)), tol)
    else:
        Ft = TwoForm(F.F[..., None, :, :, :, :, :], algebra)
        rep = asd_residual(Ft, np.asarray(U_test), tol)
    F1, F2 = decompose_two_form(F)
    scale = F.norm()
    per = F2.norm_entries().reshape(F2.F.shape[:-5] + (-1,)).max(axis=-1)
    rep.add("F2_relative", per / scale if scale > 0 else per, tol)
    rep.add("symmetry", algebra.matrix_norm(F_pm - np.swapaxes(F_pm, -3, -4)), sym_tol)
    rep.meta = {"norm_F": scale}
    return rep


def check_asd(App, x, U, tol=1e-8, sym_tol=1e-9, U_test=None):
    """asd_suite on the curvature of A++ at the samples."""
    cs = curvature(App, x, U, _n_of(x))
    return asd_suite(cs.F_pm, U, App.algebra, tol, sym_tol, U_test)


# Bianchi and Yang-Mills ------------------------------------------------

def central_sampler(Gd, n=1):
    """Function y (..., 4n) -> (A_mu (..., 4n, d, d), F_munu (..., 4n, 4n, d, d)).

    Uses the frame U = I, where the bridge is the identity, so the central
    potential is read off without a Haar projection.
    """
    from .flatspace import real_to_x
    M = real_jacobian(n).reshape(4 * n, 2, 2 * n)

    def sample(y):
        y = np.asarray(y, float)
        Ac, Fc = central_at_identity(Gd, real_to_x(y), n)
        A = np.einsum("mia,...iakl->...mkl", M, Ac)
        F = np.einsum("mia,njb,...iajbkl->...mnkl", M, M, Fc)
        return A, F

    sample.algebra = Gd.algebra
    return sample


def _bianchi_ym(A, F, dF, alg):
    """Residual norms from A_mu, F_munu and dF[lam, mu, nu] = d_lam F_munu (per site)."""
    D = dF + np.einsum("...lkm,...nrmq->...lnrkq", A, F) - np.einsum("...nrkm,...lmq->...lnrkq", F, A)
    dim = A.shape[-3]
    bianchi = []
    for l, m, k in ((l, m, k) for l in range(dim) for m in range(l + 1, dim) for k in range(m + 1, dim)):
        bianchi.append(alg.matrix_norm(D[..., l, m, k, :, :] + D[..., m, k, l, :, :] + D[..., k, l, m, :, :]))
    ym = np.einsum("...mmnkl->...nkl", D)
    bianchi = np.stack(bianchi, axis=-1).max(axis=-1) if bianchi else np.zeros(A.shape[:-3])
    return bianchi, alg.matrix_norm(ym).max(axis=-1)


_W4 = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


def _star_points(sites, h):
    """Sites plus the 4th-order star stencil offsets, shape (S, 1 + 4*dim, dim)."""
    sites = np.asarray(sites, float)
    dim = sites.shape[-1]
    pts = [sites]
    for mu in range(dim):
        for k, _ in _W4:
            p = sites.copy()
            p[:, mu] += k * h
            pts.append(p)
    return np.stack(pts, axis=1)


def _fd_derivative(F, h):
    dim = F.shape[2]
    dF = np.zeros(F.shape[:1] + (dim,) + F.shape[2:], complex)
    for mu in range(dim):
        for j, (_, w) in enumerate(_W4):
            dF[:, mu] += w * F[:, 1 + 4 * mu + j]
    return dF / h


def _fd_residuals(A, F, h, alg, dF=None):
    """Residuals at each site from stencil data A (S, P, dim, d, d), F (S, P, dim, dim, d, d)."""
    if dF is None:
        dF = _fd_derivative(F, h)
    return _bianchi_ym(A[:, 0], F[:, 0], dF, alg)


def check_bianchi_yangmills(sampler, sites, h, algebra, tol=1e-4, refine=True):
    """Bianchi and Yang-Mills residuals by 4th-order central differences.

    ``sampler`` maps real points (..., 4n) to (A_mu, F_munu).  With ``refine``
    the stencils for h and h/2 go through the sampler in one call, so both
    share any solver step sequence; the observed order is reported in
    ``report.meta`` and the gated entries use the Richardson combination
    (16 dF(h/2) - dF(h)) / 15.
    """
    sites = np.atleast_2d(np.asarray(sites, float))
    hs = (h, h / 2) if refine else (h,)
    pts = np.stack([_star_points(sites, hh) for hh in hs])   # (H, S, P, dim)
    A, F = sampler(pts)
    rep = ResidualReport("bianchi_yangmills")
    res = [_fd_residuals(A[k], F[k], hh, algebra) for k, hh in enumerate(hs)]
    # with refine the gate is the Richardson pair, which cancels the h^4 term
    raw_tol = None if refine else tol
    rep.add("bianchi", res[0][0], raw_tol)
    rep.add("yang_mills", res[0][1], raw_tol)
    meta = {"h": h, "n_sites": len(sites)}
    if refine:
        rep.add("bianchi_half", res[1][0])
        rep.add("yang_mills_half", res[1][1])
        dR = (16 * _fd_derivative(F[1], h / 2) - _fd_derivative(F[0], h)) / 15
        rb, ry = _fd_residuals(A[1], F[1], h / 2, algebra, dR)
        rep.add("bianchi_richardson", rb, tol)
        rep.add("yang_mills_richardson", ry, tol)
        r0, r1 = float(res[0][1].max()), float(res[1][1].max())
        floor = 1e-13 * max(1.0, float(algebra.matrix_norm(F).max()))
        if r0 > floor and r1 > floor:
            rate = float(np.log2(r0 / r1))
            meta["ym_rate"] = rate
            if rate < 0:
                rep.add("fd_refinement", [r1 / r0], 1.0, note="residual grew under refinement; grid too coarse")
        else:
            meta["ym_rate"] = None
        rb0, rb1 = float(res[0][0].max()), float(res[1][0].max())
        meta["bianchi_rate"] = float(np.log2(rb0 / rb1)) if rb0 > floor and rb1 > floor else None
    rep.meta = meta
    return rep


def _x_derivatives(jet, n, order):
    """T[P1, ..., Pk] = d^k jet / dx^{P1}...dx^{Pk} for k = ``order`` (P over (i, a) pairs)."""
    m = 4 * n
    out = np.zeros((m,) * order + jet.shape, complex)
    for idx in product(range(m), repeat=order):
        mono = [0] * jet.space.nvars
        for p in idx:
            mono[p] += 1
        w = np.prod([factorial(v) for v in mono])
        out[idx] = w * jet.coeff(mono)
    return out


def bianchi_yangmills_exact(Gd, xs, tol=1e-9, n=1):
    """Bianchi and Yang-Mills from exact third x-derivatives of A++ at U = I.

    At U = I the central potential is A_{ia} = u-_i u-^j d_{ja} A++ and the
    curvature -eps_ij d_{0a} d_{0b} A++ (u-^j = delta_{j0} there).
    """
    xs = np.asarray(xs)
    U = np.broadcast_to(np.eye(2, dtype=complex), xs.shape[:-2] + (2, 2))
    sp, xj, Uj = probe.seed(xs, U, [("x", x_items(n), 3)])
    App = Gd.second_prepotential.evaluate(xj, Uj)
    m = 2 * n
    D1 = _x_derivatives(App, n, 1).reshape((2, m) + App.shape)
    D2 = _x_derivatives(App, n, 2).reshape((2, m, 2, m) + App.shape)
    D3 = _x_derivatives(App, n, 3).reshape((2, m, 2, m, 2, m) + App.shape)
    from .harmonics import EPS_DOWN
    umin = np.array([0.0, 1.0])
    Ac = np.einsum("i,a...->...ia", umin, D1[0])
    dA = np.einsum("i,kca...->...kcia", umin, D2[:, :, 0])
    Fc = -np.einsum("ij,ab...->...iajb", EPS_DOWN, D2[0, :, 0])
    dF = -np.einsum("ij,kcab...->...kciajb", EPS_DOWN, D3[:, :, 0, :, 0])
    M = real_jacobian(n).reshape(4 * n, 2, m)
    return _exact_report(Gd.algebra, M, Ac, dA, Fc, dF, tol)


def _exact_report(alg, M, Ac, dA, Fc, dF, tol):
    # the d x d matrix axes sit just before the tensor axes; move them last
    def last(a, k):
        return np.moveaxis(a, (a.ndim - k - 2, a.ndim - k - 1), (-2, -1))

    Ac, dA, Fc, dF = last(Ac, 2), last(dA, 4), last(Fc, 4), last(dF, 6)
    A = np.einsum("mia,...iakl->...mkl", M, Ac)
    F = np.einsum("mia,njb,...iajbkl->...mnkl", M, M, Fc)
    dFr = np.einsum("lkc,mia,njb,...kciajbpq->...lmnpq", M, M, M, dF)
    dAr = np.einsum("mkc,nia,...kciapq->...mnpq", M, M, dA)
    b, y = _bianchi_ym(A, F, dFr, alg)
    curl = dAr - np.swapaxes(dAr, -3, -4) + _comm(A[..., :, None, :, :], A[..., None, :, :, :])
    rep = ResidualReport("bianchi_yangmills_exact")
    rep.add("bianchi", b, tol)
    rep.add("yang_mills", y, tol)
    rep.add("structure", alg.matrix_norm(F - curl).reshape(F.shape[:-4] + (-1,)).max(axis=-1), tol,
            note="F = dA + [A, A]")
    return rep


# normalization frame ----------------------------------------------------

class _ScalarField:
    """Scalar holomorphic function of (x, U) evaluated on jets."""

    def __init__(self, fn, charge):
        self.fn = fn
        self.charge = charge

    def evaluate(self, xj, Uj):
        return self.fn(xj, Uj)

    def values(self, x, U):
        from .jets import jet_space
        sp = jet_space(())
        return self.fn(Jet.const(sp, np.asarray(x, complex)), Jet.const(sp, np.asarray(U, complex))).value


@dataclass
class NormalizationFrame:
    """lambda^a = -X^{-a} - mu X^{+a}, mu = -(k.u-)/(k.u+), with X^{+-a} = (x - x0)^{ia} u+-_i.

    Equivalently lambda^a = (x - x0)^{ia} k_i / (k.u+), where k.u = k_i u^i and
    the spinor k is fixed by the base conditions at U0.
    """
    x0: np.ndarray
    U0: np.ndarray
    k: np.ndarray
    radius: float = 0.5
    min_denominator: float = 0.25
    lam: list = field(default_factory=list)
    mu: object = None

    @property
    def n(self):
        return self.x0.shape[-1] // 2

    @property
    def base_point(self):
        return self.x0, self.U0

    def denominator(self, U):
        return raise_index(np.asarray(U)[..., :, 0]) @ self.k

    def in_domain(self, x, U):
        dx = np.abs(np.asarray(x) - self.x0).reshape(np.shape(x)[:-2] + (-1,)).max(axis=-1)
        return (dx <= self.radius) & (np.abs(self.denominator(U)) >= self.min_denominator)

    def sample(self, rng, count, spread=0.4):
        """Random (x, U) in the domain."""
        xs, Us = [], []
        while sum(len(v) for v in xs) < count:
            m = 2 * count
            dx = rng.uniform(-1, 1, (m, 2, 2 * self.n)) + 1j * rng.uniform(-1, 1, (m, 2, 2 * self.n))
            x = self.x0 + self.radius * dx / np.sqrt(2)
            U = self.U0 @ random_sl2(rng, m, spread)
            ok = self.in_domain(x, U)
            xs.append(x[ok])
            Us.append(U[ok])
        return np.concatenate(xs)[:count], np.concatenate(Us)[:count]

    def base_leaf(self, rng, count, spread=0.4):
        """Points of the base leaf: x = x0 with harmonics in the domain."""
        _, U = self.sample(rng, count, spread)
        return np.broadcast_to(self.x0, (len(U),) + self.x0.shape).copy(), U


class FrameError(ValueError):
    pass


def solve_normalization_frame(x0, U0, domain=None):
    """Frame (lambda^a, mu) about (x0, U0).

    The spinor k solves k.u-(U0) = 0, k.u+(U0) = 1.  ``domain`` may set
    ``radius`` (sup distance from x0) and ``min_denominator`` (lower bound for
    |k.u+|, which keeps lambda and mu holomorphic).
    """
    x0 = np.asarray(x0, complex)
    U0 = np.asarray(U0, complex)
    if abs(np.linalg.det(U0) - 1) > 1e-10:
        raise FrameError("U0 must lie in SL2(C)")
    rows = np.stack([raise_index(U0[:, 1]), raise_index(U0[:, 0])])
    if abs(np.linalg.det(rows)) < 1e-12:
        raise FrameError("singular base system")
    k = np.linalg.solve(rows, np.array([0.0, 1.0], complex))
    domain = dict(domain or {})
    fr = NormalizationFrame(x0, U0, k, float(domain.get("radius", 0.5)),
                            float(domain.get("min_denominator", 0.25)))

    def dots(Uj):
        up = raise_index(Uj[..., :, 0])
        um = raise_index(Uj[..., :, 1])
        return up[..., 0] * k[0] + up[..., 1] * k[1], um[..., 0] * k[0] + um[..., 1] * k[1]

    def lam_fn(a):
        def fn(xj, Uj):
            kp, _ = dots(Uj)
            dx = xj[..., :, a] - x0[:, a]
            return (dx[..., 0] * k[0] + dx[..., 1] * k[1]) / kp
        return fn

    def mu_fn(xj, Uj):
        kp, km = dots(Uj)
        return -km / kp

    fr.lam = [_ScalarField(lam_fn(a), -1) for a in range(2 * fr.n)]
    fr.mu = _ScalarField(mu_fn, -2)
    return fr


def frame_residuals(frame, x, U, base=None, tol=1e-8):
    """Residuals of the frame system at samples (x, U) inside the domain.

    The literal conditions H0 lambda = H0 mu = 0 cannot hold together with
    e_{+b} lambda^a = delta and Hpp mu = -1 (apply H0 and use [H0, e_+] = e_+,
    [H0, Hpp] = 2 Hpp).  They are reported ungated; the gated entries are the
    compatible charge conditions H0 lambda = -lambda, H0 mu = -2 mu, plus
    H0 lambda = 0 on the base leaf.
    """
    rep = ResidualReport("normalization_frame")
    n = frame.n
    for a, lam in enumerate(frame.lam):
        rep.add(f"Hpp_lambda{a + 1}", _flow(lam, "Hpp", x, U), tol)
        rep.add(f"H0_lambda{a + 1}_charge", _flow(lam, "H0", x, U) + lam.values(x, U), tol)
        rep.add(f"H0_lambda{a + 1}_literal", _flow(lam, "H0", x, U), None,
                note="incompatible with e_+ lambda = delta; informational")
        for b in range(2 * n):
            rep.add(f"e+{b + 1}_lambda{a + 1}", _frame(lam, "+", b, x, U) - (1.0 if a == b else 0.0), tol)
    mu = frame.mu
    rep.add("Hpp_mu", _flow(mu, "Hpp", x, U) + 1.0, tol)
    rep.add("H0_mu_charge", _flow(mu, "H0", x, U) + 2 * mu.values(x, U), tol)
    rep.add("H0_mu_literal", _flow(mu, "H0", x, U), None,
            note="incompatible with Hpp mu = -1; informational")
    rep.add("e+_mu", np.stack([_frame(mu, "+", b, x, U) for b in range(2 * n)]), tol)
    x0, U0 = frame.base_point
    rep.add("base_value", [abs(l.values(x0, U0)) for l in frame.lam] + [abs(mu.values(x0, U0))], tol)
    if base is not None:
        xb, Ub = base
        rep.add("H0_lambda_base_leaf", np.stack([_flow(l, "H0", xb, Ub) for l in frame.lam]), tol)
    return rep


def check_normalized(Amm, frame, A_tilde=None, x=None, U=None, base=None, tol=1e-8, bc_tol=1e-6):
    """Normalization conditions on a prepotential.

    Differential conditions are tested at (x, U); boundary conditions at the
    base-leaf samples ``base`` = (xb, Ub).  ``A_tilde`` maps x (..., 2, 2n) to
    the exponential-gauge potential (..., 2, 2n, d, d); None means zero.
    """
    alg = Amm.algebra
    rep = ResidualReport("normalized")
    exact = bool(getattr(Amm, "normalized_form", False))
    nrm = alg.matrix_norm
    rep.add("H0_charge", nrm(_flow(Amm, "H0", x, U) + 2 * Amm.values(x, U)), tol, exact=exact)
    rep.add("e_minus", np.stack([nrm(_frame(Amm, "-", a, x, U)) for a in range(2 * frame.n)]), tol, exact=exact)
    rep.add("Hmm", nrm(_flow(Amm, "Hmm", x, U)), tol, exact=exact)
    if base is not None:
        xb, Ub = base
        lam = np.stack([l.values(xb, Ub) for l in frame.lam], axis=-1)      # (..., 2n)
        d = alg.matrices.shape[-1]
        if A_tilde is None:
            At = np.zeros(np.shape(xb) + (d, d), complex)
        else:
            At = np.asarray(A_tilde(xb))
        Am_t = np.einsum("...i,...iakl->...akl", raise_index(Ub[..., :, 1]), At)
        Ap_t = np.einsum("...i,...iakl->...akl", raise_index(Ub[..., :, 0]), At)
        r1 = Amm.values(xb, Ub) + np.einsum("...a,...akl->...kl", lam, Am_t)
        r2 = _flow(Amm, "Hpp", xb, Ub) + np.einsum("...a,...akl->...kl", lam, Ap_t)
        rep.add("boundary_value", nrm(r1), bc_tol)
        rep.add("boundary_Hpp", nrm(r2), bc_tol)
    return rep
