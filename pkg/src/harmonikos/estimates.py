"""Norms, the exponential (radial) gauge, bound ratios and the compactness harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import factorial

import numpy as np

from . import probe
from .flatspace import real_jacobian, real_to_x
from .harmonics import fiber_ck_norm, grid_from_spec
from .ode import Tolerances, integrate
from .reconstruct import central_at_identity, reconstruct
from .residuals import ResidualReport
from .verify import central_sampler

SENTINEL_FLOOR = 1e-14


class EstimateError(RuntimeError):
    pass


# grids and norms --------------------------------------------------------

def parse_box(box, dim=4):
    """'-1,1' or (lo, hi) or per-axis pairs -> array (dim, 2)."""
    if isinstance(box, str):
        vals = [float(v) for v in box.split(",")]
    else:
        vals = list(np.asarray(box, float).ravel())
    if len(vals) == 2:
        vals = vals * dim
    b = np.asarray(vals, float).reshape(dim, 2)
    if np.any(b[:, 1] <= b[:, 0]):
        raise ValueError("box bounds must satisfy lo < hi")
    return b


def uniform_grid(box, nx):
    """Tensor grid with nx points per axis including the box corners."""
    axes = [np.linspace(lo, hi, nx) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))


def gauss_grid(box, order=8):
    """Tensor Gauss-Legendre nodes and weights (flat volume element) on the box."""
    t, w = np.polynomial.legendre.leggauss(order)
    axes, wts = [], []
    for lo, hi in box:
        axes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    weights = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, len(box)), axis=-1)
    return nodes, weights


def pointwise_norm(values, algebra, tensor_rank=0):
    """Hermitian norm at each point; tensor indices (the last ``tensor_rank``
    axes before the matrix axes) are summed in quadrature."""
    v = algebra.matrix_norm(np.asarray(values))
    for _ in range(tensor_rank):
        v = np.sqrt(np.sum(v ** 2, axis=-1))
    return v


def c0_norm(values, algebra, tensor_rank=0):
    v = pointwise_norm(values, algebra, tensor_rank)
    return float(np.max(v, initial=0.0))


def lp_norm(values, weights, algebra, p=2, tensor_rank=0):
    """(sum_k w_k |f(x_k)|^p)^(1/p); p = inf gives the sup over the nodes."""
    v = pointwise_norm(values, algebra, tensor_rank)
    if np.isinf(p):
        return float(np.max(v, initial=0.0))
    return float(np.sum(np.asarray(weights) * v ** p) ** (1.0 / p))


def _real_derivative_norms(jet, n, k, algebra):
    """|nabla^j f| for j <= k at each point, from complex x-jets of a holomorphic f."""
    m = 4 * n
    M = real_jacobian(n).reshape(4 * n, m)
    out = []
    for j in range(k + 1):
        T = np.zeros((m,) * j + jet.shape, complex)
        for idx in product(range(m), repeat=j):
            mono = [0] * jet.space.nvars
            for q in idx:
                mono[q] += 1
            T[idx] = np.prod([factorial(v) for v in mono]) * jet.coeff(mono)
        for _ in range(j):
            T = np.tensordot(M, T, axes=([1], [0]))
            T = np.moveaxis(T, 0, j - 1)
        v = algebra.matrix_norm(T)
        for _ in range(j):
            v = np.sqrt(np.sum(v ** 2, axis=0))
        out.append(v)
    return out


def field_ck_values(f, y, U=None, k=2, n=1):
    """Per-order sup over points y (N, 4n) of |nabla^j f(x(y), U)|, j = 0..k."""
    x = real_to_x(np.asarray(y, float))
    if U is None:
        U = np.eye(2, dtype=complex)
    items = [(i, a) for i in range(2) for a in range(2 * n)]
    if k == 0:
        sp, xj, Uj = probe.seed(x, U, [])
    else:
        sp, xj, Uj = probe.seed(x, U, [("x", items, k)])
    val = f.evaluate(xj, Uj)
    norms = _real_derivative_norms(val, n, k, f.algebra)
    return [float(np.max(v, initial=0.0)) for v in norms]


@dataclass
class NormProfile:
    ck_values: dict
    lp_values: dict
    region: list
    grid: str

    def to_json(self):
        return {
            "ck_values": {str(k): v for k, v in sorted(self.ck_values.items())},
            "lp_values": {str(p): v for p, v in sorted(self.lp_values.items(), key=lambda t: float(t[0]))},
            "region": [list(map(float, r)) for r in self.region],
            "grid": self.grid,
        }


def norm_profile(f, box, U=None, ks=(0, 1, 2), ps=(1, 2, np.inf), order=4, n=1):
    """C^k(K) and L^p(K) norms of a field at fixed harmonic U.

    C^k sums the per-order sups, so the values are non-decreasing in k.
    """
    box = parse_box(box, 4 * n)
    nodes, weights = gauss_grid(box, order)
    per = field_ck_values(f, nodes, U, max(ks), n)
    ck = {k: float(sum(per[: k + 1])) for k in ks}
    x = real_to_x(nodes)
    vals = f.values(x, np.eye(2, dtype=complex) if U is None else U)
    lp = {("inf" if np.isinf(p) else p): lp_norm(vals, weights, f.algebra, p) for p in ps}
    return NormProfile(ck, lp, box.tolist(), f"gauss:{order}")


def ratio(num, den, floor=SENTINEL_FLOOR):
    """num / den, or None (not applicable) when both are below ``floor``."""
    if abs(num) < floor and abs(den) < floor:
        return None
    if abs(den) < floor:
        return float("inf")
    return float(num / den)


# exponential gauge --------------------------------------------------------

def _lagrange_weights(nodes, t):
    """L[k] = k-th Lagrange basis polynomial on ``nodes`` evaluated at t."""
    L = np.ones(len(nodes))
    for k, tk in enumerate(nodes):
        for j, tj in enumerate(nodes):
            if j != k:
                L[k] *= (t - tj) / (tk - tj)
    return L


@dataclass
class ExpGaugeResult:
    points: np.ndarray        # real points (S, 4n)
    A: np.ndarray             # (S, 4n, d, d) radial-gauge potential
    F: np.ndarray             # (S, 4n, 4n, d, d) curvature in the radial gauge
    h: np.ndarray             # (S, d, d) gauge transformation at the points
    report: ResidualReport
    base: np.ndarray


def _ray_transport(sampler, x0, y, t_nodes, tol):
    """h at the nodes along rays x0 + t (y - x0); also the sampled (A, F)."""
    dy = y - x0
    pts = x0 + t_nodes[:, None, None] * dy[None]               # (q, S, dim)
    A, F = sampler(pts)                                        # (q, S, dim, d, d), (q, S, dim, dim, d, d)
    a = np.einsum("sm,qsmkl->qskl", dy, A)
    S, d = a.shape[1], a.shape[-1]

    def rhs_from(t0):
        def rhs(s, h):
            L = _lagrange_weights(t_nodes, t0 + s)
            return -np.einsum("q,qskl,slm->skm", L, a, h)
        return rhs

    h = np.broadcast_to(np.eye(d, dtype=complex), (S, d, d)).copy()
    hs, t_prev = [], 0.0
    for t in t_nodes:
        if t > t_prev:
            h, _ = integrate(rhs_from(t_prev), h, t - t_prev, tol)
        hs.append(h)
        t_prev = t
    return np.stack(hs), A, F


def exponential_gauge(sampler, x0, points, quad_order=16, tol=None, report_tol=1e-8, n_check=2):
    """Radial gauge about x0 at real ``points`` (S, 4n).

    ``sampler`` maps real points (..., 4n) to (A_mu, F_munu) in a central
    gauge.  The transformation solves dh/dt = -A(gamma') h along each ray
    gamma(t) = x0 + t (y - x0); in the new gauge
    A_mu(y) = int_0^1 t (y - x0)^nu h^{-1} F_{nu mu}(gamma(t)) h dt,
    evaluated with Gauss-Legendre nodes on the ray.  A few points are checked
    against h^{-1} A h + h^{-1} dh with dh from central differences.
    """
    tol = tol or Tolerances(rtol=1e-12, atol=1e-14)
    y = np.atleast_2d(np.asarray(points, float))
    x0 = np.asarray(x0, float)
    t_nodes, w = np.polynomial.legendre.leggauss(quad_order)
    t_nodes, w = 0.5 * (t_nodes + 1.0), 0.5 * w
    nodes = np.append(t_nodes, 1.0)
    hs, A, F = _ray_transport(sampler, x0, y, nodes, tol)
    hi = np.linalg.inv(hs)
    Fg = np.einsum("qskl,qsmnlp,qspr->qsmnkr", hi, F, hs)       # F in the radial gauge
    dy = y - x0
    Anew = np.einsum("q,q,sn,qsnmkl->smkl", w, t_nodes, dy, Fg[:-1])
    rep = ResidualReport("exponential_gauge")
    alg = _algebra_of(sampler)
    rep.add("radial", alg.matrix_norm(np.einsum("sm,smkl->skl", dy, Anew)), report_tol)
    at_base = np.all(np.abs(dy) < 1e-14, axis=-1)
    if np.any(at_base):
        rep.add("base_value", pointwise_norm(Anew[at_base], alg, 1), report_tol)
    chk = [i for i in range(len(y)) if not at_base[i]][:n_check]
    if chk:
        err = _consistency(sampler, x0, y[chk], Anew[chk], hs[-1][chk], nodes, tol)
        rep.add("consistency", alg.matrix_norm(err).max(axis=-1), 1e-6,
                note="h^-1 A h + h^-1 dh with 4th-order differences of h")
    return ExpGaugeResult(y, Anew, Fg[-1], hs[-1], rep, x0)


def _consistency(sampler, x0, yc, Anew, h, nodes, tol, step=1e-3):
    dim = yc.shape[-1]
    pts = [yc + k * step * np.eye(dim)[mu] for mu in range(dim) for k in (-2, -1, 1, 2)]
    hp, _, _ = _ray_transport(sampler, x0, np.concatenate(pts), nodes, tol)
    hp = hp[-1].reshape(dim, 4, len(yc), *hp.shape[-2:])
    coef = np.array([1, -8, 8, -1]) / (12 * step)
    dh = np.einsum("j,mjskl->smkl", coef, hp)
    A, _ = sampler(yc)
    hi = np.linalg.inv(h)
    direct = np.einsum("skl,smlp,spq->smkq", hi, A, h) + np.einsum("skl,smlq->smkq", hi, dh)
    return direct - Anew


def _algebra_of(sampler):
    return getattr(sampler, "algebra")


def central_curvature_real(Gd, y, n=1):
    """Central curvature F_munu at real points y (U = I frame)."""
    M = real_jacobian(n).reshape(4 * n, 2, 2 * n)
    _, Fc = central_at_identity(Gd, real_to_x(np.asarray(y, float)), n)
    return np.einsum("mia,njb,...iajbkl->...mnkl", M, M, Fc)


def exp_gauge_bound_check(A_exp, F, algebra, tol=None):
    """||A||_{C0(K)} / ||F||_{C0(K)} from samples; F equivalent up to conjugation."""
    a = c0_norm(A_exp, algebra, 1)
    f = _two_form_c0(F, algebra)
    rep = ResidualReport("exp_gauge_bound")
    r = ratio(a, f)
    if r is not None and np.isinf(r):
        rep.add("flat_violation", [a], SENTINEL_FLOOR, note="F = 0 but A != 0")
    return {"A_C0": a, "F_C0": f, "ratio": r}, rep


def _two_form_c0(F, algebra):
    v = algebra.matrix_norm(np.asarray(F))                   # (..., dim, dim)
    dim = v.shape[-1]
    iu = np.triu_indices(dim, 1)
    return float(np.max(np.sqrt(np.sum(v[..., iu[0], iu[1]] ** 2, axis=-1)), initial=0.0))


def exp_gauge_ratio(Gd, box, nx=3, x0=None, n=1, quad_order=16, n_check=1):
    """Exponential-gauge ratio sampled on a uniform box grid."""
    box = parse_box(box, 4 * n)
    y = uniform_grid(box, nx)
    x0 = np.zeros(4 * n) if x0 is None else np.asarray(x0, float)
    res = exponential_gauge(central_sampler(Gd, n), x0, y, quad_order, n_check=n_check)
    vals, rep = exp_gauge_bound_check(res.A, res.F, Gd.algebra)
    rep.merge(res.report, "gauge_")
    return vals, rep


# prepotential bound -------------------------------------------------------

def prepotential_bound_check(Amm, F_c0, box, haar="euler:4", nx=3, n=1, require_normalized=True):
    """||A--||_{C0(K x SU2)} / ||F||_{C0} with the curvature norm supplied."""
    if require_normalized and not getattr(Amm, "normalized_form", False):
        raise EstimateError("prepotential bound requires a normalized-form prepotential")
    box = parse_box(box, 4 * n)
    y = uniform_grid(box, nx)
    grid = grid_from_spec(haar)
    vals = Amm.values(real_to_x(y)[:, None], grid.nodes[None])
    a = c0_norm(vals, Amm.algebra)
    return {"Amm_C0": a, "F_C0": F_c0, "ratio": ratio(a, F_c0)}


# elliptic ratios ----------------------------------------------------------

def elliptic_ratio_check(Amm, App, xs, k, grid, tol=SENTINEL_FLOOR):
    """Two-sided fiber C^k ratios at each x; sup of r and 1/r over samples."""
    rs, inv = [], []
    rep = ResidualReport(f"elliptic_C{k}")
    bad = []
    for x in np.asarray(xs):
        a = fiber_ck_norm(Amm, x, k, grid)
        b = fiber_ck_norm(App, x, k, grid)
        r = ratio(a, b, tol)
        if r is None:
            continue
        if np.isinf(r) or r == 0.0:
            bad.append(1.0)
            continue
        rs.append(r)
        inv.append(1.0 / r)
    if bad:
        rep.add("violation", bad, 0.0, note="one side vanishes while the other does not")
    out = {"k": k, "n_samples": len(rs),
           "max_ratio": max(rs) if rs else None, "max_inverse": max(inv) if inv else None}
    return out, rep


# compactness ---------------------------------------------------------------

@dataclass
class FamilyRun:
    sources: list
    algebra: str
    members: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)


def family_from_config(cfg):
    """{"algebra", "prepotential", "scales"} or {"algebra", "members": [{"prepotential", "scale"}]}."""
    alg = cfg.get("algebra", "sl2")
    if "members" in cfg:
        srcs = [(m["prepotential"], float(m.get("scale", 1.0))) for m in cfg["members"]]
    else:
        srcs = [(cfg["prepotential"], float(s)) for s in cfg["scales"]]
    return FamilyRun(srcs, alg)


def scaling_family(prepotential, kmax=8, include_limit=True):
    """(1 + 1/k) scalings for k = 1..kmax followed by the limit scale 1."""
    scales = [1 + 1 / k for k in range(1, kmax + 1)]
    if include_limit:
        scales.append(1.0)
    return scales


def compactness_run(family, limit, samples, U_samples, box, haar="euler:4", nx=3,
                    options=None, eps_gate=None, cm_gate=None, n=1):
    """Curvature convergence of a family towards its designated limit member.

    ``samples`` (N, 2, 2n) and ``U_samples`` (N, 2, 2) fix the compact set on
    which F^(k) - F^(inf) is measured via F_{+a|-b}.
    """
    from .fields import ScaledField, make_prepotential
    from .lie import get_algebra
    from .reconstruct import curvature
    alg = get_algebra(family.algebra)
    y = uniform_grid(parse_box(box, 4 * n), nx)
    grid = grid_from_spec(haar)
    rows = []
    for src, scale in family.sources:
        A = make_prepotential(src, alg)
        if scale != 1.0:
            base = A
            A = ScaledField(base, scale)
            A.normalized_form = getattr(base, "normalized_form", False)
        Gd = reconstruct(A, options)
        F = curvature(Gd.second_prepotential, samples, U_samples, n).F_pm
        Aval = A.values(real_to_x(y)[:, None], grid.nodes[None])
        rows.append({"scale": scale, "F": F, "Amm_C0": c0_norm(Aval, alg), "steps": Gd.bridge.stats["steps"]})
    F_lim = rows[limit]["F"]
    nF = float(np.max(alg.matrix_norm(F_lim), initial=0.0))
    members, devs, ks = [], [], []
    for idx, r in enumerate(rows):
        if idx == limit:
            continue
        dev = float(np.max(alg.matrix_norm(r["F"] - F_lim), initial=0.0))
        rel = abs(r["scale"] / rows[limit]["scale"] - 1.0)
        k = 1.0 / rel if rel > 0 else float(idx + 1)     # scale = (1 + 1/k) * limit scale
        members.append({"index": idx, "k": k, "scale": r["scale"], "Amm_C0": r["Amm_C0"],
                        "deviation": dev})
        devs.append(dev)
        ks.append(k)
    out = {
        "limit_index": limit,
        "F_limit_C0": nF,
        "uniform_Amm_bound": max(r["Amm_C0"] for r in rows),
        "members": members,
    }
    devs_a, ks_a = np.asarray(devs), np.asarray(ks, float)
    pos = devs_a > 0
    if pos.sum() >= 2:
        slope = np.polyfit(np.log(ks_a[pos]), np.log(devs_a[pos]), 1)[0]
        out["rate_exponent"] = float(slope)
    else:
        out["rate_exponent"] = None
    out["monotone"] = bool(np.all(np.diff(devs_a) <= 0))
    out["final_relative_deviation"] = devs[-1] / nF if nF > 0 and devs else None
    gates = {}
    if eps_gate is not None:
        gates["eps"] = {"threshold": eps_gate, "pass": devs[-1] <= eps_gate}
    if cm_gate is not None:
        gates["c_m"] = {"threshold": cm_gate, "pass": out["uniform_Amm_bound"] <= cm_gate}
    out["gates"] = gates
    family.members = members
    family.constants = {"uniform_Amm_bound": out["uniform_Amm_bound"]}
    return out
