"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line."""

import json
import time

import numpy as np

from harmonikos import make_prepotential, reconstruct
from harmonikos.cli import main
from harmonikos.estimates import (EstimateError, FamilyRun, compactness_run, elliptic_ratio_check,
                                  exp_gauge_bound_check, exp_gauge_ratio, parse_box,
                                  prepotential_bound_check, scaling_family, uniform_grid)
from harmonikos.fields import DSLField, parse
from harmonikos.flatspace import real_to_x
from harmonikos.harmonics import (GENERATORS, grid_from_spec, harmonic_derivative,
                                  operator_commutator, random_sl2, random_su2)
from harmonikos.lie import HMM, HPP
from harmonikos.oracle import bilinear_oracle
from harmonikos.reconstruct import (BridgeOptions, curvature, extract_central, sample_fields)
from harmonikos.ode import Tolerances
from harmonikos.verify import (asd_suite, bianchi_yangmills_exact, central_sampler,
                               check_analytic_gauge, check_bianchi_yangmills,
                               check_lift_conditions, leznov_residual)

from conftest import SL2_EXAMPLE


def report(n, ok, **info):
    vals = " ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {vals}")
    return ok


def _comm(a, b):
    return a @ b - b @ a


# 1 ---------------------------------------------------------------------------

def test_criterion_1_algebra_layer(sl2):
    t0 = time.perf_counter()
    H0 = GENERATORS["H0"]
    rel = max(np.abs(_comm(H0, HPP) - 2 * HPP).max(), np.abs(_comm(H0, HMM) + 2 * HMM).max(),
              np.abs(_comm(HPP, HMM) - H0).max(), sl2.jacobi_residual())
    rng = np.random.default_rng(1)
    x = rng.standard_normal((100, 2, 2)) + 1j * rng.standard_normal((100, 2, 2))
    U = random_sl2(rng, 100)
    c = rng.uniform(-1, 1, 3)
    # a mixed field of charge 0 with xp, xm, up and um atoms
    f = DSLField(parse(f"{c[0]}*T1*xm1*xp2 + {c[1]}*T2*um1*up2 + {c[2]}*T3*xm2*up1", dim=3), sl2)
    ops = 0.0
    for a, b, gen, k in (("H0", "Hpp", "Hpp", 2), ("H0", "Hmm", "Hmm", -2), ("Hpp", "Hmm", "H0", 1)):
        lhs = operator_commutator(f, a, b, x, U)
        rhs = k * harmonic_derivative(f, gen, x, U)
        ops = max(ops, float(np.abs(lhs - rhs).max()))
    charge = float(np.abs(harmonic_derivative(f, "H0", x, U)).max())
    elapsed = time.perf_counter() - t0
    ok = rel < 1e-9 and ops < 1e-9 and charge < 1e-9 and elapsed < 5
    assert report(1, ok, relations=float(rel), operators=ops, H0_on_charge0=charge, seconds=elapsed)


# 2 ---------------------------------------------------------------------------

def test_criterion_2_trivial_reconstruction(sl2):
    t0 = time.perf_counter()
    Gd = reconstruct(make_prepotential("0.8*T2*um1*um2 + 0.3*T1*um2^2 + 0.5*T3*um1^2", sl2))
    x = real_to_x(uniform_grid(parse_box([-1, 1]), 5))
    U = grid_from_spec("euler:4").nodes
    F = curvature(Gd.second_prepotential, x[:, None], U[None]).F_pm
    nF = float(sl2.matrix_norm(F).max())
    elapsed = time.perf_counter() - t0
    ok = F.shape[:2] == (625, 64) and nF < 1e-10 and elapsed < 10
    assert report(2, ok, max_norm_F=nF, samples=F.shape[0] * F.shape[1], seconds=elapsed)


# 3 ---------------------------------------------------------------------------

def test_criterion_3_abelian_oracle(u1):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    Gd = reconstruct(make_prepotential("0.7*T1*xm1*xm2", u1))
    x = real_to_x(rng.uniform(-1, 1, (200, 4)))
    U = random_su2(rng, 200)
    v = sample_fields(Gd, x, U)
    orc = bilinear_oracle(0.7, u1)
    errs = {k: float(np.abs(v[k] - getattr(orc, k)(x, U)).max()) for k in ("g", "App", "Aplus", "F_pm")}
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-8 and elapsed < 30
    assert report(3, ok, **errs, seconds=elapsed)


# 4 ---------------------------------------------------------------------------

def _suite_4(alg, src, seed):
    rng = np.random.default_rng(seed)
    Gd = reconstruct(make_prepotential(src, alg))
    x = real_to_x(rng.uniform(-0.5, 0.5, (64, 4)))
    U = random_su2(rng, 64)
    v = sample_fields(Gd, x, U)
    asd = asd_suite(v["F_pm"], U, alg, 1e-8, 1e-9, U_test=grid_from_spec("euler:3").nodes)
    xs, Us = x[:16], U[:16]
    lez = leznov_residual(Gd.second_prepotential, Gd.prepotential, xs, Us, 1e-8)
    lift = check_lift_conditions(Gd, xs, Us, 1e-7)
    gauge = check_analytic_gauge(Gd, xs, Us, 1e-8)
    nF = asd.meta["norm_F"]
    out = {
        "asd": max(asd.max(k) for k in ("F_pp", "F_mm", "F_pm_plus_mp", "F_pm_symmetry")),
        "F2_rel": asd.max("F2_relative"),
        "symmetry": asd.max("symmetry"),
        "leznov": lez.max("leznov"),
        "lift": max(e["max"] for e in lift.entries.values()),
        "gauge": max(e["max"] for e in gauge.entries.values()),
    }
    ok = asd.passed and lez.passed and lift.passed and gauge.passed and nF > 0
    return ok, out


def test_criterion_4_sl2_asd_leznov_lift(sl2):
    t0 = time.perf_counter()
    ok1, single = _suite_4(sl2, "0.6*T1*xm1*xm2", 41)
    ok2, mixed = _suite_4(sl2, SL2_EXAMPLE, 42)
    elapsed = time.perf_counter() - t0
    ok = ok1 and ok2 and elapsed < 60
    worst = {k: max(single[k], mixed[k]) for k in single}
    assert report(4, ok, **worst, seconds=elapsed)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_central_bianchi_yang_mills(sl2, u1):
    t0 = time.perf_counter()
    grid = grid_from_spec("euler:4")
    rng = np.random.default_rng(5)
    defect = 0.0
    exact = {}
    for name, alg, src in (("u1", u1, "0.7*T1*xm1*xm2"), ("sl2", sl2, SL2_EXAMPLE)):
        Gd = reconstruct(make_prepotential(src, alg))
        xs = real_to_x(rng.uniform(-0.5, 0.5, (2, 4)))
        for x in xs:
            ce = extract_central(Gd, x, grid)
            defect = max(defect, ce.A_defect, ce.F_defect)
        rep = bianchi_yangmills_exact(Gd, xs, 1e-6)
        exact[name] = max(rep.max("bianchi"), rep.max("yang_mills"))
        if name == "sl2":
            sites = rng.uniform(-0.25, 0.25, (6, 4))
            fd = check_bianchi_yangmills(central_sampler(Gd), sites, 0.04, alg, 1e-4)
    rate = fd.meta["ym_rate"]
    elapsed = time.perf_counter() - t0
    ok = (defect < 1e-7 and max(exact.values()) < 1e-6 and fd.max("yang_mills") < 1e-4
          and fd.max("bianchi") < 1e-4 and abs(rate - 4) <= 0.3 and elapsed < 120)
    assert report(5, ok, harmonic_defect=defect, bianchi_exact_u1=exact["u1"],
                  bianchi_exact_sl2=exact["sl2"], ym_fd=fd.max("yang_mills"),
                  ym_fd_half=fd.max("yang_mills_half"), rate=rate, seconds=elapsed)


# 6 ---------------------------------------------------------------------------

def test_criterion_6_uniqueness(sl2):
    rng = np.random.default_rng(6)
    x = real_to_x(rng.uniform(-0.5, 0.5, (24, 4)))
    U = random_su2(rng, 24)
    A = make_prepotential(SL2_EXAMPLE, sl2)
    opt_a = BridgeOptions(circle_nodes=64, order=20, tol=Tolerances(rtol=1e-9, atol=1e-11))
    opt_b = BridgeOptions(circle_nodes=96, order=28,
                          tol=Tolerances(rtol=1e-11, atol=1e-13, h0=0.013, safety=0.8))
    va = sample_fields(reconstruct(A, opt_a), x, U)
    vb = sample_fields(reconstruct(A, opt_b), x, U)
    same = float(sl2.matrix_norm(va["App"] - vb["App"]).max())
    # 1% change of one coefficient
    pert = make_prepotential(SL2_EXAMPLE.replace("0.5*T2", "0.505*T2"), sl2)
    vp = sample_fields(reconstruct(pert, opt_a), x, U)
    dF = float(sl2.matrix_norm(vp["F_pm"] - va["F_pm"]).max())
    ok = same < 1e-7 and dF > 100 * 1e-7
    assert report(6, ok, App_agreement=same, F_change_perturbed=dF)


# 7 ---------------------------------------------------------------------------

def _drift(a, b):
    return abs(a - b) / abs(b)


def test_criterion_7_estimates(u1, sl2):
    box = [-0.5, 0.5]
    worst = 0.0
    finite = True
    for alg, src in ((u1, "0.7*T1*xm1*xm2"), (sl2, "0.6*T1*xm1*xm2")):
        A = make_prepotential(src, alg)
        Gd = reconstruct(A)
        eg = [exp_gauge_ratio(Gd, box, nx)[0] for nx in (2, 3)]
        pb = [prepotential_bound_check(A, r["F_C0"], box, "euler:4", nx) for r, nx in zip(eg, (2, 3))]
        xs = real_to_x(uniform_grid(parse_box(box), 2))[:8]
        ell = []
        for k in (1, 2):
            pair = [elliptic_ratio_check(A, Gd.second_prepotential, xs, k, grid_from_spec(h))[0]
                    for h in ("euler:4", "euler:6")]
            ell.append(pair)
        vals = [(eg[0]["ratio"], eg[1]["ratio"]), (pb[0]["ratio"], pb[1]["ratio"])]
        for a, b in ell:
            vals += [(a["max_ratio"], b["max_ratio"]), (a["max_inverse"], b["max_inverse"])]
        for a, b in vals:
            finite &= a is not None and b is not None and np.isfinite(a) and np.isfinite(b) and b > 0
            if finite:
                worst = max(worst, _drift(a, b))

    # negative controls
    _, flat = exp_gauge_bound_check(np.ones((2, 4, 1, 1), complex), np.zeros((2, 4, 4, 1, 1)), u1)
    zero = make_prepotential("0", u1)
    A = make_prepotential("0.7*T1*xm1*xm2", u1)
    _, zeroed = elliptic_ratio_check(A, zero, real_to_x(np.zeros((1, 4)) + 0.2), 1, grid_from_spec("euler:3"))
    plain = make_prepotential("0.7*T1*xm1*xm2", u1)
    plain.normalized_form = False
    try:
        prepotential_bound_check(plain, 1.0, box)
        refused = False
    except EstimateError:
        refused = True
    controls = "flat_violation" in flat.failing() and "violation" in zeroed.failing() and refused
    ok = finite and worst < 0.05 and controls
    assert report(7, ok, worst_relative_drift=worst, controls_flagged=controls)


# 8 ---------------------------------------------------------------------------

def test_criterion_8_compactness(u1, sl2):
    t0 = time.perf_counter()
    scales = scaling_family(None, 8)
    x = real_to_x(uniform_grid(parse_box([-0.5, 0.5]), 2))
    U = random_su2(np.random.default_rng(8), len(x))
    res = {}
    for name, src in (("u1", "0.7*T1*xm1*xm2"), ("sl2", SL2_EXAMPLE)):
        fam = FamilyRun([(src, s) for s in scales], name)
        res[name] = compactness_run(fam, len(scales) - 1, x, U, [-0.5, 0.5], "euler:4", nx=2)
    elapsed = time.perf_counter() - t0
    rate = res["u1"]["rate_exponent"]
    ok = (abs(rate + 1) <= 0.05 and res["sl2"]["monotone"] and elapsed < 300
          and all(np.isfinite(r["uniform_Amm_bound"]) for r in res.values()))
    assert report(8, ok, abelian_rate=rate, sl2_monotone=res["sl2"]["monotone"],
                  sl2_rate=res["sl2"]["rate_exponent"], Amm_bound_sl2=res["sl2"]["uniform_Amm_bound"],
                  seconds=elapsed)


# 9 ---------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    base = ["--algebra", "sl2", "--prepotential", SL2_EXAMPLE, "--nx", "1", "--harmonics-per-point", "6",
            "--box=-0.5,0.5", "--check-samples", "3", "--fd-sites", "1", "--haar", "euler:3", "--seed", "17",
            "--no-figure"]
    fam = json.dumps({"algebra": "u1", "prepotential": "0.7*T1*xm1*xm2", "scales": [2.0, 1.5, 1.0]})
    runs = {
        "reconstruct": ["reconstruct", *base],
        "oracle": ["oracle", "--algebra", "sl2", "--coef", "0.6", "--nx", "2", "--seed", "17", "--no-figure"],
        "compactness": ["compactness", "--family", fam, "--nx", "1", "--haar", "euler:2", "--no-figure"],
    }
    same = True
    for name, args in runs.items():
        blobs = []
        for k in range(2):
            out = tmp_path / f"{name}{k}.json"
            assert main([*args, "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        same &= blobs[0] == blobs[1]
    assert report(9, same, identical=same)
