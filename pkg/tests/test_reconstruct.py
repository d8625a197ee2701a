import numpy as np
import pytest

from harmonikos import BridgeOptions, make_prepotential, reconstruct
from harmonikos.oracle import bilinear_oracle
from harmonikos.reconstruct import (RecoveredPrepotential, central_at_identity, curvature,
                                    extract_central, sample_fields, solve_bridge)
from harmonikos.harmonics import grid_from_spec

from conftest import points


def _max(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def test_abelian_matches_closed_forms(gd_u1, u1):
    orc = bilinear_oracle(0.7, u1)
    x, U = points(21, 12)
    v = sample_fields(gd_u1, x, U)
    for key, ref in (("g", orc.g), ("App", orc.App), ("Aplus", orc.Aplus), ("F_pm", orc.F_pm)):
        assert _max(v[key], ref(x, U)) < 1e-8, key


def test_single_generator_sl2_matches_closed_forms(sl2):
    orc = bilinear_oracle(0.6, sl2, generator=0)
    Gd = reconstruct(make_prepotential("0.6*T1*xm1*xm2", sl2))
    x, U = points(22, 6)
    v = sample_fields(Gd, x, U)
    assert _max(v["App"], orc.App(x, U)) < 1e-8
    assert _max(v["F_pm"], orc.F_pm(x, U)) < 1e-8


def test_x_independent_prepotential_is_flat(sl2):
    Gd = reconstruct(make_prepotential("0.8*T2*um1*um2 + 0.3*T1*um2^2", sl2))
    x, U = points(23, 10)
    F = curvature(Gd.second_prepotential, x, U).F_pm
    assert np.abs(F).max() < 1e-10


def test_bridge_gluing_is_tight(gd_sl2):
    x, U = points(24, 4)
    sample_fields(gd_sl2, x, U)
    assert gd_sl2.bridge.stats["gluing_max"] < 1e-9


def test_options_validate():
    with pytest.raises(ValueError):
        BridgeOptions(circle_nodes=10, order=20)


def test_bridge_is_unimodular_and_invariant(gd_sl2):
    x, U = points(25, 1)
    sol = solve_bridge(gd_sl2.prepotential, x[0], U[0], 0.8)
    assert sol.det_residual() < 1e-9
    assert sol.invariant_residual() < 1e-7


def test_mirror_recovers_prepotential(gd_sl2):
    x, U = points(26, 3)
    rec = RecoveredPrepotential(gd_sl2.second_prepotential)
    assert _max(rec.values(x, U), gd_sl2.prepotential.values(x, U)) < 1e-7


def test_identity_frame_agrees_with_haar_projection(gd_sl2):
    x, _ = points(27, 1)
    ce = extract_central(gd_sl2, x[0], grid_from_spec("euler:3"))
    Ac, Fc = central_at_identity(gd_sl2, x)
    assert ce.A_defect < 1e-9 and ce.F_defect < 1e-9
    assert _max(ce.A_central, Ac[0]) < 1e-9
    assert _max(ce.F_central, Fc[0]) < 1e-9


def test_shared_fiber_for_x_free_prepotential(sl2):
    A = make_prepotential("0.8*T2*um1*um2 + 0.3*T1*um2^2", sl2)
    assert A.x_independent
    x, U = points(28, 5)
    shared = reconstruct(A).bridge.values(x, U)
    A.x_independent = False
    fresh = reconstruct(A)
    assert _max(shared, fresh.bridge.values(x, U)) < 1e-13
    assert fresh.bridge.stats["fibers"] == 1 and len(x) == 5
