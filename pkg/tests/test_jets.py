import numpy as np
import pytest

from harmonikos.jets import Jet, expm_nilpotent, jet_space, stack


def test_scalar_products_and_inverse():
    sp = jet_space(((1, 4),))
    e = Jet.variable(sp, 0)
    one = Jet.const(sp, np.array(1.0))
    p = (one + e) * (one + e)
    assert np.allclose([p.coeff((k,)) for k in range(5)], [1, 2, 1, 0, 0])
    q = (one + e).reciprocal()
    assert np.allclose([q.coeff((k,)) for k in range(5)], [1, -1, 1, -1, 1])


def test_matrix_inverse_matches_finite_difference():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    B = rng.standard_normal((3, 3))
    sp = jet_space(((1, 2),))
    M = Jet.const(sp, A) + Jet.variable(sp, 0) * B
    inv = M.inv()
    h = 1e-4
    fd = (np.linalg.inv(A + h * B) - np.linalg.inv(A - h * B)) / (2 * h)
    assert np.allclose(inv.value, np.linalg.inv(A))
    assert np.allclose(inv.coeff((1,)), fd, atol=1e-7)
    assert np.allclose((inv @ M).value, np.eye(3))
    assert np.abs((inv @ M).data[1:]).max() < 1e-12


def test_mixed_groups_truncate_per_group():
    sp = jet_space(((1, 1), (1, 1)))
    a, b = Jet.variable(sp, 0), Jet.variable(sp, 1)
    prod = a * b
    assert prod.coeff((1, 1)) == pytest.approx(1.0)
    assert np.abs((a * a).data).max() == 0.0


def test_expm_nilpotent_of_scaled_generator():
    sp = jet_space(((1, 3),))
    N = np.array([[0, 1], [0, 0]], complex)
    E = expm_nilpotent(Jet.variable(sp, 0) * N, order=3)
    assert np.allclose(E.value, np.eye(2))
    assert np.allclose(E.coeff((1,)), N)


def test_stack_and_derivative():
    sp = jet_space(((2, 2),))
    x, y = Jet.variable(sp, 0, 0.5), Jet.variable(sp, 1, -1.0)
    f = stack([x * y, x * x])
    assert f.shape == (2,)
    assert np.allclose(f.derivative(0).value, [-1.0, 1.0])


def _dense(j):
    return Jet(j.space, j.data.copy(), np.ones_like(j.nz))


def test_sparse_paths_match_dense():
    from harmonikos.ode import _lincomb
    sp = jet_space(((3, 2),))
    rng = np.random.default_rng(7)
    M = rng.standard_normal((4, 2, 2))
    a = Jet.const(sp, M) + Jet.variable(sp, 1) * np.eye(2)      # only value and one first-order slot
    b = Jet.const(sp, M[::-1].copy())
    for fn in (lambda u, v: u + v, lambda u, v: -u, lambda u, v: u * 2.5, lambda u, v: u @ M[0],
               lambda u, v: M[1] @ u, lambda u, v: stack([u, v], axis=1),
               lambda u, v: _lincomb(u, [v, u], [0.3, -1.2])):
        sparse, dense = fn(a, b), fn(_dense(a), _dense(b))
        assert np.array_equal(sparse.data, dense.data)
    assert not (a + b).nz.all()


def test_unrolled_matmul_matches_numpy():
    from harmonikos.jets import _matmul
    rng = np.random.default_rng(3)
    for sa, sb in (((3, 1, 2, 2), (5, 2, 2)), ((2, 2), (4, 2, 2)), ((7, 3, 3), (3, 3))):
        a = rng.standard_normal(sa) + 1j * rng.standard_normal(sa)
        b = rng.standard_normal(sb)
        assert np.allclose(_matmul(a, b), a @ b, atol=1e-14)
