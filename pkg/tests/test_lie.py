import json

import numpy as np
import pytest

from harmonikos.lie import AlgebraError, bracket, get_algebra, group_exp, load_algebra_file


def test_shipped_algebras_validate(sl2, u1):
    assert sl2.dim == 3 and u1.dim == 1
    assert sl2.jacobi_residual() < 1e-12
    sl2.validate()
    u1.validate()


def test_matrix_round_trip(sl2):
    rng = np.random.default_rng(3)
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert np.allclose(sl2.from_matrix(sl2.to_matrix(c)), c)
    with pytest.raises(AlgebraError):
        sl2.from_matrix(np.eye(2))


def test_bracket_matches_structure_constants(sl2):
    rng = np.random.default_rng(4)
    X, Y = sl2.random_element(rng), sl2.random_element(rng)
    Z = bracket(X, Y)
    direct = X.matrix() @ Y.matrix() - Y.matrix() @ X.matrix()
    assert np.allclose(Z.matrix(), direct)


def test_group_exp_of_compact_element_is_unitary(sl2):
    rng = np.random.default_rng(5)
    g = group_exp(sl2.random_element(rng, real=True))
    assert g.is_unitary(1e-10)
    assert abs(g.det() - 1) < 1e-10


def _write(tmp_path, doc):
    p = tmp_path / "alg.json"
    p.write_text(json.dumps(doc))
    return p


def test_algebra_file_uses_one_based_indices(tmp_path, sl2):
    f = [[i + 1, j + 1, k + 1, float(sl2.f[i, j, k].real), float(sl2.f[i, j, k].imag)]
         for i in range(3) for j in range(3) for k in range(3) if sl2.f[i, j, k] != 0]
    doc = {"name": "mine", "dim": 3, "f": f, "compact_flags": [True] * 3,
           "ip": np.real(sl2.ip).tolist()}
    alg = get_algebra("file:" + str(_write(tmp_path, doc)))
    assert np.allclose(alg.f, sl2.f)


def test_algebra_file_errors(tmp_path):
    with pytest.raises(AlgebraError):
        load_algebra_file(_write(tmp_path, {"name": "bad"}))
    broken = {"name": "j", "dim": 2, "f": [[1, 2, 1, 1.0, 0.0]], "compact_flags": [True, True],
              "ip": [[1, 0], [0, 1]]}
    with pytest.raises(AlgebraError):
        load_algebra_file(_write(tmp_path, broken))
    with pytest.raises(AlgebraError):
        get_algebra("nope")
