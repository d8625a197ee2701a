import numpy as np
import pytest

from harmonikos.fields import (ChargeError, DSLField, ParseError, PrepotentialError, load_source,
                               make_prepotential, parse)

from conftest import points


def test_charge_and_atoms():
    e = parse("0.5*T2*xm1*xm2 - T1*um1*xm2")
    assert e.charge == -2
    assert e.normalized_form
    assert not parse("T1*xp1*xm1*xm2^2").normalized_form


def test_unary_minus_and_powers():
    a = parse("-T1*xm1^2")
    b = parse("(-1)*T1*xm1*xm1")
    assert a.polynomial == b.polynomial


def test_product_of_generators_rejected():
    with pytest.raises(ParseError):
        parse("T1*T2*xm1*xm2")


def test_mixed_charges_rejected():
    with pytest.raises((ParseError, ChargeError)):
        parse("T1*xm1*xm2 + T1*xm1")


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as info:
        parse("T1*xm1*)")
    assert info.value.position is not None


def test_prepotential_guards(u1, sl2):
    with pytest.raises(PrepotentialError):
        make_prepotential("T1*xm1", u1)
    with pytest.raises(PrepotentialError):
        make_prepotential("T1*xp1*xm1*xm2", u1)
    with pytest.raises(ParseError):
        make_prepotential("T4*xm1*xm2", sl2)


def test_zero_prepotential_evaluates_to_zero(sl2):
    f = make_prepotential("0", sl2)
    x, U = points(0, 5)
    assert np.all(f.values(x, U) == 0)
    assert f.values(x, U).shape == (5, 2, 2)


def test_evaluation_matches_hand_formula(u1):
    f = DSLField(parse("0.7*T1*xm1*xm2"), u1)
    x, U = points(1, 6)
    xm = np.einsum("nia,ni->na", x, U[:, :, 1])
    expected = 0.7 * xm[:, 0] * xm[:, 1]
    assert np.allclose(f.values(x, U)[:, 0, 0], expected * u1.matrices[0][0, 0])


def test_load_source_reads_files(tmp_path):
    p = tmp_path / "A.txt"
    p.write_text("T1*xm1*xm2\n", encoding="utf-8")
    assert load_source(str(p)) == "T1*xm1*xm2"
    assert load_source("T1*xm2^2") == "T1*xm2^2"
