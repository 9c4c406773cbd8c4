import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import central_jacobian
from portvar.model import UtilityModel
from portvar.polysys import (
    DimensionError,
    MultiPoly,
    ParamFamily,
    PolySystem,
    solutions_at_infinity_check,
)


def lin(a, b, c):
    return MultiPoly([(a, (1, 0)), (b, (0, 1)), (c, (0, 0))], 2)


def test_zero_system():
    sys_ = PolySystem([MultiPoly([], 2), MultiPoly([], 2)])
    np.testing.assert_array_equal(sys_.evaluate([1.5, -2j]), 0)
    np.testing.assert_array_equal(sys_.jacobian([1.5, -2j]), 0)


def test_constraint_vanishes():
    sys_ = PolySystem([lin(1, 1, -1), lin(1, -1, 0)])
    assert sys_.evaluate([0.3, 0.7])[0] == pytest.approx(0, abs=1e-15)


def test_linear_jacobian_constant():
    sys_ = PolySystem([lin(2, 3, 1), lin(-1, 4, 0)])
    for x in ([0, 0], [1 + 1j, -2]):
        np.testing.assert_array_equal(sys_.jacobian(x), [[2, 3], [-1, 4]])


def test_monomial_jacobian():
    sys_ = PolySystem([MultiPoly([(1, (2, 0))], 2), MultiPoly([(1, (0, 3))], 2)])
    np.testing.assert_array_equal(sys_.jacobian([1, 1]), np.diag([2, 3]))


def test_terms_merge_and_drop():
    p = MultiPoly([(1, (1, 0)), (2, (1, 0)), (5, (0, 1)), (-5, (0, 1))], 2)
    assert p.terms == [(3 + 0j, (1, 0))]
    assert p.degree == 1


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        PolySystem([lin(1, 1, 1)])
    with pytest.raises(DimensionError):
        MultiPoly([(1, (1,))], 2)


def test_bezout():
    sys_ = PolySystem([MultiPoly([(1, (3, 0)), (1, (0, 1))], 2), lin(1, 1, -1)])
    assert sys_.degrees() == [3, 1]
    assert sys_.bezout_number() == 3


def random_cubic(rng, n=3):
    eqs = []
    for _ in range(n):
        exps = rng.integers(0, 3, size=(6, n))
        coefs = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        eqs.append(MultiPoly(list(zip(coefs, exps)), n))
    return PolySystem(eqs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    sys_ = random_cubic(rng)
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    fd = central_jacobian(sys_.evaluate, x)
    jac = sys_.jacobian(x)
    assert np.max(np.abs(jac - fd)) <= 1e-6 * max(1.0, np.max(np.abs(jac)))


def test_evaluate_matches_direct_sum(rng):
    sys_ = random_cubic(rng)
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    direct = [sum(c * np.prod(x**e) for c, e in eq.terms) for eq in sys_.equations]
    np.testing.assert_allclose(sys_.evaluate(x), direct, rtol=1e-13)


def test_param_family_endpoints(rng):
    a, b = random_cubic(rng), random_cubic(rng)
    g = np.exp(0.3j)
    fam = ParamFamily(a, b, g)
    x = rng.standard_normal(3) + 0j
    np.testing.assert_allclose(fam.evaluate(x, 1.0), g * a.evaluate(x))
    np.testing.assert_allclose(fam.evaluate(x, 0.0), b.evaluate(x))
    h = 1e-6
    fd = (fam.evaluate(x, 0.5 + h) - fam.evaluate(x, 0.5 - h)) / (2 * h)
    np.testing.assert_allclose(fam.dt(x), fd, rtol=1e-6, atol=1e-8)


def test_gamma_must_be_unit(rng):
    a = random_cubic(rng)
    with pytest.raises(ValueError):
        ParamFamily(a, a, 2.0)


def test_infinity_check():
    k = np.ones((3, 3))
    assert str(solutions_at_infinity_check(UtilityModel.from_arrays(k, [1, 1, 1]))) == "clean"
    rep = solutions_at_infinity_check(UtilityModel.from_arrays(k, [1, 1, 0]))
    assert not rep.clean and rep.reasons == ("w_d zero",)
    k[1, 2] = 0
    assert str(solutions_at_infinity_check(UtilityModel.from_arrays(k, [1, 1, 1]))) == "dirty(k_2d zero)"
