import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from portvar.model import (
    PointClass,
    PortfolioPoint,
    UtilityModel,
    build_asset_polynomials,
    classify_point,
    evaluate_utility,
    has_global_max,
    utility_gradient,
)


def test_markowitz_asset_polynomial():
    m = UtilityModel.from_arrays([[0.08, 0.04]], [1.0, -0.5])
    np.testing.assert_allclose(build_asset_polynomials(m), [[0.08, -0.04]])


def test_zero_weights_zero_polynomials():
    m = UtilityModel.from_arrays(np.ones((3, 4)), np.zeros(4))
    assert not np.any(build_asset_polynomials(m))
    assert evaluate_utility(m, np.full(3, 1 / 3)) == 0.0


def test_single_top_term():
    m = UtilityModel.from_arrays([[1.0, 2.0, 3.0, 0.5]], [0, 0, 0, 1.0])
    np.testing.assert_allclose(build_asset_polynomials(m), [[0, 0, 0, 2.0]])


def test_markowitz_closed_form_value(markowitz):
    e1, e2, v1, v2 = 0.08, 0.06, 0.04, 0.02
    x = (e1 - e2 + v2) / (v1 + v2)
    assert x == pytest.approx(2 / 3)
    direct = x * e1 + (1 - x) * e2 - 0.5 * (x**2 * v1 + (1 - x) ** 2 * v2)
    assert evaluate_utility(markowitz, [x, 1 - x]) == pytest.approx(direct, abs=1e-15)
    # the closed form is a stationary point on the line
    g = utility_gradient(markowitz, [x, 1 - x])
    assert g[0] == pytest.approx(g[1], abs=1e-15)


def test_identical_assets_uniform_point():
    k, w, n = np.array([0.3, 1.1, -0.4]), np.array([1.0, -0.5, 0.2]), 4
    m = UtilityModel.from_arrays(np.tile(k, (n, 1)), w)
    expected = n * sum(w[j] * k[j] * n ** -(j + 1) for j in range(3))
    assert evaluate_utility(m, np.full(n, 1 / n)) == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_gradient_matches_finite_difference(xy):
    m = UtilityModel.from_arrays([[0.2, 1.0, -0.3, 0.7], [0.1, 0.5, 0.4, 1.1]], [1.0, -0.4, 0.2, -0.1])
    x = np.array(xy)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (evaluate_utility(m, x + e) - evaluate_utility(m, x - e)) / (2 * h)
        assert utility_gradient(m, x)[i] == pytest.approx(fd, abs=1e-6)


def test_global_max_cases():
    k = np.abs(np.random.default_rng(0).standard_normal((3, 4))) + 0.1
    assert has_global_max(UtilityModel.from_arrays(k, [1, -1, 1, -0.5]))
    assert not has_global_max(UtilityModel.from_arrays(k[:, :3], [1, -1, 1]))
    mixed = k.copy()
    mixed[1, 3] *= -1
    assert not has_global_max(UtilityModel.from_arrays(mixed, [1, -1, 1, -0.5]))
    assert not has_global_max(UtilityModel.from_arrays(k, [1, -1, 1, 0.5]))


@pytest.mark.parametrize(
    "x, expected",
    [
        ((0.5, 0.5), PointClass.REAL_FEASIBLE),
        ((1.0, 0.0), PointClass.DEGENERATE),
        ((0.5 + 1e-3j, 0.5 - 1e-3j), PointClass.COMPLEX),
        ((1.5, -0.5), PointClass.REAL),
    ],
)
def test_classify(x, expected):
    assert classify_point(PortfolioPoint(np.array(x), 0.1)) is expected


def test_model_json_roundtrip():
    m = UtilityModel.from_arrays([[1.0, 2.0], [3.0, 4.0]], [1.0, -0.5])
    back = UtilityModel.from_json(__import__("json").dumps(m.to_dict()))
    np.testing.assert_array_equal(back.k.entries, m.k.entries)
    np.testing.assert_array_equal(back.w.w, m.w.w)


def test_weight_length_must_match():
    with pytest.raises(ValueError):
        UtilityModel.from_arrays([[1.0, 2.0]], [1.0])
