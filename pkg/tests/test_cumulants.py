import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from portvar.cumulants import (
    CumulantMatrix,
    IngestionError,
    ReturnSeries,
    cumulants_to_moments,
    estimate_matrix,
    moments_to_cumulants,
    raw_moments,
    read_returns_csv,
)


def test_raw_moments_constant():
    c = 1.7
    np.testing.assert_allclose(raw_moments(ReturnSeries("a", [c] * 5), 3), [c, c**2, c**3])


def test_raw_moments_symmetric_pair():
    np.testing.assert_allclose(raw_moments([1.0, -1.0], 2), [0.0, 1.0])


def test_raw_moments_arithmetic():
    xs = [0.1, 0.2, 0.3]
    np.testing.assert_allclose(raw_moments(xs, 2), [sum(xs) / 3, sum(v * v for v in xs) / 3])


def test_constant_has_no_higher_cumulants():
    c = -0.4
    np.testing.assert_allclose(moments_to_cumulants([c, c**2, c**3]), [c, 0, 0], atol=1e-15)


def test_two_point_cumulants_against_series():
    # oracle: series of log((e^t + e^-t)/2) = log cosh t
    t = sp.symbols("t")
    series = sp.series(sp.log(sp.cosh(t)), t, 0, 5).removeO()
    kappa = [float(series.coeff(t, j) * sp.factorial(j)) for j in range(1, 5)]
    assert kappa == [0.0, 1.0, 0.0, -2.0]
    np.testing.assert_allclose(moments_to_cumulants([0, 1, 0, 1]), kappa, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=30))
def test_variance_identity(xs):
    m = raw_moments(xs, 2)
    k = moments_to_cumulants(m)
    assert k[1] == pytest.approx(m[1] - m[0] ** 2, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_moment_cumulant_roundtrip(kappa):
    back = moments_to_cumulants(cumulants_to_moments(kappa))
    np.testing.assert_allclose(back, kappa, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=5, max_size=20), st.floats(-1, 1))
def test_shift_only_moves_first_cumulant(xs, c):
    a = moments_to_cumulants(raw_moments(xs, 4))
    b = moments_to_cumulants(raw_moments([v + c for v in xs], 4))
    assert b[0] == pytest.approx(a[0] + c, abs=1e-9)
    np.testing.assert_allclose(b[1:], a[1:], atol=1e-7)


def test_estimate_constant_series_invalid():
    k = estimate_matrix([ReturnSeries("a", [1.0] * 4), ReturnSeries("b", [2.0] * 4)], 3)
    np.testing.assert_allclose(k.entries[:, 1:], 0, atol=1e-15)
    assert not k.is_valid


def test_estimate_single_pair_series():
    k = estimate_matrix([ReturnSeries("a", [1.0, -1.0, 1.0, -1.0])], 2)
    np.testing.assert_allclose(k.entries, [[0.0, 1.0]])
    assert not k.is_valid
    assert k.zero_entries() == [(1, 1)]


def test_estimate_gaussian_like():
    rng = np.random.default_rng(7)
    series = [ReturnSeries(f"a{i}", rng.normal(0.01 * i, 0.2, 200_000)) for i in range(2)]
    k = estimate_matrix(series, 4)
    assert k.entries.shape == (2, 4)
    np.testing.assert_allclose(k.entries[:, 1], 0.04, rtol=0.02)
    np.testing.assert_allclose(k.entries[:, 2:], 0.0, atol=2e-3)


def test_estimate_needs_enough_samples():
    with pytest.raises(IngestionError):
        estimate_matrix([ReturnSeries("a", [1.0, 2.0])], 3)


def test_matrix_json_roundtrip():
    k = CumulantMatrix(np.arange(1.0, 7.0).reshape(2, 3))
    back = CumulantMatrix.from_json(k.to_json())
    np.testing.assert_array_equal(back.entries, k.entries)
    assert json.loads(k.to_json())["n"] == 2


def test_matrix_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        CumulantMatrix.from_dict({"n": 3, "d": 2, "entries": [[1, 2], [3, 4]]})


def test_column_is_one_based():
    k = CumulantMatrix([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(k.column(2), [2.0, 4.0])


def test_read_csv(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("x,y\n0.1,0.2\n0.3,-0.1\n")
    series = read_returns_csv(p)
    assert [s.asset_id for s in series] == ["x", "y"]
    assert series[1].samples == (0.2, -0.1)


@pytest.mark.parametrize("body", ["x,y\n0.1,\n", "x,y\n0.1,nan\n", "x,y\n0.1\n", "x,y\n0.1,abc\n"])
def test_read_csv_rejects_bad_rows(tmp_path, body):
    p = tmp_path / "r.csv"
    p.write_text(body)
    with pytest.raises(IngestionError):
        read_returns_csv(p)
