import warnings

import numpy as np
import pytest

from helpers import match_multisets, random_model
from portvar.critical import (
    DegreeDropError,
    ModelError,
    build_critical_system,
    build_start_system,
    companion_roots,
    expected_count,
    optimize,
    oracle_n2,
    solve_critical,
    solve_strata,
    strata_count,
)
from portvar.model import PointClass, UtilityModel
from portvar.tracker import TrackerConfig, relative_residual


def test_counts():
    assert expected_count(2, 4) == 3 and expected_count(3, 3) == 4
    assert strata_count(2, 4) == 6 and strata_count(3, 3) == 5


def test_d2_system_linear(markowitz):
    crit = build_critical_system(markowitz)
    assert crit.system.degrees() == [1, 1]


def test_n2_d4_degrees(rng):
    crit = build_critical_system(random_model(rng, 2, 4))
    assert crit.system.degrees() == [3, 1]
    assert crit.system.bezout_number() == 3


def test_n1_system():
    m = UtilityModel.from_arrays([[0.1, 0.2, 0.3]], [1, 1, 1])
    res = solve_critical(m)
    assert res.count == 1
    np.testing.assert_allclose(res.points[0].x, [1.0])


def test_start_system_generic(rng):
    m = random_model(rng, 3, 4)
    start = build_start_system(m, rng)
    assert len(start.solutions) == 9 and not start.fallback
    for x in start.solutions:
        assert np.max(np.abs(start.system.evaluate(x))) < 1e-12


def test_start_system_degenerate_tuple():
    # k_13 = k_23 = 1: zeta = -1 gives x_2 = -x_1, off the budget plane
    m = UtilityModel.from_arrays([[0.1, 0.3, 1.0], [0.2, 0.5, 1.0]], [1.0, -0.5, 0.3])
    start = build_start_system(m, np.random.default_rng(0))
    assert start.fallback
    assert start.degenerate_tuples == [(1,)]
    assert len(start.solutions) == 2
    # the same coincidence puts one target root at infinity: only one finite point
    with pytest.warns(UserWarning):
        res = solve_critical(m)
    assert res.start_fallback and res.count == 1
    with pytest.raises(DegreeDropError):
        oracle_n2(m)


def test_start_system_d2(markowitz):
    start = build_start_system(markowitz)
    assert len(start.solutions) == 1


def test_markowitz_solution(markowitz):
    res = solve_critical(markowitz)
    assert res.count == 1
    np.testing.assert_allclose(res.points[0].x, [2 / 3, 1 / 3], atol=1e-12)
    assert res.classifications() == [PointClass.REAL_FEASIBLE]


@pytest.mark.parametrize("n, d", [(2, 4), (3, 3), (2, 5)])
def test_generic_counts(n, d):
    m = random_model(np.random.default_rng(n * 10 + d), n, d)
    res = solve_critical(m)
    assert res.count == expected_count(n, d) and res.count_matches
    for p in res.paths:
        assert relative_residual(build_critical_system(m).system, p.x) < 1e-10


def test_multiplier_is_common_value(rng):
    m = random_model(rng, 3, 3)
    crit = build_critical_system(m)
    res = solve_critical(m)
    from portvar.model import utility_gradient

    for p in res.points:
        np.testing.assert_allclose(utility_gradient(m, p.x), p.lam, rtol=1e-9, atol=1e-9)
        assert p.lam == crit.multiplier(p.x)


def test_refuses_zero_top_weight():
    m = UtilityModel.from_arrays(np.ones((2, 3)), [1, 1, 0])
    with pytest.raises(ModelError):
        solve_critical(m)


def test_refuses_zero_cumulant():
    m = UtilityModel.from_arrays([[1.0, 0.0, 1.0], [1.0, 1.0, 1.0]], [1, 1, 1])
    with pytest.raises(ModelError):
        solve_critical(m)


def test_strata(rng):
    m = random_model(rng, 2, 4)
    strata = solve_strata(m)
    assert {e: r.count for e, r in strata.items()} == {4: 3, 3: 2, 2: 1}


def test_strata_skip_zero_top():
    rng = np.random.default_rng(3)
    w = rng.standard_normal(4)
    w[3] = 0.0
    strata = solve_strata(UtilityModel.from_arrays(rng.standard_normal((2, 4)), w))
    assert strata[4] is None and strata[3].count == 2


def test_oracle_markowitz(markowitz):
    (p,) = oracle_n2(markowitz)
    assert p.x[0].real == pytest.approx(2 / 3, abs=1e-14)


def test_oracle_d4_count(rng):
    assert len(oracle_n2(random_model(rng, 2, 4))) == 3


def test_oracle_matches_solver_d5():
    m = random_model(np.random.default_rng(55), 2, 5)
    res = solve_critical(m)
    assert match_multisets([p.x for p in res.points], [p.x for p in oracle_n2(m)]) < 1e-6


def test_companion_roots_known():
    # (x - 1)(x - 2)(x + 3) = x^3 - 7x + 6
    np.testing.assert_allclose(sorted(companion_roots(np.array([6.0, -7.0, 0.0, 1.0])).real), [-3, 1, 2])
    with pytest.raises(DegreeDropError):
        companion_roots(np.array([1.0, 2.0, 0.0]))


def test_conjugate_pairs_real_data(rng):
    m = random_model(rng, 2, 6)
    xs = [p.x for p in solve_critical(m).points]
    assert match_multisets(xs, [x.conj() for x in xs]) < 1e-8


def test_mismatch_warns():
    # on the discriminant: P_1(x) - P_2(1 - x) has a double root
    # two assets, d = 3: A x^2 + B x + C with B^2 = 4AC
    k = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 2.0]])
    # choose w_1 so that C = B^2 / (4A); A = -3 w3, B = 2 w2 * 2 + 6 w3, C = -2 w2 - 6 w3
    w2, w3 = 1.0, 1.0
    a, b = 3 * w3 * (1 - 2), 2 * w2 * 1 + 2 * w2 * 1 + 2 * 3 * w3 * 2
    c_needed = b * b / (4 * a)
    # C = w1 (k11 - k21) - b1 - b2 with k11 = k21, so shift via k11 instead
    k[0, 0] = 1.0 + (c_needed + 2 * w2 + 6 * w3)
    m = UtilityModel.from_arrays(k, [1.0, w2, w3])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = solve_critical(m)
    assert not res.count_matches
    assert any("expected 2" in str(w.message) for w in caught)
    assert "nearest_pair_distance" in res.diagnostics


def test_reproducible_json(rng):
    m = random_model(rng, 3, 3)
    a = solve_critical(m, TrackerConfig(seed=4)).to_dict()
    b = solve_critical(m, TrackerConfig(seed=4)).to_dict()
    import json

    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_optimize_markowitz(markowitz):
    opt = optimize(markowitz)
    np.testing.assert_allclose(opt.best.x.real, [2 / 3, 1 / 3], atol=1e-12)
    assert opt.utility == pytest.approx(0.08 * 2 / 3 + 0.06 / 3 - 0.5 * (0.04 * 4 / 9 + 0.02 / 9))


def test_optimize_no_interior():
    # optimum of E - V/2 outside (0, 1): x* = (E1 - E2 + V2)/(V1 + V2) = 3
    m = UtilityModel.from_arrays([[0.5, 0.1], [0.1, 0.1]], [1.0, -0.5])
    opt = optimize(m)
    assert opt.best is None
    assert opt.to_dict()["message"] == "no interior critical portfolio"
