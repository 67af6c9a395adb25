import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import covariate_rows
from leakstudy.crosssection import build_design, correlations, regress, signed_log, stars
from leakstudy.errors import DomainError, EmptySampleError, SingularDesignError

DEP = "CAR[0,1]"


def test_issue_size_is_log_amount():
    rows, _ = covariate_rows(0, n=3)
    r = replace(rows[0], size_usd=534.49)
    assert r.transformed()["Issue Size"] == pytest.approx(6.281, abs=5e-4)


@pytest.mark.parametrize("x,expected", [(0.0, 0.0), (math.e - 1, 1.0), (-(math.e - 1), -1.0)])
def test_signed_log(x, expected):
    assert signed_log(x) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-1e6, 1e6))
def test_signed_log_is_odd_and_monotone(x):
    assert signed_log(-x) == -signed_log(x)
    assert signed_log(x + 1.0) >= signed_log(x)


def test_option_flag_changes_one_column():
    rows, _ = covariate_rows(1, n=30, fixed_effects=())
    flipped = [replace(rows[0], option=not rows[0].option)] + rows[1:]
    a = build_design(rows, DEP, ())
    b = build_design(flipped, DEP, ())
    diff = np.argwhere(a.X != b.X)
    assert set(diff[:, 1]) == {a.names.index("Option in Issue")}
    assert set(diff[:, 0]) == {0}


def test_reference_category_dropped():
    rows, _ = covariate_rows(2, n=60)
    d = build_design(rows, DEP, ("day",))
    day_cols = [n for n in d.names if n.startswith("day=")]
    present = {r.fe_value("day") for r in rows}
    assert len(day_cols) == len(present) - 1
    assert "day=Mon" not in day_cols


def test_complete_case_and_sample_filter():
    rows, _ = covariate_rows(3, n=20)
    rows[4] = replace(rows[4], roa=None)
    d = build_design(rows, DEP, ())
    assert d.dropped == (rows[4].event_id,) and len(d.y) == 19
    fin = build_design(rows, DEP, (), sample="Financial")
    assert all(int(e[1:]) % 2 for e in fin.event_ids)
    with pytest.raises(EmptySampleError):
        build_design(rows, DEP, (), sample="Utilities")
    with pytest.raises(DomainError):
        build_design(rows, DEP, ("month",))


def test_recovery_within_three_se():
    rows, truth = covariate_rows(4, n=100, sigma=0.01)
    res = regress(build_design(rows, DEP, ("day", "year", "region")))
    for row in res.rows:
        assert abs(row.coef - truth[row.name]) < 3 * row.std_err, row.name


def test_zero_dependent():
    rows, _ = covariate_rows(5, n=50)
    rows = [replace(r, cars={DEP: 0.0}) for r in rows]
    res = regress(build_design(rows, DEP, ()))
    assert all(abs(r.coef) < 1e-12 for r in res.rows)
    assert res.r2 == 0.0


def test_duplicated_covariate_is_singular():
    rows, _ = covariate_rows(6, n=50)
    rows = [replace(r, tobins_q=r.de) for r in rows]
    with pytest.raises(SingularDesignError) as exc:
        regress(build_design(rows, DEP, ()))
    assert "D/E" in exc.value.context["columns"] and "Tobin's Q" in exc.value.context["columns"]


def test_fixed_effects_weakly_raise_r2():
    rows, _ = covariate_rows(7, n=100, sigma=0.5)
    r2 = [regress(build_design(rows, DEP, fe)).r2 for fe in [("day",), ("day", "year"), ("day", "year", "region")]]
    assert r2[0] <= r2[1] + 1e-12 <= r2[2] + 2e-12


@given(st.randoms())
def test_row_permutation_invariance(rnd):
    rows, _ = covariate_rows(8, n=80)
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = regress(build_design(rows, DEP, ("day", "region")))
    b = regress(build_design(shuffled, DEP, ("day", "region")))
    np.testing.assert_allclose([r.coef for r in a.rows], [r.coef for r in b.rows], rtol=1e-9, atol=1e-12)
    assert a.r2 == pytest.approx(b.r2, rel=1e-12)


@pytest.mark.parametrize("p,s", [(0.005, "***"), (0.03, "**"), (0.07, "*"), (0.2, ""), (float("nan"), "")])
def test_stars(p, s):
    assert stars(p) == s


def test_robust_errors_differ_but_coefs_match():
    rows, _ = covariate_rows(9, n=100, sigma=0.2)
    d = build_design(rows, DEP, ())
    a, b = regress(d), regress(d, robust=True)
    np.testing.assert_allclose([r.coef for r in a.rows], [r.coef for r in b.rows])
    assert [r.std_err for r in a.rows] != [r.std_err for r in b.rows]


# --------------------------------------------------------------------------- correlations

def test_correlation_examples():
    x = np.random.default_rng(10).normal(size=50)
    c = correlations(np.column_stack([x, x, -x])).matrix
    assert c[0, 1] == pytest.approx(1.0) and c[0, 2] == pytest.approx(-1.0)


def test_independent_columns_near_zero():
    X = np.random.default_rng(11).normal(size=(10_000, 4))
    c = correlations(X).matrix
    off = c[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 0.05)


def test_constant_column_flagged():
    X = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    res = correlations(X, ["a", "b"])
    assert res.undefined == ("b",)
    assert np.isnan(res.matrix[0, 1]) and res.matrix[0, 0] == 1.0


@given(st.integers(0, 2**32 - 1), st.integers(3, 40), st.integers(1, 6))
def test_correlation_matrix_shape(seed, n, p):
    X = np.random.default_rng(seed).normal(size=(n, p))
    c = correlations(X).matrix
    assert np.allclose(c, c.T, equal_nan=True)
    assert np.all(np.diag(c) == 1.0)
    assert np.all((c >= -1) & (c <= 1))
    np.testing.assert_allclose(c, np.corrcoef(X, rowvar=False), atol=1e-12)
