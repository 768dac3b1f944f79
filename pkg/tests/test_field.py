import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confplane.expr import ExprDomainError, compile_expr, diff, parse
from confplane.field import (
    GridFormatError,
    MetricGrid,
    MetricPositivityError,
    ScalarGrid,
    curvature,
    curvature_verdict,
    default_tolerance,
    is_subharmonic,
    laplacian,
    read_cpg1,
    read_csv_grid,
    sample,
    write_cpg1,
    write_csv_grid,
)


def test_sample_examples():
    assert np.all(sample(parse("0"), 1, 5).values == 0)
    g = sample(parse("x"), 1, 3)
    assert np.array_equal(g.values, [[-1, 0, 1]] * 3)
    g = sample(parse("log(1+x^2+y^2)"), 2, 65)
    c = g.center_index()
    assert g.values[c, c] == 0
    assert g.values[0, 0] == pytest.approx(math.log(9))


def test_sample_rows_are_y():
    g = sample(parse("y"), 1, 3)
    assert np.array_equal(g.values[:, 0], [-1, 0, 1])


def test_sample_domain_error_reports_node():
    with pytest.raises(ExprDomainError) as info:
        sample(parse("log(x+1)"), 1, 5)
    assert info.value.point[0] == -1.0


def test_grid_validation():
    with pytest.raises(ValueError):
        ScalarGrid(1.0, 2, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ScalarGrid(1.0, 3, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        ScalarGrid(1.0, 3, np.full((3, 3), np.nan))
    g = ScalarGrid(1.0, 3, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        g.values[0, 0] = 1.0


def test_laplacian_examples():
    assert np.all(laplacian(sample(parse("7"), 1, 9)).values[1:-1, 1:-1] == 0)
    lap = laplacian(sample(parse("x^2+y^2"), 1.5, 17))
    assert np.allclose(lap.values[lap.valid], 4.0, atol=1e-11)
    assert not lap.valid[0].any() and not lap.valid[:, -1].any()
    g = sample(parse("log(1+x^2+y^2)"), 2, 129)
    c = g.center_index()
    assert laplacian(g).values[c, c] == pytest.approx(4.0, abs=10 * g.h**2 * 4 * 6)


def test_curvature_examples():
    K = curvature(sample(parse("3"), 1, 9))
    assert curvature_verdict(K) == "flat"
    K = curvature(sample(parse("x"), 2, 33))
    assert np.max(np.abs(K.values[K.valid])) < 1e-9
    K = curvature(sample(parse("log(1+x^2+y^2)"), 2, 257))
    assert np.max(np.abs(K.values[K.valid] - 4.0)) <= 1e-3


def test_curvature_overflow_is_unbounded_not_nan():
    K = curvature(sample(parse("400*x^2"), 2, 9))
    assert not np.any(np.isnan(K.values[K.valid]))
    assert curvature_verdict(K) == "unbounded"


def test_subharmonic_examples():
    v = is_subharmonic(sample(parse("x^2+y^2"), 1, 17))
    assert v.passed and v.min_laplacian == pytest.approx(4.0)
    v = is_subharmonic(sample(parse("-(x^2)"), 1, 17))
    assert not v.passed and v.min_laplacian == pytest.approx(-2.0)
    v = is_subharmonic(sample(parse("0.5*log(1+x^2+y^2)"), 4, 129))
    assert v.passed and v.min_laplacian > 0
    d = v.as_dict()
    assert set(d) == {"pass", "min_laplacian", "argmin_node", "argmin_point", "tol"}


def test_subharmonic_argmin_location():
    v = is_subharmonic(sample(parse("exp(-(x-0.5)^2-y^2)"), 2, 81))
    assert not v.passed
    assert v.point == pytest.approx((0.5, 0.0), abs=0.06)


def _laplacian_symbolic(e):
    return compile_expr(diff(diff(e, "x"), "x")), compile_expr(diff(diff(e, "y"), "y"))


@pytest.mark.parametrize("text", ["sin(x)*cos(2*y)", "exp(0.3*x-0.2*y)", "atan(x*y)", "0.7*log(1+x^2+y^2)"])
def test_stencil_consistency_and_refinement(text):
    e = parse(text)
    fxx, fyy = _laplacian_symbolic(e)
    errs = []
    for n in (65, 129):
        g = sample(e, 2.0, n)
        X, Y = g.mesh()
        exact = fxx(X, Y) + fyy(X, Y)
        lap = laplacian(g)
        errs.append(np.max(np.abs(lap.values - exact)[lap.valid]))
    assert errs[0] < 20 * (4.0 / 64) ** 2
    assert errs[0] / errs[1] >= 3.0


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2))
@settings(max_examples=30, deadline=None)
def test_curvature_sign_agrees_with_subharmonic(a, b, c):
    # a x^2 + b y^2 has Laplacian 2(a+b); a small bump keeps things nontrivial
    e = parse(f"{a!r}*x^2 + {b!r}*y^2 + {c!r}*exp(-x^2-y^2)")
    u = sample(e, 1.0, 33)
    K = curvature(u)
    tol = default_tolerance(u)
    scale = float(np.max(np.exp(2 * u.values)))
    assert (np.min(K.values[K.valid]) >= -tol * scale) == is_subharmonic(u, tol).passed


def test_metric_positivity():
    MetricGrid.euclidean(1.0, 5)
    E = np.ones((5, 5))
    F = np.zeros((5, 5))
    F[2, 3] = 1.5
    with pytest.raises(MetricPositivityError) as info:
        MetricGrid.from_arrays(1.0, E, F, E)
    assert info.value.node == (3, 2)


def test_cpg1_round_trip(tmp_path):
    g = sample(parse("sin(x)+y/3"), 1.25, 7)
    write_cpg1(g, tmp_path / "g.cpg")
    h = read_cpg1(tmp_path / "g.cpg")
    assert h.L == g.L and h.n == g.n and np.array_equal(h.values, g.values)
    write_csv_grid(g, tmp_path / "g.csv")
    assert np.array_equal(read_csv_grid(tmp_path / "g.csv", 1.25).values, g.values)


@pytest.mark.parametrize(
    "text", ["CPG2 3 1\n0 0 0\n0 0 0\n0 0 0\n", "CPG1 3 1\n0 0 0\n0 0\n0 0 0\n", "CPG1 3 1\n0 0 0\n0 a 0\n0 0 0\n"]
)
def test_cpg1_errors(tmp_path, text):
    p = tmp_path / "bad.cpg"
    p.write_text(text)
    with pytest.raises(GridFormatError):
        read_cpg1(p)
