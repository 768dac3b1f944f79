import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _geometry import brioschi_curvature
from confplane.asymptotics import alpha_estimate, s_alpha_member
from confplane.deform import (
    DeformationPath,
    ProfileError,
    RevolutionProfile,
    completion_curvature,
    completion_factor,
    completion_path,
    cone_cap_profile,
    convex_path,
    flatness_test,
    revolve,
    revolve_curvature,
)
from confplane.expr import evaluate, parse, to_text
from confplane.field import MetricGrid, sample
from confplane.oracle import EscapeVerdict, conformal_length, polyline, ray_escape_search


def test_convex_path_endpoints_exact():
    u0, u1 = parse("x^2+y^2"), parse("sin(x)")
    assert convex_path(u0, u1, 0.0) is u0
    assert convex_path(u0, u1, 1.0) is u1
    g0 = sample(u0, 2, 17)
    assert np.array_equal(sample(convex_path(u0, u1, 0.0), 2, 17).values, g0.values)


def test_convex_path_constants():
    assert to_text(convex_path(parse("0"), parse("2"), 0.25)) == "0.5"
    with pytest.raises(ValueError):
        convex_path(parse("0"), parse("1"), 1.5)


def test_convex_path_alpha_interpolates():
    u = convex_path(parse("0.3*log(1+x^2+y^2)"), parse("0.9*log(1+x^2+y^2)"), 0.5)
    assert alpha_estimate(u).value == pytest.approx(0.5 * 0.6 + 0.5 * 1.8, abs=0.03)


@given(st.floats(0.0, 0.6), st.floats(0.0, 0.6), st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_convexity_closure(c0, c1, s):
    u0 = parse(f"{c0!r}*log(1+x^2+y^2)")
    u1 = parse(f"{c1!r}*log(1+x^2+y^2)")
    alpha = 2 * max(c0, c1)
    if s_alpha_member(u0, alpha) and s_alpha_member(u1, alpha):
        assert s_alpha_member(convex_path(u0, u1, s), alpha)


def test_deformation_path():
    path = DeformationPath(parse("0"), parse("2"))
    assert [evaluate(e, (0, 0)) for e in path.members()] == [0, 0.5, 1.0, 1.5, 2.0]
    comp = DeformationPath(parse("x"), rule="completion", samples=(0.0, 1.0))
    assert comp.at(0.0) == parse("x")
    assert parse(comp.describe()[1]["u"]) == completion_factor(parse("x"), 1.0)
    assert evaluate(parse(comp.describe()[1]["u"]), (0, 0)) == pytest.approx(-0.5 * math.log(2))
    with pytest.raises(ValueError):
        DeformationPath(parse("x"), rule="other").at(0.5)


def test_completion_path_examples():
    u = parse("0.2*x*y")
    g = completion_path(u, 0.0, 2.0, 17)
    grid = sample(u, 2.0, 17)
    assert np.allclose(g.E.values, np.exp(-2 * grid.values), rtol=1e-15)
    assert np.all(g.F.values == 0)
    g = completion_path(parse("x"), 1.0, 2.0, 17)
    assert np.allclose(g.E.values, 1 + np.exp(-2 * sample(parse("x"), 2.0, 17).values))
    assert np.array_equal(g.E.values, g.G.values)


def test_completion_path_oracle():
    rep = ray_escape_search(completion_factor(parse("x"), 1.0))
    assert rep.verdict is EscapeVerdict.NO_WITNESS
    for ray in rep.rays:
        R = np.array(ray.checkpoints)
        assert np.all(np.array(ray.partial) >= (R - 1) - 1e-9)
    assert ray_escape_search(completion_factor(parse("x"), 0.0)).verdict is EscapeVerdict.WITNESS


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=6, unique=True), st.floats(0.01, 4.0))
@settings(max_examples=40, deadline=None)
def test_completion_length_lower_bound(points, s):
    pts = np.array(points)
    if np.any(np.hypot(*np.diff(pts, axis=0).T) < 1e-6):
        return
    path = polyline(pts)
    u = parse("0.5*x - 0.3*y^2")
    res = conformal_length(completion_factor(u, s), path)
    assert res.value >= math.sqrt(s) * path.euclidean_length - res.error - 1e-9


def test_completion_curvature_reported():
    rep = completion_curvature(parse("0.5*log(1+x^2+y^2)"), 1.0)
    assert rep["verdict"] in ("flat", "nonnegative", "mixed", "unbounded")
    assert rep["min_K"] <= rep["max_K"]


def test_revolve_constant_profile_is_flat():
    g = revolve(RevolutionProfile.from_expr("3"), 2.0, 33)
    assert np.all(g.E.values == 1) and np.all(g.F.values == 0) and np.all(g.G.values == 1)
    assert np.all(revolve_curvature(RevolutionProfile.from_expr("3"), np.linspace(0, 5, 11)) == 0)


def test_revolve_cone_cap():
    p = cone_cap_profile()
    g = revolve(p, 4.0, 129)
    X, Y = g.E.mesh()
    r = np.hypot(X, Y)
    inside = r < 1
    assert np.all(g.E.values[inside] == 1) and np.all(g.F.values[inside] == 0) and np.all(g.G.values[inside] == 1)
    cone = r > 3
    with np.errstate(invalid="ignore", divide="ignore"):
        assert np.allclose(g.E.values[cone], (1 + X**2 / r**2)[cone])
        assert np.allclose(g.F.values[cone], (X * Y / r**2)[cone])
    assert np.all(revolve_curvature(p, np.linspace(3.0, 10, 50)) == 0)
    rs = np.linspace(0, 10, 5001)
    assert np.min(revolve_curvature(p, rs)) >= -1e-9
    assert float(p.f(np.array([3.0]))[0]) == pytest.approx(3.0)
    assert float(p.f(np.array([0.5]))[0]) == 2.0


def test_cone_cap_is_c2():
    p = cone_cap_profile()
    for knot in (1.0, 3.0):
        lo, hi = np.array([knot - 1e-9]), np.array([knot + 1e-9])
        for fn in (p.f, p.df, p.d2f):
            assert abs(fn(hi)[0] - fn(lo)[0]) < 1e-7


def test_revolve_paraboloid_curvature():
    p = RevolutionProfile.from_expr("x^2")
    r = np.linspace(0.0, 3.0, 31)
    assert np.allclose(revolve_curvature(p, r), 4 / (1 + 4 * r**2) ** 2, rtol=1e-14)
    assert revolve_curvature(p, np.array([0.0]))[0] == 4.0


def test_revolve_brioschi_cross_check():
    for p in (cone_cap_profile(), RevolutionProfile.from_expr("0.5*x^2")):
        L, n = 4.0, 257
        g = revolve(p, L, n)
        K = brioschi_curvature(g.E.values, g.F.values, g.G.values, g.E.h)
        X, Y = g.E.mesh()
        exact = revolve_curvature(p, np.hypot(X, Y))
        assert np.max(np.abs(K - exact)[2:-2, 2:-2]) <= 1e-3


def test_revolve_rejects_bad_profiles():
    with pytest.raises(ProfileError):
        revolve(RevolutionProfile.from_expr("1 - x^2"), 1.0, 9)  # concave
    with pytest.raises(ProfileError):
        revolve(RevolutionProfile.from_expr("x"), 1.0, 9)  # f'(0) != 0
    with pytest.raises(ProfileError):
        RevolutionProfile.from_expr("x + y")
    with pytest.raises(ProfileError):
        cone_cap_profile(height=1.0)


def test_flatness_examples():
    assert flatness_test(parse("3"))
    assert flatness_test(parse("x"))
    assert not flatness_test(parse("0.5*log(1+x^2+y^2)"))
    assert flatness_test(parse("x^2-y^2"))
