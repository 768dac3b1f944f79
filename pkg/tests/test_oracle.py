import math

import numpy as np
import pytest

from confplane.expr import parse
from confplane.oracle import (
    EscapeVerdict,
    PathPolyline,
    conformal_length,
    cross_validate,
    polyline,
    ray_escape_search,
)


def test_polyline_invariants():
    with pytest.raises(ValueError):
        polyline([[0, 0]])
    with pytest.raises(ValueError):
        polyline([[0, 0], [0, 0], [1, 0]])
    assert polyline([[0, 0], [3, 4], [3, 5]]).euclidean_length == 6.0


@pytest.mark.parametrize(
    "u,end,exact",
    [
        ("0", 1.0, 1.0),
        ("x", 10.0, 1.0 - math.exp(-10.0)),
        ("log(1+x^2+y^2)", 1.0, math.atan(1.0)),
    ],
)
def test_closed_form_lengths(u, end, exact):
    res = conformal_length(parse(u), polyline([[0, 0], [end, 0]]), tol=1e-9)
    assert res.converged
    assert res.value == pytest.approx(exact, abs=1e-9)
    assert res.error <= 1e-9


def test_refinement_stays_within_error():
    u = parse("0.5*log(1+x^2+y^2) + 0.3*sin(x*y)")
    pts = np.array([[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0], [4.0, 4.0]])
    coarse = conformal_length(u, polyline(pts))
    fine_pts = np.concatenate([np.linspace(a, b, 3)[:-1] for a, b in zip(pts[:-1], pts[1:])] + [pts[-1:]])
    fine = conformal_length(u, polyline(fine_pts))
    assert abs(coarse.value - fine.value) <= coarse.error + fine.error + 1e-12


def test_budget_exhaustion_reports_flag():
    path = PathPolyline(np.array([[0.0, 0.0], [50.0, 0.0]]), max_evals=50)
    res = conformal_length(parse("sin(40*x)"), path, tol=1e-12)
    assert not res.converged


def test_ray_search_harmonic_witness():
    rep = ray_escape_search(parse("x"))
    assert rep.verdict is EscapeVerdict.WITNESS
    assert rep.witness_angle == 0.0
    assert rep.witness_length == pytest.approx(math.exp(-1), abs=1e-6)
    assert rep.witness_sound()
    assert rep.one_sided


def test_ray_search_flat_plane():
    rep = ray_escape_search(parse("0"))
    assert rep.verdict is EscapeVerdict.NO_WITNESS
    for ray in rep.rays:
        assert ray.partial[-1] == pytest.approx(1e6 - 1, rel=1e-9)


def test_ray_search_fast_decay_every_ray():
    rep = ray_escape_search(parse("2*log(1+x^2+y^2)"))
    assert rep.verdict is EscapeVerdict.WITNESS
    assert all(r.status == "finite" for r in rep.rays)
    assert rep.witness_sound()


def test_ray_search_borderline_not_a_witness():
    rep = ray_escape_search(parse("0.5*log(1+x^2+y^2)"))
    assert rep.verdict is EscapeVerdict.INCONCLUSIVE


def test_ray_search_preconditions():
    with pytest.raises(ValueError):
        ray_escape_search(parse("x"), angles=4)
    with pytest.raises(ValueError):
        ray_escape_search(parse("x"), R_max=1.0)


def test_rays_csv_rows():
    rep = ray_escape_search(parse("x"), angles=8, R_max=16)
    rows = rep.rays_csv_rows()
    assert rows[0] == ["ray", "angle", "R", "partial_length", "status"]
    assert len(rows) == 1 + 8 * 5


@pytest.mark.parametrize(
    "u,completeness,oracle",
    [
        ("0.25*log(1+x^2+y^2)", "Complete", EscapeVerdict.NO_WITNESS),
        ("2*log(1+x^2+y^2)", "Incomplete", EscapeVerdict.WITNESS),
        ("0", "Complete", EscapeVerdict.NO_WITNESS),
    ],
)
def test_cross_validate_examples(u, completeness, oracle):
    cv = cross_validate(parse(u))
    assert cv.agreement == "agree"
    assert cv.completeness.value == completeness
    assert cv.oracle is oracle
    assert not cv.heuristic
    assert set(cv.as_dict()) >= {"agreement", "completeness", "oracle", "alpha", "escape"}


def test_cross_validate_marks_non_subharmonic_heuristic():
    cv = cross_validate(parse("-(x^2)-y^2"))
    assert cv.heuristic
