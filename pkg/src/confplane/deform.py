"""Deformation paths and example metrics.

* convex combinations ``s u1 + (1 - s) u0`` of conformal factors,
* the completion path ``(s + e^{-2u}) g0``,
* graphs of revolution ``z = f(r)`` and their curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import Expr, add, compile_expr, const, diff, func, mul, neg, parse, to_text
from .field import MetricGrid, ScalarGrid, curvature, curvature_verdict, default_tolerance, laplacian, sample

__all__ = [
    "ProfileError",
    "DeformationPath",
    "RevolutionProfile",
    "convex_path",
    "completion_factor",
    "completion_path",
    "completion_curvature",
    "revolve",
    "revolve_curvature",
    "flatness_test",
    "cone_cap_profile",
]


class ProfileError(ValueError):
    pass


def convex_path(u0: Expr, u1: Expr, s: float) -> Expr:
    """``s * u1 + (1 - s) * u0``; ``s = 0`` and ``s = 1`` return the endpoints themselves."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return u0
    if s == 1.0:
        return u1
    return add(mul(const(s), u1), mul(const(1.0 - s), u0))


def completion_factor(u: Expr, s: float) -> Expr:
    """Conformal factor ``-1/2 log(s + e^{-2u})`` of the completion metric."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return u
    inner = add(const(s), func("exp", mul(const(-2.0), u)))
    return mul(const(-0.5), func("log", inner))


def completion_path(u: Expr, s: float, L: float = 4.0, n: int = 129) -> MetricGrid:
    """``E = G = s + e^{-2u}``, ``F = 0`` sampled on ``[-L, L]^2``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    grid = sample(u, L, n)
    with np.errstate(over="ignore"):
        factor = s + np.exp(-2.0 * grid.values)
    return MetricGrid.conformal(ScalarGrid(L, n, factor))


def completion_curvature(u: Expr, s: float, L: float = 4.0, n: int = 129) -> dict:
    """Curvature sign of the completion metric along the path (reported, not asserted)."""
    ut = sample(completion_factor(u, s), L, n)
    K = curvature(ut)
    tol = default_tolerance(ut) * float(np.exp(2.0 * np.max(ut.values)))
    k = K.values[K.valid]
    return {"s": s, "verdict": curvature_verdict(K, tol), "min_K": float(np.min(k)), "max_K": float(np.max(k)), "tol": tol}


@dataclass(frozen=True)
class DeformationPath:
    """A one-parameter family between two endpoints.

    ``rule`` is ``"convex"`` (conformal factors combined linearly) or
    ``"completion"`` (``u0`` is the factor and ``s`` runs the completion
    parameter, ``u1`` unused).
    """

    u0: Expr
    u1: Optional[Expr] = None
    rule: str = "convex"
    samples: Sequence[float] = field(default_factory=lambda: (0.0, 0.25, 0.5, 0.75, 1.0))

    def at(self, s: float) -> Expr:
        if self.rule == "convex":
            if self.u1 is None:
                raise ValueError("convex path needs two endpoints")
            return convex_path(self.u0, self.u1, s)
        if self.rule == "completion":
            return completion_factor(self.u0, s)
        raise ValueError(f"unknown rule {self.rule!r}")

    def members(self) -> list[Expr]:
        return [self.at(s) for s in self.samples]

    def describe(self) -> list[dict]:
        return [{"s": s, "u": to_text(e)} for s, e in zip(self.samples, self.members())]


# --------------------------------------------------------------------------
# Surfaces of revolution


Profile1D = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RevolutionProfile:
    """Convex profile ``f(r)`` with its first two derivatives (vectorized)."""

    f: Profile1D
    df: Profile1D
    d2f: Profile1D
    label: str = "custom"
    check_radius: float = 10.0
    tol: float = 1e-9

    @classmethod
    def from_expr(cls, ast: Expr | str, **kw) -> "RevolutionProfile":
        """Profile written in the variable ``x`` (read as the radius)."""
        if isinstance(ast, str):
            ast = parse(ast)
        d1 = diff(ast, "x")
        d2 = diff(d1, "x")
        if diff(ast, "y") != const(0.0):
            raise ProfileError("profile may only depend on x (the radius)")
        fs = [compile_expr(e) for e in (ast, d1, d2)]

        def wrap(g):
            return lambda r: g(np.asarray(r, dtype=float), np.zeros_like(np.asarray(r, dtype=float)))

        return cls(wrap(fs[0]), wrap(fs[1]), wrap(fs[2]), label=to_text(ast), **kw)

    def validate(self) -> None:
        """Nonnegativity, convexity and ``f'(0) = 0`` on ``[0, check_radius]``."""
        r = np.linspace(0.0, self.check_radius, 4001)
        fv, d1, d2 = self.f(r), self.df(r), self.d2f(r)
        if np.min(fv) < -self.tol:
            raise ProfileError(f"profile must be nonnegative (min {np.min(fv):.3g})")
        if np.min(d2) < -self.tol:
            k = int(np.argmin(d2))
            raise ProfileError(f"profile not convex: f''({r[k]:.4g}) = {d2[k]:.3g}")
        if abs(float(self.df(np.array([0.0]))[0])) > self.tol:
            raise ProfileError("profile must satisfy f'(0) = 0 to be smooth at the axis")


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_d(t):
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (t - 1.0) ** 2, 0.0)


def _smoothstep_int(t):
    t = np.clip(t, 0.0, 1.0)
    return t**6 - 3.0 * t**5 + 2.5 * t**4


def cone_cap_profile(flat_until: float = 1.0, cone_from: float = 3.0, height: float = 2.0) -> RevolutionProfile:
    """``f = height`` on ``[0, flat_until]``, ``f(r) = r`` for ``r >= cone_from``.

    The slope ``f'`` rises from 0 to 1 along a quintic smoothstep, which
    makes ``f`` convex and C^3.  The bridge only closes up when
    ``height + (cone_from - flat_until) / 2 == cone_from``, as it does for
    the defaults.
    """
    w = cone_from - flat_until
    if not math.isclose(height + 0.5 * w, cone_from, rel_tol=1e-12):
        raise ProfileError("bridge cannot join the cap to the cone with a smoothstep slope")

    def f(r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= cone_from, r, height + w * _smoothstep_int((r - flat_until) / w))

    def df(r):
        return _smoothstep((np.asarray(r, dtype=float) - flat_until) / w)

    def d2f(r):
        return _smoothstep_d((np.asarray(r, dtype=float) - flat_until) / w) / w

    return RevolutionProfile(f, df, d2f, label=f"cone-cap({flat_until},{cone_from},{height})")


def revolve(profile: RevolutionProfile, L: float = 4.0, n: int = 257) -> MetricGrid:
    """Induced metric of the graph ``z = f(sqrt(x^2 + y^2))``.

    ``E = 1 + f'^2 x^2/r^2``, ``F = f'^2 x y / r^2``, ``G = 1 + f'^2 y^2/r^2``
    with the limit ``g0`` at the origin.
    """
    profile.validate()
    ax = -L + (2.0 * L / (n - 1)) * np.arange(n)
    X, Y = np.meshgrid(ax, ax)
    r = np.hypot(X, Y)
    d1 = profile.df(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(r > 0, X / r, 0.0)
        cy = np.where(r > 0, Y / r, 0.0)
    s2 = d1 * d1
    return MetricGrid.from_arrays(L, 1.0 + s2 * cx * cx, s2 * cx * cy, 1.0 + s2 * cy * cy)


def revolve_curvature(profile: RevolutionProfile, r) -> np.ndarray:
    """``K(r) = f' f'' / (r (1 + f'^2)^2)``; at ``r = 0`` the limit ``f''(0)^2``."""
    r = np.asarray(r, dtype=float)
    d1, d2 = profile.df(r), profile.d2f(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        K = d1 * d2 / (r * (1.0 + d1 * d1) ** 2)
    at0 = profile.d2f(np.zeros(1))[0] ** 2
    return np.where(r > 0, K, at0)


def flatness_test(u: Expr, tol: Optional[float] = None, L: float = 4.0, n: int = 129) -> bool:
    """True iff ``max |lap u| <= tol`` on the interior (harmonic, i.e. flat metric)."""
    grid = sample(u, L, n)
    tol = default_tolerance(grid) if tol is None else tol
    lap = laplacian(grid)
    return bool(np.max(np.abs(lap.values[lap.valid])) <= tol)
