"""Growth of the circle maximum ``M(r, u)`` and the completeness invariant.

``alpha(u) = lim M(r, u) / log r``.  For subharmonic ``u`` the profile
``mu(t) = M(e^t, u)`` is convex, so secant slopes of ``mu`` increase
towards ``alpha``; the slope over the last sampled window is therefore a
lower bound.  The metric ``e^{-2u} g0`` is complete iff ``alpha <= 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import Expr, compile_expr
from .field import ScalarGrid, is_subharmonic, sample

__all__ = [
    "RadialMaxProfile",
    "AlphaEstimate",
    "Completeness",
    "AlphaConfig",
    "max_on_circle",
    "profile",
    "convexity_defect",
    "convexity_tolerance",
    "alpha_from_profile",
    "alpha_estimate",
    "alpha_estimate_grid",
    "classify_completeness",
    "s_alpha_member",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AlphaConfig:
    """Tunable constants of the estimator; all of them are echoed in reports."""

    r0: float = 1.0
    rho: float = 2.0
    count: int = 40
    m: int = 512
    window: int = 4
    band: float = 0.02  # allowance added to the upper end for the unknown convergence rate
    infinite_cap: float = 50.0
    analysis_L: float = 4.0
    analysis_n: int = 129

    def as_dict(self) -> dict:
        return dict(self.__dict__)


DEFAULT_CONFIG = AlphaConfig()


@dataclass(frozen=True, eq=False)
class RadialMaxProfile:
    radii: np.ndarray
    values: np.ndarray
    m: int

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or r.ndim != 1:
            raise ValueError("radii and values must be matching 1-D arrays")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return np.log(self.radii)

    @property
    def mu(self) -> np.ndarray:
        """The convex view ``mu(t) = M(e^t)``."""
        return self.values

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.t)

    def is_monotone(self, strict: bool = False) -> bool:
        d = np.diff(self.values)
        return bool(np.all(d > 0) if strict else np.all(d >= -convexity_tolerance(self)))


def _circle(f, r: float, theta: np.ndarray) -> np.ndarray:
    return f(r * np.cos(theta), r * np.sin(theta))


def max_on_circle(u: Expr, r: float, m: int = 512, *, _compiled=None) -> float:
    """Max of ``u`` over ``m`` equispaced angles, polished by golden section.

    The polish brackets the best sample between its neighbours; the value
    returned is the larger of the sampled and polished maxima, so it never
    exceeds the true circle maximum.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if m < 16:
        raise ValueError("need at least 16 circle samples")
    f = _compiled or compile_expr(u)
    theta = 2.0 * np.pi * np.arange(m) / m
    vals = _circle(f, r, theta)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if math.isinf(best):
        return best
    step = 2.0 * np.pi / m
    a, b = theta[k] - step, theta[k] + step
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = _circle(f, r, np.array([c, d]))
    for _ in range(60):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = float(_circle(f, r, np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = float(_circle(f, r, np.array([d]))[0])
        if b - a < 1e-15:
            break
    return max(best, float(fc), float(fd))


def profile(u: Expr, r0: float = 1.0, rho: float = 2.0, count: int = 40, m: int = 512) -> RadialMaxProfile:
    if not r0 > 0 or not rho > 1 or count < 4:
        raise ValueError("need r0 > 0, rho > 1 and count >= 4")
    radii = r0 * rho ** np.arange(count)
    return _profile_at(u, radii, m)


def _profile_at(u: Expr, radii: np.ndarray, m: int) -> RadialMaxProfile:
    f = compile_expr(u)
    vals = np.array([max_on_circle(u, float(r), m, _compiled=f) for r in radii])
    return RadialMaxProfile(radii, vals, m)


def convexity_tolerance(p: RadialMaxProfile) -> float:
    """Round-off allowance for second differences of the profile."""
    finite = p.values[np.isfinite(p.values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    return 1e-8 * (1.0 + scale)


def convexity_defect(p: RadialMaxProfile) -> float:
    """Largest amount by which the profile fails to be convex in ``t``.

    Uses slopes, so non-uniform ``t`` spacing is handled as well; for
    geometric radii this is the usual second difference scaled by the
    spacing.
    """
    if p.values.size < 3:
        raise ValueError("need at least 3 profile points")
    t, v = p.t, p.values
    if not np.all(np.isfinite(v)):
        return 0.0
    dt = np.diff(t)
    slopes = np.diff(v) / dt
    # shortfall of mu_{k-1} + mu_{k+1} - 2 mu_k, written for general spacing
    second = (slopes[1:] - slopes[:-1]) * 0.5 * (dt[1:] + dt[:-1])
    return float(max(0.0, -np.min(second)))


class Completeness(str, enum.Enum):
    COMPLETE = "Complete"
    INCOMPLETE = "Incomplete"
    BORDERLINE = "BorderlineComplete"


@dataclass(frozen=True)
class AlphaEstimate:
    value: float
    lower: float
    upper: float
    infinite: bool
    windows: list = field(default_factory=list)  # (r_start, r_end, slope)
    monotone: bool = True
    convexity_defect: float = 0.0
    heuristic: bool = False
    window_limited: bool = False
    r_max: float = math.nan
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def num(v):
            return None if not math.isfinite(v) else v

        return {
            "value": num(self.value),
            "lower": num(self.lower),
            "upper": num(self.upper),
            "infinite": self.infinite,
            "windows": [{"r_start": a, "r_end": b, "slope": num(s)} for a, b, s in self.windows],
            "heuristic": self.heuristic,
            "window_limited": self.window_limited,
            "monotone": self.monotone,
            "convexity_defect": self.convexity_defect,
            "r_max": self.r_max,
            "config": self.config,
        }


def alpha_from_profile(
    p: RadialMaxProfile,
    window: int = 4,
    band: float = 0.02,
    infinite_cap: float = 50.0,
) -> AlphaEstimate:
    """Turn a profile into an estimate.

    ``value`` and ``lower`` are the secant slope of ``mu`` over the last
    ``window`` points.  ``upper`` is the larger of that slope and
    the secant over the whole profile,
    ``(M(r_max) - M(r_0)) / log(r_max / r_0)``, plus ``band``.  The estimate is flagged
    infinite when the last slope exceeds ``infinite_cap`` and the slopes
    are still increasing.
    """
    if window < 2 or window > p.values.size:
        raise ValueError("window must be between 2 and the profile length")
    t, v = p.t, p.values
    defect = convexity_defect(p)
    tol = convexity_tolerance(p)
    heuristic = defect > tol
    monotone = p.is_monotone()

    windows = []
    for end in range(window - 1, v.size):
        start = end - window + 1
        with np.errstate(invalid="ignore"):
            s = (v[end] - v[start]) / (t[end] - t[start])
        windows.append((float(p.radii[start]), float(p.radii[end]), float(s)))
    slopes = [w[2] for w in windows]
    last = slopes[-1]

    increasing = len(slopes) < 2 or slopes[-1] > slopes[-2]
    if math.isinf(v[-1]) and v[-1] > 0:
        infinite, last = True, math.inf
    else:
        infinite = last > infinite_cap and increasing

    common = dict(
        windows=windows,
        monotone=monotone,
        convexity_defect=defect,
        heuristic=heuristic,
        r_max=float(p.radii[-1]),
    )
    if infinite:
        lower = slopes[-2] if math.isinf(last) and len(slopes) > 1 else last
        return AlphaEstimate(math.inf, float(lower), math.inf, True, **common)
    # measured from the first radius so a constant offset in u does not inflate the band
    whole_secant = (v[-1] - v[0]) / (t[-1] - t[0])
    upper = max(last, float(whole_secant)) + band
    return AlphaEstimate(float(last), float(last), float(upper), False, **common)


def alpha_estimate(
    u: Expr,
    r_max: float = 1e6,
    window: Optional[int] = None,
    config: AlphaConfig = DEFAULT_CONFIG,
) -> AlphaEstimate:
    """Estimate ``alpha(u)`` from circle maxima up to ``r_max``.

    Radii run geometrically from ``config.r0`` to ``r_max`` with ratio
    close to ``config.rho`` (adjusted so ``r_max`` is sampled exactly).
    """
    window = config.window if window is None else window
    if not r_max > config.r0:
        raise ValueError("r_max must exceed r0")
    steps = max(int(math.ceil(math.log(r_max / config.r0) / math.log(config.rho) - 1e-9)), window - 1, 3)
    radii = np.geomspace(config.r0, r_max, steps + 1)
    p = _profile_at(u, radii, config.m)
    est = alpha_from_profile(p, window, config.band, config.infinite_cap)
    cfg = config.as_dict()
    cfg.update(window=window)
    return _replace(est, config=cfg)


def alpha_estimate_grid(
    u: ScalarGrid, window: int = 4, m: int = 256, config: AlphaConfig = DEFAULT_CONFIG
) -> AlphaEstimate:
    """Window-limited estimate for ``u`` known only on a grid.

    Circle maxima come from bilinear interpolation at radii up to 95% of
    the half-width; the result is always marked heuristic and
    window-limited.
    """
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator((u.axis, u.axis), u.values.T, method="linear", bounds_error=False)
    r_hi = 0.95 * u.L
    r_lo = max(2.0 * u.h, r_hi / 2.0 ** 8)
    count = max(window + 2, 9)
    radii = np.geomspace(r_lo, r_hi, count)
    theta = 2.0 * np.pi * np.arange(m) / m
    vals = np.array([np.nanmax(interp(np.column_stack((r * np.cos(theta), r * np.sin(theta))))) for r in radii])
    p = RadialMaxProfile(radii, vals, m)
    est = alpha_from_profile(p, window, config.band, config.infinite_cap)
    cfg = config.as_dict()
    cfg.update(window=window, m=m)
    return _replace(est, heuristic=True, window_limited=True, config=cfg)


def _replace(est: AlphaEstimate, **changes) -> AlphaEstimate:
    from dataclasses import replace

    return replace(est, **changes)


def classify_completeness(a: AlphaEstimate) -> Completeness:
    """Complete if the whole band is below 1, Incomplete if it is above 1.

    A band containing 1 is complete by the threshold itself (alpha = 1 is
    complete) but is reported as borderline because of the uncertainty.
    """
    if a.infinite or a.lower > 1.0:
        return Completeness.INCOMPLETE
    if a.upper < 1.0:
        return Completeness.COMPLETE
    return Completeness.BORDERLINE


def s_alpha_member(
    u: Expr,
    alpha: float,
    tol: float = 0.05,
    r_max: float = 1e6,
    config: AlphaConfig = DEFAULT_CONFIG,
    estimate: Optional[AlphaEstimate] = None,
) -> bool:
    """Whether ``u`` is subharmonic on the analysis window with ``alpha(u) <= alpha``.

    Membership compares the upper end of the estimate band, which already
    contains ``config.band``; ``tol`` must therefore exceed that allowance
    for functions sitting exactly at ``alpha``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    grid = sample(u, config.analysis_L, config.analysis_n)
    if not is_subharmonic(grid).passed:
        return False
    est = estimate or alpha_estimate(u, r_max, config=config)
    return (not est.infinite) and est.upper <= alpha + tol
