"""Brute-force completeness evidence from conformal path lengths.

In ``e^{-2u} g0`` a path has length ``int e^{-u} ds``; a path that leaves
every compact set with finite length witnesses incompleteness.  The ray
search integrates along radial rays starting at ``r = 1`` and looks for a
convergent tail.  It is a one-sided check: not finding a witness among
rays is evidence of completeness, never proof.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .asymptotics import (
    DEFAULT_CONFIG,
    AlphaConfig,
    AlphaEstimate,
    Completeness,
    alpha_estimate,
    classify_completeness,
)
from .expr import Expr, compile_expr
from .field import SubharmonicVerdict, is_subharmonic, sample
from .quadrature import integrate_exp

__all__ = [
    "PathPolyline",
    "LengthResult",
    "EscapeVerdict",
    "RayRecord",
    "EscapeReport",
    "OracleConfig",
    "CrossValidation",
    "conformal_length",
    "ray_escape_search",
    "cross_validate",
]


@dataclass(frozen=True, eq=False)
class PathPolyline:
    vertices: np.ndarray
    max_evals: int = 2_000_000

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise ValueError("a polyline needs at least 2 vertices in the plane")
        if np.any(np.all(np.diff(v, axis=0) == 0, axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        object.__setattr__(self, "vertices", v)

    @property
    def euclidean_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.vertices, axis=0).T)))


@dataclass(frozen=True)
class LengthResult:
    value: float
    error: float
    converged: bool


def conformal_length(u: Expr, path: PathPolyline, tol: float = 1e-9) -> LengthResult:
    """``int_path e^{-u} ds`` by adaptive Simpson on every segment.

    The per-segment tolerance is ``tol / segments``; when the evaluation
    budget runs out the best value is returned with ``converged=False``.
    """
    f = compile_expr(u)
    v = path.vertices
    start, delta = v[:-1], np.diff(v, axis=0)
    seg_len = np.hypot(delta[:, 0], delta[:, 1])
    nseg = len(seg_len)
    log_len = np.log(seg_len)

    def log_integrand(t, owner):
        p = start[owner] + t[:, None] * delta[owner]
        return -f(p[:, 0], p[:, 1]) + log_len[owner]

    res = integrate_exp(
        log_integrand, np.zeros(nseg), np.ones(nseg), tol=tol / nseg, max_evals=path.max_evals
    )
    return LengthResult(float(np.sum(res.values)), float(np.sum(res.errors)), bool(np.all(res.converged)))


class EscapeVerdict(str, enum.Enum):
    WITNESS = "IncompleteWitness"
    NO_WITNESS = "NoWitnessFound"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class OracleConfig:
    angles: int = 64
    R_max: float = 1e6
    ratio: float = 2.0
    finite_threshold: float = 1e-6
    diverge_threshold: float = 1e3
    tol: float = 1e-9
    rel_tol: float = 1e-10

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RayRecord:
    index: int
    angle: float
    checkpoints: list  # radii
    partial: list  # int_1^R e^{-u} dr at each checkpoint
    status: str  # "finite", "divergent" or "undecided"
    tail_ratio: float
    length_bound: float


@dataclass(frozen=True)
class EscapeReport:
    verdict: EscapeVerdict
    witness_angle: Optional[float]
    witness_index: Optional[int]
    witness_length: Optional[float]
    length_bound: Optional[float]
    rays: list = field(default_factory=list)
    R_max: float = math.nan
    config: dict = field(default_factory=dict)
    one_sided: bool = True  # NoWitnessFound is evidence, not proof

    def witness_sound(self) -> bool:
        """Tail bound check for a witness: ``bound <= last partial + threshold * safety``."""
        if self.verdict is not EscapeVerdict.WITNESS:
            return True
        ray = self.rays[self.witness_index]
        q = ray.tail_ratio
        safety = q / (1.0 - q)
        return ray.length_bound <= ray.partial[-1] + self.config["finite_threshold"] * safety * (1 + 1e-12)

    def as_dict(self, include_rays: bool = False) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else v

        out = {
            "verdict": self.verdict.value,
            "witness_angle": self.witness_angle,
            "witness_length": num(self.witness_length),
            "length_bound": num(self.length_bound),
            "R_max": self.R_max,
            "one_sided": self.one_sided,
            "witness_sound": self.witness_sound(),
            "ray_status_counts": {
                s: sum(r.status == s for r in self.rays) for s in ("finite", "divergent", "undecided")
            },
            "min_ray_length": num(min((r.partial[-1] for r in self.rays), default=None)),
            "config": self.config,
        }
        if include_rays:
            out["rays"] = [
                {"angle": r.angle, "status": r.status, "final_length": num(r.partial[-1])} for r in self.rays
            ]
        return out

    def rays_csv_rows(self) -> list[list]:
        rows = [["ray", "angle", "R", "partial_length", "status"]]
        for r in self.rays:
            for R, L in zip(r.checkpoints, r.partial):
                rows.append([r.index, repr(r.angle), repr(R), repr(L), r.status])
        return rows


def _checkpoints(R_max: float, ratio: float) -> np.ndarray:
    pts = [1.0]
    while pts[-1] * ratio < R_max * (1 - 1e-12):
        pts.append(pts[-1] * ratio)
    pts.append(R_max)
    return np.array(pts)


def ray_escape_search(
    u: Expr,
    angles: int = 64,
    R_max: float = 1e6,
    finite_threshold: float = 1e-6,
    diverge_threshold: float = 1e3,
    config: Optional[OracleConfig] = None,
) -> EscapeReport:
    """Look for a radial ray of finite conformal length.

    Every ray ``theta_k = 2 pi k / angles`` is integrated from 1 to each
    geometric checkpoint.  A ray is *finite* when its last increment is
    below ``finite_threshold`` and increments are shrinking; it is
    *divergent* once its length exceeds ``diverge_threshold``.  The first
    finite ray (by angle index) is the witness; if every ray diverges the
    verdict is NoWitnessFound; anything else is Inconclusive.
    """
    if angles < 8:
        raise ValueError("need at least 8 rays")
    if not R_max > 1:
        raise ValueError("R_max must exceed 1")
    cfg = config or OracleConfig()
    cfg = OracleConfig(
        angles=angles,
        R_max=R_max,
        ratio=cfg.ratio,
        finite_threshold=finite_threshold,
        diverge_threshold=diverge_threshold,
        tol=cfg.tol,
        rel_tol=cfg.rel_tol,
    )
    f = compile_expr(u)
    theta = 2.0 * np.pi * np.arange(angles) / angles
    cos, sin = np.cos(theta), np.sin(theta)
    # rays along the axes must hit y = 0 / x = 0 exactly
    cos[np.isclose(cos, 0.0, atol=1e-15)] = 0.0
    sin[np.isclose(sin, 0.0, atol=1e-15)] = 0.0
    cps = _checkpoints(R_max, cfg.ratio)
    nint = cps.size - 1
    ray_of = np.repeat(np.arange(angles), nint)
    a = np.tile(cps[:-1], angles)
    b = np.tile(cps[1:], angles)

    def log_integrand(r, owner):
        k = ray_of[owner]
        return -f(r * cos[k], r * sin[k])

    res = integrate_exp(log_integrand, a, b, tol=cfg.tol, rel_tol=cfg.rel_tol)
    incr = res.values.reshape(angles, nint)

    rays: list[RayRecord] = []
    witness: Optional[RayRecord] = None
    for k in range(angles):
        inc = incr[k]
        with np.errstate(invalid="ignore"):
            partial = np.concatenate(([0.0], np.cumsum(inc)))
        last = inc[-1]
        prev = inc[-2] if nint > 1 else math.inf
        q = last / prev if prev > 0 and math.isfinite(prev) else (0.0 if last == 0 else math.inf)
        if math.isfinite(partial[-1]) and last < cfg.finite_threshold and q < 1.0:
            status = "finite"
            bound = float(partial[-1] + last * q / (1.0 - q))
        elif partial[-1] > cfg.diverge_threshold:
            status, bound = "divergent", math.inf
        else:
            status, bound = "undecided", math.inf
        rec = RayRecord(k, float(theta[k]), cps.tolist(), partial.tolist(), status, float(q), bound)
        rays.append(rec)
        if status == "finite" and witness is None:
            witness = rec

    if witness is not None:
        verdict = EscapeVerdict.WITNESS
    elif all(r.status == "divergent" for r in rays):
        verdict = EscapeVerdict.NO_WITNESS
    else:
        verdict = EscapeVerdict.INCONCLUSIVE
    return EscapeReport(
        verdict=verdict,
        witness_angle=None if witness is None else witness.angle,
        witness_index=None if witness is None else witness.index,
        witness_length=None if witness is None else witness.partial[-1],
        length_bound=None if witness is None else witness.length_bound,
        rays=rays,
        R_max=float(R_max),
        config=cfg.as_dict(),
    )


def _agreement(alpha_verdict: Completeness, oracle: EscapeVerdict) -> str:
    if oracle is EscapeVerdict.INCONCLUSIVE:
        return "inconclusive"
    says_incomplete = oracle is EscapeVerdict.WITNESS
    return "agree" if says_incomplete == (alpha_verdict is Completeness.INCOMPLETE) else "disagree"


@dataclass(frozen=True)
class CrossValidation:
    agreement: str  # "agree", "disagree" or "inconclusive"
    completeness: Completeness
    oracle: EscapeVerdict
    heuristic: bool
    subharmonic: SubharmonicVerdict
    alpha: AlphaEstimate
    escape: EscapeReport

    def as_dict(self) -> dict:
        return {
            "agreement": self.agreement,
            "completeness": self.completeness.value,
            "oracle": self.oracle.value,
            "heuristic": self.heuristic,
            "subharmonic": self.subharmonic.as_dict(),
            "alpha": self.alpha.as_dict(),
            "escape": self.escape.as_dict(),
        }


def cross_validate(
    u: Expr,
    r_max: float = 1e6,
    alpha_config: AlphaConfig = DEFAULT_CONFIG,
    oracle_config: Optional[OracleConfig] = None,
) -> CrossValidation:
    """Compare the alpha classifier with the ray oracle.

    Inconclusive oracle runs yield ``"inconclusive"``; a borderline alpha
    verdict counts as complete.  The result is marked heuristic when ``u``
    fails the subharmonicity check on the analysis window.
    """
    oc = oracle_config or OracleConfig()
    grid = sample(u, alpha_config.analysis_L, alpha_config.analysis_n)
    sub = is_subharmonic(grid)
    est = alpha_estimate(u, r_max, config=alpha_config)
    verdict = classify_completeness(est)
    rep = ray_escape_search(u, oc.angles, oc.R_max, oc.finite_threshold, oc.diverge_threshold, config=oc)
    return CrossValidation(
        agreement=_agreement(verdict, rep.verdict),
        completeness=verdict,
        oracle=rep.verdict,
        heuristic=(not sub.passed) or est.heuristic,
        subharmonic=sub,
        alpha=est,
        escape=rep,
    )


def polyline(points: Sequence[Sequence[float]]) -> PathPolyline:
    return PathPolyline(np.asarray(points, dtype=float))
