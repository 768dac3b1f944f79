"""Uniform-grid samplings, the five-point Laplacian and conformal curvature.

Grids are square, centered at the origin, with ``n`` nodes per axis at
``x_i = -L + i*h``, ``h = 2L/(n-1)``.  Values are stored row-major with
``values[j, i] = u(x_i, y_j)`` (rows are y, increasing).

Nodes that carry no meaningful value (the boundary ring of a stencil
result, points outside an interpolated image) are marked invalid and hold
NaN; every downstream verdict ignores them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from .expr import Expr, ExprDomainError, compile_expr, evaluate_array

__all__ = [
    "ScalarGrid",
    "MetricGrid",
    "GridFormatError",
    "MetricPositivityError",
    "SubharmonicVerdict",
    "sample",
    "laplacian",
    "curvature",
    "curvature_verdict",
    "is_subharmonic",
    "default_tolerance",
    "read_cpg1",
    "write_cpg1",
    "read_csv_grid",
    "write_csv_grid",
    "grid_to_text",
]


class GridFormatError(ValueError):
    pass


class MetricPositivityError(ValueError):
    def __init__(self, message: str, node: tuple[int, int], point: tuple[float, float]):
        super().__init__(f"{message} at node (i={node[0]}, j={node[1]}) = (x={point[0]:.6g}, y={point[1]:.6g})")
        self.node = node
        self.point = point


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    L: float
    n: int
    values: np.ndarray
    valid: Optional[np.ndarray] = dc_field(default=None)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes per axis")
        if not self.L > 0:
            raise ValueError("half-width L must be positive")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.n, self.n):
            raise ValueError(f"values must have shape ({self.n}, {self.n}), got {vals.shape}")
        if self.valid is None:
            valid = np.ones(vals.shape, dtype=bool)
        else:
            valid = np.array(self.valid, dtype=bool)
        vals[~valid] = np.nan
        if np.any(np.isnan(vals[valid])):
            raise ValueError("grid values must not be NaN on valid nodes")
        vals.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", valid)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays indexed ``[j, i]``."""
        return np.meshgrid(self.axis, self.axis)

    def center_index(self) -> int:
        if self.n % 2 == 0:
            raise ValueError("the origin is a node only for odd n")
        return self.n // 2

    def with_values(self, values: np.ndarray, valid: Optional[np.ndarray] = None) -> "ScalarGrid":
        return ScalarGrid(self.L, self.n, values, self.valid if valid is None else valid)

    def same_lattice(self, other: "ScalarGrid") -> bool:
        return self.n == other.n and math.isclose(self.L, other.L, rel_tol=1e-12)

    def interior(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask


@dataclass(frozen=True, eq=False)
class MetricGrid:
    """Components of ``E dx^2 + 2F dx dy + G dy^2`` on a shared lattice."""

    E: ScalarGrid
    F: ScalarGrid
    G: ScalarGrid

    def __post_init__(self):
        if not (self.E.same_lattice(self.F) and self.E.same_lattice(self.G)):
            raise ValueError("metric components must share a lattice")
        valid = self.valid
        E, F, G = self.E.values, self.F.values, self.G.values
        with np.errstate(invalid="ignore"):
            bad = valid & ~((E > 0) & (G > 0) & (E * G - F * F > 0))
        if np.any(bad):
            j, i = np.argwhere(bad)[0]
            ax = self.E.axis
            raise MetricPositivityError("metric not positive definite", (int(i), int(j)), (ax[i], ax[j]))

    @property
    def valid(self) -> np.ndarray:
        return self.E.valid & self.F.valid & self.G.valid

    @property
    def L(self) -> float:
        return self.E.L

    @property
    def n(self) -> int:
        return self.E.n

    @classmethod
    def from_arrays(cls, L: float, E, F, G, valid=None) -> "MetricGrid":
        n = np.shape(E)[0]
        return cls(ScalarGrid(L, n, E, valid), ScalarGrid(L, n, F, valid), ScalarGrid(L, n, G, valid))

    @classmethod
    def euclidean(cls, L: float, n: int) -> "MetricGrid":
        one, zero = np.ones((n, n)), np.zeros((n, n))
        return cls.from_arrays(L, one, zero, one)

    @classmethod
    def conformal(cls, factor: ScalarGrid) -> "MetricGrid":
        """``factor * g0`` for a positive scalar grid."""
        zero = factor.with_values(np.zeros_like(factor.values))
        return cls(factor, zero, factor)


def sample(expr: Expr, L: float, n: int) -> ScalarGrid:
    """Evaluate ``expr`` at every node of the ``n x n`` grid on ``[-L, L]^2``."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if not L > 0:
        raise ValueError("L must be positive")
    ax = -L + (2.0 * L / (n - 1)) * np.arange(n)
    X, Y = np.meshgrid(ax, ax)
    values = compile_expr(expr)(X, Y)
    if not np.all(np.isfinite(values)):
        j, i = np.argwhere(~np.isfinite(values))[0]
        # re-run the checked interpreter to name the node; overflow is still a domain failure here
        evaluate_array(expr, X[j, i], Y[j, i])
        raise ExprDomainError("non-finite value", expr, (float(X[j, i]), float(Y[j, i])))
    return ScalarGrid(L, n, values)


def laplacian(u: ScalarGrid) -> ScalarGrid:
    """Five-point Laplacian on interior nodes; the boundary ring is invalid."""
    v = u.values
    out = np.full_like(v, np.nan)
    with np.errstate(invalid="ignore", over="ignore"):
        out[1:-1, 1:-1] = (v[1:-1, 2:] + v[1:-1, :-2] + v[2:, 1:-1] + v[:-2, 1:-1] - 4.0 * v[1:-1, 1:-1]) / u.h**2
    valid = u.interior() & u.valid
    valid[1:-1, 1:-1] &= u.valid[1:-1, 2:] & u.valid[1:-1, :-2] & u.valid[2:, 1:-1] & u.valid[:-2, 1:-1]
    return ScalarGrid(u.L, u.n, out, valid)


def curvature(u: ScalarGrid) -> ScalarGrid:
    """Gauss curvature ``e^{2u} * lap(u)`` of ``e^{-2u} g0``.

    Evaluated as ``sign(lap) * exp(2u + log|lap|)`` so that a zero
    Laplacian never meets an overflowed exponential; the only non-finite
    outcome is a genuine +-inf.
    """
    lap = laplacian(u)
    d = lap.values
    out = np.full_like(d, np.nan)
    ok = lap.valid
    with np.errstate(divide="ignore", over="ignore"):
        mag = np.exp(2.0 * u.values[ok] + np.log(np.abs(d[ok])))
    out[ok] = np.sign(d[ok]) * np.where(d[ok] == 0.0, 0.0, mag)
    return ScalarGrid(u.L, u.n, out, ok)


def default_tolerance(u: ScalarGrid) -> float:
    """``1e-8 * scale(u) / h^2``: the size of round-off in the stencil."""
    vals = u.values[u.valid]
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    return 1e-8 * max(scale, 1.0) / u.h**2


def curvature_verdict(K: ScalarGrid, tol: float = 0.0) -> str:
    """One of ``unbounded``, ``flat``, ``nonnegative``, ``mixed``."""
    k = K.values[K.valid]
    if np.any(np.isinf(k)):
        return "unbounded"
    if k.size == 0 or np.max(np.abs(k)) <= tol:
        return "flat"
    if np.min(k) >= -tol:
        return "nonnegative"
    return "mixed"


@dataclass(frozen=True)
class SubharmonicVerdict:
    passed: bool
    min_laplacian: float
    argmin: tuple[int, int]  # (i, j) node indices
    point: tuple[float, float]
    tol: float

    def as_dict(self) -> dict:
        return {
            "pass": self.passed,
            "min_laplacian": self.min_laplacian,
            "argmin_node": list(self.argmin),
            "argmin_point": list(self.point),
            "tol": self.tol,
        }


def is_subharmonic(u: ScalarGrid, tol: Optional[float] = None) -> SubharmonicVerdict:
    if tol is None:
        tol = default_tolerance(u)
    lap = laplacian(u)
    masked = np.where(lap.valid, lap.values, np.inf)
    j, i = np.unravel_index(int(np.argmin(masked)), masked.shape)
    m = float(masked[j, i])
    ax = u.axis
    return SubharmonicVerdict(m >= -tol, m, (int(i), int(j)), (float(ax[i]), float(ax[j])), float(tol))


# --------------------------------------------------------------------------
# CPG1 text format: header "CPG1 n L", then n rows of n values, y increasing.


def write_cpg1(grid: ScalarGrid, path: str | Path) -> None:
    Path(path).write_text(grid_to_text(grid), encoding="utf-8")


def read_cpg1(path: str | Path) -> ScalarGrid:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "CPG1":
            raise GridFormatError(f"{path}: missing 'CPG1 n L' header")
        try:
            n, L = int(header[1]), float(header[2])
        except ValueError as exc:
            raise GridFormatError(f"{path}: bad header values") from exc
        rows = [line.split() for line in fh if line.strip()]
    return _grid_from_rows(rows, n, L, str(path))


def write_csv_grid(grid: ScalarGrid, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in grid.values:
            writer.writerow([repr(float(v)) for v in row])


def read_csv_grid(path: str | Path, L: float) -> ScalarGrid:
    """CSV grids carry no header, so the half-width must be supplied."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    return _grid_from_rows(rows, len(rows), L, str(path))


def _grid_from_rows(rows: list[list[str]], n: int, L: float, where: str) -> ScalarGrid:
    if len(rows) != n or any(len(r) != n for r in rows):
        raise GridFormatError(f"{where}: expected {n} rows of {n} values")
    try:
        vals = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise GridFormatError(f"{where}: non-numeric value") from exc
    return ScalarGrid(L, n, vals, ~np.isnan(vals))


def grid_to_text(grid: ScalarGrid) -> str:
    buf = io.StringIO()
    buf.write(f"CPG1 {grid.n} {grid.L!r}\n")
    for row in grid.values:
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()
