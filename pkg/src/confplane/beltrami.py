"""Normal form of a plane metric: ``g = phi^*(e^f g0)``.

A metric ``E dx^2 + 2F dx dy + G dy^2`` is written as
``lambda |dz + mu dzbar|^2``; the normalized diffeomorphism ``phi``
(fixing 0 and 1) solves ``phi_zbar = mu phi_z``; the conformal factor is
``f = log(lambda |phi_z|^-2) o phi^-1``.

The Beltrami equation is solved on a periodized square window.  With
``phi = z + m zbar + P`` (``P`` periodic, ``m`` the mean of ``omega``)
one has ``phi_zbar = omega`` and ``phi_z = 1 + S omega`` where ``S`` is
the Beurling transform, the Fourier multiplier ``conj(xi)/xi``.  The
density ``omega`` is the fixed point of ``omega = mu S omega + mu``;
``S`` is an L2 isometry, so the iteration contracts at rate ``sup|mu|``.

Grids follow :class:`~confplane.field.ScalarGrid` conventions: ``N = n + 1``
nodes per axis on ``[-L, L]``, the last row/column being the periodic
image of the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import LinearNDInterpolator, RectBivariateSpline, RegularGridInterpolator

from .field import MetricGrid, ScalarGrid

__all__ = [
    "BeltramiError",
    "OrientationError",
    "ConvergenceError",
    "BeltramiCoefficient",
    "ConformalDecomposition",
    "PlaneDiffeo",
    "SolverInfo",
    "RoundtripReport",
    "cosine_taper",
    "decompose",
    "reconstruct",
    "dilatation",
    "solve_beltrami",
    "recover_factor",
    "pullback",
    "pi_roundtrip",
    "inner_mask",
]


class BeltramiError(ValueError):
    pass


class OrientationError(BeltramiError):
    pass


class ConvergenceError(BeltramiError):
    def __init__(self, iterations: int, residual: float, contraction: float):
        super().__init__(
            f"fixed point did not converge in {iterations} iterations "
            f"(residual {residual:.3e}, contraction estimate {contraction:.4f})"
        )
        self.iterations = iterations
        self.residual = residual
        self.contraction = contraction


def _axis(L: float, N: int) -> np.ndarray:
    return -L + (2.0 * L / (N - 1)) * np.arange(N)


def _zgrid(L: float, N: int) -> np.ndarray:
    ax = _axis(L, N)
    X, Y = np.meshgrid(ax, ax)
    return X + 1j * Y


def inner_mask(L: float, N: int, fraction: float = 0.25) -> np.ndarray:
    """Nodes with ``|x|, |y| <= fraction * L``."""
    ax = _axis(L, N)
    inside = np.abs(ax) <= fraction * L * (1 + 1e-12)
    return inside[None, :] & inside[:, None]


def cosine_taper(r: np.ndarray, support_radius: float, fraction: float = 0.2) -> np.ndarray:
    """1 inside ``(1 - fraction) R``, cosine roll-off to 0 at ``R``."""
    start = (1.0 - fraction) * support_radius
    t = np.clip((np.asarray(r) - start) / (support_radius - start), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * t))


@dataclass(frozen=True, eq=False)
class BeltramiCoefficient:
    L: float
    values: np.ndarray
    support_radius: Optional[float] = None
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 3:
            raise ValueError("Beltrami coefficient must be a square grid")
        valid = np.ones(v.shape, dtype=bool) if self.valid is None else np.array(self.valid, dtype=bool)
        v[~valid] = np.nan
        if np.any(np.abs(v[valid]) >= 1.0):
            raise BeltramiError(f"|mu| must stay below 1 (max {np.max(np.abs(v[valid])):.6g})")
        v.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", valid)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def max_modulus(self) -> float:
        vals = np.abs(self.values[self.valid])
        return float(vals.max()) if vals.size else 0.0

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], L: float, N: int, **kw) -> "BeltramiCoefficient":
        z = _zgrid(L, N)
        return cls(L, np.broadcast_to(func(z), z.shape), **kw)

    def tapered(self, support_radius: float, fraction: float = 0.2) -> "BeltramiCoefficient":
        chi = cosine_taper(np.abs(_zgrid(self.L, self.N)), support_radius, fraction)
        filled = np.where(self.valid, self.values, 0.0)
        return BeltramiCoefficient(self.L, filled * chi, support_radius)

    def real_grid(self) -> ScalarGrid:
        return ScalarGrid(self.L, self.N, self.values.real, self.valid)

    def imag_grid(self) -> ScalarGrid:
        return ScalarGrid(self.L, self.N, self.values.imag, self.valid)


@dataclass(frozen=True, eq=False)
class ConformalDecomposition:
    lam: ScalarGrid
    mu: BeltramiCoefficient

    def __post_init__(self):
        lam = self.lam.values[self.lam.valid]
        if np.any(lam <= 0):
            raise BeltramiError("lambda must be positive")


def decompose(g: MetricGrid) -> ConformalDecomposition:
    """``lambda = (E + G + 2 sqrt(EG - F^2)) / 4``, ``mu = (E - G + 2iF) / (4 lambda)``."""
    E, F, G = g.E.values, g.F.values, g.G.values
    valid = g.valid
    with np.errstate(invalid="ignore"):
        root = np.sqrt(E * G - F * F)
        lam = 0.25 * (E + G + 2.0 * root)
        mu = (E - G + 2j * F) / (4.0 * lam)
    return ConformalDecomposition(ScalarGrid(g.L, g.n, lam, valid), BeltramiCoefficient(g.L, mu, valid=valid))


def reconstruct(d: ConformalDecomposition) -> MetricGrid:
    """``E = lambda|1+mu|^2``, ``G = lambda|1-mu|^2``, ``F = 2 lambda Im(mu)``."""
    lam, mu = d.lam.values, d.mu.values
    valid = d.lam.valid & d.mu.valid
    E = lam * np.abs(1.0 + mu) ** 2
    G = lam * np.abs(1.0 - mu) ** 2
    F = 2.0 * lam * mu.imag
    return MetricGrid.from_arrays(d.lam.L, E, F, G, valid)


@dataclass(frozen=True)
class SolverInfo:
    iterations: int
    residual: float
    contraction: float
    support_radius: float
    window: float
    n: int


@dataclass(frozen=True, eq=False)
class PlaneDiffeo:
    """Map values and Wirtinger derivatives on an ``N x N`` lattice."""

    L: float
    values: np.ndarray
    phi_z: np.ndarray
    phi_zbar: np.ndarray
    normalization: tuple = (1.0 + 0j, 0j)  # (a, b): stored map is (raw - b) / a
    info: Optional[SolverInfo] = None
    _spectral: Optional[Callable] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def jacobian(self) -> np.ndarray:
        return np.abs(self.phi_z) ** 2 - np.abs(self.phi_zbar) ** 2

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], L: float, N: int) -> "PlaneDiffeo":
        """Sample a map; derivatives come from second-order differences."""
        z = _zgrid(L, N)
        w = np.broadcast_to(np.asarray(func(z), dtype=complex), z.shape).copy()
        pz, pzb = _wirtinger(w, 2.0 * L / (N - 1))
        return cls(L, w, pz, pzb)

    @classmethod
    def identity(cls, L: float, N: int) -> "PlaneDiffeo":
        return cls.from_function(lambda z: z, L, N)

    def at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the map at arbitrary points (spectral when available, else bicubic)."""
        points = np.asarray(points, dtype=complex)
        if self._spectral is not None:
            a, b = self.normalization
            return (self._spectral(points) - b) / a
        ax = _axis(self.L, self.N)
        re = RectBivariateSpline(ax, ax, self.values.real.T)
        im = RectBivariateSpline(ax, ax, self.values.imag.T)
        return re.ev(points.real, points.imag) + 1j * im.ev(points.real, points.imag)

    def post_compose(self, a: complex, b: complex) -> "PlaneDiffeo":
        """``a * phi + b``; the derivative grids scale accordingly."""
        spectral = None
        if self._spectral is not None:
            inner, (na, nb) = self._spectral, self.normalization
            spectral = lambda p: a * (inner(p) - nb) / na + b  # noqa: E731
        return PlaneDiffeo(self.L, a * self.values + b, a * self.phi_z, a * self.phi_zbar, (1.0 + 0j, 0j), self.info, spectral)

    def normalized(self) -> "PlaneDiffeo":
        """Post-compose with the complex affine map sending phi(0), phi(1) to 0, 1."""
        p0, p1 = self.at(np.array([0j, 1.0 + 0j]))
        scale = p1 - p0
        return self.post_compose(1.0 / scale, -p0 / scale)


def _wirtinger(w: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    wy, wx = np.gradient(w, h, edge_order=2)
    return 0.5 * (wx - 1j * wy), 0.5 * (wx + 1j * wy)


def dilatation(phi: PlaneDiffeo) -> BeltramiCoefficient:
    """``phi_zbar / phi_z`` from central differences of the map values.

    The boundary ring has no central stencil and is marked invalid.
    """
    h = 2.0 * phi.L / (phi.N - 1)
    w = phi.values
    wx = np.full(w.shape, np.nan, dtype=complex)
    wy = np.full(w.shape, np.nan, dtype=complex)
    wx[1:-1, 1:-1] = (w[1:-1, 2:] - w[1:-1, :-2]) / (2 * h)
    wy[1:-1, 1:-1] = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2 * h)
    pz, pzb = 0.5 * (wx - 1j * wy), 0.5 * (wx + 1j * wy)
    valid = np.zeros(w.shape, dtype=bool)
    valid[1:-1, 1:-1] = True
    jac = np.abs(pz) ** 2 - np.abs(pzb) ** 2
    bad = valid & ~(jac > 0)
    if np.any(bad):
        j, i = np.argwhere(bad)[0]
        ax = _axis(phi.L, phi.N)
        raise OrientationError(f"Jacobian {jac[j, i]:.3e} <= 0 at (x={ax[i]:.6g}, y={ax[j]:.6g})")
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(valid, pzb / pz, np.nan)
    return BeltramiCoefficient(phi.L, mu, valid=valid)


def _resample(mu: BeltramiCoefficient, L: float, N: int) -> np.ndarray:
    if math.isclose(mu.L, L, rel_tol=1e-12) and mu.N == N:
        return np.where(mu.valid, mu.values, 0.0)
    ax_src = _axis(mu.L, mu.N)
    vals = np.where(mu.valid, mu.values, 0.0)
    z = _zgrid(L, N)
    pts = np.column_stack((z.imag.ravel(), z.real.ravel()))
    re = RegularGridInterpolator((ax_src, ax_src), vals.real, bounds_error=False, fill_value=0.0)(pts)
    im = RegularGridInterpolator((ax_src, ax_src), vals.imag, bounds_error=False, fill_value=0.0)(pts)
    return (re + 1j * im).reshape(N, N)


def solve_beltrami(
    mu: BeltramiCoefficient,
    window: Optional[float] = None,
    n: Optional[int] = None,
    support_radius: Optional[float] = None,
    taper_fraction: float = 0.2,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> PlaneDiffeo:
    """Normalized solution of ``phi_zbar = mu phi_z`` on ``[-window, window]^2``.

    ``n`` is the FFT size (must be even so that 0 is a node); the output
    lattice has ``n + 1`` nodes per axis.  ``mu`` is resampled onto that
    lattice if necessary, then multiplied by a cosine taper vanishing at
    ``support_radius`` (default ``window / 2``).  Raises
    :class:`ConvergenceError` if the residual ``max|omega - mu S omega - mu|``
    does not drop below ``tol`` within ``max_iter`` iterations.
    """
    L = mu.L if window is None else float(window)
    n = mu.N - 1 if n is None else int(n)
    if n % 2:
        raise ValueError("FFT size n must be even")
    R = 0.5 * L if support_radius is None else float(support_radius)
    if not 0 < R < L:
        raise ValueError("support radius must lie inside the window")
    N = n + 1
    h = 2.0 * L / n

    z_full = _zgrid(L, N)
    chi = cosine_taper(np.abs(z_full), R, taper_fraction)
    m_full = _resample(mu, L, N) * chi
    k = float(np.max(np.abs(m_full)))
    if k >= 1.0:
        raise BeltramiError("sup |mu| must be below 1")
    m = m_full[:-1, :-1]

    freq = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    KX, KY = np.meshgrid(freq, freq)
    xi = KX + 1j * KY
    nonzero = xi != 0
    beurling = np.zeros_like(xi)
    beurling[nonzero] = np.conj(xi[nonzero]) / xi[nonzero]
    inv_dzbar = np.zeros_like(xi)  # inverse of d/dzbar, symbol (i/2) xi
    inv_dzbar[nonzero] = 1.0 / (0.5j * xi[nonzero])

    def S(w):
        return np.fft.ifft2(beurling * np.fft.fft2(w))

    omega = m.astype(complex)
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        Sw = S(omega)
        update = m * Sw + m
        residual = float(np.max(np.abs(omega - update)))
        if residual <= tol:
            break
        omega = update
    else:
        raise ConvergenceError(max_iter, residual, k)

    mean = complex(omega.mean())
    Phat = inv_dzbar * np.fft.fft2(omega)
    P = np.fft.ifft2(Phat)
    Sw = S(omega)

    def wrap(a):
        return np.pad(a, ((0, 1), (0, 1)), mode="wrap")

    raw = z_full + mean * np.conj(z_full) + wrap(P)
    pz_raw = 1.0 + wrap(Sw)
    pzb_raw = wrap(omega)
    coeff = Phat / (n * n)

    def spectral(points):
        p = np.asarray(points, dtype=complex)
        flat = p.ravel()
        # trigonometric interpolation of P, nodes start at -L
        ex = np.exp(1j * np.outer(flat.real + L, freq))
        ey = np.exp(1j * np.outer(flat.imag + L, freq))
        vals = np.einsum("pj,jk,pk->p", ey, coeff, ex)
        return (flat + mean * np.conj(flat) + vals).reshape(p.shape)

    info = SolverInfo(it, residual, k, R, L, n)
    phi = PlaneDiffeo(L, raw, pz_raw, pzb_raw, (1.0 + 0j, 0j), info, spectral)
    p0, p1 = spectral(np.array([0j, 1.0 + 0j]))
    a, b = p1 - p0, p0
    phi = PlaneDiffeo(L, (raw - b) / a, pz_raw / a, pzb_raw / a, (a, b), info, spectral)
    if np.any(phi.jacobian <= 0):
        j, i = np.argwhere(phi.jacobian <= 0)[0]
        raise OrientationError(f"solution folds at node (i={i}, j={j})")
    return phi


def recover_factor(d: ConformalDecomposition, phi: PlaneDiffeo) -> ScalarGrid:
    """``f = log(lambda |phi_z|^-2) o phi^-1`` on the lattice of ``phi``.

    The inverse is realized by linear interpolation over a Delaunay
    triangulation of the image points ``phi(node)``; lattice nodes outside
    the triangulated image are marked invalid.
    """
    if d.lam.n != phi.N or not math.isclose(d.lam.L, phi.L, rel_tol=1e-12):
        raise ValueError("decomposition and diffeomorphism must share a lattice")
    ok = d.lam.valid & np.isfinite(phi.phi_z) & np.isfinite(phi.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.log(d.lam.values) - 2.0 * np.log(np.abs(phi.phi_z))
    ok &= np.isfinite(h)
    src = phi.values[ok]
    interp = LinearNDInterpolator(np.column_stack((src.real, src.imag)), h[ok], fill_value=np.nan)
    z = _zgrid(phi.L, phi.N)
    f = interp(z.real, z.imag)
    valid = np.isfinite(f)
    if not np.any(valid):
        raise BeltramiError("no lattice node lies inside the image of phi")
    return ScalarGrid(phi.L, phi.N, np.where(valid, f, np.nan), valid)


def pullback(g: MetricGrid, phi: PlaneDiffeo) -> MetricGrid:
    """``(phi^* g)(v, w) = g(D phi v, D phi w)`` at every node of ``phi``.

    ``g`` is evaluated at ``phi(node)`` by bilinear interpolation; nodes
    whose image falls outside ``g``'s window (or next to an invalid node
    of ``g``) are marked invalid.  ``D phi`` uses central differences in
    the interior and second-order one-sided differences on the boundary.
    """
    ax = g.E.axis
    w = phi.values
    pts = np.column_stack((w.imag.ravel(), w.real.ravel()))

    def at(grid: ScalarGrid) -> np.ndarray:
        vals = np.where(grid.valid, grid.values, np.nan)
        return RegularGridInterpolator((ax, ax), vals, bounds_error=False, fill_value=np.nan)(pts).reshape(w.shape)

    E, F, G = at(g.E), at(g.F), at(g.G)
    h = 2.0 * phi.L / (phi.N - 1)
    wy, wx = np.gradient(w, h, edge_order=2)
    a, b = wx.real, wy.real  # d(phi1)/dx, d(phi1)/dy
    c, d = wx.imag, wy.imag  # d(phi2)/dx, d(phi2)/dy
    E2 = a * a * E + 2 * a * c * F + c * c * G
    F2 = a * b * E + (a * d + b * c) * F + c * d * G
    G2 = b * b * E + 2 * b * d * F + d * d * G
    valid = np.isfinite(E2) & np.isfinite(F2) & np.isfinite(G2)
    return MetricGrid.from_arrays(phi.L, np.where(valid, E2, np.nan), np.where(valid, F2, np.nan), np.where(valid, G2, np.nan), valid)


@dataclass(frozen=True)
class RoundtripReport:
    deviation: float  # max relative Frobenius deviation on the inner region
    inner_nodes: int
    invalid_inner_nodes: int
    iterations: int
    residual: float
    contraction: float
    max_mu: float
    factor_range: tuple  # range of f o phi on the inner region
    fraction: float

    def as_dict(self) -> dict:
        return dict(self.__dict__, factor_range=list(self.factor_range))


def pi_roundtrip(
    g: MetricGrid,
    fraction: float = 0.25,
    support_radius: Optional[float] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[RoundtripReport, PlaneDiffeo, ScalarGrid]:
    """Decompose, solve, recover ``f`` and rebuild ``phi^*(e^f g0)``.

    Returns the report along with the normalized diffeomorphism and the
    recovered factor.  The deviation is measured on nodes with
    ``|x|, |y| <= fraction * L``.
    """
    if g.n % 2 == 0:
        raise ValueError("metric lattice needs an odd node count so that 0 is a node")
    d = decompose(g)
    phi = solve_beltrami(d.mu, support_radius=support_radius, tol=tol, max_iter=max_iter)
    f = recover_factor(d, phi)
    ef = ScalarGrid(f.L, f.n, np.exp(f.values), f.valid)
    rebuilt = pullback(MetricGrid.conformal(ef), phi)
    inner = inner_mask(g.L, g.n, fraction)
    both = inner & rebuilt.valid & g.valid
    dE = rebuilt.E.values - g.E.values
    dF = rebuilt.F.values - g.F.values
    dG = rebuilt.G.values - g.G.values
    num = np.sqrt(dE**2 + 2 * dF**2 + dG**2)
    den = np.sqrt(g.E.values**2 + 2 * g.F.values**2 + g.G.values**2)
    dev = float(np.max((num / den)[both])) if np.any(both) else math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        pulled = np.log(d.lam.values) - 2.0 * np.log(np.abs(phi.phi_z))  # f o phi
    fin = pulled[inner & np.isfinite(pulled)]
    info = phi.info
    report = RoundtripReport(
        deviation=dev,
        inner_nodes=int(inner.sum()),
        invalid_inner_nodes=int((inner & ~both).sum()),
        iterations=info.iterations,
        residual=info.residual,
        contraction=info.contraction,
        max_mu=d.mu.max_modulus,
        factor_range=(float(fin.min()), float(fin.max())) if fin.size else (math.nan, math.nan),
        fraction=fraction,
    )
    return report, phi, f
