"""Adaptive Simpson quadrature over many intervals at once.

All intervals still being refined are advanced together, so the integrand
is called on whole arrays instead of one point at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# f(t, owner) -> log of the integrand at parameter t on interval ``owner``
LogIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]

# exp() overflows just above this
_LOG_MAX = 709.0


@dataclass(frozen=True)
class QuadResult:
    values: np.ndarray
    errors: np.ndarray
    converged: np.ndarray
    evaluations: int


def integrate_exp(
    log_f: LogIntegrand,
    a: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-9,
    rel_tol: float = 0.0,
    initial_panels: int = 4,
    max_depth: int = 40,
    max_evals: int = 20_000_000,
) -> QuadResult:
    """Integrate ``exp(log_f)`` over each ``[a[k], b[k]]``.

    Working with the logarithm lets the integrand be inspected before it
    is exponentiated: a panel where ``log_f`` exceeds the float range is
    recorded as an infinite integral instead of producing NaNs.  A panel
    is accepted when the Richardson error estimate is below its share of
    ``max(tol, rel_tol * |estimate|)``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    count = a.size
    values = np.zeros(count)
    errors = np.zeros(count)
    converged = np.ones(count, dtype=bool)
    infinite = np.zeros(count, dtype=bool)

    def f(t, owner):
        lg = np.asarray(log_f(t, owner), dtype=float)
        over = lg > _LOG_MAX
        with np.errstate(over="ignore", under="ignore"):
            val = np.exp(np.minimum(lg, _LOG_MAX))
        val[over] = np.inf
        return val

    p = max(int(initial_panels), 1)
    owner = np.repeat(np.arange(count), p)
    frac = np.tile(np.arange(p), count)
    width = np.repeat((b - a) / p, p)
    lo = np.repeat(a, p) + frac * width
    hi = lo + width
    hi[frac == p - 1] = np.repeat(b, p)[frac == p - 1]
    ptol = np.full(owner.size, tol / p)
    depth = np.zeros(owner.size, dtype=int)

    mid = 0.5 * (lo + hi)
    fa, fm, fb = f(lo, owner), f(mid, owner), f(hi, owner)
    evals = 3 * owner.size
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    while owner.size:
        bad = ~np.isfinite(fa) | ~np.isfinite(fm) | ~np.isfinite(fb)
        if np.any(bad):
            infinite[owner[bad]] = True
        keep = ~bad & ~infinite[owner]
        lo, hi, mid, fa, fm, fb, whole, owner, ptol, depth = (
            arr[keep] for arr in (lo, hi, mid, fa, fm, fb, whole, owner, ptol, depth)
        )
        if owner.size == 0:
            break

        lq = 0.5 * (lo + mid)
        rq = 0.5 * (mid + hi)
        flq, frq = f(lq, owner), f(rq, owner)
        evals += 2 * owner.size
        left = (mid - lo) / 6.0 * (fa + 4.0 * flq + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frq + fb)
        both = left + right
        with np.errstate(invalid="ignore"):
            err = (both - whole) / 15.0
        finite = np.isfinite(flq) & np.isfinite(frq)
        limit = np.maximum(ptol, rel_tol * np.abs(both))
        exhausted = evals >= max_evals
        done = finite & ((np.abs(err) <= limit) | (depth >= max_depth) | exhausted | (mid <= lo) | (hi <= mid))
        if np.any(~finite):
            infinite[owner[~finite]] = True

        acc = done & ~infinite[owner]
        np.add.at(values, owner[acc], both[acc] + err[acc])
        np.add.at(errors, owner[acc], np.abs(err[acc]))
        failed = acc & (np.abs(err) > limit)
        converged[owner[failed]] = False

        split = ~done & finite
        o = owner[split]
        lo, hi, mid, fa, fm, fb, whole, owner, ptol, depth = (
            np.concatenate(pair)
            for pair in (
                (lo[split], mid[split]),
                (mid[split], hi[split]),
                (lq[split], rq[split]),
                (fa[split], fm[split]),
                (flq[split], frq[split]),
                (fm[split], fb[split]),
                (left[split], right[split]),
                (o, o),
                (ptol[split] / 2.0, ptol[split] / 2.0),
                (depth[split] + 1, depth[split] + 1),
            )
        )

    values[infinite] = np.inf
    errors[infinite] = 0.0
    return QuadResult(values, errors, converged, evals)
