"""Scalar special functions and 1-D root finding used by both tier solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketError, BracketOverflow, ConvergenceError, DomainError

__all__ = [
    "BracketedRoot",
    "INV_E",
    "bisect_root",
    "expand_upper_bracket",
    "lambert_w0",
]

INV_E = math.exp(-1.0)
BRANCH_SLACK = 1e-12
W0_TOL = 1e-12
BISECT_TOL = 1e-9
BRACKET_CAP = 1e30

# Series of W0 about the branch point in p = sqrt(2(e*x + 1)).
_BRANCH_COEFFS = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0,
                  769.0 / 17280.0, -221.0 / 8505.0)
# Below this distance from -1/e the series alone is accurate to ~1e-25.
_SERIES_ONLY = 1e-8
_HALLEY_MAX = 60


def _branch_series(p):
    w = 0.0
    for c in reversed(_BRANCH_COEFFS):
        w = w * p + c
    return w


def _w0_scalar(x: float) -> float:
    if math.isnan(x):
        return math.nan
    if x < -INV_E:
        if x < -INV_E - BRANCH_SLACK:
            raise DomainError(f"lambert_w0 undefined for x={x!r} < -1/e")
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    dist = x + INV_E
    if dist < _SERIES_ONLY:
        return _branch_series(math.sqrt(2.0 * math.e * dist))
    if x < 0.0:
        w = _branch_series(math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0)))
    else:
        w = math.log1p(x)
    for _ in range(_HALLEY_MAX):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


def _w0_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -INV_E - BRANCH_SLACK):
        bad = x[x < -INV_E - BRANCH_SLACK][0]
        raise DomainError(f"lambert_w0 undefined for x={bad!r} < -1/e")
    x = np.maximum(x, -INV_E)
    dist = x + INV_E
    p = np.sqrt(np.maximum(2.0 * (math.e * x + 1.0), 0.0))
    near = dist < _SERIES_ONLY
    p_near = np.sqrt(2.0 * math.e * dist)
    series = np.zeros_like(x)
    with np.errstate(invalid="ignore"):
        for c in reversed(_BRANCH_COEFFS):
            series = series * np.where(near, p_near, p) + c
    w = np.where(x < 0.0, series, np.log1p(np.maximum(x, 0.0)))
    active = ~near & (x != 0.0) & np.isfinite(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(_HALLEY_MAX):
            if not active.any():
                break
            wa = w[active]
            xa = x[active]
            ew = np.exp(wa)
            f = wa * ew - xa
            wp1 = wa + 1.0
            denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
            step = np.where(denom != 0.0, f / denom, 0.0)
            w[active] = wa - step
            done = np.abs(step) <= 4e-16 * (1.0 + np.abs(w[active]))
            idx = np.flatnonzero(active)
            active[idx[done]] = False
    w = np.where(x == 0.0, 0.0, w)
    w = np.where(np.isposinf(x), np.inf, w)
    return w


def lambert_w0(x):
    """Principal branch of the Lambert W function, ``w * exp(w) = x, w >= -1``.

    Halley iteration started from ``log1p(x)`` for ``x >= 0`` and from the
    branch-point series in ``p = sqrt(2(e x + 1))`` for ``x < 0``; within
    1e-8 of ``-1/e`` the seven-term series is returned directly.  Arguments
    up to 1e-12 below ``-1/e`` are clamped to the branch point (``-1``).

    Accepts a float or an array; arrays are evaluated elementwise.
    """
    if np.ndim(x) == 0:
        return _w0_scalar(float(x))
    return _w0_array(x)


@dataclass(frozen=True)
class BracketedRoot:
    lo: float
    hi: float
    tolerance: float = BISECT_TOL
    max_iters: int = 200

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tolerance > 0:
            raise ValueError("bracket tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


def bisect_root(f: Callable[[float], float], bracket: BracketedRoot,
                ftol: float | None = None) -> float:
    """Bisection on a monotone ``f`` over ``bracket``.

    Stops when the bracket is narrower than ``bracket.tolerance`` or, if
    ``ftol`` is given, when ``|f(mid)| <= ftol``.
    """
    lo, hi = bracket.lo, bracket.hi
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo < 0.0) == (fhi < 0.0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    rising = flo < 0.0
    for _ in range(bracket.max_iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if ftol is not None and abs(fm) <= ftol:
            return mid
        if hi - lo <= bracket.tolerance or mid in (lo, hi):
            return mid
        if (fm < 0.0) == rising:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection did not converge in {bracket.max_iters} iterations",
        residual=hi - lo)


def expand_upper_bracket(f: Callable[[float], float], lo: float, *,
                         cap: float = BRACKET_CAP, tolerance: float = BISECT_TOL,
                         max_iters: int = 200) -> BracketedRoot:
    """Bracket the root of an increasing ``f`` with ``f(lo) < 0``.

    Probes ``hi = max(lo, 1)`` and doubles it until ``f(hi) >= 0``; the
    last failing probe becomes the new lower end.
    """
    if not f(lo) < 0.0:
        raise ValueError("expand_upper_bracket needs f(lo) < 0")
    low = lo
    hi = max(lo, 1.0)
    if hi == lo:
        hi *= 2.0
    while True:
        if hi > cap:
            raise BracketOverflow(f"no sign change below cap {cap:g}")
        if f(hi) >= 0.0:
            return BracketedRoot(low, hi, tolerance, max_iters)
        low = hi
        hi *= 2.0
