"""Shared numerical helpers: stencil derivatives, quadrature, alignment.

All routines assume uniform grids; curve and pulse containers elsewhere in the
library guarantee that.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x=0 on integer offsets.

    Solves the Vandermonde moment system exactly, so any stencil (central or
    one-sided) comes from the same code path.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    if order >= n:
        raise ValueError("stencil too short for requested derivative order")
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    powers = np.vander(offsets, n, increasing=True).T
    return np.linalg.solve(powers, rhs)


def _stencil_table(order: int, width: int = 5):
    half = width // 2
    central = fd_weights(np.arange(-half, half + 1), order)
    # one-sided stencils: point i from the start sees offsets arange(width)-i,
    # point i past the last central point sees offsets arange(width)-(width-half+i)
    left = [fd_weights(np.arange(width) - i, order) for i in range(half)]
    right = [fd_weights(np.arange(width) - (width - half + i), order) for i in range(half)]
    return central, left, right


_STENCILS = {m: _stencil_table(m) for m in (1, 2, 3)}


def derivative_uniform(y: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    """5-point stencil derivative of samples on a uniform grid.

    Central stencils in the interior, one-sided at the two points nearest
    each end. Works on the leading axis of `y` (real or complex).
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples for stencil derivatives")
    central, left, right = _STENCILS[order]
    out = np.zeros(y.shape, dtype=np.result_type(y.dtype, float))
    width = central.size
    half = width // 2
    # interior: convolution via shifted slices
    for j, w in enumerate(central):
        out[half:n - half] += w * y[j:n - width + j + 1]
    for i, w in enumerate(left):
        out[i] = np.tensordot(w, y[:width], axes=(0, 0))
    for i, w in enumerate(right):
        out[n - half + i] = np.tensordot(w, y[n - width:], axes=(0, 0))
    return out / h ** order


def cumulative_trapezoid(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid along the leading axis, starting at zero."""
    y = np.asarray(y)
    out = np.zeros_like(y)
    np.cumsum(0.5 * h * (y[1:] + y[:-1]), axis=0, out=out[1:])
    return out


def cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative Simpson integral along the leading axis, starting at zero.

    Each interval [i, i+1] is integrated from the parabola through three
    consecutive samples, oriented so consecutive intervals pair into full
    Simpson panels; the two half-panel error terms then cancel and the
    cumulative result stays O(h^4) like composite Simpson.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 3:
        return cumulative_trapezoid(y, h)
    a, b, c = y[:-2], y[1:-1], y[2:]
    first = h * (5.0 * a + 8.0 * b - c) / 12.0    # [i, i+1] from (i, i+1, i+2)
    second = h * (-a + 8.0 * b + 5.0 * c) / 12.0  # [i+1, i+2] from (i, i+1, i+2)
    inc = np.empty_like(y[1:])
    even = np.arange(0, n - 2, 2)
    inc[even] = first[even]
    odd = np.arange(1, n - 1, 2)
    inc[odd] = second[odd - 1]
    if (n - 2) % 2 == 0:
        # last interval has no panel partner; close it with the trailing parabola
        inc[n - 2] = second[n - 3]
    out = np.zeros_like(y)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def integrate_simpson(y: np.ndarray, h: float):
    """Definite integral along the leading axis (cumulative Simpson endpoint)."""
    return cumulative_simpson(y, h)[-1]


def unwrap_angle(a: np.ndarray) -> np.ndarray:
    return np.unwrap(np.asarray(a, dtype=float))


def chebyshev_derivative(t: np.ndarray, series: np.ndarray, degree: int | None = None) -> np.ndarray:
    """Spectral time derivative of a smooth series via a global Chebyshev fit.

    Unlike stencils, repeated application does not amplify roundoff by 1/h per
    pass, which matters for cascaded derivatives. With degree None the lowest
    degree whose fit residual reaches ~1e-12 of the data scale is used; the
    series must be smooth on the whole window for the fit to converge.
    """
    from numpy.polynomial import chebyshev as cheb

    t = np.asarray(t, dtype=float)
    series = np.asarray(series)
    a, b = float(t[0]), float(t[-1])
    x = (2.0 * t - (a + b)) / (b - a)
    flat = series.reshape(t.size, -1)
    scale = float(np.max(np.abs(flat))) or 1.0
    degrees = [degree] if degree is not None else [16, 24, 32, 48, 64, 96, 128]
    for deg in degrees:
        coef = cheb.chebfit(x, flat, deg)
        resid = float(np.max(np.abs(cheb.chebval(x, coef).T - flat)))
        if resid <= 1e-12 * scale or deg == degrees[-1]:
            break
    dcoef = cheb.chebder(coef) * (2.0 / (b - a))
    return cheb.chebval(x, dcoef).T.reshape(series.shape)


def procrustes_align(points: np.ndarray, reference: np.ndarray):
    """Optimal rigid motion (rotation + translation) of `points` onto `reference`.

    Returns the moved points. Orthogonal Procrustes on the centered sample
    matrices; proper rotation enforced.
    """
    p = np.asarray(points, dtype=float)
    q = np.asarray(reference, dtype=float)
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    u, _, vt = np.linalg.svd((p - pc).T @ (q - qc))
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] *= -1
        rot = u @ vt
    return (p - pc) @ rot + qc


def interp_masked(x: np.ndarray, y: np.ndarray, bad: np.ndarray) -> np.ndarray:
    """Replace `y[bad]` by monotone-cubic interpolation through the good samples."""
    from scipy.interpolate import PchipInterpolator

    bad = np.asarray(bad, dtype=bool)
    if not bad.any():
        return y
    good = ~bad
    if good.sum() < 4:
        raise ValueError("too few valid samples to interpolate across the gap")
    fixed = np.array(y, dtype=float)
    fixed[bad] = PchipInterpolator(x[good], y[good])(x[bad])
    return fixed


def thread_count() -> int:
    """Worker cap for sweep parallelism, from SCQC_THREADS (default 1)."""
    try:
        n = int(os.environ.get("SCQC_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


def map_points(fn, items):
    """Map `fn` over independent work items, threading if SCQC_THREADS > 1.

    Each item must be self-contained (owns its RNG stream), so threaded and
    serial runs produce bit-identical results in the same order.
    """
    n = thread_count()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
