"""Hermite interpolation in Newton form on a uniform grid.

The quintic patch matches values and slopes at three consecutive nodes; the
cubic resampler matches them at the two nodes bracketing each target point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import OutOfSpan


@dataclass(frozen=True)
class QuinticPatch:
    """Newton-form quintic on the doubled nodes ``x0, x0, x0+h, x0+h, x0+2h, x0+2h``."""

    x0: float
    h: float
    alpha: tuple[float, float, float, float, float, float]

    @property
    def span(self) -> tuple[float, float]:
        return self.x0, self.x0 + 2.0 * self.h


def quintic_fit(x0: float, h: float, u, w) -> QuinticPatch:
    """Divided-difference coefficients from values ``u`` and slopes ``w`` at three nodes."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    u0, u1, u2 = (float(v) for v in u)
    w0, w1, w2 = (float(v) for v in w)
    d01 = (u1 - u0) / h
    d12 = (u2 - u1) / h
    # second divided differences on z = (x0, x0, x1, x1, x2, x2)
    f001 = (d01 - w0) / h
    f011 = (w1 - d01) / h
    f112 = (d12 - w1) / h
    f122 = (w2 - d12) / h
    f0011 = (f011 - f001) / h
    f0112 = (f112 - f011) / (2 * h)
    f1122 = (f122 - f112) / h
    f00112 = (f0112 - f0011) / (2 * h)
    f01122 = (f1122 - f0112) / (2 * h)
    f001122 = (f01122 - f00112) / (2 * h)
    return QuinticPatch(float(x0), float(h), (u0, w0, f001, f0011, f00112, f001122))


def quintic_eval012(patch: QuinticPatch, x: float) -> tuple[float, float, float]:
    """Value, first and second derivative of the patch at ``x``.

    Nested Newton form with the derivatives carried along (synthetic
    differentiation), so no term-by-term derivative formula is needed.
    """
    lo, hi = patch.span
    slack = 1e-12 * max(1.0, abs(hi))
    if not (lo - slack <= x <= hi + slack):
        raise OutOfSpan(f"x={x} outside [{lo}, {hi}]")
    h = patch.h
    z = (lo, lo, lo + h, lo + h, lo + 2 * h)
    a = patch.alpha
    p, p1, p2 = a[5], 0.0, 0.0
    for k in range(4, -1, -1):
        t = x - z[k]
        p2 = p2 * t + 2.0 * p1
        p1 = p1 * t + p
        p = p * t + a[k]
    return p, p1, p2


def quintic_interpolate(values, slopes, h: float, x: float, stencil: str = "floor"):
    """Evaluate the quintic built on the three-node stencil around ``x``.

    ``values`` and ``slopes`` cover every node ``0..m``. With
    ``stencil="floor"`` the stencil starts at the node left of ``x``;
    ``"centered"`` centers it on the nearest node. Either way it is clamped
    to stay inside the grid.
    """
    m = len(values) - 1
    if stencil == "floor":
        j = int(math.floor(x / h))
    elif stencil == "centered":
        j = int(math.floor(x / h + 0.5)) - 1
    else:
        raise ValueError(f"unknown stencil {stencil!r}")
    j = min(max(j, 0), m - 2)
    patch = quintic_fit(j * h, h, values[j:j + 3], slopes[j:j + 3])
    return quintic_eval012(patch, x)


def cubic_hermite(u0, u1, s0, s1, h: float, t):
    """Cubic through ``(u0, s0)`` and ``(u1, s1)`` at local coordinate ``t*h``.

    Newton form on the doubled nodes ``(0, 0, h, h)``; all arguments broadcast.
    """
    d = (u1 - u0) / h
    c2 = (d - s0) / h
    c3 = (s1 - 2.0 * d + s0) / (h * h)
    dx = t * h
    return u0 + dx * (s0 + dx * (c2 + (dx - h) * c3))


def cubic_hermite_slope(u0, u1, s0, s1, h: float, t):
    """Derivative of :func:`cubic_hermite` with respect to ``x``."""
    d = (u1 - u0) / h
    c2 = (d - s0) / h
    c3 = (s1 - 2.0 * d + s0) / (h * h)
    dx = t * h
    return s0 + 2.0 * c2 * dx + c3 * dx * (3.0 * dx - 2.0 * h)


def cubic_shift_resample(values, slopes, h: float, shift: float,
                         left_closure: Callable[[np.ndarray], np.ndarray],
                         right_closure: float = 0.0) -> np.ndarray:
    """Resample a nodal field at the shifted positions ``x_i + shift``.

    ``values`` and ``slopes`` hold the field and its derivative at all nodes
    ``x_i = i h``, ``i = 0..m``. Positions left of ``0`` take
    ``left_closure(x)``, positions right of ``x_m`` take ``right_closure``,
    the rest use the cubic Hermite of the bracketing cell. Since the shift is
    the same for every node, one bracket offset serves the whole vector.
    """
    values = np.asarray(values, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    m = values.shape[-1] - 1
    x_max = m * h
    cells = shift / h
    base = math.floor(cells)
    frac = cells - base
    if frac > 1.0 - 1e-13:  # snap roundoff to the next node
        base, frac = base + 1, 0.0
    idx = np.arange(m + 1) + base
    pos = np.arange(m + 1) * h + shift
    out = np.full(values.shape, float(right_closure))

    left = pos < 0.0
    if frac == 0.0:
        inside = (idx >= 0) & (idx <= m)
        out[..., inside] = values[..., idx[inside]]
    else:
        inside = (idx >= 0) & (idx < m)
        j = idx[inside]
        out[..., inside] = cubic_hermite(values[..., j], values[..., j + 1],
                                         slopes[..., j], slopes[..., j + 1], h, frac)
        # a shift below round-off can leave the last node exactly on x_max
        on_edge = (idx == m) & (pos <= x_max)
        out[..., on_edge] = values[..., [m]]
    if left.any():
        out[..., left] = left_closure(pos[left])
    out[..., pos > x_max] = right_closure
    return out
