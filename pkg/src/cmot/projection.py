"""Euclidean projection onto the paraboloid set K.

K is the closed convex region {(a, b) : a + |b|^2/2 <= 0} whose
support function encodes the kinetic energy density.  Points already
in K project to themselves.  For an outside point the projection lies
on the boundary a = -|b|^2/2 and can be parametrized by a single
scalar t >= 1 scaling the vector slot: b* = b/t, a* = -|b*|^2/2,
where t is the unique root >= 1 of

    h(t) = t^3 - (a + 1) t^2 - |b|^2 / 2 = 0.

h(1) < 0 outside K and h is increasing and convex to the right of the
root, so Newton started from an upper bound of the root converges
monotonically; the bound max(1, a+1) + cbrt(|b|^2/2) + 1 exceeds the
root because each term dominates one piece of the cubic.

A point with a + |b|^2/2 = 0 exactly is on the boundary and returned
unchanged, as is any interior point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import PairField

__all__ = ["PairPoint", "project_k", "solve_q"]

_NEWTON_STEPS = 60


@dataclass(frozen=True)
class PairPoint:
    """A single (scalar, vector) sample, the pointwise unit of K."""

    a: float
    b: tuple[float, ...]


def _project_arrays(a: np.ndarray, bx: np.ndarray, by: np.ndarray):
    """Vectorized projection; returns new arrays, inputs untouched."""
    half_sq = 0.5 * (bx * bx + by * by)
    outside = a + half_sq > 0.0
    if not np.any(outside):
        return a.copy(), bx.copy(), by.copy()

    av = a[outside]
    sv = half_sq[outside]
    # Upper bound of the root; Newton descends monotonically from it.
    t = np.maximum(1.0, av + 1.0) + np.cbrt(sv) + 1.0
    for _ in range(_NEWTON_STEPS):
        h = t * t * (t - (av + 1.0)) - sv
        hp = t * (3.0 * t - 2.0 * (av + 1.0))
        step = h / hp
        t -= step
        if np.all(np.abs(step) <= 1e-16 * t):
            break
    t = np.maximum(t, 1.0)

    a_out = a.copy()
    bx_out = bx.copy()
    by_out = by.copy()
    bx_out[outside] = bx[outside] / t
    by_out[outside] = by[outside] / t
    a_out[outside] = -0.5 * (bx_out[outside] ** 2 + by_out[outside] ** 2)
    return a_out, bx_out, by_out


def project_k(point: PairPoint) -> PairPoint:
    """Project a single point onto K."""
    b = np.asarray(point.b, dtype=float)
    if b.shape != (2,):
        raise ValueError(f"vector slot must have 2 components, got shape {b.shape}")
    a = np.array([float(point.a)])
    bx = np.array([b[0]])
    by = np.array([b[1]])
    a2, bx2, by2 = _project_arrays(a, bx, by)
    return PairPoint(float(a2[0]), (float(bx2[0]), float(by2[0])))


def solve_q(b_field: PairField, eta: PairField, r: float) -> PairField:
    """Pointwise minimizer of the q sub-problem: project b + eta/r onto K.

    Minimizing the indicator of K plus (r/2)|q - b|^2 - <eta, q> is,
    after completing the square, the projection of b + eta/r.
    """
    if b_field.grid != eta.grid:
        raise ValueError("fields live on different grids")
    if r <= 0:
        raise ValueError(f"penalty weight r must be positive, got {r}")
    a = b_field.a + eta.a / r
    bx = b_field.b[0] + eta.b[0] / r
    by = b_field.b[1] + eta.b[1] / r
    a2, bx2, by2 = _project_arrays(a, bx, by)
    return PairField(b_field.grid, a2, np.stack([bx2, by2]))
