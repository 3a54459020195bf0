"""Space-time Poisson solves for the potential update.

Each outer iteration updates the potential phi by minimizing a
quadratic, which is equivalent to the linear problem

    -r * laplacian_ts(phi) = div_ts(nu - r*p) - g,

where g carries the prescribed initial and final densities.  The
endpoint data enter through the trapezoidal time weights: the slice
t=0 receives +2*rho0/dt and the slice t=1 receives -2*rho1/dt, which
is the exact quadrature of the boundary terms of the underlying
integration by parts (a half weight times 2/dt integrates to one).

The operator separates per axis, so the solve diagonalizes it once
per grid: the time factor is symmetrized with the square root of the
trapezoidal weights and all three one-dimensional factors are reduced
with a dense symmetric eigendecomposition.  Applying the inverse is
then three small tensor contractions in, a pointwise division, and
three contractions out.  The kernel (constants, plus the alternating
checkerboard modes that centered differences cannot see on even
periodic grids) is removed from the solution, and the gauge is fixed
by subtracting the mean.

A right-hand side with a genuine component on the constant mode has
no solution; that only happens when the two endpoint densities carry
different total mass, and it is reported as an error rather than
silently projected away.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridSpec, PairField, ScalarField, div_ts

__all__ = [
    "PoissonProblem",
    "PoissonCompatibilityError",
    "boundary_source",
    "solve_phi",
]

# Relative size below which an eigenvalue of the separated operator is
# treated as an exact zero (kernel mode).
_KERNEL_TOL = 1e-10

# Relative size of the constant-mode component of the right-hand side
# beyond which the problem is reported as incompatible.
_COMPAT_TOL = 1e-6


class PoissonCompatibilityError(ValueError):
    """Right-hand side has a component the operator cannot produce."""


@dataclass
class PoissonProblem:
    """Data for one potential solve.

    ``rhs_source`` is the pair field whose divergence drives the
    equation (nu - r*p in the iterations); ``rho0`` and ``rho1`` are
    the endpoint densities, shape (nx, ny), with matching total mass.
    """

    grid: GridSpec
    r: float
    rhs_source: PairField
    rho0: np.ndarray
    rho1: np.ndarray

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"penalty weight r must be positive, got {self.r}")
        self.rho0 = _check_spatial(self.grid, self.rho0, "rho0")
        self.rho1 = _check_spatial(self.grid, self.rho1, "rho1")
        if self.rhs_source.grid != self.grid:
            raise ValueError("rhs_source lives on a different grid")
        m0 = float(np.sum(self.rho0)) * self.grid.cell_area
        m1 = float(np.sum(self.rho1)) * self.grid.cell_area
        scale = max(abs(m0), abs(m1), 1e-300)
        if abs(m0 - m1) > 1e-8 * scale:
            raise ValueError(f"endpoint masses differ: {m0!r} vs {m1!r}")


def _check_spatial(grid: GridSpec, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.nx, grid.ny):
        raise ValueError(f"{name} has shape {arr.shape}, expected {(grid.nx, grid.ny)}")
    return arr


def boundary_source(grid: GridSpec, rho0: np.ndarray, rho1: np.ndarray) -> ScalarField:
    """Endpoint-density source g: +2*rho0/dt at t=0, -2*rho1/dt at t=1.

    Satisfies inner(g, phi) = sum(rho0*phi[0] - rho1*phi[-1])*dx*dy
    exactly under the trapezoidal time weights.
    """
    g = np.zeros(grid.shape)
    g[0] = 2.0 * np.asarray(rho0, dtype=float) / grid.dt
    g[-1] = -2.0 * np.asarray(rho1, dtype=float) / grid.dt
    return ScalarField(grid, g)


@dataclass
class _Spectral:
    qt: np.ndarray
    qx: np.ndarray
    qy: np.ndarray
    lam: np.ndarray      # (nt, nx, ny) eigenvalue tensor, kernel entries set to 1
    kernel: np.ndarray   # boolean mask of kernel modes
    sqrt_w: np.ndarray   # (nt,) square root of the time weights


@lru_cache(maxsize=8)
def _spectral(grid: GridSpec) -> _Spectral:
    w = grid.time_weights
    sw = np.sqrt(w)
    dt_mat = grid.dmat_t
    # Symmetrized time factor W^{-1/2} Dt^T W Dt W^{-1/2}; space factors
    # D^T D are symmetric already.
    st = (dt_mat.T * w) @ dt_mat / sw[:, None] / sw[None, :]
    ax = grid.dmat_x.T @ grid.dmat_x
    ay = grid.dmat_y.T @ grid.dmat_y
    lt, qt = np.linalg.eigh(st)
    lx, qx = np.linalg.eigh(ax)
    ly, qy = np.linalg.eigh(ay)
    lam = lt[:, None, None] + lx[None, :, None] + ly[None, None, :]
    kernel = lam < _KERNEL_TOL * lam.max()
    lam = np.where(kernel, 1.0, lam)
    return _Spectral(qt, qx, qy, lam, kernel, sw)


def _to_modal(values: np.ndarray, sp: _Spectral) -> np.ndarray:
    out = np.einsum("ji,jxy->ixy", sp.qt, values)
    out = np.einsum("ji,tjy->tiy", sp.qx, out)
    return np.einsum("ji,txj->txi", sp.qy, out)


def _from_modal(modal: np.ndarray, sp: _Spectral) -> np.ndarray:
    out = np.einsum("ij,jxy->ixy", sp.qt, modal)
    out = np.einsum("ij,tjy->tiy", sp.qx, out)
    return np.einsum("ij,txj->txi", sp.qy, out)


def solve_phi(problem: PoissonProblem) -> ScalarField:
    """Solve -r*laplacian_ts(phi) = div_ts(rhs_source) - g, mean(phi) = 0.

    The result is exact up to round-off on the complement of the
    operator kernel.  Checkerboard kernel modes on even periodic grids
    are projected out silently; a constant-mode defect means the
    endpoint data pump net mass and raises PoissonCompatibilityError.
    """
    grid = problem.grid
    sp = _spectral(grid)
    g = boundary_source(grid, problem.rho0, problem.rho1)
    div_part = div_ts(problem.rhs_source).values
    rhs = div_part - g.values

    # Compatibility against the physical kernel (constants): the
    # weighted mean of the right-hand side must vanish.  The defect is
    # measured against the terms that assembled the right-hand side,
    # not against rhs itself, which near a fixed point is pure
    # cancellation noise.
    w = grid.time_weights[:, None, None]
    defect = float(np.sum(rhs * w))
    sum_w = float(np.sum(w))
    scale = float(
        np.sqrt(
            max(
                np.sum(rhs * rhs * w),
                np.sum(div_part * div_part * w),
                np.sum(g.values * g.values * w),
            )
            * sum_w
        )
    )
    if abs(defect) > _COMPAT_TOL * max(scale, 1e-300):
        raise PoissonCompatibilityError(
            f"right-hand side has constant-mode component {defect:.3e} "
            f"(relative {abs(defect) / max(scale, 1e-300):.3e}); "
            "endpoint densities likely carry different total mass"
        )

    modal = _to_modal(rhs * sp.sqrt_w[:, None, None], sp)
    modal = np.where(sp.kernel, 0.0, modal / (problem.r * sp.lam))
    phi = _from_modal(modal, sp) / sp.sqrt_w[:, None, None]
    phi -= phi.mean()
    return ScalarField(grid, phi)
