"""Convex constraint functionals on (density, momentum) pairs.

A constraint is a sum of terms, each acting pointwise on either the
scalar slot (density) or the vector slot (momentum) of a PairField.
The coupled update of the iterations is the proximal map

    prox(c) = argmin_mu  s*|mu - c|^2 + I(mu),

which splits per point and per slot because every supported term is
separable.  Terms must not overlap: two hard terms pinning the same
density samples, or two penalties weighting the same momentum
samples, would require a genuine prox composition, which is out of
scope.  Overlap is rejected when a spec is validated.

Hard terms are exact: after the prox, their violation is zero, not
merely small.  The density upper bound imposes no implicit lower
bound; nonnegativity of the density is a consequence of the transport
dynamics, not of this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, PairField

__all__ = [
    "ConstraintSpec",
    "Unconstrained",
    "DensityUpperBound",
    "MomentumQuadraticPenalty",
    "FixedDensityRegion",
    "prox_mu",
    "compute_target",
    "evaluate_I",
]

# Hard-constraint violations beyond this are reported as infeasible.
_HARD_TOL = 1e-9


def _spatial(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d spatial field, got shape {arr.shape}")
    return arr


@dataclass
class Unconstrained:
    """I = 0; the prox is the identity."""

    def validate(self, grid: GridSpec):
        pass

    def scalar_support(self, grid: GridSpec) -> np.ndarray:
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def vector_support(self, grid: GridSpec) -> np.ndarray:
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def apply_prox(self, a: np.ndarray, b: np.ndarray, s: float):
        pass

    def value(self, mu: PairField) -> float:
        return 0.0


@dataclass
class DensityUpperBound:
    """Hard cap rho(t, x) <= rho_bar(x) at every time."""

    rho_bar: np.ndarray

    def __post_init__(self):
        self.rho_bar = _spatial(self.rho_bar, "rho_bar")
        if np.any(self.rho_bar < 0):
            raise ValueError("rho_bar must be nonnegative")

    def validate(self, grid: GridSpec):
        if self.rho_bar.shape != (grid.nx, grid.ny):
            raise ValueError(
                f"rho_bar has shape {self.rho_bar.shape}, grid expects {(grid.nx, grid.ny)}"
            )

    def scalar_support(self, grid: GridSpec) -> np.ndarray:
        return np.isfinite(self.rho_bar)

    def vector_support(self, grid: GridSpec) -> np.ndarray:
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def apply_prox(self, a: np.ndarray, b: np.ndarray, s: float):
        np.minimum(a, self.rho_bar[None], out=a)

    def value(self, mu: PairField) -> float:
        if np.any(mu.a > self.rho_bar[None] + _HARD_TOL):
            return float("inf")
        return 0.0


@dataclass
class MomentumQuadraticPenalty:
    """Soft penalty I = integral of psi(x)*|m(t,x)|^2."""

    psi: np.ndarray

    def __post_init__(self):
        self.psi = _spatial(self.psi, "psi")
        if np.any(self.psi < 0):
            raise ValueError("psi must be nonnegative")

    def validate(self, grid: GridSpec):
        if self.psi.shape != (grid.nx, grid.ny):
            raise ValueError(f"psi has shape {self.psi.shape}, grid expects {(grid.nx, grid.ny)}")

    def scalar_support(self, grid: GridSpec) -> np.ndarray:
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def vector_support(self, grid: GridSpec) -> np.ndarray:
        return self.psi > 0

    def apply_prox(self, a: np.ndarray, b: np.ndarray, s: float):
        # argmin_m s(m-c)^2 + psi m^2 = c * s/(s+psi), per point and component.
        b *= (s / (s + self.psi))[None, None]

    def value(self, mu: PairField) -> float:
        grid = mu.grid
        w = grid.time_weights[:, None, None]
        sq = mu.b[0] ** 2 + mu.b[1] ** 2
        return float(np.sum(self.psi[None] * sq * w) * grid.dt * grid.cell_area)


@dataclass
class FixedDensityRegion:
    """Hard equality rho(t, x) = rho_fixed(x) on a spatial mask, all t."""

    mask: np.ndarray
    rho_fixed: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ValueError(f"mask must be a 2-d spatial field, got shape {self.mask.shape}")
        self.rho_fixed = _spatial(self.rho_fixed, "rho_fixed")
        if self.rho_fixed.shape != self.mask.shape:
            raise ValueError("mask and rho_fixed must share a shape")
        if np.any(self.rho_fixed[self.mask] < 0):
            raise ValueError("rho_fixed must be nonnegative on the mask")

    def validate(self, grid: GridSpec):
        if self.mask.shape != (grid.nx, grid.ny):
            raise ValueError(f"mask has shape {self.mask.shape}, grid expects {(grid.nx, grid.ny)}")

    def scalar_support(self, grid: GridSpec) -> np.ndarray:
        return self.mask

    def vector_support(self, grid: GridSpec) -> np.ndarray:
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def apply_prox(self, a: np.ndarray, b: np.ndarray, s: float):
        a[:, self.mask] = self.rho_fixed[self.mask]

    def value(self, mu: PairField) -> float:
        dev = np.abs(mu.a[:, self.mask] - self.rho_fixed[self.mask])
        if dev.size and float(dev.max()) > _HARD_TOL:
            return float("inf")
        return 0.0


@dataclass
class ConstraintSpec:
    """An additive combination of constraint terms."""

    terms: list = field(default_factory=lambda: [Unconstrained()])

    def validate(self, grid: GridSpec):
        """Check shapes against the grid and reject overlapping terms."""
        for term in self.terms:
            term.validate(grid)
        scalar_cover = np.zeros((grid.nx, grid.ny), dtype=int)
        vector_cover = np.zeros((grid.nx, grid.ny), dtype=int)
        for term in self.terms:
            scalar_cover += term.scalar_support(grid)
            vector_cover += term.vector_support(grid)
        if np.any(scalar_cover > 1):
            raise ValueError("constraint terms overlap on the density slot")
        if np.any(vector_cover > 1):
            raise ValueError("constraint terms overlap on the momentum slot")

    @classmethod
    def unconstrained(cls) -> "ConstraintSpec":
        return cls([Unconstrained()])


def prox_mu(c: PairField, s: float, spec: ConstraintSpec) -> PairField:
    """Exact minimizer of s*|mu - c|^2 + I(mu)."""
    if s <= 0:
        raise ValueError(f"prox weight s must be positive, got {s}")
    a = c.a.copy()
    b = c.b.copy()
    for term in spec.terms:
        term.apply_prox(a, b, s)
    return PairField(c.grid, a, b)


def compute_target(nu: PairField, eta: PairField, p: PairField, b: PairField, s: float) -> PairField:
    """The prox argument (nu + eta + (p - b)/s) / 2."""
    if not (nu.grid == eta.grid == p.grid == b.grid):
        raise ValueError("fields live on different grids")
    if s <= 0:
        raise ValueError(f"prox weight s must be positive, got {s}")
    return (nu + eta + (1.0 / s) * (p - b)) * 0.5


def evaluate_I(mu: PairField, spec: ConstraintSpec) -> float:
    """Value of the constraint functional; +inf when a hard term is violated."""
    total = 0.0
    for term in spec.terms:
        v = term.value(mu)
        if not np.isfinite(v):
            return float("inf")
        total += v
    return total
