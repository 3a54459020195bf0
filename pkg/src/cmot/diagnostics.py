"""Per-iteration instrumentation: energy, residuals, conservation.

Every outer iteration produces one IterationRecord.  Residual norms
are stored raw (in the weighted space-time norm); tables emitted from
a history additionally carry versions scaled by the first-iteration
values, since stopping behavior is easier to read that way.

The kinetic energy guards the division by the density with a small
floor so that vacuum regions report zero momentum cost instead of
NaN.  The continuity residual measures the defect of the discrete
conservation law including the endpoint data, i.e. the norm of
div_ts(mu) - g; at a solution this vanishes, since the endpoint
densities enter the discrete divergence through the boundary rows.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .grid import PairField, norm
from .poisson import boundary_source

__all__ = ["EPS_RHO", "IterationRecord", "energy", "residuals", "mass_per_slice"]

# Density floor inside the energy quadrature.
EPS_RHO = 1e-8


@dataclass
class IterationRecord:
    """Scalar diagnostics of one outer iteration."""

    iteration: int
    energy: float
    res_Bphi_p: float
    res_b_q: float
    res_mu_nu: float
    res_mu_eta: float
    res_Bphi_q: float
    continuity_residual: float
    density_change: float
    mass_per_slice_max_dev: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclass_fields(cls)]


def energy(mu: PairField) -> float:
    """Kinetic action sum of |m|^2 / (2*max(rho, EPS_RHO)) over the grid."""
    grid = mu.grid
    w = grid.time_weights[:, None, None]
    rho = np.maximum(mu.a, EPS_RHO)
    dens = (mu.b[0] ** 2 + mu.b[1] ** 2) / (2.0 * rho)
    return float(np.sum(dens * w) * grid.dt * grid.cell_area)


def mass_per_slice(mu: PairField) -> np.ndarray:
    """Total density mass of each time slice, shape (nt,)."""
    grid = mu.grid
    return np.sum(mu.a, axis=(1, 2)) * grid.cell_area


def residuals(state, problem) -> dict:
    """Residual norms of a solver state against a transport problem.

    Returns the five splitting residuals plus the continuity defect
    and the per-slice mass deviation, keyed by IterationRecord field
    names.
    """
    from .grid import div_ts, grad_ts

    bphi = grad_ts(state.phi)
    g = boundary_source(problem.grid, problem.rho0, problem.rho1)
    cont = div_ts(state.mu)
    cont_norm = norm(type(cont)(problem.grid, cont.values - g.values))
    mass0 = float(np.sum(problem.rho0)) * problem.grid.cell_area
    slice_dev = float(np.max(np.abs(mass_per_slice(state.mu) - mass0)))
    return {
        "res_Bphi_p": norm(bphi - state.p),
        "res_b_q": norm(state.b - state.q),
        "res_mu_nu": norm(state.mu - state.nu),
        "res_mu_eta": norm(state.mu - state.eta),
        "res_Bphi_q": norm(bphi - state.q),
        "continuity_residual": cont_norm,
        "mass_per_slice_max_dev": slice_dev,
    }
