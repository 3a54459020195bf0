"""Saddle-point iterations for constrained dynamic transport.

The transport plan is the pair mu = (density, momentum) minimizing
the kinetic action subject to the continuity equation with prescribed
endpoint densities and a convex constraint functional I.  The
augmented saddle formulation splits the plan into coordinated copies:
a potential phi whose space-time gradient is tracked by an auxiliary
pair p, a pointwise pair q constrained to the paraboloid set K and
tracked by b, and multipliers nu (for p) and eta (for b) that must
agree with mu at a solution.  Penalty weights r (on the primal
couplings) and s (on the multiplier consensus) shape the conditioning.

Three iterations are provided.

``alg1`` solves the (phi, nu) and (q, eta) saddle sub-problems to
inner tolerance with their own ascent loops, then takes relaxed
steps on p and b and refreshes mu through the constraint prox.

``alg2`` replaces the inner loops with one minimization and one
ascent step per branch.  The p and nu updates deliberately read the
previous iterate of the other variable; the same holds for b and
eta.  This lag is what its step-size condition assumes.

``alg3`` is alg2 with a second mu refresh between the branches, so
the b and eta updates see a mu already informed by the new phi.

Each iteration needs one linear potential solve plus pointwise work,
so the cost per outer iteration of alg2 and alg3 is dominated by the
Poisson solve; alg1 performs one solve per inner sub-iteration.

Step-size validity is checked, not enforced: a report is attached to
every run and Violated settings emit a warning but proceed, since the
bounds are sufficient, not necessary.

All state is initialized in consensus: mu, nu and eta start at the
linear-in-time density interpolation with zero momentum, and phi, p,
q, b start at zero.  Started this way, a problem whose endpoints
already coincide is a fixed point up to round-off.  The first couple
of iterations leave the density slot untouched while the potential
branch activates, so convergence is never declared before
``min_outer`` iterations.

A run is declared converged only when the relative density change is
below ``tol_density`` and, at the same iteration, the worst per-slice
mass deviation is within 0.1% of the total mass (or within
``tol_density`` of it, when the requested tolerance is looser than
that).  The second condition guards against stopping on a slow
iteration that still violates conservation; it is what makes the
converged output trustworthy as a mass-preserving interpolation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .constraints import ConstraintSpec, compute_target, prox_mu
from .grid import GridSpec, PairField, ScalarField, grad_ts, norm
from .poisson import PoissonProblem, solve_phi
from .projection import solve_q

__all__ = [
    "TransportProblem",
    "SolverParams",
    "SolverState",
    "BoundCheck",
    "StepSizeReport",
    "NonFiniteFieldError",
    "validate_alg1",
    "validate_alg23",
    "validate_steps",
    "initial_state",
    "alg1_sub_phi",
    "alg1_sub_q",
    "alg1_step",
    "alg2_step",
    "alg3_step",
    "run",
    "Solution",
    "ALGORITHMS",
]

# Tolerance for deciding a supplied step size sits exactly on a bound.
_BOUNDARY_TOL = 1e-12

# Converged output must conserve mass per time slice to this fraction of
# the total mass (or to tol_density, when that is looser), on top of
# meeting tol_density itself.
_MASS_DEV_FRACTION = 1e-3


@dataclass
class TransportProblem:
    """Endpoint densities, grid, and constraint of one transport solve."""

    grid: GridSpec
    rho0: np.ndarray
    rho1: np.ndarray
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec.unconstrained)

    def __post_init__(self):
        self.rho0 = self._density(self.rho0, "rho0")
        self.rho1 = self._density(self.rho1, "rho1")
        self.constraint.validate(self.grid)

    def _density(self, values, name: str) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"{name} has shape {arr.shape}, grid expects {(self.grid.nx, self.grid.ny)}"
            )
        if np.any(arr < 0):
            raise ValueError(f"{name} must be nonnegative")
        return arr

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.rho0)) * self.grid.cell_area


@dataclass
class SolverParams:
    """Penalty weights, step sizes, and stopping controls.

    ``rho`` drives the p and b relaxation of alg1 and ``rho_nu``,
    ``rho_eta`` its multiplier sub-iterations; ``rho_r`` and ``rho_s``
    are the coupled step sizes of alg2 and alg3.  Iterations stop once
    the relative density change drops below ``tol_density`` and the
    per-slice mass deviation is within max(0.1%, tol_density) of the
    total mass, but never before ``min_outer`` outer iterations,
    because the density slot only starts moving after the potential
    branch has activated.
    """

    r: float = 1.0
    s: float = 1.0
    rho: float = 0.5
    rho_nu: float = 0.5
    rho_eta: float = 0.5
    rho_r: float = 0.4
    rho_s: float = 1.0
    max_outer: int = 5000
    max_inner: int = 200
    tol_density: float = 1e-3
    inner_tol: float = 1e-6
    min_outer: int = 5

    def __post_init__(self):
        if self.r <= 0 or self.s <= 0:
            raise ValueError(f"penalty weights must be positive, got r={self.r}, s={self.s}")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")


@dataclass
class SolverState:
    """All iteration variables after a given outer iteration."""

    phi: ScalarField
    q: PairField
    p: PairField
    b: PairField
    mu: PairField
    nu: PairField
    eta: PairField
    iteration: int = 0


@dataclass
class BoundCheck:
    """One step-size comparison: supplied value against its bound."""

    name: str
    bound_value: float
    supplied: float
    status: str  # Strict, Boundary, or Violated


@dataclass
class StepSizeReport:
    """Outcome of validating a parameter set for one algorithm."""

    algorithm: str
    checks: list[BoundCheck]

    @property
    def status(self) -> str:
        statuses = [c.status for c in self.checks]
        if "Violated" in statuses:
            return "Violated"
        if "Boundary" in statuses:
            return "Boundary"
        return "Strict"

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            out.append(
                f"{self.algorithm} {c.name}: supplied={c.supplied:.6g} "
                f"bound={c.bound_value:.6g} [{c.status}]"
            )
        return out


def _upper_bound_check(name: str, supplied: float, bound: float) -> BoundCheck:
    """Step size valid when 0 < supplied < bound."""
    if supplied <= 0 or supplied > bound + _BOUNDARY_TOL:
        status = "Violated"
    elif abs(supplied - bound) <= _BOUNDARY_TOL:
        status = "Boundary"
    else:
        status = "Strict"
    return BoundCheck(name, bound, supplied, status)


def _margin_check(name: str, margin: float, positive_steps: bool) -> BoundCheck:
    """Condition valid when the margin is strictly positive."""
    if not positive_steps or margin < -_BOUNDARY_TOL:
        status = "Violated"
    elif abs(margin) <= _BOUNDARY_TOL:
        status = "Boundary"
    else:
        status = "Strict"
    return BoundCheck(name, 0.0, margin, status)


def validate_alg1(params: SolverParams) -> StepSizeReport:
    """Check alg1 step sizes against their convergence bounds.

    The outer relaxation requires rho < (2rs^2 + s)/(1 + rs)^2 and each
    multiplier sub-iteration requires its step below 2r/(2rs + 1).
    """
    r, s = params.r, params.s
    outer_bound = (2.0 * r * s * s + s) / (1.0 + r * s) ** 2
    sub_bound = 2.0 * r / (2.0 * r * s + 1.0)
    checks = [
        _upper_bound_check("outer step rho", params.rho, outer_bound),
        _upper_bound_check("sub-step rho_nu", params.rho_nu, sub_bound),
        _upper_bound_check("sub-step rho_eta", params.rho_eta, sub_bound),
    ]
    return StepSizeReport("alg1", checks)


def validate_alg23(params: SolverParams) -> StepSizeReport:
    """Check the coupled step sizes of alg2 and alg3.

    Both margins 2s - rho_r - rho_s*s^2 - |rho_r*r - rho_s*s| and
    2r - rho_r*r^2 - rho_s - |rho_r*r - rho_s*s| must be positive.
    """
    r, s = params.r, params.s
    cross = abs(params.rho_r * r - params.rho_s * s)
    margin_s = 2.0 * s - params.rho_r - params.rho_s * s * s - cross
    margin_r = 2.0 * r - params.rho_r * r * r - params.rho_s - cross
    positive = params.rho_r > 0 and params.rho_s > 0
    checks = [
        _margin_check("margin in s", margin_s, positive),
        _margin_check("margin in r", margin_r, positive),
    ]
    return StepSizeReport("alg2/alg3", checks)


def validate_steps(params: SolverParams, algorithm: str) -> StepSizeReport:
    """Check step sizes against the bounds that cover ``algorithm``."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}")
    return validate_alg1(params) if algorithm == "alg1" else validate_alg23(params)


class NonFiniteFieldError(RuntimeError):
    """An iteration produced NaN or infinity."""

    def __init__(self, field_name: str, iteration: int):
        self.field_name = field_name
        self.iteration = iteration
        super().__init__(f"non-finite values in {field_name} at outer iteration {iteration}")


def initial_state(problem: TransportProblem) -> SolverState:
    """Consensus start: mu = nu = eta = linear density path, rest zero."""
    grid = problem.grid
    t = grid.t_nodes[:, None, None]
    path = (1.0 - t) * problem.rho0[None] + t * problem.rho1[None]
    mu = PairField(grid, path, np.zeros((2, *grid.shape)))
    return SolverState(
        phi=ScalarField.zeros(grid),
        q=PairField.zeros(grid),
        p=PairField.zeros(grid),
        b=PairField.zeros(grid),
        mu=mu,
        nu=mu.copy(),
        eta=mu.copy(),
        iteration=0,
    )


def _potential(problem: TransportProblem, params: SolverParams, nu: PairField, p: PairField) -> ScalarField:
    source = nu - params.r * p
    return solve_phi(
        PoissonProblem(problem.grid, params.r, source, problem.rho0, problem.rho1)
    )


def alg1_sub_phi(
    state: SolverState, problem: TransportProblem, params: SolverParams
) -> tuple[ScalarField, PairField, int]:
    """Inner saddle loop for (phi, nu) at frozen p and mu.

    Alternates the exact potential solve with a multiplier ascent step
    and stops when the relative change of nu drops below ``inner_tol``
    or after ``max_inner`` rounds.  Returns the final pair and the
    number of rounds taken.
    """
    r, s = params.r, params.s
    nu = state.nu
    phi = state.phi
    for k in range(1, params.max_inner + 1):
        phi = _potential(problem, params, nu, state.p)
        ascent = grad_ts(phi) - state.p - s * (nu - state.mu)
        nu_next = nu + params.rho_nu * ascent
        delta = norm(nu_next - nu)
        nu = nu_next
        if delta <= params.inner_tol * max(norm(nu), 1e-300):
            return phi, nu, k
    return phi, nu, params.max_inner


def alg1_sub_q(
    state: SolverState, params: SolverParams
) -> tuple[PairField, PairField, int]:
    """Inner saddle loop for (q, eta) at frozen b and mu."""
    s = params.s
    eta = state.eta
    q = state.q
    for k in range(1, params.max_inner + 1):
        q = solve_q(state.b, eta, params.r)
        ascent = state.b - q - s * (eta - state.mu)
        eta_next = eta + params.rho_eta * ascent
        delta = norm(eta_next - eta)
        eta = eta_next
        if delta <= params.inner_tol * max(norm(eta), 1e-300):
            return q, eta, k
    return q, eta, params.max_inner


def alg1_step(state: SolverState, problem: TransportProblem, params: SolverParams) -> SolverState:
    """One outer iteration of alg1."""
    phi, nu, _ = alg1_sub_phi(state, problem, params)
    relax = params.rho * (params.r + 1.0 / params.s)
    p = state.p - relax * (state.p - grad_ts(phi))
    q, eta, _ = alg1_sub_q(state, params)
    b = state.b - relax * (state.b - q)
    mu = prox_mu(compute_target(nu, eta, p, b, params.s), params.s, problem.constraint)
    return SolverState(phi, q, p, b, mu, nu, eta, state.iteration + 1)


def alg2_step(state: SolverState, problem: TransportProblem, params: SolverParams) -> SolverState:
    """One iteration of alg2; p/nu and b/eta read each other's lagged values."""
    r, s = params.r, params.s
    phi = _potential(problem, params, state.nu, state.p)
    bphi = grad_ts(phi)
    p = state.p - params.rho_r * (state.mu - state.nu + r * (state.p - bphi))
    nu = state.nu + params.rho_s * (bphi - state.p - s * (state.nu - state.mu))
    q = solve_q(state.b, state.eta, r)
    b = state.b - params.rho_r * (state.eta - state.mu + r * (state.b - q))
    eta = state.eta + params.rho_s * (state.b - q - s * (state.eta - state.mu))
    mu = prox_mu(compute_target(nu, eta, p, b, s), s, problem.constraint)
    return SolverState(phi, q, p, b, mu, nu, eta, state.iteration + 1)


def alg3_step(state: SolverState, problem: TransportProblem, params: SolverParams) -> SolverState:
    """One iteration of alg3: alg2 with a mid-iteration density refresh."""
    r, s = params.r, params.s
    phi = _potential(problem, params, state.nu, state.p)
    bphi = grad_ts(phi)
    p = state.p - params.rho_r * (state.mu - state.nu + r * (state.p - bphi))
    nu = state.nu + params.rho_s * (bphi - state.p - s * (state.nu - state.mu))
    mu_half = prox_mu(compute_target(nu, state.eta, p, state.b, s), s, problem.constraint)
    q = solve_q(state.b, state.eta, r)
    b = state.b - params.rho_r * (state.eta - mu_half + r * (state.b - q))
    eta = state.eta + params.rho_s * (state.b - q - s * (state.eta - mu_half))
    mu = prox_mu(compute_target(nu, eta, p, b, s), s, problem.constraint)
    return SolverState(phi, q, p, b, mu, nu, eta, state.iteration + 1)


ALGORITHMS = {
    "alg1": alg1_step,
    "alg2": alg2_step,
    "alg3": alg3_step,
}


@dataclass
class Solution:
    """Everything a finished run knows about itself."""

    problem: TransportProblem
    params: SolverParams
    algorithm: str
    state: SolverState
    history: list
    converged: bool
    step_report: StepSizeReport
    warnings: list

    @property
    def mu(self) -> PairField:
        return self.state.mu

    @property
    def phi(self) -> ScalarField:
        return self.state.phi

    @property
    def iterations(self) -> int:
        return self.state.iteration

    @property
    def final_energy(self) -> float:
        if self.history:
            return self.history[-1].energy
        return diagnostics.energy(self.state.mu)


def _check_finite(state: SolverState):
    fields = [
        ("phi", state.phi.values),
        ("mu", state.mu.a),
        ("mu", state.mu.b),
        ("nu", state.nu.a),
        ("nu", state.nu.b),
        ("eta", state.eta.a),
        ("eta", state.eta.b),
        ("p", state.p.a),
        ("p", state.p.b),
        ("b", state.b.a),
        ("b", state.b.b),
        ("q", state.q.a),
        ("q", state.q.b),
    ]
    for name, arr in fields:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteFieldError(name, state.iteration)


def _weighted_change(grid: GridSpec, new: np.ndarray, old: np.ndarray) -> float:
    w = grid.time_weights[:, None, None]
    meas = grid.dt * grid.cell_area
    num = float(np.sqrt(np.sum((new - old) ** 2 * w) * meas))
    den = float(np.sqrt(np.sum(new * new * w) * meas))
    return num / max(den, 1e-300)


def run(
    problem: TransportProblem,
    params: SolverParams | None = None,
    algorithm: str = "alg2",
    callback=None,
) -> Solution:
    """Iterate until the density stops moving or the budget runs out.

    Parameters
    ----------
    problem : TransportProblem
    params : SolverParams, optional
        Defaults are the reference settings (r = s = 1 with their
        matching step sizes).
    algorithm : str
        One of "alg1", "alg2", "alg3".
    callback : callable, optional
        Called with each IterationRecord as it is produced.

    Returns
    -------
    Solution
        Final state, per-iteration history, convergence flag, and the
        step-size report.  ``converged`` is True when, after at least
        ``min_outer`` iterations, the relative density change fell
        below ``tol_density`` while the per-slice mass deviation was
        within max(0.1%, tol_density) of the total mass.

    Raises
    ------
    NonFiniteFieldError
        If any field stops being finite, with the iteration index and
        the offending field named.
    """
    if params is None:
        params = SolverParams()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}")
    step = ALGORITHMS[algorithm]

    report = validate_steps(params, algorithm)
    emitted: list[str] = []
    if report.status == "Violated":
        msg = f"step sizes violate the {report.algorithm} convergence bounds; proceeding anyway"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        emitted.append(msg)

    state = initial_state(problem)
    history: list[diagnostics.IterationRecord] = []
    converged = False
    mass_gate = max(_MASS_DEV_FRACTION, params.tol_density) * problem.total_mass
    for n in range(1, params.max_outer + 1):
        prev_rho = state.mu.a
        state = step(state, problem, params)
        _check_finite(state)
        change = _weighted_change(problem.grid, state.mu.a, prev_rho)
        res = diagnostics.residuals(state, problem)
        record = diagnostics.IterationRecord(
            iteration=n,
            energy=diagnostics.energy(state.mu),
            density_change=change,
            **res,
        )
        history.append(record)
        if callback is not None:
            callback(record)
        if (
            n >= params.min_outer
            and change < params.tol_density
            and record.mass_per_slice_max_dev <= mass_gate
        ):
            converged = True
            break

    return Solution(problem, params, algorithm, state, history, converged, report, emitted)
