"""What the step-size bounds are worth.

Each solver variant comes with sufficient conditions on its relaxation
steps.  validate_steps classifies a parameter set as Strict, Boundary, or
Violated against those conditions.  The run below first prints the report
for the defaults, then deliberately violates the bounds and lets the
solver proceed anyway.  Expect a warning and either divergence or a
noticeably worse iteration count; that is the failure mode the bounds
guard against.
"""

import warnings

import numpy as np

from cmot import (
    GridSpec,
    NonFiniteFieldError,
    SolverParams,
    TransportProblem,
    run,
    validate_steps,
)


def bump(grid, cx, cy, sigma=0.1):
    dx = grid.x_nodes[:, None] - cx
    dy = grid.y_nodes[None, :] - cy
    dx -= np.round(dx)
    dy -= np.round(dy)
    vals = np.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))
    return vals / (vals.sum() * grid.cell_area)


print("-- default parameters --")
for line in validate_steps(SolverParams(), "alg2").lines():
    print(line)

bad = SolverParams(rho_r=2.0, rho_s=2.0, tol_density=1e-3, max_outer=2000)
print("\n-- rho_r = rho_s = 2.0 --")
for line in validate_steps(bad, "alg2").lines():
    print(line)

grid = GridSpec(nt=9, nx=12, ny=12)
problem = TransportProblem(grid, bump(grid, 0.35, 0.5), bump(grid, 0.6, 0.5))

good = run(problem, SolverParams(tol_density=1e-3), algorithm="alg2")
print(f"\nwithin bounds:  converged={good.converged} after {good.iterations} iterations")

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    try:
        sol = run(problem, bad, algorithm="alg2")
        verdict = f"converged={sol.converged} after {sol.iterations} iterations"
    except NonFiniteFieldError as exc:
        verdict = f"diverged ({exc})"
print(f"outside bounds: {verdict}")
