"""Transporting a density onto itself.

When the two endpoint densities coincide, the optimal plan moves nothing
and the kinetic energy is zero.  The solver starts from a state that is
already consistent for this case, so it should settle almost immediately
with an energy at round-off level.  This is the cheapest end-to-end sanity
check the library has.
"""

import numpy as np

from cmot import GridSpec, SolverParams, TransportProblem, run

grid = GridSpec(nt=17, nx=16, ny=16)

x = grid.x_nodes[:, None] - 0.5
y = grid.y_nodes[None, :] - 0.5
rho = np.exp(-(x * x + y * y) / (2 * 0.1**2))
rho /= rho.sum() * grid.cell_area

problem = TransportProblem(grid, rho, rho.copy())
solution = run(problem, SolverParams(), algorithm="alg2")

print(f"converged: {solution.converged} after {solution.iterations} iterations")
print(f"kinetic energy: {solution.final_energy:.3e}  (exact answer is 0)")
print(f"worst per-slice mass deviation: {solution.history[-1].mass_per_slice_max_dev:.3e}")
