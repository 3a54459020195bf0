"""Space-time grids, fields, and the discrete transport operators.

The domain is the unit square in space and the unit interval in time,
collocated on a regular grid of shape (nt, nx, ny).  Time nodes are
t_i = i*dt with dt = 1/(nt-1).  Space nodes are x_j = j*dx with
dx = 1/nx for periodic boundaries (node nx would alias node 0) and
dx = 1/(nx-1) for Neumann boundaries (nodes include both walls).

The inner product weights the time axis with trapezoidal coefficients
(1/2, 1, ..., 1, 1/2), so endpoint slices carry half a cell.  The
time-difference matrix uses one-sided first-order rows at t=0 and t=1
and centered differences inside.  This pairing is deliberate: the
weighted transpose of the time matrix telescopes exactly, so the
divergence of a field that is constant in time collapses onto the two
endpoint slices and discrete mass accounting closes without remainder.

The divergence is defined as the negative adjoint of the gradient
under that inner product, which makes summation by parts an identity
rather than an approximation, and makes the Poisson operator in the
companion module exactly symmetric.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SpaceBC",
    "GridSpec",
    "ScalarField",
    "PairField",
    "grad_ts",
    "div_ts",
    "laplacian_ts",
    "inner",
    "norm",
]


class SpaceBC(enum.Enum):
    """Spatial boundary treatment: periodic wrap or solid walls."""

    PERIODIC = "periodic"
    NEUMANN = "neumann"

    @classmethod
    def coerce(cls, value) -> "SpaceBC":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown boundary mode {value!r}; expected one of: {names}") from None


def _first_derivative_time(nt: int, dt: float) -> np.ndarray:
    """One-sided first-order rows at the endpoints, centered inside."""
    d = np.zeros((nt, nt))
    d[0, 0], d[0, 1] = -1.0 / dt, 1.0 / dt
    d[-1, -2], d[-1, -1] = -1.0 / dt, 1.0 / dt
    for i in range(1, nt - 1):
        d[i, i - 1] = -0.5 / dt
        d[i, i + 1] = 0.5 / dt
    return d


def _first_derivative_space(n: int, h: float, bc: SpaceBC) -> np.ndarray:
    """Centered differences; periodic wrap or one-sided second-order walls."""
    d = np.zeros((n, n))
    for i in range(1, n - 1):
        d[i, i - 1] = -0.5 / h
        d[i, i + 1] = 0.5 / h
    if bc is SpaceBC.PERIODIC:
        d[0, -1], d[0, 1] = -0.5 / h, 0.5 / h
        d[-1, -2], d[-1, 0] = -0.5 / h, 0.5 / h
    else:
        d[0, 0], d[0, 1], d[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
        d[-1, -3], d[-1, -2], d[-1, -1] = 0.5 / h, -2.0 / h, 1.5 / h
    return d


@dataclass(frozen=True)
class GridSpec:
    """Shape and boundary mode of a space-time grid; spacings are derived."""

    nt: int
    nx: int
    ny: int
    space_bc: SpaceBC = SpaceBC.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "space_bc", SpaceBC.coerce(self.space_bc))
        if self.nt < 2:
            raise ValueError(f"nt must be at least 2, got {self.nt}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"nx and ny must be at least 3, got {self.nx}x{self.ny}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.nx, self.ny)

    @property
    def dt(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def dx(self) -> float:
        return 1.0 / self.nx if self.space_bc is SpaceBC.PERIODIC else 1.0 / (self.nx - 1)

    @property
    def dy(self) -> float:
        return 1.0 / self.ny if self.space_bc is SpaceBC.PERIODIC else 1.0 / (self.ny - 1)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @cached_property
    def t_nodes(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    @cached_property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @cached_property
    def y_nodes(self) -> np.ndarray:
        return np.arange(self.ny) * self.dy

    @cached_property
    def time_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights along the time axis."""
        w = np.ones(self.nt)
        w[0] = w[-1] = 0.5
        return w

    @cached_property
    def dmat_t(self) -> np.ndarray:
        return _first_derivative_time(self.nt, self.dt)

    @cached_property
    def dmat_x(self) -> np.ndarray:
        return _first_derivative_space(self.nx, self.dx, self.space_bc)

    @cached_property
    def dmat_y(self) -> np.ndarray:
        return _first_derivative_space(self.ny, self.dy, self.space_bc)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def _check_values(grid: GridSpec, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        raise ValueError(f"{name} has shape {arr.shape}, grid expects {grid.shape}")
    return arr


@dataclass
class ScalarField:
    """A scalar quantity sampled on every space-time node."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, "values")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, grid.zeros())

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)


@dataclass
class PairField:
    """A (scalar, vector) pair on the grid: density-like slot plus a
    2-component momentum-like slot.

    The scalar slot has shape (nt, nx, ny); the vector slot stacks its
    two components into shape (2, nt, nx, ny).
    """

    grid: GridSpec
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = _check_values(self.grid, self.a, "scalar slot")
        b = np.asarray(self.b, dtype=float)
        if b.shape != (2, *self.grid.shape):
            raise ValueError(f"vector slot has shape {b.shape}, expected {(2, *self.grid.shape)}")
        self.b = b

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PairField":
        return cls(grid, grid.zeros(), np.zeros((2, *grid.shape)))

    @property
    def scalar_part(self) -> ScalarField:
        return ScalarField(self.grid, self.a)

    @property
    def vector_part(self) -> tuple[ScalarField, ScalarField]:
        return (ScalarField(self.grid, self.b[0]), ScalarField(self.grid, self.b[1]))

    def copy(self) -> "PairField":
        return PairField(self.grid, self.a.copy(), self.b.copy())

    def __add__(self, other: "PairField") -> "PairField":
        _same_grid(self, other)
        return PairField(self.grid, self.a + other.a, self.b + other.b)

    def __sub__(self, other: "PairField") -> "PairField":
        _same_grid(self, other)
        return PairField(self.grid, self.a - other.a, self.b - other.b)

    def __mul__(self, c: float) -> "PairField":
        c = float(c)
        return PairField(self.grid, self.a * c, self.b * c)

    __rmul__ = __mul__

    def __neg__(self) -> "PairField":
        return PairField(self.grid, -self.a, -self.b)


def _same_grid(f, g):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def grad_ts(phi: ScalarField) -> PairField:
    """Space-time gradient (d/dt, d/dx, d/dy) of a scalar field."""
    g = phi.grid
    v = phi.values
    dt_part = np.einsum("ij,jxy->ixy", g.dmat_t, v)
    dx_part = np.einsum("ij,tjy->tiy", g.dmat_x, v)
    dy_part = np.einsum("ij,txj->txi", g.dmat_y, v)
    return PairField(g, dt_part, np.stack([dx_part, dy_part]))


def div_ts(u: PairField) -> ScalarField:
    """Space-time divergence, the negative adjoint of ``grad_ts``.

    Defined through the weighted inner product, so the summation by
    parts identity inner(grad_ts(phi), u) == -inner(phi, div_ts(u))
    holds to round-off for every pair of fields.
    """
    g = u.grid
    w = g.time_weights[:, None, None]
    t_part = np.einsum("ji,jxy->ixy", g.dmat_t, u.a * w) / w
    x_part = np.einsum("ji,tjy->tiy", g.dmat_x, u.b[0])
    y_part = np.einsum("ji,txj->txi", g.dmat_y, u.b[1])
    return ScalarField(g, -(t_part + x_part + y_part))


def laplacian_ts(phi: ScalarField) -> ScalarField:
    """Space-time Laplacian, the composition div_ts(grad_ts(phi))."""
    return div_ts(grad_ts(phi))


def inner(f, g) -> float:
    """Weighted space-time inner product.

    Both arguments must be ScalarFields or both PairFields on the same
    grid.  The quadrature is dt*dx*dy with trapezoidal weights on the
    time axis; a PairField contributes its scalar and both vector
    components.
    """
    _same_grid(f, g)
    grid = f.grid
    w = grid.time_weights[:, None, None]
    if isinstance(f, ScalarField) and isinstance(g, ScalarField):
        total = np.sum(f.values * g.values * w)
    elif isinstance(f, PairField) and isinstance(g, PairField):
        total = np.sum(f.a * g.a * w) + np.sum(f.b * g.b * w[None])
    else:
        raise TypeError("inner product requires two fields of the same kind")
    return float(total * grid.dt * grid.dx * grid.dy)


def norm(f) -> float:
    """Norm induced by ``inner``."""
    return float(np.sqrt(max(inner(f, f), 0.0)))
