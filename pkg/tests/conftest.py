"""Shared fixtures: small grids and seeded random fields."""

from __future__ import annotations

import numpy as np
import pytest

from cmot import GridSpec, PairField, ScalarField


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(params=["periodic", "neumann"])
def small_grid(request):
    return GridSpec(5, 4, 4, request.param)


def random_scalar(grid: GridSpec, rng) -> ScalarField:
    return ScalarField(grid, rng.standard_normal(grid.shape))


def random_pair(grid: GridSpec, rng) -> PairField:
    return PairField(grid, rng.standard_normal(grid.shape), rng.standard_normal((2, *grid.shape)))


def gaussian_density(grid: GridSpec, cx: float, cy: float, sigma: float = 0.08) -> np.ndarray:
    """Unit-mass blob; wraps on periodic grids so shifts are exact."""
    x = grid.x_nodes[:, None] - cx
    y = grid.y_nodes[None, :] - cy
    if grid.space_bc.value == "periodic":
        x = x - np.round(x)
        y = y - np.round(y)
    vals = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return vals / (vals.sum() * grid.cell_area)
