"""Constraint term tests: prox maps, functional values, validation."""

import numpy as np
import pytest

from cmot import (
    ConstraintSpec,
    DensityUpperBound,
    FixedDensityRegion,
    GridSpec,
    MomentumQuadraticPenalty,
    PairField,
    Unconstrained,
    compute_target,
    evaluate_I,
    prox_mu,
)
from cmot.grid import inner

from conftest import random_pair


def spec_of(*terms):
    return ConstraintSpec(terms=list(terms))


class TestProxPointwise:
    def test_unconstrained_returns_argument(self, small_grid, rng):
        c = random_pair(small_grid, rng)
        out = prox_mu(c, 1.0, spec_of(Unconstrained()))
        assert np.array_equal(out.a, c.a)
        assert np.array_equal(out.b, c.b)
        assert out is not c

    def test_density_bound_clamps_from_above_only(self):
        grid = GridSpec(2, 3, 3)
        c = PairField.zeros(grid)
        c.a[0, 0, 0] = 5.0
        c.a[0, 1, 1] = -2.0
        c.b[0, 0, 0, 0] = 9.0
        bound = np.full((3, 3), 1.5)
        out = prox_mu(c, 2.0, spec_of(DensityUpperBound(rho_bar=bound)))
        assert out.a[0, 0, 0] == 1.5
        # No implicit lower clamp.
        assert out.a[0, 1, 1] == -2.0
        # Momentum untouched.
        assert out.b[0, 0, 0, 0] == 9.0

    def test_density_bound_infinite_entries_passthrough(self):
        grid = GridSpec(2, 3, 3)
        c = PairField.zeros(grid)
        c.a[:] = 7.0
        bound = np.full((3, 3), np.inf)
        bound[1, 1] = 3.0
        out = prox_mu(c, 1.0, spec_of(DensityUpperBound(rho_bar=bound)))
        assert out.a[0, 1, 1] == 3.0
        assert out.a[0, 0, 0] == 7.0

    def test_momentum_penalty_shrinkage_factor(self):
        # s /(s + psi) with s = 1, psi = 3 shrinks 2 to 0.5.
        grid = GridSpec(2, 3, 3)
        c = PairField.zeros(grid)
        c.b[:] = 2.0
        c.a[:] = 4.0
        psi = np.full((3, 3), 3.0)
        out = prox_mu(c, 1.0, spec_of(MomentumQuadraticPenalty(psi=psi)))
        assert np.all(out.b == 0.5)
        # Density untouched.
        assert np.all(out.a == 4.0)

    def test_momentum_penalty_zero_weight_is_identity(self, rng):
        grid = GridSpec(2, 3, 3)
        c = random_pair(grid, rng)
        psi = np.zeros((3, 3))
        psi[0, 0] = 2.0
        out = prox_mu(c, 1.0, spec_of(MomentumQuadraticPenalty(psi=psi)))
        assert np.array_equal(out.b[:, :, 1:, :], c.b[:, :, 1:, :])
        assert np.allclose(out.b[:, :, 0, 0], c.b[:, :, 0, 0] / 3.0)

    def test_fixed_region_pins_density_on_mask(self, rng):
        grid = GridSpec(3, 4, 4)
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        fixed = np.zeros((4, 4))
        fixed[1, 2] = 0.75
        c = random_pair(grid, rng)
        out = prox_mu(c, 1.0, spec_of(FixedDensityRegion(mask=mask, rho_fixed=fixed)))
        assert np.all(out.a[:, 1, 2] == 0.75)
        off = ~mask
        assert np.array_equal(out.a[:, off], c.a[:, off])
        assert np.array_equal(out.b, c.b)


class TestProxVariational:
    def prox_objective(self, mu, c, s):
        d = mu - c
        return s * inner(d, d)

    def cases(self, grid):
        bound = np.full((grid.nx, grid.ny), 0.4)
        psi = np.full((grid.nx, grid.ny), 1.3)
        mask = np.zeros((grid.nx, grid.ny), dtype=bool)
        mask[0, 1] = True
        fixed = np.where(mask, 0.2, 0.0)
        yield spec_of(Unconstrained())
        yield spec_of(DensityUpperBound(rho_bar=bound))
        yield spec_of(MomentumQuadraticPenalty(psi=psi))
        yield spec_of(
            DensityUpperBound(rho_bar=bound), MomentumQuadraticPenalty(psi=psi)
        )
        yield spec_of(
            FixedDensityRegion(mask=mask, rho_fixed=fixed),
            MomentumQuadraticPenalty(psi=psi),
        )

    def test_prox_minimizes_over_random_candidates(self, small_grid, rng):
        # prox(c) = argmin s * ||mu - c||^2 + I(mu); no feasible candidate
        # may score below the prox output.
        grid = small_grid
        c = random_pair(grid, rng)
        for cons in self.cases(grid):
            s = 0.7
            out = prox_mu(c, s, cons)
            f_out = self.prox_objective(out, c, s) + evaluate_I(out, cons)
            assert np.isfinite(f_out)
            for _ in range(200):
                trial = out + random_pair(grid, rng) * 0.3
                f_trial = self.prox_objective(trial, c, s) + evaluate_I(trial, cons)
                assert f_out <= f_trial + 1e-10

    def test_firm_nonexpansiveness(self, small_grid, rng):
        grid = small_grid
        for cons in self.cases(grid):
            u = random_pair(grid, rng)
            v = random_pair(grid, rng)
            pu = prox_mu(u, 1.1, cons)
            pv = prox_mu(v, 1.1, cons)
            dp = pu - pv
            lhs = inner(dp, dp)
            rhs = inner(dp, u - v)
            assert lhs <= rhs + 1e-12

    def test_prox_of_feasible_point_with_zero_penalty_is_identity(self, rng):
        grid = GridSpec(3, 4, 4)
        bound = np.full((4, 4), 10.0)
        cons = spec_of(DensityUpperBound(rho_bar=bound))
        c = random_pair(grid, rng)
        c.a = np.abs(c.a)
        out = prox_mu(c, 3.0, cons)
        assert np.array_equal(out.a, c.a)
        assert np.array_equal(out.b, c.b)


class TestCompute_target:
    def test_elementwise_formula(self, small_grid, rng):
        grid = small_grid
        nu = random_pair(grid, rng)
        eta = random_pair(grid, rng)
        p = random_pair(grid, rng)
        b = random_pair(grid, rng)
        s = 1.9
        out = compute_target(nu, eta, p, b, s)
        ref_a = (nu.a + eta.a + (p.a - b.a) / s) / 2.0
        ref_b = (nu.b + eta.b + (p.b - b.b) / s) / 2.0
        assert np.allclose(out.a, ref_a, atol=1e-14)
        assert np.allclose(out.b, ref_b, atol=1e-14)

    def test_consensus_is_fixed_point(self, small_grid, rng):
        grid = small_grid
        mu = random_pair(grid, rng)
        z = PairField.zeros(grid)
        out = compute_target(mu, mu, z, z, s=1.0)
        assert np.allclose(out.a, mu.a, atol=1e-15)
        assert np.allclose(out.b, mu.b, atol=1e-15)


class TestEvaluateI:
    def test_momentum_penalty_value_quadrature(self):
        # psi = 1, |m| = 1 over a unit-measure periodic grid gives 1.
        grid = GridSpec(5, 4, 4)
        mu = PairField.zeros(grid)
        mu.b[0][:] = 1.0
        cons = spec_of(MomentumQuadraticPenalty(psi=np.ones((4, 4))))
        assert evaluate_I(mu, cons) == pytest.approx(1.0, rel=1e-12)

    def test_momentum_penalty_has_no_half_factor(self):
        grid = GridSpec(5, 4, 4)
        mu = PairField.zeros(grid)
        mu.b[0][:] = 2.0
        cons = spec_of(MomentumQuadraticPenalty(psi=np.full((4, 4), 3.0)))
        assert evaluate_I(mu, cons) == pytest.approx(12.0, rel=1e-12)

    def test_hard_violation_is_infinite(self):
        grid = GridSpec(3, 4, 4)
        bound = np.full((4, 4), 1.0)
        cons = spec_of(DensityUpperBound(rho_bar=bound))
        mu = PairField.zeros(grid)
        mu.a[:] = 1.0 + 2e-9
        assert evaluate_I(mu, cons) == np.inf

    def test_hard_violation_tolerance_band(self):
        grid = GridSpec(3, 4, 4)
        bound = np.full((4, 4), 1.0)
        cons = spec_of(DensityUpperBound(rho_bar=bound))
        mu = PairField.zeros(grid)
        mu.a[:] = 1.0 + 0.5e-9
        assert evaluate_I(mu, cons) == 0.0

    def test_fixed_region_violation_infinite(self):
        grid = GridSpec(3, 4, 4)
        mask = np.zeros((4, 4), dtype=bool)
        mask[2, 2] = True
        fixed = np.where(mask, 0.5, 0.0)
        cons = spec_of(FixedDensityRegion(mask=mask, rho_fixed=fixed))
        mu = PairField.zeros(grid)
        assert evaluate_I(mu, cons) == np.inf
        mu.a[:, 2, 2] = 0.5
        assert evaluate_I(mu, cons) == 0.0

    def test_unconstrained_is_zero(self, small_grid, rng):
        mu = random_pair(small_grid, rng)
        assert evaluate_I(mu, spec_of(Unconstrained())) == 0.0


class TestValidation:
    def test_overlapping_scalar_terms_rejected(self):
        bound = np.full((4, 4), 1.0)
        mask = np.ones((4, 4), dtype=bool)
        fixed = np.ones((4, 4))
        cons = spec_of(
            DensityUpperBound(rho_bar=bound),
            FixedDensityRegion(mask=mask, rho_fixed=fixed),
        )
        with pytest.raises(ValueError, match="overlap"):
            cons.validate(GridSpec(2, 4, 4))

    def test_disjoint_scalar_supports_allowed(self):
        bound = np.full((4, 4), np.inf)
        bound[:2, :] = 1.0
        mask = np.zeros((4, 4), dtype=bool)
        mask[3, 3] = True
        fixed = np.where(mask, 0.1, 0.0)
        cons = spec_of(
            DensityUpperBound(rho_bar=bound),
            FixedDensityRegion(mask=mask, rho_fixed=fixed),
        )
        cons.validate(GridSpec(2, 4, 4))

    def test_negative_bound_rejected(self):
        bound = np.full((4, 4), 1.0)
        bound[0, 0] = -0.5
        with pytest.raises(ValueError, match="nonnegative"):
            DensityUpperBound(rho_bar=bound)

    def test_negative_penalty_weight_rejected(self):
        psi = np.zeros((4, 4))
        psi[1, 1] = -1.0
        with pytest.raises(ValueError, match="nonnegative"):
            MomentumQuadraticPenalty(psi=psi)

    def test_negative_fixed_density_rejected(self):
        mask = np.ones((4, 4), dtype=bool)
        fixed = np.full((4, 4), -0.1)
        with pytest.raises(ValueError, match="nonnegative"):
            FixedDensityRegion(mask=mask, rho_fixed=fixed)

    def test_negative_fixed_density_off_mask_allowed(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True
        fixed = np.full((4, 4), -0.1)
        fixed[0, 0] = 0.3
        FixedDensityRegion(mask=mask, rho_fixed=fixed)

    def test_shape_mismatch_rejected(self):
        bound = np.full((3, 4), 1.0)
        cons = spec_of(DensityUpperBound(rho_bar=bound))
        with pytest.raises(ValueError, match="shape"):
            cons.validate(GridSpec(2, 4, 4))

    def test_default_spec_is_unconstrained(self, rng):
        cons = ConstraintSpec()
        grid = GridSpec(2, 4, 4)
        cons.validate(grid)
        mu = random_pair(grid, rng)
        out = prox_mu(mu, 1.0, cons)
        assert np.array_equal(out.a, mu.a)
        assert evaluate_I(mu, cons) == 0.0
