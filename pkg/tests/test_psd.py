"""Tests for the preconditioned steepest descent solver: search-direction
solves against a term-by-term oracle, line-search coefficients against
finite differences, the monotone-cubic root finder, and solver behavior."""

import numpy as np
import pytest

import oracles
from conftest import random_field
from spfc import (
    Field,
    Grid,
    ModelParams,
    Scheme,
    norm_l2,
    objective,
    precondition_solve,
    psd_solve,
    rhs,
    sample,
    solve_cubic_monotone,
)
from spfc.model import MeanMismatchError, StepContext
from spfc.psd import (
    NonMonotoneCubicError,
    PsdConfig,
    _diverged,
    line_search_coefficients,
)


def make_context(grid, rng, params, dt=0.05, scale=0.2):
    phi_k = random_field(grid, rng, scale=scale)
    shift = rng.standard_normal(grid.shape) * scale
    shift -= shift.mean()
    phi_km1 = Field(grid, phi_k.values + shift)
    return StepContext(phi_k, phi_km1, dt, params)


class TestPsdConfig:
    @pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"tol": 1.5}, {"max_iter": 0}, {"residual_norm": "h7"}])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            PsdConfig(**kwargs)


class TestPreconditionSolve:
    def test_single_mode_eigen_solve(self):
        g = Grid(dim=2, n=16, length=2.0)
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        c = Field.constant(g, 0.0)
        dt = 0.05
        ctx = StepContext(c, c.copy(), dt, params)
        r = sample(lambda x, y: np.sin(2 * np.pi * x / 2.0), g)
        lam = (2 * np.pi / 2.0) ** 2
        symbol = 1.5 / lam + dt * lam + params.a * dt + params.reg_a * dt**2 * lam + dt * lam**2
        d = precondition_solve(r, ctx)
        assert np.max(np.abs(d.values - r.values / symbol)) < 1e-13

    def test_scheme2_symbol(self):
        g = Grid(dim=2, n=16, length=2.0)
        params = ModelParams(epsilon=0.3, reg_a=0.2, scheme=Scheme.BDF2_ES_2)
        c = Field.constant(g, 0.0)
        dt = 0.05
        ctx = StepContext(c, c.copy(), dt, params)
        r = sample(lambda x, y: np.sin(2 * np.pi * x / 2.0), g)
        lam = (2 * np.pi / 2.0) ** 2
        symbol = 1.5 / lam + dt * lam + dt * (1 - lam) ** 2 + params.reg_a * dt**2 * lam
        d = precondition_solve(r, ctx)
        assert np.max(np.abs(d.values - r.values / symbol)) < 1e-13

    def test_constant_residual_gives_zero_direction(self, grid8):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        c = Field.constant(grid8, 0.1)
        ctx = StepContext(c, c.copy(), 0.05, params)
        d = precondition_solve(Field.constant(grid8, 3.0), ctx)
        assert np.max(np.abs(d.values)) < 1e-14

    @pytest.mark.parametrize("n", [8, 9])
    def test_apply_operator_oracle(self, n, rng):
        # reconstruct L[d] term by term with the dense oracle and compare
        # against r - mean(r); on the even grid the residual is first built
        # without derivative-kernel (Nyquist) content, which the
        # inverse-Laplacian part of L cannot represent
        grid = Grid(dim=2, n=n, length=1.0)
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        dt = 0.05
        c = Field.constant(grid, 0.0)
        ctx = StepContext(c, c.copy(), dt, params)
        raw = rng.standard_normal(grid.shape)
        if n % 2 == 0:
            coeffs = oracles.dft(raw, 1.0)
            kept = {
                mode: c_val
                for mode, c_val in coeffs.items()
                if all(oracles.balanced(m, n) == m for m in mode)
            }
            raw = oracles.idft(kept, n, 2, 1.0)
        r = Field(grid, raw)
        d = precondition_solve(r, ctx).values
        applied = (
            1.5 * oracles.inv_neg_laplacian(d, 1.0)
            - dt * oracles.laplacian(d, 1.0)
            + params.a * dt * d
            - params.reg_a * dt**2 * oracles.laplacian(d, 1.0)
            + dt * oracles.laplacian(oracles.laplacian(d, 1.0), 1.0)
        )
        target = r.values - r.values.mean()
        assert np.max(np.abs(applied - target)) < 1e-10 * np.max(np.abs(target))

    def test_direction_is_mean_free(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        c = Field.constant(grid8, 0.0)
        ctx = StepContext(c, c.copy(), 0.05, params)
        d = precondition_solve(random_field(grid8, rng), ctx)
        assert abs(d.mean()) < 1e-15


class TestLineSearchCoefficients:
    def test_zero_direction_gives_zero_polynomial(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid8, rng, params)
        f = rhs(ctx)
        coeffs = line_search_coefficients(ctx.phi_k, Field.zeros(grid8), ctx, f)
        assert coeffs == (0.0, 0.0, 0.0, 0.0)
        assert solve_cubic_monotone(*coeffs) == 0.0

    def test_solution_has_zero_c0(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid8, rng, params)
        f = rhs(ctx)
        sol, _ = psd_solve(ctx.phi_k, ctx, f, PsdConfig(tol=1e-13))
        d = random_field(grid8, rng, mean_zero=True)
        c0, c1, _, _ = line_search_coefficients(sol, d, ctx, f)
        assert abs(c0) < 1e-10 * max(c1, 1.0)
        assert abs(solve_cubic_monotone(*line_search_coefficients(sol, d, ctx, f))) < 1e-9

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_polynomial_matches_objective_derivative(self, grid8, rng, scheme):
        params = ModelParams(epsilon=0.3, reg_a=0.2, scheme=scheme)
        ctx = make_context(grid8, rng, params)
        f = rhs(ctx)
        phi = ctx.phi_k
        d = random_field(grid8, rng, mean_zero=True)
        c0, c1, c2, c3 = line_search_coefficients(phi, d, ctx, f)
        h = 1e-5
        for alpha in (-1.0, 0.0, 1.0):
            poly = ((c3 * alpha + c2) * alpha + c1) * alpha + c0
            fp = objective(Field(grid8, phi.values + (alpha + h) * d.values), ctx, f)
            fm = objective(Field(grid8, phi.values + (alpha - h) * d.values), ctx, f)
            fd = (fp - fm) / (2 * h)
            assert poly == pytest.approx(fd, rel=1e-6, abs=1e-9 * max(abs(c0), c1))

    def test_rejects_direction_with_mass(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid8, rng, params)
        f = rhs(ctx)
        with pytest.raises(MeanMismatchError):
            line_search_coefficients(ctx.phi_k, Field.constant(grid8, 1.0), ctx, f)


class TestCubicRoot:
    def test_linear_case(self):
        assert solve_cubic_monotone(-2.0, 1.0, 0.0, 0.0) == pytest.approx(2.0, abs=1e-13)

    def test_zero_at_origin(self):
        assert solve_cubic_monotone(0.0, 1.0, 0.0, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_cubic_root_frozen_from_bisection(self):
        # root of a^3 + a - 1, bisected independently to 1e-12
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid**3 + mid - 1.0 < 0.0:
                lo = mid
            else:
                hi = mid
        oracle_root = 0.5 * (lo + hi)
        assert oracle_root == pytest.approx(0.6823278038280193, abs=1e-12)
        assert solve_cubic_monotone(-1.0, 1.0, 0.0, 1.0) == pytest.approx(oracle_root, abs=1e-12)

    def test_all_zero_returns_zero(self):
        assert solve_cubic_monotone(0.0, 0.0, 0.0, 0.0) == 0.0

    def test_rejects_nonmonotone_input(self):
        with pytest.raises(NonMonotoneCubicError):
            solve_cubic_monotone(1.0, -1.0, 0.0, 1.0)
        with pytest.raises(NonMonotoneCubicError):
            solve_cubic_monotone(1.0, 1.0, 0.0, -1.0)

    def test_residual_bound_on_random_cubics(self, rng):
        for _ in range(100):
            c0 = rng.uniform(-10, 10)
            c1 = rng.uniform(1e-3, 10)
            c3 = rng.uniform(0, 10)
            c2 = rng.uniform(-1, 1) * np.sqrt(3 * c3 * c1)  # keeps p' > 0
            alpha = solve_cubic_monotone(c0, c1, c2, c3)
            residual = ((c3 * alpha + c2) * alpha + c1) * alpha + c0
            assert abs(residual) <= 1e-13 * max(abs(c0), c1) + 1e-300


class TestPsdSolve:
    def test_exact_guess_converges_immediately(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid8, rng, params)
        f = rhs(ctx)
        sol, _ = psd_solve(ctx.phi_k, ctx, f, PsdConfig(tol=1e-12))
        _, stats = psd_solve(sol, ctx, f, PsdConfig(tol=1e-9))
        assert stats.iterations <= 1

    def test_constant_steady_state(self, grid8):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        c = Field.constant(grid8, 0.4)
        ctx = StepContext(c, c.copy(), 0.1, params)
        sol, stats = psd_solve(c, ctx, rhs(ctx), PsdConfig(tol=1e-9))
        assert stats.converged and stats.iterations == 0
        assert np.max(np.abs(sol.values - 0.4)) < 1e-13

    def test_multistart_uniqueness(self, grid16, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid16, rng, params)
        f = rhs(ctx)
        cfg = PsdConfig(tol=1e-11)
        sol_a, _ = psd_solve(ctx.phi_k, ctx, f, cfg)
        other = Field(
            grid16,
            ctx.phi_k.mean() + (lambda v: v - v.mean())(rng.standard_normal(grid16.shape)),
        )
        sol_b, _ = psd_solve(other, ctx, f, cfg)
        assert norm_l2(Field(grid16, sol_a.values - sol_b.values)) < 1e-8

    def test_objective_monotone_and_mean_preserved(self, grid16, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid16, rng, params, scale=0.5)
        f = rhs(ctx)
        sol, stats = psd_solve(ctx.phi_k, ctx, f, PsdConfig(tol=1e-11))
        hist = stats.objective_history
        assert all(b <= a + 1e-12 * abs(a) for a, b in zip(hist, hist[1:]))
        assert abs(sol.mean() - ctx.phi_k.mean()) <= 1e-12

    def test_rejects_guess_off_hyperplane(self, grid8, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid8, rng, params)
        with pytest.raises(MeanMismatchError):
            psd_solve(Field(grid8, ctx.phi_k.values + 1.0), ctx, None)

    def test_max_iter_exhaustion_reports_not_converged(self, grid16, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid16, rng, params, scale=1.0)
        _, stats = psd_solve(ctx.phi_k, ctx, None, PsdConfig(tol=1e-13, max_iter=1))
        assert not stats.converged
        assert stats.iterations == 1

    def test_hm1_residual_norm_mode(self, grid16, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid16, rng, params)
        sol, stats = psd_solve(ctx.phi_k, ctx, None, PsdConfig(tol=1e-10, residual_norm="hm1"))
        assert stats.converged
        ref, _ = psd_solve(ctx.phi_k, ctx, None, PsdConfig(tol=1e-12))
        assert norm_l2(Field(grid16, sol.values - ref.values)) < 1e-6

    def test_step_size_one_variant_converges(self, grid16, rng):
        params = ModelParams(epsilon=0.3, reg_a=0.2)
        ctx = make_context(grid16, rng, params, scale=0.05)
        _, stats = psd_solve(ctx.phi_k, ctx, None, PsdConfig(tol=1e-10, step_size_one=True))
        assert stats.converged

    def test_contraction_ratios_on_standard_problem(self, rng):
        g = Grid(dim=2, n=32, length=100.0)
        params = ModelParams(epsilon=0.5, reg_a=0.015625)
        phi_k = Field(g, 0.05 * (2 * rng.random(g.shape) - 1.0))
        ctx = StepContext(phi_k, phi_k.copy(), 0.05, params)
        _, stats = psd_solve(phi_k, ctx, None, PsdConfig(tol=1e-12))
        assert stats.converged
        assert all(r <= 0.95 for r in stats.contraction_ratios[1:])

    def test_mesh_independent_iteration_count(self):
        from spfc.harness import _mesh_iteration_counts

        counts = _mesh_iteration_counts((32, 64, 128))
        assert max(counts) - min(counts) <= 3

    def test_divergence_detector(self):
        assert not _diverged([1.0, 2.0, 3.0])
        assert not _diverged([1.0, 1.0, 1.0, 1.0, 1.0, 9.9])
        assert _diverged([1.0, 1.0, 1.0, 1.0, 1.0, 10.1])
