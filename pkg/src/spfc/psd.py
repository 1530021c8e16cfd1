"""Preconditioned steepest descent solver for the implicit step equation.

Each iteration solves the constant-coefficient search-direction problem
``L[d] = r - mean(r)`` exactly per Fourier mode (``L`` is the linearization
of the step operator, with the quartic term linearized at unit gradient
magnitude), then minimizes the strictly convex objective along ``d`` by
finding the unique root of a monotone cubic.  Iterate means are invariant:
search directions carry no mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import StepContext, StepOperator, _mean_compatible, MeanMismatchError
from .spectral import Field, norm_l2

__all__ = [
    "PsdConfig",
    "SolveStats",
    "PsdDivergenceError",
    "NonMonotoneCubicError",
    "precondition_solve",
    "line_search_coefficients",
    "solve_cubic_monotone",
    "psd_solve",
]


class PsdDivergenceError(RuntimeError):
    """Residual grew by more than 10x over five consecutive iterations."""


class NonMonotoneCubicError(RuntimeError):
    """Line-search cubic is not strictly increasing; upstream operator bug."""


@dataclass(frozen=True)
class PsdConfig:
    """Solver knobs.

    ``residual_norm`` selects the norm of the mean-projected nonlinear
    residual used in the stopping test (``"l2"`` or ``"hm1"``).
    ``step_size_one`` switches to the quasi-Newton variant with unit step
    instead of the exact line search (off by default).
    """

    tol: float = 1e-9
    max_iter: int = 200
    residual_norm: str = "l2"
    step_size_one: bool = False
    track_objective: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.residual_norm not in ("l2", "hm1"):
            raise ValueError(f"unknown residual norm {self.residual_norm!r}")


@dataclass
class SolveStats:
    """Per-solve diagnostics.

    ``contraction_ratios`` holds ``r_{n+1} / r_n`` starting from the second
    residual pair (the first ratio reflects the initial guess, not the
    iteration).  ``objective_history`` is populated when tracking is on.
    """

    iterations: int = 0
    residual_history: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    converged: bool = False
    objective_history: list = field(default_factory=list)
    alphas: list = field(default_factory=list)

    def finalize(self) -> None:
        res = self.residual_history
        self.contraction_ratios = [
            res[i] / res[i - 1] for i in range(2, len(res)) if res[i - 1] > 0.0
        ]


def solve_cubic_monotone(c0: float, c1: float, c2: float, c3: float) -> float:
    """Unique real root of the strictly increasing cubic
    ``c3 a^3 + c2 a^2 + c1 a + c0``.

    Safeguarded Newton on a bracket grown geometrically from ``[-1, 1]``,
    with bisection fallback; avoids the closed-form cubic's cancellation in
    the near-linear regime.  All-zero coefficients return 0.
    """
    if c0 == 0.0 and c1 == 0.0 and c2 == 0.0 and c3 == 0.0:
        return 0.0
    if c3 < 0.0 or c1 <= 0.0:
        raise NonMonotoneCubicError(
            f"cubic is not strictly increasing: c1 = {c1:.6e}, c3 = {c3:.6e}"
        )

    def p(x: float) -> float:
        return ((c3 * x + c2) * x + c1) * x + c0

    def dp(x: float) -> float:
        return (3.0 * c3 * x + 2.0 * c2) * x + c1

    tol = 1e-13 * max(abs(c0), c1)
    # bracket the root; p is increasing with p(+-inf) = +-inf
    scale = max(1.0, abs(c0) / c1)
    lo, hi = -scale, scale
    for _ in range(200):
        if p(lo) <= 0.0:
            break
        lo *= 2.0
    for _ in range(200):
        if p(hi) >= 0.0:
            break
        hi *= 2.0

    x = min(max(-c0 / c1, lo), hi)
    for _ in range(200):
        px = p(x)
        if abs(px) <= tol:
            return x
        if px > 0.0:
            hi = x
        else:
            lo = x
        slope = dp(x)
        if slope > 0.0:
            x_new = x - px / slope
        else:
            x_new = 0.5 * (lo + hi)
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
    return x


def precondition_solve(r: Field, ctx: StepContext) -> Field:
    """Search direction ``d`` with ``L[d] = r - mean(r)``, solved per mode.

    The mean (and, on even grids, the rest of the derivative kernel) is
    projected out, so ``d`` carries no mass.
    """
    op = StepOperator(ctx)
    d = op.to_phys(op.pre_inv * op.to_spec(r.values))
    d -= d.mean()
    return Field(ctx.grid, d)


def line_search_coefficients(
    phi_n: Field, d_n: Field, ctx: StepContext, f: Field
) -> tuple[float, float, float, float]:
    """Coefficients ``(c0, c1, c2, c3)`` of the directional derivative of the
    step objective along ``d_n`` (see :meth:`StepOperator.line_coefficients`).
    """
    if abs(d_n.mean()) > 1e-12 * max(norm_l2(d_n), 1e-300):
        raise MeanMismatchError(f"search direction carries mass: mean = {d_n.mean():.3e}")
    op = StepOperator(ctx)
    phi_hat = op.to_spec(phi_n.values)
    d_hat = op.to_spec(d_n.values)
    g = op.grad_phys(phi_hat)
    e = op.grad_phys(d_hat)
    n_hat = op.nonlinear_hat(phi_hat, g)
    c0 = op.grid.spectral_dot(n_hat - op.to_spec(f.values), d_hat)
    return op.line_coefficients(g, e, d_hat, c0)


def _diverged(history: list) -> bool:
    return len(history) >= 6 and history[-1] > 10.0 * history[-6]


def psd_solve(
    phi_guess: Field,
    ctx: StepContext,
    f: Optional[Field] = None,
    cfg: Optional[PsdConfig] = None,
) -> tuple[Field, SolveStats]:
    """Solve ``N[phi] = f`` on the mass hyperplane of ``ctx.phi_k``.

    ``f`` defaults to the step's own right-hand side.  Returns the solution
    and the iteration diagnostics; raises :class:`PsdDivergenceError` when
    the residual grows by more than 10x over five consecutive iterations.
    """
    cfg = cfg or PsdConfig()
    if not _mean_compatible(phi_guess.mean(), ctx.phi_k.mean()):
        raise MeanMismatchError(
            f"initial guess is off the mass hyperplane: mean = {phi_guess.mean():.15e}, "
            f"expected {ctx.phi_k.mean():.15e}"
        )
    op = StepOperator(ctx)
    grid = ctx.grid
    if phi_guess is ctx.phi_k:
        phi_hat = op.phi_k_hat.copy()
    else:
        phi_hat = op.to_spec(phi_guess.values)
    # drop derivative-kernel content (Nyquist on even grids) except the mass
    # mode: the minimization determines those modes as zero and the
    # preconditioner cannot move them
    zero_idx = (0,) * grid.dim
    mass_coeff = phi_hat[zero_idx]
    phi_hat[grid.kernel_mask] = 0.0
    phi_hat[zero_idx] = mass_coeff

    f_hat = op.rhs_hat() if f is None else op.to_spec(f.values)
    f_norm = op.residual_norm(np.where(grid.kernel_mask, 0.0, f_hat), cfg.residual_norm)
    target = cfg.tol * (1.0 + f_norm)

    g = op.grad_phys(phi_hat)
    stats = SolveStats()
    for it in range(cfg.max_iter + 1):
        n_hat = op.nonlinear_hat(phi_hat, g)
        r_hat = f_hat - n_hat
        r_hat[grid.kernel_mask] = 0.0
        res = op.residual_norm(r_hat, cfg.residual_norm)
        stats.residual_history.append(res)
        if cfg.track_objective:
            stats.objective_history.append(op.objective_value(phi_hat, g, f_hat))
        stats.iterations = it
        if res <= target:
            stats.converged = True
            break
        if _diverged(stats.residual_history):
            stats.finalize()
            raise PsdDivergenceError(
                f"residual grew >10x over 5 iterations at iteration {it}: "
                f"history tail {stats.residual_history[-6:]}"
            )
        if it == cfg.max_iter:
            break
        d_hat = op.pre_inv * r_hat
        e = op.grad_phys(d_hat)
        if cfg.step_size_one:
            alpha = 1.0
        else:
            c0 = -grid.spectral_dot(r_hat, d_hat)
            alpha = solve_cubic_monotone(*op.line_coefficients(g, e, d_hat, c0))
        stats.alphas.append(alpha)
        phi_hat += alpha * d_hat
        for comp, e_comp in zip(g, e):
            comp += alpha * e_comp
    stats.finalize()
    return Field(grid, op.to_phys(phi_hat)), stats
