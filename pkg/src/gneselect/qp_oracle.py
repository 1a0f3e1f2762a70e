"""Independent brute-force verification: a deliberately simple projected-gradient
QP solver with penalty continuation, plus the two selection cross-checks it
enables (zero pseudogradient, potential game).

Nothing here shares code with the main solvers; that is the point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import GameInstance, SelectionSpec, QuadraticSelection, LinearPseudogradient


class OracleError(RuntimeError):
    """The oracle could not certify an answer."""


@dataclass(eq=False)
class OracleProblem:
    """min x^T Q x + c^T x  s.t.  lower <= x <= upper, A x <= b."""

    Q: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.A is not None:
            self.A = np.asarray(self.A, dtype=float)
            self.b = np.asarray(self.b, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("empty box")
        if self.A is not None:
            # exact row-wise minimum over the box certifies (in)feasibility
            low = np.where(self.A > 0, self.A * self.lower, self.A * self.upper)
            low = np.where(self.A == 0, 0.0, low)
            if np.any(low.sum(axis=1) > self.b):
                raise OracleError("oracle problem is infeasible")

    def objective(self, x: np.ndarray) -> float:
        return float(x @ (self.Q @ x) + self.c @ x)


# linear equality blocks H x = r, penalized the same way as the inequalities
Equality = tuple[np.ndarray, np.ndarray]


def qp_solve(
    p: OracleProblem,
    tol: float = 1e-8,
    max_iter: int = 10**7,
    *,
    equalities: Sequence[Equality] = (),
    x0: np.ndarray | None = None,
    return_info: bool = False,
):
    """Projected gradient descent on the box, penalty continuation on Ax <= b.

    Each stage minimizes the box-constrained problem penalized through
    max(mu + w*(Ax - b), 0) (and mu_h + w*(Hx - r) for equality blocks); the
    running multiplier estimates let a moderate weight reach tight feasibility,
    and w is still multiplied by 10 whenever the worst violation has not dropped
    below tol/10.  The step size is refreshed each stage from the penalized
    gradient's Lipschitz constant.  Slow on purpose.
    """
    n = p.c.shape[0]
    if x0 is None:
        x = np.where(
            np.isfinite(p.lower) & np.isfinite(p.upper), (p.lower + p.upper) / 2.0, 0.0
        )
    else:
        x = np.asarray(x0, dtype=float).copy()
    x = np.clip(x, p.lower, p.upper)
    normQ = float(np.linalg.norm(p.Q, 2)) if n else 0.0
    normA2 = float(np.linalg.norm(p.A, 2)) ** 2 if p.A is not None else 0.0
    eq = [(np.asarray(H, dtype=float), np.asarray(r, dtype=float)) for H, r in equalities]
    normH2 = [float(np.linalg.norm(H, 2)) ** 2 for H, _ in eq]
    has_penalty = p.A is not None or eq
    w = 10.0
    mu = np.zeros(p.b.shape[0]) if p.A is not None else None
    mu_eq = [np.zeros(r.shape[0]) for _, r in eq]
    used = 0
    eta = 1.0

    def grad(x):
        g = 2.0 * (p.Q @ x) + p.c
        if p.A is not None:
            g = g + p.A.T @ np.maximum(mu + w * (p.A @ x - p.b), 0.0)
        for (H, r), m in zip(eq, mu_eq):
            g = g + H.T @ (m + w * (H @ x - r))
        return g

    def violation(x):
        v = 0.0
        if p.A is not None:
            v = float(np.maximum(p.A @ x - p.b, 0.0).max(initial=0.0))
        for H, r in eq:
            v = max(v, float(np.abs(H @ x - r).max(initial=0.0)))
        return v

    moved = 0.0
    for stage in range(60):
        L = 2.0 * normQ + w * (normA2 + sum(normH2)) + 1.0
        eta = 1.0 / L
        while used < max_iter:
            used += 1
            x_new = np.clip(x - eta * grad(x), p.lower, p.upper)
            moved = float(np.linalg.norm(x_new - x)) / eta
            x = x_new
            if moved <= tol:
                break
        else:
            raise OracleError(f"projected gradient did not converge within {max_iter} iterations")
        if not has_penalty or violation(x) <= tol / 10.0:
            break
        if p.A is not None:
            mu = np.maximum(mu + w * (p.A @ x - p.b), 0.0)
        for (H, r), m in zip(eq, mu_eq):
            m += w * (H @ x - r)
        if stage % 4 == 3:  # multiplier updates alone have stalled
            w *= 10.0
    else:
        raise OracleError("penalty continuation failed to enforce the coupling constraint")
    if return_info:
        info = {
            "iterations": used,
            "weight": w,
            "multiplier": None if mu is None else mu.copy(),
            "residual": moved,
            "violation": violation(x),
        }
        return x, info
    return x


def _coupling_concat(game: GameInstance) -> np.ndarray:
    return np.hstack([ag.coupling for ag in game.agents])


def check_zero_pseudogradient_selection(
    game: GameInstance,
    sel: SelectionSpec,
    x_solver: np.ndarray,
    *,
    tol: float = 1e-8,
    seed: int | None = None,
) -> dict:
    """With F == 0 the primal zero set is the whole feasible set, so selection
    reduces to min of the x-block of phi over it; compare against qp_solve."""
    pg = game.pseudogradient
    if not (
        isinstance(pg, LinearPseudogradient)
        and not pg.Q.any()
        and not pg.c.any()
    ):
        raise ValueError("this check requires a game with F identically zero")
    if not isinstance(sel, QuadraticSelection):
        raise ValueError("this check needs the quadratic selection form")
    problem = OracleProblem(
        Q=sel.Q,
        c=sel.c,
        lower=game.lower_stack,
        upper=game.upper_stack,
        A=_coupling_concat(game),
        b=game.b,
    )
    x_star = qp_solve(problem, tol=tol)
    rel = float(np.linalg.norm(x_solver - x_star) / max(1.0, np.linalg.norm(x_star)))
    return {
        "scenario": "zero_pseudogradient",
        "seed": seed,
        "rel_error": rel,
        "oracle_value": problem.objective(x_star),
        "solver_value": problem.objective(np.asarray(x_solver, dtype=float)),
    }


def check_potential_game_selection(
    game: GameInstance,
    sel: SelectionSpec,
    x_solver: np.ndarray,
    *,
    tol: float = 1e-8,
    seed: int | None = None,
) -> dict:
    """Symmetric PSD Q_F makes F the gradient of P(x) = x^T Q_F x / 2 + c_F^T x, so
    the v-GNE x-set is argmin of P over the feasible set.  Stage 1 finds a
    minimizer x_p; stage 2 minimizes the x-block of phi over the argmin face,
    which for a convex quadratic is exactly
    {x feasible : Q_F x = Q_F x_p, grad_P(x_p)^T (x - x_p) = 0},
    handled by the same penalty continuation on those linear blocks."""
    pg = game.pseudogradient
    if not isinstance(pg, LinearPseudogradient):
        raise ValueError("potential-game check needs a linear pseudogradient")
    if not np.allclose(pg.Q, pg.Q.T, rtol=0, atol=1e-12):
        raise ValueError("potential-game check needs a symmetric Q_F")
    if not isinstance(sel, QuadraticSelection):
        raise ValueError("this check needs the quadratic selection form")
    A = _coupling_concat(game)
    stage1 = OracleProblem(
        Q=pg.Q / 2.0,
        c=pg.c,
        lower=game.lower_stack,
        upper=game.upper_stack,
        A=A,
        b=game.b,
    )
    x_p = qp_solve(stage1, tol=tol)
    grad_p = pg.Q @ x_p + pg.c
    stage2 = OracleProblem(
        Q=sel.Q,
        c=sel.c,
        lower=game.lower_stack,
        upper=game.upper_stack,
        A=A,
        b=game.b,
    )
    x_star = qp_solve(
        stage2,
        tol=tol,
        equalities=[(pg.Q, pg.Q @ x_p), (grad_p[None, :], np.array([grad_p @ x_p]))],
        x0=x_p,
    )
    rel = float(np.linalg.norm(x_solver - x_star) / max(1.0, np.linalg.norm(x_star)))
    return {
        "scenario": "potential_game",
        "seed": seed,
        "rel_error": rel,
        "oracle_value": stage2.objective(x_star),
        "solver_value": stage2.objective(np.asarray(x_solver, dtype=float)),
    }
