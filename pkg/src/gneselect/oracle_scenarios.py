"""Canned solver-vs-oracle scenarios on small random instances.

Two families with an independent brute-force answer:

* zero pseudogradient: F == 0, so every feasible point is an equilibrium and
  selection reduces to minimizing the x-block of phi over the feasible set;
* potential game: symmetric PSD Q_F, so the equilibrium x-set is the argmin of
  the potential over the feasible set and selection is a two-stage QP.

The selection weight theta is kept tiny (1e-6) so the dual/auxiliary penalty
cannot perturb the x-comparison, and the schedules use gamma0 = O(1): with a
vanishing pseudogradient the regularized zero set does not depend on gamma, so
a large weight only accelerates the travel toward the optimum.
"""

from __future__ import annotations

import numpy as np

from .game import AgentSpec, GameInstance, LinearPseudogradient, QuadraticSelection, require_valid
from .qp_oracle import check_potential_game_selection, check_zero_pseudogradient_selection
from .tikhonov import ScheduleParams, solve

N_AGENTS = 3
AGENT_DIM = 2
N_CONSTRAINTS = 2

ZERO_F_SCHEDULE = dict(gamma0=2.0, xi=0.6, zeta=2.0, max_outer=2500)
POTENTIAL_SCHEDULE = dict(gamma0=1.0, xi=1.0, zeta=1.3, max_outer=2500)
ORACLE_THETA = 1e-6


def _ring_agents(rng) -> list[AgentSpec]:
    ring = {i: ((i - 1) % N_AGENTS, (i + 1) % N_AGENTS) for i in range(N_AGENTS)}
    return [
        AgentSpec(
            index=i,
            dim=AGENT_DIM,
            lower=-np.ones(AGENT_DIM),
            upper=np.ones(AGENT_DIM),
            coupling=np.abs(rng.standard_normal((N_CONSTRAINTS, AGENT_DIM))) + 0.2,
            neighbors=tuple(sorted(set(ring[i]))),
        )
        for i in range(N_AGENTS)
    ]


def _selection(rng, n: int, c_scale: float) -> QuadraticSelection:
    W = rng.standard_normal((n, n))
    Q = 0.5 * np.eye(n) + 0.15 * (W.T @ W) / n
    return QuadraticSelection(Q=Q, c=c_scale * rng.standard_normal(n), theta=ORACLE_THETA)


def zero_f_instance(seed: int) -> tuple[GameInstance, QuadraticSelection]:
    """F == 0 with a coupling constraint that cuts through the boxes."""
    rng = np.random.default_rng(1000 + seed)
    agents = _ring_agents(rng)
    n = N_AGENTS * AGENT_DIM
    A = np.hstack([ag.coupling for ag in agents])
    b = 0.3 * (A @ np.ones(n))
    game = GameInstance(agents, b, LinearPseudogradient(Q=np.zeros((n, n)), c=np.zeros(n)))
    require_valid(game)
    return game, _selection(rng, n, c_scale=1.2)


def potential_instance(seed: int, *, unique: bool = False) -> tuple[GameInstance, QuadraticSelection]:
    """Symmetric PSD Q_F; rank-deficient by default, strongly monotone if unique."""
    rng = np.random.default_rng(2000 + seed)
    agents = _ring_agents(rng)
    n = N_AGENTS * AGENT_DIM
    A = np.hstack([ag.coupling for ag in agents])
    b = 0.3 * (A @ np.ones(n))
    V = rng.standard_normal((n - 2, n))
    Q_F = 0.8 * (V.T @ V) / n
    if unique:
        Q_F = Q_F + 0.5 * np.eye(n)
    c_F = 0.5 * rng.standard_normal(n)
    game = GameInstance(agents, b, LinearPseudogradient(Q=Q_F, c=c_F))
    require_valid(game)
    return game, _selection(rng, n, c_scale=0.6)


def run_zero_f(seed: int, *, oracle_tol: float = 1e-9) -> dict:
    game, sel = zero_f_instance(seed)
    params = ScheduleParams(**ZERO_F_SCHEDULE)
    result = solve(game, sel, params, alpha=1.0, validate=False, trace_stride=1000)
    report = check_zero_pseudogradient_selection(
        game, sel, result.omega.x, tol=oracle_tol, seed=seed
    )
    report["cumulative_inner"] = result.cumulative_inner
    return report


def run_potential(seed: int, *, unique: bool = False, oracle_tol: float = 1e-9) -> dict:
    game, sel = potential_instance(seed, unique=unique)
    params = ScheduleParams(**POTENTIAL_SCHEDULE)
    result = solve(game, sel, params, alpha=1.0, validate=False, trace_stride=1000)
    report = check_potential_game_selection(
        game, sel, result.omega.x, tol=oracle_tol, seed=seed
    )
    report["cumulative_inner"] = result.cumulative_inner
    return report


def run_scenario(scenario: str, seed: int) -> dict:
    if scenario == "zero":
        return run_zero_f(seed)
    if scenario == "potential":
        return run_potential(seed)
    raise ValueError(f"unknown scenario {scenario!r}")
