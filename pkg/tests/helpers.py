"""Shared instance builders for the test suite."""

import itertools

import numpy as np

from gneselect import (
    AgentSpec,
    GameInstance,
    LinearPseudogradient,
    QuadraticSelection,
)


def two_agent_game(Q=None, c=None, b=None, lower=-1.0, upper=1.0, dim=1, m=1, coupling=None):
    """Two agents on a path graph, identity coupling unless given."""
    n = 2 * dim
    if Q is None:
        Q = np.zeros((n, n))
    if c is None:
        c = np.zeros(n)
    if b is None:
        b = 2.0 * np.ones(m)
    agents = [
        AgentSpec(
            index=i,
            dim=dim,
            lower=lower * np.ones(dim),
            upper=upper * np.ones(dim),
            coupling=np.eye(m, dim) if coupling is None else coupling[i],
            neighbors=(1 - i,),
        )
        for i in range(2)
    ]
    return GameInstance(agents, b, LinearPseudogradient(Q=Q, c=c))


def single_agent_game(q=1.0, c=0.0, b=2.0, lower=-1.0, upper=1.0):
    """One scalar agent, one coupling row, no neighbors."""
    agents = [
        AgentSpec(index=0, dim=1, lower=[lower], upper=[upper], coupling=[[1.0]], neighbors=())
    ]
    return GameInstance(agents, [b], LinearPseudogradient(Q=[[q]], c=[c]))


def small_random_game(seed, N=3, dim=2, m=2, singular=True, qf_scale=1.0):
    """Ring of N agents, random PSD pseudogradient, identity coupling, b = 2*1."""
    rng = np.random.default_rng(seed)
    n = N * dim
    corank = 1 if singular else 0
    R = rng.standard_normal((n - corank, n))
    Q = qf_scale * (R.T @ R) / n
    if not singular:
        Q = Q + 0.3 * np.eye(n)
    c = rng.standard_normal(n)
    c /= np.linalg.norm(c)
    agents = [
        AgentSpec(
            index=i,
            dim=dim,
            lower=-np.ones(dim),
            upper=np.ones(dim),
            coupling=np.eye(m, dim),
            neighbors=tuple(sorted({(i - 1) % N, (i + 1) % N} - {i})),
        )
        for i in range(N)
    ]
    game = GameInstance(agents, 2.0 * np.ones(m), LinearPseudogradient(Q=Q, c=c))
    W = rng.standard_normal((n, n))
    sel = QuadraticSelection(Q=(W.T @ W) / n, c=rng.standard_normal(n), theta=1e-3)
    return game, sel


def box_vertex_min_violation(game):
    """Brute-force LP oracle: minimum over box vertices of the worst coupling slack.

    Positive value certifies infeasibility of sum_i A_i x_i <= b.
    """
    A = np.hstack([ag.coupling for ag in game.agents])
    best = np.inf
    corners = itertools.product(
        *[(lo, up) for lo, up in zip(game.lower_stack, game.upper_stack)]
    )
    for corner in corners:
        x = np.array(corner)
        best = min(best, float((A @ x - game.b).max()))
    return best
