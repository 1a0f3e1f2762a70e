import numpy as np
import pytest

from gneselect import (
    ExperimentConfig,
    HsdmParams,
    JointPoint,
    LinearPseudogradient,
    GameInstance,
    QuadraticSelection,
    ScheduleParams,
    SplitOperators,
    fbf_solve,
    generate_instance,
    hsdm_fbf_solve,
    kkt_residual,
    solve,
)
from gneselect.qp_oracle import OracleProblem, qp_solve
from helpers import small_random_game, two_agent_game


def test_fbf_reaches_tolerance_and_self_certifies():
    game, sel = small_random_game(60, singular=False)
    res = fbf_solve(game, tol=1e-6, max_iter=100000, selection=sel)
    assert res.converged
    assert res.final_residual <= 1e-6
    assert kkt_residual(SplitOperators(game), res.omega) <= 1e-6


def test_fbf_zero_pseudogradient_output_is_feasible():
    game, _ = small_random_game(61, qf_scale=0.0)
    res = fbf_solve(game, tol=1e-6, max_iter=50000)
    tol = 1e-6
    x, lam = res.omega.x, res.omega.lam
    assert np.all(x >= game.lower_stack - tol) and np.all(x <= game.upper_stack + tol)
    A = np.hstack([ag.coupling for ag in game.agents])
    assert np.all(A @ x <= game.b + tol)
    ops = SplitOperators(game)
    assert np.linalg.norm(ops.Lbar @ lam) <= 1e-6


def test_fbf_warns_and_returns_best_when_budget_exhausted():
    game, _ = small_random_game(62)
    with pytest.warns(RuntimeWarning):
        res = fbf_solve(game, tol=1e-14, max_iter=50)
    assert not res.converged
    assert res.final_residual == res.trace.column("residual").min() or res.iterations == 50


def test_fbf_agrees_with_tikhonov_on_strongly_monotone_game():
    # F + mu*Id with mu = 1: the v-GNE is unique, so both solvers meet there
    game, sel = small_random_game(63)
    pg = game.pseudogradient
    game_sm = GameInstance(
        game.agents, game.b, LinearPseudogradient(Q=pg.Q + np.eye(game.n), c=pg.c)
    )
    fbf = fbf_solve(game_sm, tol=1e-10, max_iter=200000)
    assert fbf.converged
    params = ScheduleParams(gamma0=1e-3, xi=1.0, zeta=1.5, max_outer=400)
    tik = solve(game_sm, sel, params, alpha=1.0, trace_stride=100)
    assert np.linalg.norm(tik.omega.x - fbf.omega.x) <= 1e-4


def test_hsdm_params_validation():
    with pytest.raises(ValueError):
        HsdmParams(eta=0.5)
    with pytest.raises(ValueError):
        HsdmParams(eta=1.2)
    HsdmParams(eta=0.51)


def test_hsdm_with_zero_schedule_matches_fbf_bitwise():
    game, sel = small_random_game(64)
    n_iter = 400
    with pytest.warns(RuntimeWarning):
        fbf = fbf_solve(game, tol=0.0, max_iter=n_iter, selection=sel)
    hsdm = hsdm_fbf_solve(game, sel, HsdmParams(gamma0=0.0, eta=0.6, max_iter=n_iter))
    r1 = fbf.trace.column("residual")
    r2 = hsdm.trace.column("residual")
    np.testing.assert_array_equal(r1, r2)
    np.testing.assert_array_equal(fbf.trace.column("phi"), hsdm.trace.column("phi"))


def test_hsdm_deterministic_given_identical_inputs():
    game, sel = small_random_game(65)
    p = HsdmParams(gamma0=1e-3, eta=0.6, max_iter=300)
    a = hsdm_fbf_solve(game, sel, p)
    b = hsdm_fbf_solve(game, sel, p)
    np.testing.assert_array_equal(a.omega.stacked(), b.omega.stacked())
    np.testing.assert_array_equal(a.trace.column("residual"), b.trace.column("residual"))


def test_hsdm_converges_to_interior_optimum_with_zero_pseudogradient():
    # F == 0 and a strongly convex phi with interior optimum: HSDM is a
    # diminishing-step projected scheme for min phi over the feasible set
    game = two_agent_game(dim=2, m=2, b=np.array([50.0, 50.0]))  # coupling inactive
    rng = np.random.default_rng(8)
    target = rng.uniform(-0.5, 0.5, 4)
    sel = QuadraticSelection(Q=np.eye(4), c=-2.0 * target, theta=1e-6)
    params = HsdmParams(gamma0=0.5, eta=0.51, max_iter=4000)
    res = hsdm_fbf_solve(game, sel, params)
    oracle = qp_solve(
        OracleProblem(
            Q=np.eye(4), c=-2.0 * target,
            lower=game.lower_stack, upper=game.upper_stack,
        ),
        tol=1e-10,
    )
    np.testing.assert_allclose(oracle, target, atol=1e-9)  # interior optimum
    assert np.linalg.norm(res.omega.x - oracle) <= 1e-3


def test_fbf_residual_infimum_decreases():
    game, _ = generate_instance(67, ExperimentConfig(n_instances=1))
    with pytest.warns(RuntimeWarning):
        res = fbf_solve(game, tol=0.0, max_iter=3000, trace_stride=1)
    r = res.trace.column("residual")
    assert np.all(np.isfinite(r))
    thirds = np.array_split(r, 3)
    assert thirds[1].min() < thirds[0].min()
    assert thirds[2].min() < thirds[1].min()


def test_hsdm_residual_tracks_tikhonov_order_of_magnitude():
    # harness comparison defaults: HSDM weight chosen for matched selection progress
    game, sel = generate_instance(66, ExperimentConfig(n_instances=1))
    budget = 3000
    hsdm = hsdm_fbf_solve(game, sel, HsdmParams(gamma0=0.3, eta=0.6, max_iter=budget),
                          trace_stride=100)
    params = ScheduleParams(gamma0=1e-3, xi=0.6, zeta=2.0, max_outer=10**9)
    tik = solve(game, sel, params, alpha=1.0, budget=budget, trace_stride=100)
    ratio = tik.final_residual / hsdm.final_residual
    assert 0.1 <= ratio <= 10.0
