"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they complete.
The trend and comparison criteria drive the full 20-seed benchmark harness at
the 2e4 cumulative-iteration budget and take a few minutes.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from gneselect import (
    ExperimentConfig,
    ScheduleParams,
    SplitOperators,
    epsilon_schedule,
    gamma_schedule,
    generate_instance,
    hsdm_operator,
    initial_point,
    inner_iteration_bound,
    inner_solve,
    make_config,
    pfb_step,
    run_comparison,
    run_sweep,
    solve,
    tik_operator,
)
from gneselect.bench import METHOD_HSDM, METHOD_TIK, final_means
from gneselect.game import QuadraticSelection
from gneselect.operators import solve_regularized
from gneselect.oracle_scenarios import run_potential, run_zero_f
from gneselect.traces import read_aggregate_csv
from helpers import small_random_game


def _criterion(name, ok, detail="", tag="ACCEPTANCE"):
    line = f"{tag} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    assert ok, line


def _rand_point(dim, rng, scale=2.0):
    return rng.uniform(-scale, scale, dim)


# -- Lemma 3: Phi >= delta*I and ||Phi|| <= 2*delta ----------------------------


def test_lemma3_certification():
    worst_min, worst_max = np.inf, -np.inf
    for seed in range(100):
        game, sel = generate_instance(seed, ExperimentConfig(n_instances=1))
        cfg = make_config(game, sel, alpha=1.0, gamma_bar=1e-3)
        eigs = np.linalg.eigvalsh(cfg.phi.materialize())
        worst_min = min(worst_min, eigs[0] - cfg.delta)
        worst_max = max(worst_max, eigs[-1] - 2.0 * cfg.delta)
    ok = worst_min >= -1e-9 and worst_max <= 1e-9
    _criterion(
        "lemma3-preconditioner-bounds",
        ok,
        f"min(lambda_min - delta)={worst_min:.3e}, max(norm - 2 delta)={worst_max:.3e}, 100 instances",
    )


# -- Lemma 1: strong monotonicity and Lipschitz bounds --------------------------


def test_lemma1_certification():
    alpha, gamma = 1.0, 1e-3
    worst_modulus = np.inf
    worst_ratio = 0.0
    for seed in range(20):
        game, sel = generate_instance(seed, ExperimentConfig(n_instances=1))
        ops = SplitOperators(game)
        cfg = make_config(game, sel, alpha=alpha, gamma_bar=gamma)
        rng = np.random.default_rng(10_000 + seed)
        anchor = _rand_point(ops.dim, rng)
        for _ in range(1000):
            a = _rand_point(ops.dim, rng)
            b = _rand_point(ops.dim, rng)
            d = a - b
            dsq = float(d @ d)
            ga = ops.forward(sel, anchor, gamma, alpha, a)
            gb = ops.forward(sel, anchor, gamma, alpha, b)
            ta = ga + ops.apply_C(a)
            tb = gb + ops.apply_C(b)
            worst_modulus = min(worst_modulus, float((ta - tb) @ d) / dsq)
            worst_ratio = max(
                worst_ratio, float(np.linalg.norm(ga - gb)) / np.sqrt(dsq) / cfg.L_G
            )
    ok = worst_modulus >= alpha - 1e-8 and worst_ratio <= 1.0 + 1e-8
    _criterion(
        "lemma1-regularized-operator",
        ok,
        f"min modulus={worst_modulus:.9f} (alpha={alpha}), max |G| ratio/L_G={worst_ratio:.9f}, "
        "20 instances x 1000 pairs",
    )


# -- Lemma 4: contraction factor and a-posteriori error bound -------------------


def test_lemma4_contraction_and_error_bound():
    gamma = 1e-3
    worst_excess = -np.inf
    for seed in range(20):
        game, sel = generate_instance(seed, ExperimentConfig(n_instances=1))
        ops = SplitOperators(game)
        cfg = make_config(game, sel, alpha=1.0, gamma_bar=gamma)
        rng = np.random.default_rng(20_000 + seed)
        anchor = ops.project(_rand_point(ops.dim, rng, 1.0))
        bound = np.sqrt(cfg.beta) + 1e-3
        for _ in range(50):
            a = _rand_point(ops.dim, rng)
            b = _rand_point(ops.dim, rng)
            ta = pfb_step(ops, sel, cfg, anchor, gamma, a)
            tb = pfb_step(ops, sel, cfg, anchor, gamma, b)
            ratio = cfg.phi.norm(ta - tb) / cfg.phi.norm(a - b)
            worst_excess = max(worst_excess, ratio - bound)
    contraction_ok = worst_excess <= 0.0

    # a-posteriori Phi-distance bound along real inner runs, small instances
    bound_ok = True
    worst_violation = 0.0
    cfg_small = ExperimentConfig(n_instances=1, n_agents=4, agent_dim=2, n_constraints=2)
    for seed in range(5):
        game, sel = generate_instance(seed, cfg_small)
        ops = SplitOperators(game)
        cfg = make_config(game, sel, alpha=1.0, gamma_bar=gamma)
        q = cfg.sqrt_beta
        anchor = initial_point(game).stacked()
        star, _ = solve_regularized(ops, sel, cfg, anchor, gamma, tol_phi=1e-11)
        y = anchor.copy()
        for _ in range(300):
            y_next = pfb_step(ops, sel, cfg, anchor, gamma, y)
            dist = cfg.phi.norm(y - star)
            step = cfg.phi.norm(y_next - y)
            excess = dist - step / (1.0 - q)
            worst_violation = max(worst_violation, excess)
            bound_ok = bound_ok and excess <= 1e-10
            y = y_next
    _criterion(
        "lemma4-contraction-and-bound",
        contraction_ok and bound_ok,
        f"max ratio excess over sqrt(beta)+1e-3: {worst_excess:.3e}; "
        f"max a-posteriori violation: {worst_violation:.3e}",
    )


# -- Proposition 2: eps_k accuracy and finite termination ------------------------


def test_prop2_eps_accuracy_and_termination_bound():
    cfg_small = ExperimentConfig(n_instances=1, n_agents=4, agent_dim=2, n_constraints=2)
    params = ScheduleParams(gamma0=1e-3, xi=0.6, zeta=2.0)
    dist_ok, term_ok = True, True
    worst_margin, worst_term = -np.inf, -np.inf
    for seed in range(5):
        game, sel = generate_instance(seed, cfg_small)
        ops = SplitOperators(game)
        cfg = make_config(game, sel, alpha=1.0, gamma_bar=gamma_schedule(params, 1))
        omega = initial_point(game).stacked()
        for k in range(1, 11):
            g = gamma_schedule(params, k)
            e = epsilon_schedule(params, k)
            assert e > 0
            y, t_used, reason, _ = inner_solve(ops, sel, cfg, omega, g, e)
            star, _ = solve_regularized(ops, sel, cfg, omega, g, tol_phi=e / 1e3)
            dist = cfg.phi.norm(y - star)
            worst_margin = max(worst_margin, dist - e)
            dist_ok = dist_ok and dist <= e
            t_bound = inner_iteration_bound(cfg, e, cfg.phi.norm(omega - star))
            worst_term = max(worst_term, t_used - (t_bound + 5))
            term_ok = term_ok and reason == "tol" and t_used <= t_bound + 5
            omega = y
    _criterion(
        "prop2-eps-approximation",
        dist_ok and term_ok,
        f"max (dist - eps_k)={worst_margin:.3e}; max (t_used - bound - 5)={worst_term:.1f}; "
        "5 instances x 10 outer steps",
    )


# -- expanded updates == operator form -------------------------------------------


def test_expanded_updates_match_operator_form_full_run():
    game, sel = generate_instance(0, ExperimentConfig(n_instances=1))
    params = ScheduleParams(gamma0=1e-3, xi=0.6, zeta=2.0, max_outer=10**9)
    result = solve(
        game, sel, params, alpha=1.0, budget=20000, trace_stride=2000, inclusion_check=True
    )
    ok = result.max_inclusion_violation <= 1e-8
    _criterion(
        "pfb-inclusion-full-run",
        ok,
        f"max violation {result.max_inclusion_violation:.3e} over {result.cumulative_inner} "
        "inner iterations",
    )


# -- fixed-point-set equality of the two regularized operators --------------------


def test_tik_hsdm_fixed_point_equality():
    gamma = 0.8
    ok = True
    worst = 0.0
    for seed in range(5):
        game, base_sel = small_random_game(70 + seed)
        sel = QuadraticSelection(Q=0.5 * np.eye(game.n), c=base_sel.c, theta=0.2)
        ops = SplitOperators(game)
        cfg = make_config(game, sel, alpha=1.0, gamma_bar=gamma)
        unit_cfg = make_config(game, sel, alpha=1.0, gamma_bar=0.0)
        omega = initial_point(game).stacked()
        for _ in range(400):
            nxt = tik_operator(ops, sel, cfg, gamma, omega, tol=1e-10)
            done = np.linalg.norm(nxt - omega) <= 1e-8
            omega = nxt
            if done:
                break
        assert np.linalg.norm(tik_operator(ops, sel, cfg, gamma, omega, tol=1e-10) - omega) <= 1e-8
        gap = float(np.linalg.norm(hsdm_operator(ops, sel, unit_cfg, gamma, omega, tol=1e-10) - omega))
        worst = max(worst, gap)
        ok = ok and gap <= 1e-6
    _criterion(
        "tik-hsdm-fixed-point-equality",
        ok,
        f"max HSDM fixed-point defect at Tik fixed points: {worst:.3e}, 5 instances",
    )


# -- oracle equivalence ------------------------------------------------------------


def test_oracle_equivalence_zero_and_potential():
    with ProcessPoolExecutor(max_workers=2) as pool:
        zero_reports = list(pool.map(run_zero_f, range(20)))
        pot_reports = list(pool.map(run_potential, range(20)))
    worst_zero = max(r["rel_error"] for r in zero_reports)
    worst_pot = max(r["rel_error"] for r in pot_reports)
    ok = worst_zero <= 1e-3 and worst_pot <= 1e-2
    _criterion(
        "oracle-equivalence",
        ok,
        f"zero-F worst rel err {worst_zero:.2e} (<= 1e-3); "
        f"potential worst rel err {worst_pot:.2e} (<= 1e-2); 20 seeds each",
    )


# -- Section-V trend reproduction and the HSDM comparison --------------------------


@pytest.fixture(scope="module")
def harness_results(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = ExperimentConfig(n_instances=20, budget=20000, trace_stride=2000, jobs=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        paths = {
            sweep: run_sweep(cfg, out, sweep, jobs=2) for sweep in ("xi", "zeta", "alpha")
        }
        paths["comparison"] = run_comparison(cfg, out, jobs=2)
    finals = {}
    for key, path in paths.items():
        header, rows = read_aggregate_csv(path)
        assert header["n_failed"] == 0
        finals[key] = final_means(rows)
    return finals


def test_trend_xi_sweep(harness_results):
    finals = harness_results["xi"]
    res = [finals[v][0] for v in ("0.4", "0.6", "0.8")]
    gap = [finals[v][1] for v in ("0.4", "0.6", "0.8")]
    phi_ok = gap[0] <= gap[1] <= gap[2]
    res_ok = res[0] >= res[1] >= res[2]
    _criterion(
        "trend-xi-sweep",
        phi_ok and res_ok,
        f"phi gaps {[f'{g:+.4f}' for g in gap]} (need nondecreasing), "
        f"residuals {[f'{r:.4e}' for r in res]} (need nonincreasing)",
    )


def test_trend_zeta_sweep(harness_results):
    finals = harness_results["zeta"]
    res = [finals[v][0] for v in ("1.0", "2.0", "3.0")]
    gap = [finals[v][1] for v in ("1.0", "2.0", "3.0")]
    res_ok = res[0] <= res[1] <= res[2]
    phi_ok = gap[0] >= gap[1] >= gap[2]
    _criterion(
        "trend-zeta-sweep",
        res_ok and phi_ok,
        f"residuals {[f'{r:.4e}' for r in res]} (need nondecreasing), "
        f"phi gaps {[f'{g:+.4f}' for g in gap]} (need nonincreasing)",
    )


def test_selection_improves_over_fbf(harness_results):
    _, gap = harness_results["xi"]["0.6"]
    _criterion(
        "selection-beats-fbf",
        gap < 0.0,
        f"mean final phi - phi_FBF = {gap:+.4f} at (xi=0.6, zeta=2, alpha=1)",
    )


def test_alpha_sweep_improves_tradeoff(harness_results):
    # larger alpha should win at least one metric without losing > 10% in the other
    finals = harness_results["alpha"]
    (r_lo, g_lo), (r_hi, g_hi) = finals["0.5"], finals["2.0"]
    span = abs(g_lo) + abs(g_hi)
    improves = r_hi < r_lo or g_hi < g_lo
    no_big_loss = r_hi <= 1.1 * r_lo and g_hi <= g_lo + 0.1 * span
    _criterion(
        "alpha-sweep-tradeoff",
        improves and no_big_loss,
        f"alpha 0.5 -> 2.0: residual {r_lo:.4e} -> {r_hi:.4e}, phi gap {g_lo:+.4f} -> {g_hi:+.4f}",
        tag="SPEC-EXAMPLE",
    )


def test_figure4_comparison_order_of_magnitude(harness_results):
    finals = harness_results["comparison"]
    res_tik, _ = finals[METHOD_TIK]
    res_hsdm, _ = finals[METHOD_HSDM]
    ratio = res_tik / res_hsdm
    _criterion(
        "figure4-hsdm-comparison",
        0.1 <= ratio <= 10.0,
        f"final mean residuals: double-layer {res_tik:.4e}, HSDM-FBF {res_hsdm:.4e}, "
        f"ratio {ratio:.2f}",
    )
