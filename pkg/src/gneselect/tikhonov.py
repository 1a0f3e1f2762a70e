"""Double-layer solver: outer Tikhonov loop over regularized sub-problems, inner
preconditioned forward-backward loop with the Phi-norm stopping criterion.

Outer step k >= 1 anchors the regularized inclusion at the current iterate and
asks the inner loop for an eps_k-approximate solution; gamma_k = gamma0 * k^-xi
decays slowly (non-summable), eps_k = gamma0 * k^-(xi*zeta) decays relative to
it and drops to exactly 0 below the floor.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .game import (
    GameInstance,
    JointPoint,
    SelectionSpec,
    initial_point,
    require_valid,
)
from .operators import SplitOperators, _pfb_step_stacked, verify_pfb_inclusion
from .precond import PreconditionerConfig, make_config
from .traces import SolverTrace


class InnerLoopError(RuntimeError):
    """Inner loop hit its iteration cap while a finite-termination guarantee held."""


@dataclass
class ScheduleParams:
    """Regularization and accuracy schedules plus iteration budgets."""

    gamma0: float = 1e-3
    xi: float = 0.6
    zeta: float = 2.0
    eps_floor: float = float(np.finfo(float).eps)
    max_outer: int = 1000
    max_inner: int = 10**6
    gamma_min: float = 1e-8
    residual_target: float | None = None

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        if self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if self.eps_floor < 0:
            raise ValueError("eps_floor must be nonnegative")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration budgets must be positive")


def gamma_schedule(params: ScheduleParams, k: int) -> float:
    if k < 1:
        raise ValueError("outer index k starts at 1")
    return params.gamma0 * float(k) ** (-params.xi)


def epsilon_schedule(params: ScheduleParams, k: int) -> float:
    if k < 1:
        raise ValueError("outer index k starts at 1")
    eps = params.gamma0 * float(k) ** (-params.xi * params.zeta)
    return eps if eps >= params.eps_floor else 0.0


def inner_iteration_bound(cfg: PreconditionerConfig, eps_k: float, dist0_phi: float) -> float:
    """Finite-termination bound of the inner loop under the conservative factor.

    With q = sqrt(beta), the stopping test |dy|_Phi <= (1-q)*eps_k holds at the
    latest after log_q((1-q)*eps_k / ((1+q)*d0)) iterations.
    """
    if eps_k <= 0:
        return math.inf
    q = cfg.sqrt_beta
    target = (1.0 - q) * eps_k
    if dist0_phi <= 0 or (1.0 + q) * dist0_phi <= target:
        return 0.0
    return math.log(target / ((1.0 + q) * dist0_phi)) / math.log(q)


def inner_solve(
    ops: SplitOperators,
    sel: SelectionSpec,
    cfg: PreconditionerConfig,
    omega_anchor: np.ndarray,
    gamma_k: float,
    eps_k: float,
    *,
    stop_rule: str = "conservative",
    eps_floor: float = float(np.finfo(float).eps),
    max_inner: int = 10**6,
    trace: SolverTrace | None = None,
    k: int = 1,
    stride: int = 1,
    cum_t: int = 0,
    budget: int | None = None,
    clock=None,
    inclusion_check: bool = False,
) -> tuple[np.ndarray, int, str, float]:
    """Run the inner loop from the anchor until the stopping inequality holds.

    Returns (accepted iterate, iterations used, stop reason, max inclusion
    violation).  With eps_k > 0 the accepted iterate is an eps_k-approximate
    solution of the regularized sub-problem in the Phi-norm; hitting the cap in
    that regime contradicts the finite-termination guarantee and raises.
    """
    q = cfg.contraction_factor(stop_rule)
    threshold = (1.0 - q) * eps_k if eps_k > 0 else eps_floor * (1.0 - cfg.sqrt_beta)
    y = omega_anchor.copy()
    max_violation = 0.0
    reason = "cap"
    t_used = 0
    for t in range(1, max_inner + 1):
        y_next = _pfb_step_stacked(ops, sel, cfg, omega_anchor, gamma_k, y)
        d = cfg.phi.norm(y_next - y)
        if inclusion_check:
            v = verify_pfb_inclusion(ops, sel, cfg, omega_anchor, gamma_k, y, y_next)
            if v > max_violation:
                max_violation = v
        y = y_next
        t_used = t
        total = cum_t + t
        done = d <= threshold
        out_of_budget = budget is not None and total >= budget
        if trace is not None and (total % stride == 0 or done or out_of_budget or t == max_inner):
            trace.append(
                k,
                t,
                total,
                ops.kkt_residual(y),
                ops.phi_value(sel, y),
                d,
                gamma_k,
                eps_k,
                0.0 if clock is None else clock(),
            )
        if done:
            reason = "tol"
            break
        if out_of_budget:
            reason = "budget"
            break
    else:
        if eps_k > 0:
            raise InnerLoopError(
                f"inner cap {max_inner} reached at outer step {k} with eps_k={eps_k:g} > 0; "
                "finite termination is guaranteed, so the configuration is inconsistent"
            )
        warnings.warn(
            f"inner cap {max_inner} reached in the exact-solve phase (eps_k = 0); "
            "returning the current iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return y, t_used, reason, max_violation


@dataclass
class SolveResult:
    omega: JointPoint
    trace: SolverTrace
    outer_iterations: int
    cumulative_inner: int
    stop_reason: str
    max_inclusion_violation: float
    outer_sup_norms: list[float] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.trace.last("residual")

    @property
    def final_phi(self) -> float:
        return self.trace.last("phi")


def solve(
    game: GameInstance,
    sel: SelectionSpec,
    params: ScheduleParams,
    cfg: PreconditionerConfig | None = None,
    *,
    alpha: float = 1.0,
    omega0: JointPoint | None = None,
    stop_rule: str = "conservative",
    budget: int | None = None,
    trace_stride: int = 1,
    inclusion_check: bool = False,
    ops: SplitOperators | None = None,
    validate: bool = True,
) -> SolveResult:
    """Outer Tikhonov loop: K anchored inner solves, full trace.

    Parameters
    ----------
    params : ScheduleParams
        gamma/eps schedules and iteration budgets.
    cfg : PreconditionerConfig, optional
        Resolved step sizes; built from (alpha, gamma_1) when omitted.
    budget : int, optional
        Cap on cumulative inner iterations; the run stops mid-loop when reached.
    inclusion_check : bool
        Verify the expanded-update/operator-form equivalence at every inner
        iteration and report the largest violation.
    """
    if validate:
        require_valid(game)
    if ops is None:
        ops = SplitOperators(game)
    if cfg is None:
        cfg = make_config(game, sel, alpha=alpha, gamma_bar=gamma_schedule(params, 1))
    if omega0 is None:
        omega = initial_point(game).stacked()
    else:
        omega = ops.project(omega0.stacked())
    trace = SolverTrace()
    start = time.perf_counter()
    clock = lambda: time.perf_counter() - start
    cum = 0
    max_violation = 0.0
    sup_norms = []
    stop_reason = "max_outer"
    outer_done = 0
    for k in range(1, params.max_outer + 1):
        g = gamma_schedule(params, k)
        e = epsilon_schedule(params, k)
        omega, t_used, reason, viol = inner_solve(
            ops,
            sel,
            cfg,
            omega,
            g,
            e,
            stop_rule=stop_rule,
            eps_floor=params.eps_floor,
            max_inner=params.max_inner,
            trace=trace,
            k=k,
            stride=trace_stride,
            cum_t=cum,
            budget=budget,
            clock=clock,
            inclusion_check=inclusion_check,
        )
        cum += t_used
        outer_done = k
        sup_norms.append(float(np.abs(omega).max()))
        max_violation = max(max_violation, viol)
        if reason == "budget":
            stop_reason = "budget"
            break
        if (
            params.residual_target is not None
            and g < params.gamma_min
            and trace.last("residual") is not None
            and trace.last("residual") <= params.residual_target
        ):
            stop_reason = "residual_target"
            break
    return SolveResult(
        omega=JointPoint.from_stacked(omega, game),
        trace=trace,
        outer_iterations=outer_done,
        cumulative_inner=cum,
        stop_reason=stop_reason,
        max_inclusion_violation=max_violation,
        outer_sup_norms=sup_norms,
    )
