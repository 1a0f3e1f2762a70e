"""Baselines: plain forward-backward-forward v-GNE seeking (no selection) and the
hybrid steepest descent method paired with one FBF pass per iteration.

FBF is Tseng's two-evaluation splitting on 0 in (A + B + C): it converges for
merely monotone operators and certifies its own output through the KKT
residual.  HSDM interleaves the same pass with a vanishing gradient step of the
selection function, gamma_k = gamma0 * k^-eta with eta in (0.5, 1] so that the
weights are square-summable but not summable.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .game import GameInstance, JointPoint, SelectionSpec, initial_point, require_valid
from .operators import SplitOperators
from .traces import SolverTrace


@dataclass
class HsdmParams:
    gamma0: float = 1e-3
    eta: float = 0.6
    max_iter: int = 20000

    def __post_init__(self):
        if not 0.5 < self.eta <= 1.0:
            raise ValueError(
                "eta must lie in (0.5, 1] so the schedule is square-summable but non-summable"
            )
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class BaselineResult:
    omega: JointPoint
    trace: SolverTrace
    iterations: int
    converged: bool
    step: float
    lipschitz: float

    @property
    def final_residual(self) -> float:
        return self.trace.last("residual")


def _skew_block_norm(ops: SplitOperators, max_iter: int = 200, tol: float = 1e-8) -> float:
    """Spectral norm of the symmetric coupling matrix [[0,-A^T,0],[-A,0,-Lbar],[0,-Lbar,0]]
    by power iteration (it shares singular values with the skew part of C)."""
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(ops.dim)
    v /= np.linalg.norm(v)
    est = 0.0

    def apply(z):
        out = np.empty(ops.dim)
        out[ops.sx] = -(ops.AT @ z[ops.sl])
        out[ops.sl] = -(ops.A @ z[ops.sx]) - ops.Lbar @ z[ops.sv]
        out[ops.sv] = -(ops.Lbar @ z[ops.sl])
        return out

    for _ in range(max_iter):
        w = apply(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new = abs(float(v @ w))
        v = w / nw
        if est > 0 and abs(new - est) <= tol * abs(new):
            est = new
            break
        est = new
    return est


def bc_lipschitz(game: GameInstance, ops: SplitOperators | None = None) -> float:
    ops = ops or SplitOperators(game)
    return float(max(game.L_F, 2.0 * game.max_degree) + _skew_block_norm(ops))


def fbf_solve(
    game: GameInstance,
    tol: float = 1e-6,
    max_iter: int = 10**5,
    *,
    selection: SelectionSpec | None = None,
    trace_stride: int = 1,
    step_safety: float = 0.9,
    omega0: JointPoint | None = None,
    ops: SplitOperators | None = None,
    validate: bool = True,
) -> BaselineResult:
    """Tseng forward-backward-forward iteration to a v-GNE.

    zbar = proj(z - s*(B+C)(z)); z+ = zbar - s*((B+C)(zbar) - (B+C)(z)) with
    s = step_safety / L_{B+C}.  Stops when the KKT residual drops below tol;
    exhausting max_iter returns the best iterate seen, with a warning.
    """
    if validate:
        require_valid(game)
    ops = ops or SplitOperators(game)
    L = bc_lipschitz(game, ops)
    s = step_safety / L
    z = (initial_point(game) if omega0 is None else omega0).stacked()
    z = ops.project(z)
    trace = SolverTrace()
    start = time.perf_counter()
    best = z.copy()
    best_res = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Tz = ops.apply_BC(z)
        res = float(np.linalg.norm(z - ops.project(z - Tz)))
        if res < best_res:
            best_res = res
            best = z.copy()
        stop = res <= tol or it == max_iter
        if stop:
            trace.append(
                it, 0, it, res,
                np.nan if selection is None else ops.phi_value(selection, z),
                0.0, 0.0, 0.0, time.perf_counter() - start,
            )
            converged = res <= tol
            break
        zbar = ops.project(z - s * Tz)
        z_new = zbar - s * (ops.apply_BC(zbar) - Tz)
        if it % trace_stride == 0:
            trace.append(
                it, 0, it, res,
                np.nan if selection is None else ops.phi_value(selection, z),
                float(np.linalg.norm(z_new - z)), 0.0, 0.0,
                time.perf_counter() - start,
            )
        z = z_new
    if not converged:
        warnings.warn(
            f"FBF exhausted {max_iter} iterations (best residual {best_res:.3e}); "
            "returning the best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
        z = best
    return BaselineResult(
        omega=JointPoint.from_stacked(z, game),
        trace=trace,
        iterations=it,
        converged=converged,
        step=s,
        lipschitz=L,
    )


def hsdm_fbf_solve(
    game: GameInstance,
    sel: SelectionSpec,
    params: HsdmParams,
    *,
    trace_stride: int = 1,
    step_safety: float = 0.9,
    omega0: JointPoint | None = None,
    ops: SplitOperators | None = None,
    validate: bool = True,
) -> BaselineResult:
    """HSDM selection: z+ = T(z) - gamma_k * grad_phi(T(z)) with T one FBF pass.

    One iteration is one unit on the cumulative-iteration axis shared with the
    double-layer solver.  With gamma0 = 0 the computation reduces bitwise to
    fbf_solve given the same start.
    """
    if validate:
        require_valid(game)
    ops = ops or SplitOperators(game)
    L = bc_lipschitz(game, ops)
    s = step_safety / L
    z = (initial_point(game) if omega0 is None else omega0).stacked()
    z = ops.project(z)
    trace = SolverTrace()
    start = time.perf_counter()
    it = 0
    for it in range(1, params.max_iter + 1):
        Tz = ops.apply_BC(z)
        res = float(np.linalg.norm(z - ops.project(z - Tz)))
        if it == params.max_iter:
            trace.append(
                it, 0, it, res, ops.phi_value(sel, z), 0.0,
                params.gamma0 * float(it) ** (-params.eta), 0.0,
                time.perf_counter() - start,
            )
            break
        zbar = ops.project(z - s * Tz)
        v = zbar - s * (ops.apply_BC(zbar) - Tz)
        g = params.gamma0 * float(it) ** (-params.eta)
        z_new = v if g == 0.0 else v - g * ops.grad_phi(sel, v)
        if it % trace_stride == 0:
            trace.append(
                it, 0, it, res, ops.phi_value(sel, z),
                float(np.linalg.norm(z_new - z)), g, 0.0,
                time.perf_counter() - start,
            )
        z = z_new
    return BaselineResult(
        omega=JointPoint.from_stacked(z, game),
        trace=trace,
        iterations=it,
        converged=False,
        step=s,
        lipschitz=L,
    )
