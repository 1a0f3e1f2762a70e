"""KKT splitting, projections, the preconditioned forward-backward step and the
fixed-point operators used by the double-layer method.

The extended KKT operator is A + B + C with
    A(omega) = N_X(x) x N_{>=0}(lambda) x {0},
    B(omega) = (F(x), Lbar lambda, 0),
    C(omega) = (A^T lambda, b_split - A x - Lbar nu, Lbar lambda),
where Lbar is the graph Laplacian lifted to the m-dimensional dual blocks and
b_split stacks the per-agent offsets b/N.  B + C is monotone (the linear part of
C is skew-symmetric and Lbar is PSD); its zeros are the consensus v-GNE points.
"""

from __future__ import annotations

import numpy as np

from .game import (
    GameInstance,
    JointPoint,
    LinearPseudogradient,
    QuadraticSelection,
    SelectionSpec,
)
from .precond import PreconditionerConfig

_DENSE_LIMIT = 4000


class ResolventError(RuntimeError):
    """An iteratively evaluated resolvent failed to reach its tolerance."""


class SplitOperators:
    """Matrix-free application of the split KKT operator for one game.

    Immutable after construction; neighbor sums are evaluated through the lifted
    Laplacian in ascending agent order, so repeated applications are bit-for-bit
    reproducible.  Dense blocks are materialized only at desk scale.
    """

    def __init__(self, game: GameInstance):
        self.game = game
        n, N, m = game.n, game.N, game.m
        self.n, self.N, self.m = n, N, m
        self.Nm = N * m
        self.dim = n + 2 * self.Nm
        self.sx = slice(0, n)
        self.sl = slice(n, n + self.Nm)
        self.sv = slice(n + self.Nm, self.dim)
        if self.dim <= _DENSE_LIMIT:
            A = np.zeros((self.Nm, n))
            for i, ag in enumerate(game.agents):
                A[i * m : (i + 1) * m, game.agent_slice(i)] = ag.coupling
            self.A = A
            self.AT = A.T.copy()
            self.Lbar = np.kron(game.laplacian, np.eye(m))
        else:
            from scipy import sparse

            self.A = sparse.block_diag([ag.coupling for ag in game.agents], format="csr")
            self.AT = self.A.T.tocsr()
            self.Lbar = sparse.kron(
                sparse.csr_matrix(game.laplacian), sparse.eye(m), format="csr"
            )
        self.b_split = np.tile(game.b / N, N)
        self.lower = game.lower_stack
        self.upper = game.upper_stack
        pg = game.pseudogradient
        if isinstance(pg, LinearPseudogradient):
            self._QF, self._cF = pg.Q, pg.c
            self.F = lambda x: self._QF @ x + self._cF
        else:
            self.F = pg

    # -- selection gradient on stacked storage --------------------------------

    def grad_phi(self, sel: SelectionSpec, w: np.ndarray) -> np.ndarray:
        if isinstance(sel, QuadraticSelection):
            out = np.empty(self.dim)
            out[self.sx] = 2.0 * (sel.Q @ w[self.sx]) + sel.c
            out[self.sl] = (2.0 * sel.theta) * w[self.sl]
            out[self.sv] = (2.0 * sel.theta) * w[self.sv]
            return out
        gx, gl, gv = sel.grad_blocks(w[self.sx], w[self.sl], w[self.sv])
        return np.concatenate([gx, gl, gv])

    def phi_value(self, sel: SelectionSpec, w: np.ndarray) -> float:
        return sel.value(w[self.sx], w[self.sl], w[self.sv])

    # -- split operator blocks -------------------------------------------------

    def apply_B(self, w: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.sx] = self.F(w[self.sx])
        out[self.sl] = self.Lbar @ w[self.sl]
        return out

    def apply_C(self, w: np.ndarray) -> np.ndarray:
        out = np.empty(self.dim)
        out[self.sx] = self.AT @ w[self.sl]
        out[self.sl] = self.b_split - self.A @ w[self.sx] - self.Lbar @ w[self.sv]
        out[self.sv] = self.Lbar @ w[self.sl]
        return out

    def apply_BC(self, w: np.ndarray) -> np.ndarray:
        Llam = self.Lbar @ w[self.sl]
        out = np.empty(self.dim)
        out[self.sx] = self.F(w[self.sx]) + self.AT @ w[self.sl]
        out[self.sl] = Llam + self.b_split - self.A @ w[self.sx] - self.Lbar @ w[self.sv]
        out[self.sv] = Llam
        return out

    def project(self, w: np.ndarray) -> np.ndarray:
        out = w.copy()
        np.clip(out[self.sx], self.lower, self.upper, out=out[self.sx])
        np.maximum(out[self.sl], 0.0, out=out[self.sl])
        return out

    def kkt_residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w - self.project(w - self.apply_BC(w))))

    def forward(self, sel, anchor: np.ndarray, gamma: float, alpha: float, y: np.ndarray):
        return self.apply_B(y) + gamma * self.grad_phi(sel, y) + alpha * (y - anchor)


def _stacked(w) -> np.ndarray:
    return w.stacked() if isinstance(w, JointPoint) else np.asarray(w, dtype=float)


# -- public wrappers matching the module contract ------------------------------

def apply_B(ops: SplitOperators, omega) -> np.ndarray:
    return ops.apply_B(_stacked(omega))


def apply_C(ops: SplitOperators, omega) -> np.ndarray:
    return ops.apply_C(_stacked(omega))


def project_Omega(game_or_ops, omega):
    ops = game_or_ops if isinstance(game_or_ops, SplitOperators) else SplitOperators(game_or_ops)
    w = ops.project(_stacked(omega))
    return JointPoint.from_stacked(w, ops.game) if isinstance(omega, JointPoint) else w


def kkt_residual(ops: SplitOperators, omega) -> float:
    return ops.kkt_residual(_stacked(omega))


def forward_operator_G(ops: SplitOperators, sel, omega_anchor, gamma: float, alpha: float, y):
    """B(y) + gamma*grad_phi(y) + alpha*(y - anchor); the forward part of the
    regularized inclusion."""
    if gamma < 0 or alpha <= 0:
        raise ValueError("gamma must be >= 0 and alpha > 0")
    return ops.forward(sel, _stacked(omega_anchor), gamma, alpha, _stacked(y))


def pfb_step(
    ops: SplitOperators,
    sel: SelectionSpec,
    cfg: PreconditionerConfig,
    omega_anchor,
    gamma: float,
    y,
):
    """One inner iteration of the preconditioned forward-backward operator.

    Expanded per-agent form of
    (Id + Phi^-1 (A + C))^-1 (Id - Phi^-1 (B + gamma*grad_phi + alpha*(Id - anchor))):
    primal and auxiliary updates first, then the dual update on the reflected
    points (2x+ - x) and (2nu+ - nu).
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    anchor = _stacked(omega_anchor)
    w = _stacked(y)
    out = _pfb_step_stacked(ops, sel, cfg, anchor, gamma, w)
    return JointPoint.from_stacked(out, ops.game) if isinstance(y, JointPoint) else out


def _pfb_step_stacked(ops, sel, cfg, anchor, gamma, w) -> np.ndarray:
    sx, sl, sv = ops.sx, ops.sl, ops.sv
    alpha = cfg.alpha
    x, lam, nu = w[sx], w[sl], w[sv]
    g = ops.grad_phi(sel, w)
    Llam = ops.Lbar @ lam

    x_new = x - cfg.rho_vec * (
        ops.F(x) + ops.AT @ lam + gamma * g[sx] + alpha * (x - anchor[sx])
    )
    np.clip(x_new, ops.lower, ops.upper, out=x_new)

    nu_new = nu - cfg.sigma_vec * (Llam + gamma * g[sv] + alpha * (nu - anchor[sv]))

    lam_new = lam + cfg.tau_vec * (
        ops.A @ (2.0 * x_new - x)
        + ops.Lbar @ (2.0 * nu_new - nu)
        - Llam
        - gamma * g[sl]
        - alpha * (lam - anchor[sl])
        - ops.b_split
    )
    np.maximum(lam_new, 0.0, out=lam_new)

    out = np.empty(ops.dim)
    out[sx], out[sl], out[sv] = x_new, lam_new, nu_new
    return out


def verify_pfb_inclusion(
    ops: SplitOperators,
    sel: SelectionSpec,
    cfg: PreconditionerConfig,
    omega_anchor,
    gamma: float,
    y,
    y_plus,
) -> float:
    """Largest violation of Phi(y - y+) - G(y) in (A + C)(y+), blockwise.

    Interior primal coordinates and strictly positive multipliers must meet the
    residual exactly; active bounds only constrain its sign; the nu block has no
    normal cone and must match C(y+) exactly.
    """
    anchor, w, wp = _stacked(omega_anchor), _stacked(y), _stacked(y_plus)
    R = cfg.phi.apply(w - wp) - ops.forward(sel, anchor, gamma, cfg.alpha, w) - ops.apply_C(wp)
    rx, rl, rv = R[ops.sx], R[ops.sl], R[ops.sv]
    xp, lp = wp[ops.sx], wp[ops.sl]

    viol = np.abs(rx).copy()
    at_lower = xp <= ops.lower
    at_upper = xp >= ops.upper
    viol[at_lower] = np.maximum(rx[at_lower], 0.0)
    viol[at_upper] = np.maximum(-rx[at_upper], 0.0)
    # a pinned coordinate (lower == upper) admits any residual
    viol[at_lower & at_upper] = 0.0
    v_x = float(viol.max(initial=0.0))

    viol_l = np.where(lp > 0.0, np.abs(rl), np.maximum(rl, 0.0))
    v_l = float(viol_l.max(initial=0.0))
    v_v = float(np.abs(rv).max(initial=0.0))
    return max(v_x, v_l, v_v)


def solve_regularized(
    ops: SplitOperators,
    sel: SelectionSpec,
    cfg: PreconditionerConfig,
    anchor,
    gamma: float,
    *,
    tol_phi: float = 1e-10,
    max_iter: int = 10**6,
) -> tuple[np.ndarray, int]:
    """Iterate the inner operator until the Phi-distance to the regularized
    solution is certifiably below tol_phi.  Bare loop, no tracing."""
    a = _stacked(anchor)
    q = cfg.sqrt_beta
    threshold = (1.0 - q) * tol_phi
    y = a.copy()
    for t in range(1, max_iter + 1):
        y_next = _pfb_step_stacked(ops, sel, cfg, a, gamma, y)
        d = cfg.phi.norm(y_next - y)
        y = y_next
        if d <= threshold:
            return y, t
    raise ResolventError(
        f"inner solve did not reach phi-tolerance {tol_phi:g} in {max_iter} iterations"
    )


def tik_operator(
    ops: SplitOperators,
    sel: SelectionSpec,
    cfg: PreconditionerConfig,
    gamma: float,
    omega,
    *,
    tol: float = 1e-10,
    max_iter: int = 10**6,
):
    """Resolvent J_{(1/alpha)(A+B+C+gamma*grad_phi)} evaluated at omega.

    This is exactly the regularized sub-problem with anchor omega, solved by the
    inner loop to Phi-distance tol.  Test-only path; small instances.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    w, _ = solve_regularized(ops, sel, cfg, _stacked(omega), gamma, tol_phi=tol, max_iter=max_iter)
    return JointPoint.from_stacked(w, ops.game) if isinstance(omega, JointPoint) else w


def hsdm_operator(
    ops: SplitOperators,
    sel: SelectionSpec,
    unit_cfg: PreconditionerConfig,
    gamma: float,
    v,
    *,
    tol: float = 1e-10,
    max_iter: int = 10**6,
):
    """J_{A+B+C} o (Id - gamma*grad_phi): one step of the auxiliary HSDM sequence.

    The resolvent is evaluated by solving the strongly monotone inclusion
    0 in (A+B+C+Id-w) with the same machinery at gamma=0, alpha=1; unit_cfg must
    therefore be built with alpha == 1.
    """
    if unit_cfg.alpha != 1.0:
        raise ValueError("hsdm_operator needs a configuration with alpha == 1")
    w = _stacked(v)
    shifted = w - gamma * ops.grad_phi(sel, w)
    out, _ = solve_regularized(ops, sel, unit_cfg, shifted, 0.0, tol_phi=tol, max_iter=max_iter)
    return JointPoint.from_stacked(out, ops.game) if isinstance(v, JointPoint) else out
