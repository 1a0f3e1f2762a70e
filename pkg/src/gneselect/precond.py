"""Step sizes and the preconditioning matrix of the inner splitting loop.

The inner fixed-point iteration is contractive in the norm induced by
Phi = Psi + K, where Psi stacks the inverse step sizes and K carries the
coupling blocks (-A^T, -A, -Lbar).  Admissible step sizes come from per-agent
Gershgorin radii and a margin delta; the contraction constant is
beta = 1 + L_G^2/delta^2 - 2*alpha/||Phi||, a squared-norm factor, so the
per-step norm contraction is sqrt(beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import GameInstance, SelectionSpec


class ConfigurationError(RuntimeError):
    """Step-size or preconditioner configuration is inadmissible."""


def compute_radii(game: GameInstance):
    """Per-agent radii (r_x, r_lambda, r_nu).

    r_x[i] is the largest per-decision-coordinate absolute sum of A_i (column
    sums over the m constraint rows), r_lambda[i] adds 2*deg(i) to it and
    r_nu[i] = 2*deg(i).
    """
    rx = np.array([np.abs(ag.coupling).sum(axis=0).max(initial=0.0) for ag in game.agents])
    deg = np.array([float(ag.degree) for ag in game.agents])
    rl = rx + 2.0 * deg
    rv = 2.0 * deg
    return rx, rl, rv


def compute_L_G(game: GameInstance, selection: SelectionSpec, gamma_bar: float, alpha: float) -> float:
    """Lipschitz bound of the regularized forward operator:
    max(L_F, 2*maxdeg) + gamma_bar*L_gradphi + alpha."""
    if gamma_bar < 0 or alpha <= 0:
        raise ConfigurationError("gamma_bar must be >= 0 and alpha > 0")
    return float(
        max(game.L_F, 2.0 * game.max_degree) + gamma_bar * selection.lipschitz_grad + alpha
    )


def choose_stepsizes(radii, delta: float, policy: str = "midpoint"):
    """Pick (rho, tau, sigma) inside their admissible intervals.

    Each interval is [(2*delta - r)^-1, (delta + r)^-1]; nonempty when delta > 2r.
    """
    rx, rl, rv = (np.asarray(r, dtype=float) for r in radii)
    r = max(rx.max(), rl.max(), rv.max())
    if delta <= 2.0 * r:
        raise ConfigurationError(f"delta={delta} must exceed 2*r={2 * r}")

    def pick(rad):
        low = 1.0 / (2.0 * delta - rad)
        high = 1.0 / (delta + rad)
        assert np.all(low <= high)
        if policy == "midpoint":
            return (low + high) / 2.0
        if policy == "lower":
            return low
        if policy == "upper":
            return high
        raise ValueError(f"unknown step-size policy {policy!r}")

    return pick(rx), pick(rl), pick(rv)


class PhiOperator:
    """Symmetric positive-definite preconditioner, applied matrix-free.

    Exposes apply, <z, Phi z'>, the induced norm and a power-iteration spectral
    norm; materialize() is available for modest sizes (tests, certification).
    """

    _MATERIALIZE_LIMIT = 4000

    def __init__(self, game: GameInstance, rho, tau, sigma):
        n, N, m = game.n, game.N, game.m
        self.n, self.Nm = n, N * m
        self.dim = n + 2 * N * m
        self.psi = np.concatenate(
            [
                np.repeat(1.0 / np.asarray(rho, dtype=float), game.dims),
                np.repeat(1.0 / np.asarray(tau, dtype=float), m),
                np.repeat(1.0 / np.asarray(sigma, dtype=float), m),
            ]
        )
        # coupling blocks; dense at desk scale, sparse beyond
        from scipy import sparse

        A_blocks = [ag.coupling for ag in game.agents]
        if self.dim <= self._MATERIALIZE_LIMIT:
            A = np.zeros((N * m, n))
            for i, Ai in enumerate(A_blocks):
                A[i * m : (i + 1) * m, game.agent_slice(i)] = Ai
            self.A = A
            self.AT = A.T.copy()
            self.Lbar = np.kron(game.laplacian, np.eye(m))
        else:
            self.A = sparse.block_diag(A_blocks, format="csr")
            self.AT = self.A.T.tocsr()
            self.Lbar = sparse.kron(sparse.csr_matrix(game.laplacian), sparse.eye(m), format="csr")
        # Gershgorin row bounds: off-diagonal mass per row of the coupling part
        def _abs_rowsum(M):
            if isinstance(M, np.ndarray):
                return np.abs(M).sum(axis=1)
            return np.asarray(abs(M).sum(axis=1)).ravel()

        off = np.concatenate(
            [
                _abs_rowsum(self.AT),
                _abs_rowsum(self.A) + _abs_rowsum(self.Lbar),
                _abs_rowsum(self.Lbar),
            ]
        )
        self.gershgorin_min = float((self.psi - off).min())
        self.gershgorin_max = float((self.psi + off).max())
        self._spectral_norm = None
        self._min_eig = None

    def apply(self, z: np.ndarray) -> np.ndarray:
        n, Nm = self.n, self.Nm
        zx, zl, zv = z[:n], z[n : n + Nm], z[n + Nm :]
        out = self.psi * z
        out[:n] -= self.AT @ zl
        out[n : n + Nm] -= self.A @ zx + self.Lbar @ zv
        out[n + Nm :] -= self.Lbar @ zl
        return out

    def inner(self, z: np.ndarray, w: np.ndarray) -> float:
        return float(z @ self.apply(w))

    def norm(self, z: np.ndarray) -> float:
        return math.sqrt(max(self.inner(z, z), 0.0))

    def _power_extreme(self, shift: float, sign: float, max_iter: int, tol: float) -> float:
        """Rayleigh power iteration on sign*(Phi - shift*I); deterministic start."""
        rng = np.random.default_rng(0x5EED)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            w = sign * (self.apply(v) - shift * v)
            new = float(v @ w)
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                return shift
            v = w / nw
            if est != 0.0 and abs(new - est) <= tol * abs(new):
                est = new
                break
            est = new
        return shift + sign * est

    def spectral_norm(self, max_iter: int = 200, tol: float = 1e-8) -> float:
        """Largest eigenvalue by power iteration, shifted by the Gershgorin lower
        bound so clustered leading eigenvalues still separate."""
        if self._spectral_norm is None:
            shift = max(self.gershgorin_min, 0.0)
            self._spectral_norm = self._power_extreme(shift, +1.0, max_iter, tol)
        return self._spectral_norm

    def min_eig_estimate(self, max_iter: int = 200, tol: float = 1e-8) -> float:
        """Smallest eigenvalue by power iteration from the Gershgorin upper bound."""
        if self._min_eig is None:
            self._min_eig = self._power_extreme(self.gershgorin_max, -1.0, max_iter, tol)
        return self._min_eig

    def materialize(self) -> np.ndarray:
        if self.dim > self._MATERIALIZE_LIMIT:
            raise ValueError("refusing to materialize a large preconditioner")
        eye = np.eye(self.dim)
        cols = [self.apply(eye[:, j]) for j in range(self.dim)]
        return np.column_stack(cols)


@dataclass(eq=False)
class PreconditionerConfig:
    """Resolved inner-loop configuration: radii, delta, step sizes, Phi and beta."""

    alpha: float
    gamma_bar: float
    L_G: float
    radii_x: np.ndarray
    radii_lambda: np.ndarray
    radii_nu: np.ndarray
    delta: float
    rho: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    phi: PhiOperator
    phi_norm: float
    beta: float
    rho_vec: np.ndarray = field(repr=False, default=None)
    tau_vec: np.ndarray = field(repr=False, default=None)
    sigma_vec: np.ndarray = field(repr=False, default=None)

    @property
    def sqrt_beta(self) -> float:
        return math.sqrt(self.beta)

    def contraction_factor(self, stop_rule: str) -> float:
        if stop_rule == "conservative":
            return self.sqrt_beta
        if stop_rule == "paper":
            return self.beta
        raise ValueError(f"unknown stop rule {stop_rule!r}")

    def header_dict(self) -> dict:
        """Resolved values echoed into every run's CSV header block."""
        return {
            "alpha": self.alpha,
            "gamma_bar": self.gamma_bar,
            "L_G": self.L_G,
            "delta": self.delta,
            "rho": self.rho.tolist(),
            "tau": self.tau.tolist(),
            "sigma": self.sigma.tolist(),
            "beta": self.beta,
            "phi_norm": self.phi_norm,
        }


def compute_beta(L_G: float, delta: float, alpha: float, phi_norm: float) -> float:
    """beta = 1 + L_G^2/delta^2 - 2*alpha/||Phi||; must land in (0, 1)."""
    beta = 1.0 + (L_G / delta) ** 2 - 2.0 * alpha / phi_norm
    if not 0.0 < beta < 1.0:
        raise ConfigurationError(
            f"contraction constant beta={beta:.6g} outside (0,1) "
            f"(L_G={L_G:.6g}, delta={delta:.6g}, alpha={alpha:.6g}, phi_norm={phi_norm:.6g})"
        )
    return beta


def build_phi(game: GameInstance, rho, tau, sigma) -> PhiOperator:
    return PhiOperator(game, rho, tau, sigma)


def make_config(
    game: GameInstance,
    selection: SelectionSpec,
    alpha: float,
    gamma_bar: float,
    *,
    delta: float | None = None,
    delta_margin: float = 1.01,
    policy: str = "midpoint",
) -> PreconditionerConfig:
    """Resolve the full inner-loop configuration for one (alpha, gamma_bar) pair.

    delta defaults to delta_margin * max(L_G^2/alpha, 2*r); a custom delta must
    still satisfy the strict bound.
    """
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")
    L_G = compute_L_G(game, selection, gamma_bar, alpha)
    rx, rl, rv = compute_radii(game)
    r = float(max(rx.max(), rl.max(), rv.max()))
    bound = max(L_G**2 / alpha, 2.0 * r)
    if delta is None:
        delta = delta_margin * bound
        if delta <= bound:  # degenerate margin
            raise ConfigurationError("delta_margin must exceed 1")
    elif delta <= bound:
        raise ConfigurationError(f"delta={delta} must exceed max(L_G^2/alpha, 2r)={bound}")
    rho, tau, sigma = choose_stepsizes((rx, rl, rv), delta, policy)
    phi = build_phi(game, rho, tau, sigma)
    phi_norm = phi.spectral_norm()
    beta = compute_beta(L_G, delta, alpha, phi_norm)
    return PreconditionerConfig(
        alpha=float(alpha),
        gamma_bar=float(gamma_bar),
        L_G=L_G,
        radii_x=rx,
        radii_lambda=rl,
        radii_nu=rv,
        delta=float(delta),
        rho=np.asarray(rho, dtype=float),
        tau=np.asarray(tau, dtype=float),
        sigma=np.asarray(sigma, dtype=float),
        phi=phi,
        phi_norm=phi_norm,
        beta=beta,
        rho_vec=np.repeat(rho, game.dims),
        tau_vec=np.repeat(tau, game.m),
        sigma_vec=np.repeat(sigma, game.m),
    )
