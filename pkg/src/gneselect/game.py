"""Generalized game model: agents, coupling constraints and the selection function.

A game couples N agents through a shared linear constraint sum_i A_i x_i <= b and
through the pseudogradient F of their costs.  Only F is represented (no algorithm
here ever evaluates an individual cost).  Local feasible sets are boxes; the
projection is the only set oracle the solvers need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

MONOTONICITY_TOL = 1e-10
FEASIBILITY_MARGIN = 1e-9
CONNECTIVITY_TOL = 1e-9


class ValidationError(RuntimeError):
    """A game failed a fatal standing-assumption check."""


def _vector(v, name, n=None):
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {a.shape[0]}")
    return a


def _matrix(mat, name):
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class AgentSpec:
    """One agent: box-constrained decision in R^dim, coupling block A_i, neighbor set."""

    index: int
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    coupling: np.ndarray
    neighbors: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lower", _vector(self.lower, "lower", self.dim))
        object.__setattr__(self, "upper", _vector(self.upper, "upper", self.dim))
        object.__setattr__(self, "coupling", _matrix(self.coupling, "coupling"))
        object.__setattr__(self, "neighbors", tuple(sorted(set(int(j) for j in self.neighbors))))
        if self.dim < 1:
            raise ValueError("agent dimension must be positive")
        if self.coupling.shape[1] != self.dim:
            raise ValueError(
                f"coupling block of agent {self.index} must have {self.dim} columns"
            )
        if np.any(self.lower > self.upper):
            raise ValueError(f"empty box for agent {self.index}: lower > upper")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("box bounds must not be NaN")
        if self.index in self.neighbors:
            raise ValueError(f"agent {self.index} lists itself as a neighbor")

    @property
    def degree(self) -> int:
        return len(self.neighbors)


@dataclass(frozen=True, eq=False)
class LinearPseudogradient:
    """F(x) = Q x + c.  Monotone iff Q + Q^T is PSD; Lipschitz constant is ||Q||_2."""

    Q: np.ndarray
    c: np.ndarray
    lipschitz: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", _matrix(self.Q, "Q"))
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise ValueError("Q must be square")
        object.__setattr__(self, "c", _vector(self.c, "c", n))
        object.__setattr__(self, "lipschitz", float(np.linalg.norm(self.Q, 2)))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ x + self.c


@dataclass(frozen=True, eq=False)
class OraclePseudogradient:
    """Opaque evaluation oracle for F with a declared Lipschitz constant."""

    fun: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fun(x), dtype=float)


Pseudogradient = Union[LinearPseudogradient, OraclePseudogradient]


@dataclass(frozen=True, eq=False)
class QuadraticSelection:
    """phi(omega) = x^T Q x + c^T x + theta*(||lambda||^2 + ||nu||^2).

    Q must be symmetric PSD and theta >= 0; the form is coercive on the dual and
    auxiliary blocks iff theta > 0.  The gradient blocks are
    (2 Q x + c, 2 theta lambda, 2 theta nu) and its Lipschitz constant is
    max(2||Q||, 2 theta).
    """

    Q: np.ndarray
    c: np.ndarray
    theta: float = 1e-3
    lipschitz_grad: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", _matrix(self.Q, "Q"))
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise ValueError("Q must be square")
        object.__setattr__(self, "c", _vector(self.c, "c", n))
        object.__setattr__(self, "theta", float(self.theta))
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if not np.allclose(self.Q, self.Q.T, rtol=0, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if n > 0 and float(np.linalg.eigvalsh((self.Q + self.Q.T) / 2.0)[0]) < -MONOTONICITY_TOL:
            raise ValueError("Q must be positive semi-definite")
        object.__setattr__(
            self, "lipschitz_grad", float(max(2.0 * np.linalg.norm(self.Q, 2), 2.0 * self.theta))
        )

    @property
    def coercive(self) -> bool:
        return self.theta > 0

    def value(self, x, lam, nu) -> float:
        return float(x @ (self.Q @ x) + self.c @ x + self.theta * (lam @ lam + nu @ nu))

    def grad_blocks(self, x, lam, nu):
        return 2.0 * (self.Q @ x) + self.c, 2.0 * self.theta * lam, 2.0 * self.theta * nu


@dataclass(frozen=True, eq=False)
class OracleSelection:
    """Opaque (value, gradient) oracle with declared gradient Lipschitz constant."""

    value_fun: Callable
    grad_fun: Callable
    lipschitz_grad: float
    coercive: bool = True

    def value(self, x, lam, nu) -> float:
        return float(self.value_fun(x, lam, nu))

    def grad_blocks(self, x, lam, nu):
        gx, gl, gv = self.grad_fun(x, lam, nu)
        return (
            np.asarray(gx, dtype=float),
            np.asarray(gl, dtype=float),
            np.asarray(gv, dtype=float),
        )


SelectionSpec = Union[QuadraticSelection, OracleSelection]


class GameInstance:
    """Immutable generalized game over an undirected communication graph.

    Parameters
    ----------
    agents : sequence of AgentSpec
        Agents in index order; the neighbor relation must be symmetric.
    b : array_like
        Right-hand side of the shared constraint sum_i A_i x_i <= b.
    pseudogradient : LinearPseudogradient or OraclePseudogradient
        The stacked partial-gradient map F.
    """

    def __init__(self, agents: Sequence[AgentSpec], b, pseudogradient: Pseudogradient):
        self.agents = tuple(agents)
        self.N = len(self.agents)
        if self.N == 0:
            raise ValueError("a game needs at least one agent")
        for pos, ag in enumerate(self.agents):
            if ag.index != pos:
                raise ValueError(f"agent at position {pos} carries index {ag.index}")
        self.b = _vector(b, "b")
        self.m = self.b.shape[0]
        for ag in self.agents:
            if ag.coupling.shape[0] != self.m:
                raise ValueError(
                    f"coupling block of agent {ag.index} has {ag.coupling.shape[0]} rows, "
                    f"expected {self.m}"
                )
            for j in ag.neighbors:
                if not 0 <= j < self.N:
                    raise ValueError(f"agent {ag.index} references unknown neighbor {j}")
                if ag.index not in self.agents[j].neighbors:
                    raise ValueError(
                        f"neighbor relation not symmetric between {ag.index} and {j}"
                    )
        self.dims = tuple(ag.dim for ag in self.agents)
        self.n = int(sum(self.dims))
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.dims)]))
        self.pseudogradient = pseudogradient
        if isinstance(pseudogradient, LinearPseudogradient):
            if pseudogradient.Q.shape[0] != self.n:
                raise ValueError("pseudogradient dimension does not match the game")
        self.lower_stack = np.concatenate([ag.lower for ag in self.agents])
        self.upper_stack = np.concatenate([ag.upper for ag in self.agents])
        adj = np.zeros((self.N, self.N))
        for ag in self.agents:
            adj[ag.index, list(ag.neighbors)] = 1.0
        self.adjacency = adj
        self.degrees = adj.sum(axis=1)
        self.max_degree = int(self.degrees.max()) if self.N else 0
        self.laplacian = np.diag(self.degrees) - adj

    @property
    def L_F(self) -> float:
        return float(self.pseudogradient.lipschitz)

    def agent_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])

    def box_center(self) -> np.ndarray:
        """Componentwise box center; 0 (or the finite bound) where a side is infinite."""
        lo, up = self.lower_stack, self.upper_stack
        center = np.where(np.isfinite(lo) & np.isfinite(up), (lo + up) / 2.0, 0.0)
        center = np.where(np.isfinite(lo) & ~np.isfinite(up), lo + 1.0, center)
        center = np.where(~np.isfinite(lo) & np.isfinite(up), up - 1.0, center)
        return center


@dataclass(eq=False)
class JointPoint:
    """Stacked variable (x, lambda, nu): primal decisions, per-agent dual estimates
    and auxiliary consensus variables."""

    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        if self.lam.shape != self.nu.shape:
            raise ValueError("lambda and nu blocks must have equal length")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.nu])

    @classmethod
    def from_stacked(cls, w: np.ndarray, game: GameInstance) -> "JointPoint":
        n, Nm = game.n, game.N * game.m
        w = np.asarray(w, dtype=float)
        if w.shape != (n + 2 * Nm,):
            raise ValueError(f"stacked point must have length {n + 2 * Nm}")
        return cls(w[:n].copy(), w[n : n + Nm].copy(), w[n + Nm :].copy())

    @classmethod
    def zeros(cls, game: GameInstance) -> "JointPoint":
        Nm = game.N * game.m
        return cls(np.zeros(game.n), np.zeros(Nm), np.zeros(Nm))

    def copy(self) -> "JointPoint":
        return JointPoint(self.x.copy(), self.lam.copy(), self.nu.copy())


def initial_point(game: GameInstance) -> JointPoint:
    """Default start: box centers, zero dual estimates, zero auxiliary variables."""
    Nm = game.N * game.m
    return JointPoint(game.box_center(), np.zeros(Nm), np.zeros(Nm))


def pseudogradient(game: GameInstance, x) -> np.ndarray:
    """Evaluate F at a stacked primal point."""
    x = _vector(x, "x", game.n)
    return game.pseudogradient(x)


def selection_value(spec: SelectionSpec, point: JointPoint) -> float:
    return spec.value(point.x, point.lam, point.nu)


def selection_grad(spec: SelectionSpec, point: JointPoint) -> JointPoint:
    gx, gl, gv = spec.grad_blocks(point.x, point.lam, point.nu)
    return JointPoint(gx, gl, gv)


# -- validation ---------------------------------------------------------------

@dataclass
class Check:
    name: str
    status: str  # "pass" | "fail" | "unverified"
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status == "fail"]

    def summary(self) -> str:
        return "; ".join(f"{c.name}: {c.status}" for c in self.checks)


def _coupling_row_minimum(game: GameInstance) -> np.ndarray:
    """Exact componentwise minimum of sum_i A_i x_i over the boxes (interval arithmetic)."""
    lo = np.zeros(game.m)
    for ag in game.agents:
        A = ag.coupling
        low = np.where(A > 0, A * ag.lower, A * ag.upper)
        low = np.where(A == 0, 0.0, low)  # kills 0 * inf
        lo += low.sum(axis=1)
    return lo


def _feasibility_search(game: GameInstance, x0: np.ndarray, sweeps: int = 10) -> np.ndarray:
    """Cyclic coordinate descent on the worst coupling violation, on the boxes."""
    A = np.hstack([ag.coupling for ag in game.agents])
    lo, up = game.lower_stack, game.upper_stack
    x = np.clip(x0, np.where(np.isfinite(lo), lo, -1e6), np.where(np.isfinite(up), up, 1e6))
    for _ in range(sweeps):
        slack = A @ x - game.b
        if slack.max() < -FEASIBILITY_MARGIN:
            break
        for c in range(game.n):
            span_lo = lo[c] if np.isfinite(lo[c]) else x[c] - 10.0
            span_up = up[c] if np.isfinite(up[c]) else x[c] + 10.0
            grid = np.linspace(span_lo, span_up, 33)
            base = A @ x - game.b - A[:, c] * x[c]
            best = int(np.argmin((base[:, None] + np.outer(A[:, c], grid)).max(axis=0)))
            x[c] = grid[best]
    return x


def validate_game(game: GameInstance, n_samples: int = 200, rng_seed: int = 0) -> ValidationReport:
    """Check the numerically checkable standing assumptions.

    Covers graph connectivity, monotonicity of F, strict feasibility of the
    coupled constraint (Slater surrogate) and finiteness of the box bounds.
    A "fail" is fatal for the solver entry points; "unverified" is not.
    """
    checks: list[Check] = []

    if game.N == 1:
        checks.append(Check("connectivity", "pass", "single agent"))
    else:
        fiedler = float(np.linalg.eigvalsh(game.laplacian)[1])
        ok = fiedler > CONNECTIVITY_TOL
        checks.append(
            Check("connectivity", "pass" if ok else "fail", f"fiedler={fiedler:.3e}")
        )

    pg = game.pseudogradient
    if isinstance(pg, LinearPseudogradient):
        sym_min = float(np.linalg.eigvalsh((pg.Q + pg.Q.T) / 2.0)[0])
        ok = sym_min >= -MONOTONICITY_TOL
        checks.append(
            Check("monotonicity", "pass" if ok else "fail", f"lambda_min(sym Q_F)={sym_min:.3e}")
        )
    else:
        rng = np.random.default_rng(rng_seed)
        center = game.box_center()
        width = np.where(
            np.isfinite(game.upper_stack - game.lower_stack),
            (game.upper_stack - game.lower_stack) / 2.0,
            1.0,
        )
        worst = 0.0
        for _ in range(n_samples):
            u = center + width * rng.uniform(-1, 1, game.n)
            v = center + width * rng.uniform(-1, 1, game.n)
            d = u - v
            dsq = float(d @ d)
            if dsq > 0:
                worst = min(worst, float((pg(u) - pg(v)) @ d) / dsq)
        ok = worst >= -MONOTONICITY_TOL
        checks.append(
            Check("monotonicity", "pass" if ok else "fail", f"sampled modulus >= {worst:.3e}")
        )

    row_min = _coupling_row_minimum(game)
    if np.any(row_min >= game.b - FEASIBILITY_MARGIN):
        j = int(np.argmax(row_min - game.b))
        checks.append(
            Check(
                "strict_feasibility",
                "fail",
                f"row {j}: min over boxes {row_min[j]:.6g} >= b[{j}]={game.b[j]:.6g}",
            )
        )
    else:
        A = np.hstack([ag.coupling for ag in game.agents])
        center = game.box_center()
        slack = A @ center - game.b
        if slack.max() < -FEASIBILITY_MARGIN:
            checks.append(Check("strict_feasibility", "pass", "box center strictly feasible"))
        else:
            x = _feasibility_search(game, center)
            slack = A @ x - game.b
            if slack.max() < -FEASIBILITY_MARGIN:
                checks.append(Check("strict_feasibility", "pass", "found by coordinate search"))
            else:
                checks.append(
                    Check("strict_feasibility", "unverified", "no strictly feasible point found")
                )

    infinite = [
        ag.index
        for ag in game.agents
        if not (np.all(np.isfinite(ag.lower)) and np.all(np.isfinite(ag.upper)))
    ]
    checks.append(
        Check(
            "bound_finiteness",
            "pass" if not infinite else "fail",
            "" if not infinite else f"agents with infinite bounds: {infinite}",
        )
    )
    return ValidationReport(checks)


def require_valid(game: GameInstance) -> ValidationReport:
    """Validate and raise ValidationError on any fatal check."""
    report = validate_game(game)
    if not report.ok:
        raise ValidationError(
            "; ".join(f"{c.name} check failed ({c.detail})" for c in report.failures())
        )
    return report


# -- serialization ------------------------------------------------------------

def game_to_obj(game: GameInstance, selection: SelectionSpec | None = None) -> dict:
    """JSON-ready document; matrices row-major, IEEE doubles, exact round-trip."""
    pg = game.pseudogradient
    if not isinstance(pg, LinearPseudogradient):
        raise ValueError("only linear pseudogradients are serializable")
    obj = {
        "agents": [
            {
                "dim": ag.dim,
                "lower": ag.lower.tolist(),
                "upper": ag.upper.tolist(),
                "A_rows": ag.coupling.tolist(),
                "neighbors": list(ag.neighbors),
            }
            for ag in game.agents
        ],
        "b": game.b.tolist(),
        "Q_F": pg.Q.tolist(),
        "c_F": pg.c.tolist(),
    }
    if selection is not None:
        if not isinstance(selection, QuadraticSelection):
            raise ValueError("only quadratic selection functions are serializable")
        obj["Q_phi"] = selection.Q.tolist()
        obj["c_phi"] = selection.c.tolist()
        obj["theta"] = selection.theta
    return obj


def game_from_obj(obj: dict) -> tuple[GameInstance, SelectionSpec | None]:
    agents = [
        AgentSpec(
            index=i,
            dim=int(spec["dim"]),
            lower=spec["lower"],
            upper=spec["upper"],
            coupling=spec["A_rows"],
            neighbors=spec.get("neighbors", ()),
        )
        for i, spec in enumerate(obj["agents"])
    ]
    pg = LinearPseudogradient(Q=obj["Q_F"], c=obj["c_F"])
    game = GameInstance(agents, obj["b"], pg)
    selection = None
    if "Q_phi" in obj:
        selection = QuadraticSelection(
            Q=obj["Q_phi"], c=obj["c_phi"], theta=obj.get("theta", 1e-3)
        )
    return game, selection


def game_to_json(game: GameInstance, selection: SelectionSpec | None = None) -> str:
    return json.dumps(game_to_obj(game, selection))


def game_from_json(text: str) -> tuple[GameInstance, SelectionSpec | None]:
    return game_from_obj(json.loads(text))


def save_game(path, game: GameInstance, selection: SelectionSpec | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(game_to_json(game, selection))


def load_game(path) -> tuple[GameInstance, SelectionSpec | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return game_from_json(fh.read())
