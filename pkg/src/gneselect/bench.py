"""Benchmark harness: random desk-scale instances, parameter sweeps over
(xi, alpha, zeta), the HSDM comparison, and the CSV artifacts behind the four
figures.

Instances follow the reference experiment: N agents with 5-dimensional box
constraints ||x_i||_inf <= 1, identity coupling blocks, b = 2*1, a ring
communication graph with floor(N/2) random chords, Q_F singular PSD
(Q_F = R^T R / n), c_F unit norm, Q_phi = S^T S / n, theta = 1e-3.  All draws
come from a named platform-independent generator (numpy PCG64) so every run is
reproducible bit-for-bit from (seed, config).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import HsdmParams, fbf_solve, hsdm_fbf_solve
from .game import (
    AgentSpec,
    GameInstance,
    LinearPseudogradient,
    QuadraticSelection,
    game_to_json,
    require_valid,
    selection_value,
)
from .precond import make_config
from .tikhonov import ScheduleParams, gamma_schedule, solve
from .traces import read_trace_csv, write_aggregate_csv

RNG_NAME = "numpy-PCG64(default_rng)"

SWEEPS = ("xi", "alpha", "zeta")
METHOD_TIK = "tikhonov_pfb"
METHOD_HSDM = "hsdm_fbf"


@dataclass
class ExperimentConfig:
    """Protocol behind the random-instance experiments."""

    n_instances: int = 100
    n_agents: int = 10
    agent_dim: int = 5
    n_constraints: int = 5
    extra_edges: int | None = None  # defaults to n_agents // 2
    theta: float = 1e-3
    xi_values: tuple = (0.4, 0.6, 0.8)
    alpha_values: tuple = (0.5, 1.0, 2.0)
    zeta_values: tuple = (1.0, 2.0, 3.0)
    xi: float = 0.6
    zeta: float = 2.0
    alpha: float = 1.0
    gamma0: float = 1e-3
    hsdm_gamma0: float = 0.3
    hsdm_eta: float = 0.6
    budget: int = 20000
    seed: int = 0
    trace_stride: int = 50
    stop_rule: str = "conservative"
    fbf_tol: float = 1e-6
    jobs: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        for name in ("xi_values", "alpha_values", "zeta_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if any(v <= 0 for v in vals):
                raise ValueError(f"{name} must be positive")
            setattr(self, name, vals)
        if self.extra_edges is None:
            self.extra_edges = self.n_agents // 2
        if self.budget % self.trace_stride != 0:
            raise ValueError("trace_stride must divide the budget")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.n_instances)]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def meta(self) -> dict:
        d = dataclasses.asdict(self)
        d.update(rng=RNG_NAME, qf_scale="RtR/n", qphi_scale="StS/n")
        return d


def generate_instance(seed: int, cfg: ExperimentConfig) -> tuple[GameInstance, QuadraticSelection]:
    """Deterministic random instance for one seed.

    Q_F = R^T R / n with R an (n - corank) x n standard-normal matrix,
    corank = max(1, n // 10), so Q_F is singular and positive semi-definite.
    Requires agent_dim == n_constraints because the coupling blocks are
    identities.
    """
    N, ni, m = cfg.n_agents, cfg.agent_dim, cfg.n_constraints
    if ni != m:
        raise ValueError("identity coupling blocks require agent_dim == n_constraints")
    n = N * ni
    rng = np.random.default_rng(seed)
    corank = max(1, n // 10)
    R = rng.standard_normal((n - corank, n))
    Q_F = R.T @ R / n
    c_F = rng.standard_normal(n)
    c_F /= np.linalg.norm(c_F)
    S = rng.standard_normal((n, n))
    Q_phi = S.T @ S / n
    c_phi = rng.standard_normal(n)

    neighbors = {i: set() for i in range(N)}
    if N > 1:
        for i in range(N):
            neighbors[i].update({(i - 1) % N, (i + 1) % N})
        candidates = [
            (i, j)
            for i in range(N)
            for j in range(i + 1, N)
            if j not in neighbors[i]
        ]
        extra = min(cfg.extra_edges, len(candidates))
        if extra > 0:
            for idx in rng.choice(len(candidates), size=extra, replace=False):
                i, j = candidates[int(idx)]
                neighbors[i].add(j)
                neighbors[j].add(i)

    agents = [
        AgentSpec(
            index=i,
            dim=ni,
            lower=-np.ones(ni),
            upper=np.ones(ni),
            coupling=np.eye(m, ni),
            neighbors=tuple(sorted(neighbors[i])),
        )
        for i in range(N)
    ]
    game = GameInstance(agents, 2.0 * np.ones(m), LinearPseudogradient(Q=Q_F, c=c_F))
    require_valid(game)  # connectivity, monotonicity, strict feasibility
    sel = QuadraticSelection(Q=Q_phi, c=c_phi, theta=cfg.theta)
    return game, sel


def instance_hash(game: GameInstance, sel: QuadraticSelection) -> str:
    return hashlib.sha1(game_to_json(game, sel).encode()).hexdigest()[:16]


# -- single runs ----------------------------------------------------------------

def _run_header(cfg: ExperimentConfig, seed, game, sel, extra: dict) -> dict:
    h = cfg.meta()
    h.update(seed=seed, instance_hash=instance_hash(game, sel))
    h.update(extra)
    return h


def _fbf_task(args) -> tuple[int, float, float]:
    cfg, seed = args
    game, sel = generate_instance(seed, cfg)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = fbf_solve(
            game,
            tol=cfg.fbf_tol,
            max_iter=cfg.budget,
            selection=sel,
            trace_stride=cfg.trace_stride,
            validate=False,
        )
    return seed, selection_value(sel, res.omega), res.final_residual


def _tikhonov_task(args) -> tuple:
    cfg, sweep, value, seed, phi_fbf, out_path = args
    try:
        game, sel = generate_instance(seed, cfg)
        xi, zeta, alpha = cfg.xi, cfg.zeta, cfg.alpha
        if sweep == "xi":
            xi = value
        elif sweep == "zeta":
            zeta = value
        elif sweep == "alpha":
            alpha = value
        params = ScheduleParams(
            gamma0=cfg.gamma0, xi=xi, zeta=zeta, max_outer=10**9, max_inner=10**6
        )
        pcfg = make_config(game, sel, alpha=alpha, gamma_bar=gamma_schedule(params, 1))
        result = solve(
            game,
            sel,
            params,
            cfg=pcfg,
            stop_rule=cfg.stop_rule,
            budget=cfg.budget,
            trace_stride=cfg.trace_stride,
            validate=False,
        )
        header = _run_header(
            cfg,
            seed,
            game,
            sel,
            {
                "method": METHOD_TIK,
                "sweep": sweep,
                "value": value,
                "xi": xi,
                "zeta": zeta,
                "alpha": alpha,
                "phi_fbf": phi_fbf,
                "outer_iterations": result.outer_iterations,
                "cumulative_inner": result.cumulative_inner,
                "dstep_norm": "phi",
            },
        )
        # the preconditioner echo is part of the reproducibility contract
        header.update(pcfg.header_dict())
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        result.trace.to_csv(out_path, header)
        return (sweep, value, seed, "ok", out_path, "")
    except Exception as exc:  # runs are independent; record and continue
        return (sweep, value, seed, "failed", out_path, f"{exc!r}")


def _hsdm_task(args) -> tuple:
    cfg, seed, phi_fbf, out_path = args
    try:
        game, sel = generate_instance(seed, cfg)
        params = HsdmParams(gamma0=cfg.hsdm_gamma0, eta=cfg.hsdm_eta, max_iter=cfg.budget)
        result = hsdm_fbf_solve(
            game, sel, params, trace_stride=cfg.trace_stride, validate=False
        )
        header = _run_header(
            cfg,
            seed,
            game,
            sel,
            {
                "method": METHOD_HSDM,
                "sweep": "method",
                "value": METHOD_HSDM,
                "phi_fbf": phi_fbf,
                "hsdm_gamma0": cfg.hsdm_gamma0,
                "hsdm_eta": cfg.hsdm_eta,
                "fbf_step": result.step,
                "dstep_norm": "euclidean",
            },
        )
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        result.trace.to_csv(out_path, header)
        return ("method", METHOD_HSDM, seed, "ok", out_path, "")
    except Exception as exc:
        return ("method", METHOD_HSDM, seed, "failed", out_path, f"{exc!r}")


def _pool_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _phi_fbf_all(cfg: ExperimentConfig) -> dict[int, float]:
    results = _pool_map(_fbf_task, [(cfg, s) for s in cfg.seeds], cfg.jobs)
    return {seed: phi for seed, phi, _ in results}


def _grid_from_trace(cols: dict, stride: int, budget: int):
    cum = cols["cum_t"].astype(int)
    keep = (cum % stride == 0) | (cum == budget)
    return cum[keep], cols["residual"][keep], cols["phi"][keep]


def _aggregate_runs(records, cfg: ExperimentConfig, label_of):
    """Mean residual and phi-gap curves over seeds, recomputed from the CSVs."""
    by_label: dict = {}
    for rec in records:
        sweep, value, seed, status, path, _ = rec
        if status != "ok":
            continue
        header, cols = read_trace_csv(path)
        cum, res, phi = _grid_from_trace(cols, cfg.trace_stride, cfg.budget)
        by_label.setdefault(label_of(rec), []).append((cum, res, phi - header["phi_fbf"]))
    rows = []
    for label in sorted(by_label, key=str):
        runs = by_label[label]
        grid = runs[0][0]
        for cum, _, _ in runs[1:]:
            if not np.array_equal(cum, grid):
                raise RuntimeError("trace grids differ across seeds; cannot aggregate")
        res_mean = np.mean([r for _, r, _ in runs], axis=0)
        gap_mean = np.mean([g for _, _, g in runs], axis=0)
        rows.extend(
            (label[0], label[1], int(c), r, g)
            for c, r, g in zip(grid, res_mean, gap_mean)
        )
    return rows


def _write_index(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sweep,value,seed,status,path,error\n")
        for sweep, value, seed, status, p, err in records:
            fh.write(f"{sweep},{value},{seed},{status},{p},{json.dumps(err)}\n")


def run_sweep(cfg: ExperimentConfig, out_dir, sweep: str, jobs: int | None = None) -> Path:
    """Run one parameter sweep; write per-run CSVs and the aggregate mean curves.

    Layout: <out>/runs/<sweep>/<value>/<seed>.csv and <out>/aggregate/<sweep>.csv.
    Individual run failures are recorded in <out>/runs/<sweep>/index.csv, not fatal.
    """
    if sweep not in SWEEPS:
        raise ValueError(f"sweep must be one of {SWEEPS}")
    if jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=jobs)
    out = Path(out_dir)
    values = {"xi": cfg.xi_values, "alpha": cfg.alpha_values, "zeta": cfg.zeta_values}[sweep]
    phi_fbf = _phi_fbf_all(cfg)
    tasks = [
        (cfg, sweep, value, seed, phi_fbf[seed], str(out / "runs" / sweep / str(value) / f"{seed}.csv"))
        for value in values
        for seed in cfg.seeds
    ]
    records = _pool_map(_tikhonov_task, tasks, cfg.jobs)
    _write_index(out.joinpath("runs", sweep, "index.csv"), records)
    rows = _aggregate_runs(records, cfg, label_of=lambda rec: (sweep, rec[1]))
    agg_dir = out / "aggregate"
    agg_dir.mkdir(parents=True, exist_ok=True)
    header = cfg.meta()
    header.update(sweep=sweep, values=list(values), n_failed=sum(r[3] != "ok" for r in records))
    agg_path = agg_dir / f"{sweep}.csv"
    write_aggregate_csv(agg_path, header, rows)
    return agg_path


def run_comparison(cfg: ExperimentConfig, out_dir, jobs: int | None = None) -> Path:
    """Double-layer solver vs HSDM-FBF on the same instances and budget."""
    if jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=jobs)
    out = Path(out_dir)
    phi_fbf = _phi_fbf_all(cfg)
    tik_tasks = [
        (cfg, "method", METHOD_TIK, seed, phi_fbf[seed],
         str(out / "runs" / "comparison" / METHOD_TIK / f"{seed}.csv"))
        for seed in cfg.seeds
    ]
    hsdm_tasks = [
        (cfg, seed, phi_fbf[seed], str(out / "runs" / "comparison" / METHOD_HSDM / f"{seed}.csv"))
        for seed in cfg.seeds
    ]
    records = _pool_map(_tikhonov_task, tik_tasks, cfg.jobs)
    records += _pool_map(_hsdm_task, hsdm_tasks, cfg.jobs)
    _write_index(out.joinpath("runs", "comparison", "index.csv"), records)
    rows = _aggregate_runs(records, cfg, label_of=lambda rec: ("method", rec[1]))
    agg_dir = out / "aggregate"
    agg_dir.mkdir(parents=True, exist_ok=True)
    header = cfg.meta()
    header.update(sweep="method", values=[METHOD_TIK, METHOD_HSDM],
                  n_failed=sum(r[3] != "ok" for r in records))
    agg_path = agg_dir / "comparison.csv"
    write_aggregate_csv(agg_path, header, rows)
    return agg_path


def final_means(agg_rows) -> dict:
    """Last point of each mean curve: value -> (residual_mean, phi_gap_mean)."""
    out: dict = {}
    for row in agg_rows:
        key = row["value"]
        cur = out.get(key)
        if cur is None or row["cum_t"] >= cur[0]:
            out[key] = (row["cum_t"], row["residual_mean"], row["phi_gap_mean"])
    return {k: (r, g) for k, (_, r, g) in out.items()}
