"""Render benchmark aggregate CSVs into the four standard figures.

Input files are the harness aggregates: a '#' header block that must carry the
resolved-config echo, then rows (sweep, value, cum_t, residual_mean,
phi_gap_mean).  Each figure stacks a log-scale residual panel over a linear
selection-gap panel, one curve per sweep value, legend in file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

AGGREGATE_MAGIC = "# gneselect-aggregate v1"
REQUIRED_COLUMNS = ("sweep", "value", "cum_t", "residual_mean", "phi_gap_mean")

# aggregate stem -> (figure stem, title)
FIGURES = {
    "xi": ("figure1_xi_sweep", "gamma-decay sweep (xi)"),
    "alpha": ("figure2_alpha_sweep", "anchor-weight sweep (alpha)"),
    "zeta": ("figure3_zeta_sweep", "accuracy-decay sweep (zeta)"),
    "comparison": ("figure4_hsdm_comparison", "double-layer vs HSDM-FBF"),
}


class RenderError(RuntimeError):
    pass


@dataclass
class FigureSpec:
    input_csv: Path
    output_path: Path
    title: str = ""
    log_residual: bool = True
    header: dict = field(default_factory=dict)


def load_aggregate(path):
    """Parse one aggregate CSV; refuse files without the resolved-config echo."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != AGGREGATE_MAGIC:
        raise RenderError(f"{path}: not a gneselect aggregate CSV")
    header = None
    body = 1
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("# config: "):
            header = json.loads(line[len("# config: ") :])
            body = i + 1
        elif not line.startswith("#"):
            body = i
            break
    if header is None:
        raise RenderError(f"{path}: header block lacks the resolved-config echo")
    names = tuple(lines[body].split(","))
    for col in REQUIRED_COLUMNS:
        if col not in names:
            raise RenderError(f"{path}: missing column {col!r}")
    idx = {c: names.index(c) for c in REQUIRED_COLUMNS}
    series: dict[str, list] = {}
    order: list[str] = []
    for lineno, line in enumerate(lines[body + 1 :], start=body + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(names):
            raise RenderError(f"{path}: malformed row at line {lineno}")
        try:
            cum = int(parts[idx["cum_t"]])
            res = float(parts[idx["residual_mean"]])
            gap = float(parts[idx["phi_gap_mean"]])
        except ValueError as exc:
            raise RenderError(f"{path}: malformed row at line {lineno}: {exc}") from None
        label = parts[idx["value"]]
        if label not in series:
            series[label] = []
            order.append(label)
        series[label].append((cum, res, gap))
    if not series:
        raise RenderError(f"{path}: no data rows")
    curves = [
        (label, np.array(series[label], dtype=float)) for label in order
    ]
    return header, curves


def render(spec: FigureSpec) -> Path:
    """Render one figure; deterministic for identical inputs (no timestamps)."""
    header, curves = load_aggregate(spec.input_csv)
    fig, (ax_res, ax_gap) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 6.0))
    for label, arr in curves:
        ax_res.plot(arr[:, 0], arr[:, 1], label=label)
        ax_gap.plot(arr[:, 0], arr[:, 2], label=label)
    if spec.log_residual:
        ax_res.set_yscale("log")
    ax_res.set_ylabel("KKT residual (mean)")
    ax_gap.set_ylabel("selection gap vs FBF (mean)")
    ax_gap.set_xlabel("cumulative inner iterations")
    sweep = header.get("sweep", "")
    ax_res.legend(title=sweep, fontsize="small")
    if spec.title:
        ax_res.set_title(spec.title)
    fig.tight_layout()
    spec.output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output_path, format="png", metadata={"Software": "gneplots"})
    plt.close(fig)
    return spec.output_path


def render_all(in_dir, out_dir) -> list[Path]:
    """Render every known aggregate found in in_dir; error if none is present."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    outputs = []
    for stem, (figname, title) in FIGURES.items():
        src = in_dir / f"{stem}.csv"
        if not src.exists():
            continue
        outputs.append(
            render(FigureSpec(input_csv=src, output_path=out_dir / f"{figname}.png", title=title))
        )
    if not outputs:
        raise RenderError(f"no aggregate CSVs found in {in_dir}")
    return outputs
