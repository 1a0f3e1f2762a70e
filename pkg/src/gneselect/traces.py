"""Trace containers and the CSV interchange format.

Every CSV starts with a header block of '#' lines carrying the resolved run
configuration as one JSON object, then a column-name row, then data rows with
floating-point values printed at 17 significant digits (exact IEEE round-trip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TRACE_MAGIC = "# gneselect-trace v1"
AGGREGATE_MAGIC = "# gneselect-aggregate v1"
TRACE_COLUMNS = ("k", "t", "cum_t", "residual", "phi", "dstep_phi_norm", "gamma_k", "eps_k", "wall_s")
AGGREGATE_COLUMNS = ("sweep", "value", "cum_t", "residual_mean", "phi_gap_mean")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class SolverTrace:
    """Per-iteration rows of a run: (k, t, cum_t, residual, phi, |dy|_Phi, gamma, eps, wall)."""

    rows: list[tuple] = field(default_factory=list)

    def append(self, k, t, cum_t, residual, phi, dstep, gamma, eps, wall):
        self.rows.append((int(k), int(t), int(cum_t), residual, phi, dstep, gamma, eps, wall))

    def column(self, name: str) -> np.ndarray:
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def last(self, name: str):
        i = TRACE_COLUMNS.index(name)
        return self.rows[-1][i] if self.rows else None

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path, header: dict) -> None:
        write_trace_csv(path, header, self.rows)


def write_trace_csv(path, header: dict, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRACE_MAGIC + "\n")
        fh.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_header(lines, magic, path):
    if not lines or lines[0].strip() != magic:
        raise ValueError(f"{path}: missing '{magic}' header")
    header = None
    body_start = 1
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("# config: "):
            header = json.loads(line[len("# config: ") :])
            body_start = i + 1
        elif not line.startswith("#"):
            body_start = i
            break
    if header is None:
        raise ValueError(f"{path}: header block lacks the resolved-config echo")
    return header, body_start


def read_trace_csv(path) -> tuple[dict, dict]:
    """Return (header dict, column-name -> float array)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header, start = _read_header(lines, TRACE_MAGIC, path)
    names = tuple(lines[start].split(","))
    if names != TRACE_COLUMNS:
        raise ValueError(f"{path}: unexpected trace columns {names}")
    data = [line.split(",") for line in lines[start + 1 :] if line]
    cols = {
        name: np.array([row[j] for row in data], dtype=float)
        for j, name in enumerate(names)
    }
    return header, cols


def write_aggregate_csv(path, header: dict, rows) -> None:
    """rows: iterables of (sweep, value, cum_t, residual_mean, phi_gap_mean)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(AGGREGATE_MAGIC + "\n")
        fh.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for sweep, value, cum_t, res, gap in rows:
            fh.write(f"{sweep},{value},{int(cum_t)},{_fmt(res)},{_fmt(gap)}\n")


def read_aggregate_csv(path) -> tuple[dict, list[dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header, start = _read_header(lines, AGGREGATE_MAGIC, path)
    names = tuple(lines[start].split(","))
    if names != AGGREGATE_COLUMNS:
        raise ValueError(f"{path}: unexpected aggregate columns {names}")
    out = []
    for lineno, line in enumerate(lines[start + 1 :], start=start + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(AGGREGATE_COLUMNS):
            raise ValueError(f"{path}: malformed row at line {lineno}")
        out.append(
            {
                "sweep": parts[0],
                "value": parts[1],
                "cum_t": int(parts[2]),
                "residual_mean": float(parts[3]),
                "phi_gap_mean": float(parts[4]),
            }
        )
    return header, out
