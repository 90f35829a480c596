"""CSV serialization of traces and JSON serialization of metrics.

Column order is fixed: t_s, v_pcc_pu, f_hz, p_unit<i>_mw..., q_unit<i>_mvar...,
p_grid_mw, p_load_mw, fault_active, breaker_closed. Floats are written with
repr (shortest round-trip form), so parse + re-emit is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import SimTrace, SummaryMetrics

TRACE_VERSION_LINE = "# gfmsim-trace 1"


def trace_columns(n_units: int) -> list[str]:
    cols = ["t_s", "v_pcc_pu", "f_hz"]
    cols += [f"p_unit{i + 1}_mw" for i in range(n_units)]
    cols += [f"q_unit{i + 1}_mvar" for i in range(n_units)]
    cols += ["p_grid_mw", "p_load_mw", "fault_active", "breaker_closed"]
    return cols


def write_trace_csv(trace: SimTrace, path) -> None:
    n = trace.n_units
    lines = [TRACE_VERSION_LINE, ",".join(trace_columns(n))]
    for k in range(trace.t.size):
        cells = [repr(float(trace.t[k])), repr(float(trace.v_pcc_pu[k])),
                 repr(float(trace.f_hz[k]))]
        cells += [repr(float(v)) for v in trace.p_unit_mw[k]]
        cells += [repr(float(v)) for v in trace.q_unit_mvar[k]]
        cells += [
            repr(float(trace.p_grid_mw[k])),
            repr(float(trace.p_load_mw[k])),
            str(int(trace.fault_active[k])),
            str(int(trace.breaker_closed[k])),
        ]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> SimTrace:
    text = Path(path).read_text().splitlines()
    rows = [line for line in text if line and not line.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = rows[0].split(",")
    n_units = sum(1 for c in header if c.startswith("p_unit"))
    expected = trace_columns(n_units)
    if header != expected:
        raise ValueError(f"{path}: unexpected columns {header!r}")
    data = np.array(
        [[float(cell) for cell in row.split(",")] for row in rows[1:]], dtype=float
    )
    if data.ndim != 2 or data.shape[1] != len(expected):
        raise ValueError(f"{path}: malformed rows")
    t = data[:, 0]
    if np.any(np.diff(t) <= 0.0):
        raise ValueError(f"{path}: timestamps not strictly increasing")
    return SimTrace(
        t=t,
        v_pcc_pu=data[:, 1],
        f_hz=data[:, 2],
        p_unit_mw=data[:, 3 : 3 + n_units],
        q_unit_mvar=data[:, 3 + n_units : 3 + 2 * n_units],
        p_grid_mw=data[:, 3 + 2 * n_units],
        p_load_mw=data[:, 4 + 2 * n_units],
        fault_active=data[:, 5 + 2 * n_units].astype(np.int_),
        breaker_closed=data[:, 6 + 2 * n_units].astype(np.int_),
    )


def write_metrics_json(metrics: SummaryMetrics, path) -> None:
    Path(path).write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n")
