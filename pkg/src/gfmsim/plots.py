"""Static SVG panels of a trace (voltage, frequency, active/reactive power)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import SimTrace


def _event_shading(ax, trace: SimTrace) -> None:
    t = trace.t
    fault = trace.fault_active.astype(bool)
    if fault.any():
        ax.axvspan(t[fault][0], t[fault][-1], color="0.9", zorder=0)
    open_ = trace.breaker_closed == 0
    if open_.any() and not open_.all():
        ax.axvline(t[open_][0], color="0.4", linestyle="--", linewidth=0.8)


def write_plots(trace: SimTrace, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name: str) -> None:
        path = out / name
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(trace.t, trace.v_pcc_pu, linewidth=0.9)
    _event_shading(ax, trace)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("PCC voltage [pu]")
    ax.grid(alpha=0.3)
    save(fig, "voltage.svg")

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(trace.t, trace.f_hz, linewidth=0.9)
    _event_shading(ax, trace)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("frequency [Hz]")
    ax.grid(alpha=0.3)
    save(fig, "frequency.svg")

    fig, ax = plt.subplots(figsize=(8, 3))
    if trace.n_units:
        ax.plot(trace.t, trace.p_bess_mw, label="units total", linewidth=1.0)
        ax.plot(trace.t, trace.p_unit_mw[:, 0], label="unit 1", linewidth=0.7)
    ax.plot(trace.t, trace.p_load_mw, label="load", linewidth=0.9)
    ax.plot(trace.t, trace.p_grid_mw, label="grid import", linewidth=0.9)
    _event_shading(ax, trace)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("P [MW]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    save(fig, "active_power.svg")

    fig, ax = plt.subplots(figsize=(8, 3))
    if trace.n_units:
        ax.plot(trace.t, trace.q_bess_mvar, label="units total", linewidth=1.0)
        ax.plot(trace.t, trace.q_unit_mvar[:, 0], label="unit 1", linewidth=0.7)
    _event_shading(ax, trace)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("Q [MVar]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    save(fig, "reactive_power.svg")

    return written
