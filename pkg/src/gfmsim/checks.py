"""Scenario acceptance checks: each preset's pass/fail criteria.

Used by the CLI `check` subcommand and by the test suite, so the thresholds
live in exactly one place. Every check returns the measured value alongside
its requirement; nothing is recomputed with looser tolerances elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import ScenarioConfig, SimTrace, compare, preset, run
from .workload import LoadTrace

TRANSIENT_WINDOW_S = 0.1  # allowance after an event before limits are enforced
ISLAND_WINDOW_S = 0.05


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str
    requirement: str

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.measured} (requires {self.requirement})"


def _twin(config: ScenarioConfig, enabled: bool) -> ScenarioConfig:
    return replace(config, bess_enabled=enabled)


def tracking_step_config() -> ScenarioConfig:
    """Commanded load step used for the reference-tracking check.

    12 -> 28 MW commanded at t = 4 s (1 ms ramp, effectively a step against
    the tens-of-ms droop loop).
    """
    cfg = preset("scenario_a")
    step_trace = LoadTrace(
        t=np.array([0.0, 4.0, 4.001, 8.0]),
        p_mw=np.array([12.0, 12.0, 28.0, 28.0]),
    )
    return replace(cfg, duration_s=8.0, load=step_trace, label="tracking_step")


def rise_time_and_error(
    trace: SimTrace, t_step: float, p_before_mw: float, p_after_mw: float
) -> tuple[float, float]:
    """10-90% rise time of aggregate unit power and steady-state error [MW]."""
    step = p_after_mw - p_before_mw
    p = trace.p_bess_mw
    after = trace.t >= t_step
    p10 = p_before_mw + 0.1 * step
    p90 = p_before_mw + 0.9 * step
    idx = np.flatnonzero(after & (p >= p10))
    if idx.size == 0:
        return math.inf, math.inf
    t10 = trace.t[idx[0]]
    idx = np.flatnonzero(after & (p >= p90))
    if idx.size == 0:
        return math.inf, math.inf
    t90 = trace.t[idx[0]]
    tail = trace.t >= trace.t[-1] - 1.0
    ss_error = abs(float(np.mean(p[tail])) - p_after_mw)
    return float(t90 - t10), ss_error


def _band_violation_window(
    t: np.ndarray, ok: np.ndarray
) -> float:
    """Longest contiguous stretch of violations [s]."""
    worst = 0.0
    start = None
    for k in range(t.size):
        if not ok[k]:
            if start is None:
                start = t[k]
            worst = max(worst, t[k] - start)
        else:
            start = None
    return worst


def check_scenario_a() -> list[CheckResult]:
    cfg = preset("scenario_a")
    trace_with, metrics_with = run(_twin(cfg, True))
    trace_without, _ = run(_twin(cfg, False))
    report = compare(trace_with, trace_without)

    results = [
        CheckResult(
            "equal sharing",
            metrics_with.sharing_imbalance_pct < 1.0,
            f"max pairwise spread {metrics_with.sharing_imbalance_pct:.4f}% of unit rating",
            "< 1% of 5 MW",
        ),
        CheckResult(
            "under-frequency mitigation",
            report.under_reduction_pct >= 40.0,
            f"{report.under_reduction_pct:.1f}% reduction "
            f"({report.f_min_without_hz:.3f} Hz -> {report.f_min_with_hz:.3f} Hz)",
            ">= 40% reduction",
        ),
        CheckResult(
            "over-frequency mitigation",
            report.over_reduction_pct >= 40.0,
            f"{report.over_reduction_pct:.1f}% reduction "
            f"({report.f_max_without_hz:.3f} Hz -> {report.f_max_with_hz:.3f} Hz)",
            ">= 40% reduction",
        ),
    ]

    track = run(tracking_step_config())[0]
    rise, ss_err = rise_time_and_error(track, 4.0, 12.0, 28.0)
    results.append(
        CheckResult(
            "reference tracking rise time",
            rise < 0.1,
            f"10-90% rise {rise * 1e3:.1f} ms",
            "< 100 ms",
        )
    )
    results.append(
        CheckResult(
            "reference tracking steady-state error",
            ss_err < 0.02 * 16.0,
            f"|error| {ss_err:.3f} MW on a 16 MW step",
            "< 2% of step",
        )
    )
    return results


def check_scenario_b() -> list[CheckResult]:
    cfg = preset("scenario_b")
    trace_with, _ = run(_twin(cfg, True))
    trace_without, _ = run(_twin(cfg, False))
    fault = cfg.fault

    unsupported = (trace_without.t >= fault.t_start) & (trace_without.t < fault.t_clear)
    v_min_unsupported = float(trace_without.v_pcc_pu[unsupported].min())

    window = (trace_with.t >= fault.t_start + TRANSIENT_WINDOW_S) & (
        trace_with.t < fault.t_clear
    )
    v_window = trace_with.v_pcc_pu[window]
    in_band = bool(np.all((v_window >= 0.9) & (v_window <= 1.1)))

    fault_win = (trace_with.t >= fault.t_start) & (trace_with.t < fault.t_clear)
    q_peak = float(trace_with.q_bess_mvar[fault_win].max())

    p_load = trace_with.p_load_mw[fault_win]
    ok = np.abs(p_load - 6.0) <= 0.6
    worst_violation = _band_violation_window(trace_with.t[fault_win], ok)

    return [
        CheckResult(
            "unsupported sag depth",
            v_min_unsupported < 0.9,
            f"v_pcc min {v_min_unsupported:.3f} pu without units",
            "< 0.9 pu",
        ),
        CheckResult(
            "supported voltage recovery",
            in_band,
            f"v_pcc in [{v_window.min():.3f}, {v_window.max():.3f}] pu during support",
            "within [0.9, 1.1] pu",
        ),
        CheckResult(
            "reactive power support",
            q_peak >= 4.0,
            f"peak aggregate Q {q_peak:.2f} MVar",
            ">= 4 MVar",
        ),
        CheckResult(
            "load continuity through fault",
            worst_violation < TRANSIENT_WINDOW_S,
            f"longest load-power excursion beyond +-10% lasted {worst_violation * 1e3:.1f} ms",
            "< 100 ms",
        ),
    ]


def check_scenario_c() -> list[CheckResult]:
    cfg = preset("scenario_c")
    trace, metrics = run(cfg)
    t_open = cfg.breaker.t_open
    window = trace.t >= t_open + ISLAND_WINDOW_S
    v = trace.v_pcc_pu[window]
    f = trace.f_hz[window]
    p_load = trace.p_load_mw[window]
    demand = 30.0

    return [
        CheckResult(
            "islanded voltage",
            bool(np.all((v >= 0.95) & (v <= 1.05))),
            f"v_pcc in [{v.min():.4f}, {v.max():.4f}] pu post-islanding",
            "within [0.95, 1.05] pu",
        ),
        CheckResult(
            "islanded frequency",
            bool(np.all((f >= 59.4) & (f <= 60.6))),
            f"f in [{f.min():.3f}, {f.max():.3f}] Hz post-islanding",
            "within [59.4, 60.6] Hz",
        ),
        CheckResult(
            "load continuity",
            bool(np.all(p_load >= 0.9 * demand)),
            f"load P min {p_load.min():.2f} MW of {demand:.0f} MW demand",
            ">= 90% of demand",
        ),
        CheckResult(
            "run completed",
            metrics.status == "ok",
            f"status {metrics.status}",
            "no trip, no divergence",
        ),
    ]


_CHECKS = {
    "scenario_a": check_scenario_a,
    "scenario_b": check_scenario_b,
    "scenario_c": check_scenario_c,
}


def run_checks(name: str) -> list[CheckResult]:
    if name not in _CHECKS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(_CHECKS)}")
    return _CHECKS[name]()
