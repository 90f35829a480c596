"""Electrical plant: filter dynamics, PCC bus solve, grid equivalent, load, events.

Everything runs as a balanced positive-sequence averaged model in a common
synchronous frame. Inverter filters contribute six continuous states each
(inductor currents and capacitor voltage, d/q); the grid is a Thevenin EMF
behind a reactance with swing, governor-droop and a slow dispatch tracker so
its frequency responds to load; the data-center load is constant-power,
realized as an admittance that tracks P/|V|^2 through a smoothing filter
(this is what keeps the algebraic bus solve well-posed when islanded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .per_unit import FilterParams, PerUnitBase
from .signals import DqPair, LpfState, lpf_step

OMEGA_BASE_60HZ = 2.0 * math.pi * 60.0

# Divergence detector bounds.
PLANT_STATE_LIMIT_PU = 3.0
GRID_FREQ_BAND_PU = 0.05


class SimulationFault(RuntimeError):
    """A run left its validity envelope (divergence, ill-posed bus, ...).

    Carries the partial trace/metrics when raised by the engine.
    """

    def __init__(self, message: str, trace=None, metrics=None):
        super().__init__(message)
        self.trace = trace
        self.metrics = metrics


class DeadBusError(SimulationFault):
    """No voltage source is connected to the PCC."""


@dataclass(frozen=True)
class InverterPlantState:
    """Continuous filter states of one unit [pu, common frame]."""

    i_lf: DqPair
    v_cf: DqPair
    i_lg: DqPair


@dataclass(frozen=True)
class GridEquivalent:
    """Thevenin source with swing/governor dynamics on the system base.

    e_mag  : internal EMF magnitude [pu]
    x_th   : Thevenin reactance [pu]
    h      : inertia constant [s]
    d      : damping [pu]
    r_gov  : governor droop [pu]
    t_dispatch : dispatch-tracking time constant [s]; 0 disables tracking
    delta  : rotor angle relative to the common frame [rad]
    omega_g: frequency [pu]
    p_sched: scheduled mechanical power [pu] (tracks output when t_dispatch > 0)
    """

    e_mag: float
    x_th: float
    h: float
    d: float
    r_gov: float
    t_dispatch: float = 0.0
    delta: float = 0.0
    omega_g: float = 1.0
    p_sched: float = 0.0

    def __post_init__(self) -> None:
        if not self.h > 0.0:
            raise ValueError("h must be > 0")
        if not self.x_th > 0.0:
            raise ValueError("x_th must be > 0")
        if not self.r_gov > 0.0:
            raise ValueError("r_gov must be > 0")
        if self.d < 0.0 or self.t_dispatch < 0.0:
            raise ValueError("d and t_dispatch must be >= 0")


@dataclass(frozen=True)
class LoadState:
    """Constant-power load realized as a smoothed admittance.

    p_demand/q_demand are on the system base [pu]; the g/b filter states are
    the admittance actually presented to the bus. Below v_floor the conversion
    saturates (load relief) and the implied current is capped at i_cap.
    """

    p_demand: float
    q_demand: float
    g_lpf: LpfState
    b_lpf: LpfState
    i_cap: float = 2.0
    v_floor: float = 0.1

    def __post_init__(self) -> None:
        if self.p_demand < 0.0:
            raise ValueError("p_demand must be >= 0")


@dataclass(frozen=True)
class FaultSpec:
    """Positive-sequence sag at the grid source over [t_start, t_clear)."""

    t_start: float
    t_clear: float
    residual_v: float

    def __post_init__(self) -> None:
        if not self.t_clear > self.t_start:
            raise ValueError("t_clear must be > t_start")
        if not 0.0 < self.residual_v < 1.0:
            raise ValueError("residual_v must lie in (0, 1)")


@dataclass(frozen=True)
class BreakerSpec:
    """Grid breaker: closed(t) = initially_closed and t < t_open."""

    t_open: float
    initially_closed: bool = True

    def __post_init__(self) -> None:
        if not self.t_open > 0.0:
            raise ValueError("t_open must be > 0")


def plant_derivatives(
    state: InverterPlantState,
    v_mod: DqPair,
    v_pcc: DqPair,
    filt: FilterParams,
    base: PerUnitBase,
    omega: float,
    r_f_pu: float = 0.0,
    r_g_pu: float = 0.0,
) -> InverterPlantState:
    """Time derivatives of the filter states in a frame rotating at omega [rad/s].

    Per-unit form with normalized inductances l = L/Z_base and capacitance
    c = C*Z_base (both in seconds):

        l_f * di_lf/dt = v_mod - v_cf - r_f*i_lf - j*omega*l_f*i_lf
        c_f * dv_cf/dt = i_lf - i_lg          - j*omega*c_f*v_cf
        l_g * di_lg/dt = v_cf - v_pcc - r_g*i_lg - j*omega*l_g*i_lg

    where -j*omega*x contributes +omega*x_q to the d component and
    -omega*x_d to the q component. Series resistances default to zero.
    """
    z = base.z_base
    l_f = filt.l_f / z
    c_f = filt.c_f * z
    l_g = filt.l_g / z
    di_lf = DqPair(
        (v_mod.d - state.v_cf.d - r_f_pu * state.i_lf.d) / l_f + omega * state.i_lf.q,
        (v_mod.q - state.v_cf.q - r_f_pu * state.i_lf.q) / l_f - omega * state.i_lf.d,
    )
    dv_cf = DqPair(
        (state.i_lf.d - state.i_lg.d) / c_f + omega * state.v_cf.q,
        (state.i_lf.q - state.i_lg.q) / c_f - omega * state.v_cf.d,
    )
    di_lg = DqPair(
        (state.v_cf.d - v_pcc.d - r_g_pu * state.i_lg.d) / l_g + omega * state.i_lg.q,
        (state.v_cf.q - v_pcc.q - r_g_pu * state.i_lg.q) / l_g - omega * state.i_lg.d,
    )
    return InverterPlantState(i_lf=di_lf, v_cf=dv_cf, i_lg=di_lg)


def grid_derivatives(
    g: GridEquivalent, p_exported: float, omega_base: float = OMEGA_BASE_60HZ
) -> tuple[float, float, float]:
    """Derivatives of (delta, omega_g, p_sched).

    2h * domega/dt = p_mech - p_exported - d*(omega_g - 1) with the governor
    p_mech = p_sched + (1 - omega_g)/r_gov; delta advances at the base
    frequency scaling of the speed deviation.
    """
    p_mech = g.p_sched + (1.0 - g.omega_g) / g.r_gov
    d_delta = omega_base * (g.omega_g - 1.0)
    d_omega = (p_mech - p_exported - g.d * (g.omega_g - 1.0)) / (2.0 * g.h)
    d_sched = (p_exported - g.p_sched) / g.t_dispatch if g.t_dispatch > 0.0 else 0.0
    return d_delta, d_omega, d_sched


def grid_step(
    g: GridEquivalent,
    p_exported: float,
    dt: float,
    omega_base: float = OMEGA_BASE_60HZ,
) -> GridEquivalent:
    """Advance the grid equivalent one RK4 step with held electrical power."""
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")

    def deriv(delta: float, omega: float, sched: float):
        return grid_derivatives(
            replace(g, delta=delta, omega_g=omega, p_sched=sched),
            p_exported,
            omega_base,
        )

    y = (g.delta, g.omega_g, g.p_sched)
    k1 = deriv(*y)
    k2 = deriv(*(y[i] + 0.5 * dt * k1[i] for i in range(3)))
    k3 = deriv(*(y[i] + 0.5 * dt * k2[i] for i in range(3)))
    k4 = deriv(*(y[i] + dt * k3[i] for i in range(3)))
    delta, omega_g, p_sched = (
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(3)
    )
    if not abs(omega_g - 1.0) <= GRID_FREQ_BAND_PU:
        raise SimulationFault(
            f"grid frequency left the validity band: omega_g = {omega_g:.4f} pu"
        )
    return replace(g, delta=delta, omega_g=omega_g, p_sched=p_sched)


def apply_fault(g: GridEquivalent, fault: FaultSpec | None, t: float) -> float:
    """Effective EMF magnitude at time t; the sag is exactly reversible."""
    if fault is not None and fault.t_start <= t < fault.t_clear:
        return fault.residual_v * g.e_mag
    return g.e_mag


def solve_pcc(
    emf: DqPair,
    x_th: float,
    breaker_closed: bool,
    injections: Sequence[DqPair],
    load_g: float,
    load_b: float,
) -> DqPair:
    """Algebraic Kirchhoff solve of the PCC voltage [pu, common frame].

    The grid branch is the admittance 1/(j*x_th) behind the EMF when the
    breaker is closed; inverter grid-side currents enter as injections on the
    system base; the load enters as the admittance (load_g - j*load_b).
    """
    if not breaker_closed and len(injections) == 0:
        raise DeadBusError("dead bus: breaker open and no inverter connected")
    num = complex(sum(i.d for i in injections), sum(i.q for i in injections))
    den = complex(load_g, -load_b)
    if breaker_closed:
        if not x_th > 0.0:
            raise ValueError("x_th must be > 0")
        y_th = 1.0 / complex(0.0, x_th)
        num += y_th * complex(emf.d, emf.q)
        den += y_th
    if abs(den) < 1e-12:
        raise SimulationFault(
            "PCC bus has no voltage-defining element (zero total admittance)"
        )
    v = num / den
    return DqPair(v.real, v.imag)


def load_admittance_target(
    load: LoadState, v_mag: float
) -> tuple[float, float]:
    """Admittance that would draw (p_demand, q_demand) at the given |V|.

    |V| is floored at v_floor and the implied current magnitude capped at
    i_cap (load relief during deep sags).
    """
    v_eff = max(v_mag, load.v_floor)
    g_t = load.p_demand / v_eff**2
    b_t = load.q_demand / v_eff**2
    y_mag = math.hypot(g_t, b_t)
    i_implied = y_mag * v_eff
    if i_implied > load.i_cap:
        scale = load.i_cap / i_implied
        g_t *= scale
        b_t *= scale
    return g_t, b_t


def load_draw(
    load: LoadState, v_pcc: DqPair, dt: float
) -> tuple[LoadState, DqPair]:
    """Advance the load smoothing one step and return the drawn current.

    The drawn current is (g - j*b) * v_pcc with the smoothed admittance, so
    drawn power tracks the demand with the smoothing time constant.
    """
    g_t, b_t = load_admittance_target(load, v_pcc.magnitude())
    g_lpf = lpf_step(load.g_lpf, g_t, dt)
    b_lpf = lpf_step(load.b_lpf, b_t, dt)
    new = replace(load, g_lpf=g_lpf, b_lpf=b_lpf)
    g, b = g_lpf.y, b_lpf.y
    current = DqPair(g * v_pcc.d + b * v_pcc.q, g * v_pcc.q - b * v_pcc.d)
    return new, current


def make_load(
    p_demand: float,
    q_demand: float = 0.0,
    tau: float = 0.01,
    converged: bool = False,
) -> LoadState:
    """Build a LoadState with a first-order smoothing of time constant tau [s].

    With converged=True the admittance starts at its unity-voltage value.
    """
    omega_c = 1.0 / tau
    g0 = p_demand if converged else 0.0
    b0 = q_demand if converged else 0.0
    return LoadState(
        p_demand=p_demand,
        q_demand=q_demand,
        g_lpf=LpfState(g0, omega_c),
        b_lpf=LpfState(b0, omega_c),
    )
