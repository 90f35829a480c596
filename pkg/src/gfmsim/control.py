"""Hierarchical grid-forming controller for one inverter.

Structure (outer to inner): instantaneous power measurement in the dq frame,
low-pass filtering, frequency/voltage droop producing the frame angle and the
voltage-magnitude reference, then cascaded voltage and current PI loops with
cross-coupling decoupling terms and feed-forward. The q-axis voltage
reference is held at zero so the d channel governs active power and the q
channel reactive power.

Droop sign convention: frequency rises when measured active power is below
its setpoint, voltage magnitude rises when measured reactive power is below
its setpoint. k_p and k_q are per-unit deviations per per-unit power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .signals import (
    AbcTriple,
    DqPair,
    LpfState,
    PiState,
    advance_angle,
    lpf_step,
    park,
    pi_step,
)

MEASURE_MODES = ("exact", "approximate")


@dataclass(frozen=True)
class DroopParams:
    """Droop coefficients, measurement filters and setpoints.

    k_p       : frequency droop [pu-frequency per pu-active-power]
    k_q       : voltage droop [pu-voltage per pu-reactive-power]
    omega_p/q : power measurement LPF cutoffs [rad/s]
    p_ref/q_ref : power setpoints [pu on the unit base]
    v_ref     : voltage magnitude setpoint [pu]
    omega_ref : nominal angular frequency [rad/s]
    """

    k_p: float
    k_q: float
    omega_p: float
    omega_q: float
    p_ref: float
    q_ref: float
    v_ref: float
    omega_ref: float

    def __post_init__(self) -> None:
        if not self.k_p > 0.0:
            raise ValueError("k_p must be > 0")
        if self.k_q < 0.0:
            raise ValueError("k_q must be >= 0")
        if not (self.omega_p > 0.0 and self.omega_q > 0.0):
            raise ValueError("measurement cutoffs must be > 0")
        if not 0.9 <= self.v_ref <= 1.1:
            raise ValueError(f"v_ref must lie in [0.9, 1.1], got {self.v_ref!r}")
        if not self.omega_ref > 0.0:
            raise ValueError("omega_ref must be > 0")


@dataclass(frozen=True)
class LoopGains:
    """Cascaded loop gains and limits.

    The voltage PI outputs a current reference (internal limit = i_limit);
    the current PI outputs a modulation voltage (internal limit = v_limit).
    feed_forward scales the output-current feed-forward into the voltage loop.
    """

    k_pv: float
    k_iv: float
    k_pi: float
    k_ii: float
    feed_forward: float = 0.75
    i_limit: float = 1.2  # current reference magnitude bound [pu]
    v_limit: float = 1.5  # modulation voltage magnitude bound [pu]

    def __post_init__(self) -> None:
        for name in ("k_pv", "k_iv", "k_pi", "k_ii", "feed_forward"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not (0.0 <= self.feed_forward <= 1.0):
            raise ValueError("feed_forward must lie in [0, 1]")
        if not (self.i_limit > 0.0 and self.v_limit > 0.0):
            raise ValueError("limits must be > 0")


@dataclass(frozen=True)
class GfmParams:
    """Everything the controller needs: droop, loop gains, filter pu values."""

    droop: DroopParams
    gains: LoopGains
    l_f_pu: float  # filter inductor reactance at nominal frequency [pu]
    c_f_pu: float  # filter capacitor susceptance at nominal frequency [pu]
    measure_mode: str = "exact"

    def __post_init__(self) -> None:
        if self.measure_mode not in MEASURE_MODES:
            raise ValueError(f"measure_mode must be one of {MEASURE_MODES}")
        if self.l_f_pu < 0.0 or self.c_f_pu < 0.0:
            raise ValueError("filter pu values must be >= 0")


@dataclass(frozen=True)
class PowerMeasurement:
    """Raw and filtered instantaneous powers [pu]."""

    p_raw: float
    q_raw: float
    p_filt: float
    q_filt: float


@dataclass(frozen=True)
class ControllerState:
    """Angle, measurement filters, PI integrators and the last references."""

    theta: float
    p_lpf: LpfState
    q_lpf: LpfState
    vd_pi: PiState
    vq_pi: PiState
    id_pi: PiState
    iq_pi: PiState
    last_refs: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)


def initial_controller_state(params: GfmParams) -> ControllerState:
    """Zero integrators, zero filters, theta = 0."""
    gains = params.gains
    return ControllerState(
        theta=0.0,
        p_lpf=LpfState(0.0, params.droop.omega_p),
        q_lpf=LpfState(0.0, params.droop.omega_q),
        vd_pi=PiState(gains.k_pv, gains.k_iv, 0.0, gains.i_limit),
        vq_pi=PiState(gains.k_pv, gains.k_iv, 0.0, gains.i_limit),
        id_pi=PiState(gains.k_pi, gains.k_ii, 0.0, gains.v_limit),
        iq_pi=PiState(gains.k_pi, gains.k_ii, 0.0, gains.v_limit),
    )


def measure_power(v: DqPair, i: DqPair, mode: str = "exact") -> tuple[float, float]:
    """Instantaneous (p, q) from dq voltage and current [pu].

    exact:        p = vd*id + vq*iq,  q = -vd*iq + vq*id
    approximate:  p = vd*id,          q = -vd*iq   (drops the vq terms)
    """
    if mode == "exact":
        return v.d * i.d + v.q * i.q, -v.d * i.q + v.q * i.d
    if mode == "approximate":
        return v.d * i.d, -v.d * i.q
    raise ValueError(f"measure mode must be one of {MEASURE_MODES}, got {mode!r}")


def droop_update(pm: PowerMeasurement, dp: DroopParams) -> tuple[float, float]:
    """Droop laws: returns (omega [rad/s], voltage magnitude [pu])."""
    omega = dp.omega_ref * (1.0 + dp.k_p * (dp.p_ref - pm.p_filt))
    v_mag = dp.v_ref + dp.k_q * (dp.q_ref - pm.q_filt)
    return omega, v_mag


def _clamp_vector(d: float, q: float, limit: float) -> tuple[float, float]:
    mag = math.hypot(d, q)
    if mag > limit:
        scale = limit / mag
        return d * scale, q * scale
    return d, q


def voltage_loop(
    v_ref: DqPair,
    v_meas: DqPair,
    i_out: DqPair,
    st: ControllerState,
    gains: LoopGains,
    omega_pu: float,
    c_f_pu: float,
    dt: float,
) -> tuple[DqPair, ControllerState]:
    """Outer voltage loop: produces the current reference.

    i_d* = PI(v_ref.d - v_meas.d) - omega*c_f*v_meas.q + F*i_out.d
    i_q* = PI(0       - v_meas.q) + omega*c_f*v_meas.d + F*i_out.q

    omega_pu is the per-unit frame frequency, so omega_pu * c_f_pu is the
    capacitor's per-unit coupling susceptance. v_ref.q must be zero.
    """
    if v_ref.q != 0.0:
        raise ValueError(f"v_ref.q must be 0 (decoupling convention), got {v_ref.q!r}")
    vd_pi, u_d = pi_step(st.vd_pi, v_ref.d - v_meas.d, dt)
    vq_pi, u_q = pi_step(st.vq_pi, -v_meas.q, dt)
    cross = omega_pu * c_f_pu
    i_d = u_d - cross * v_meas.q + gains.feed_forward * i_out.d
    i_q = u_q + cross * v_meas.d + gains.feed_forward * i_out.q
    i_d, i_q = _clamp_vector(i_d, i_q, gains.i_limit)
    return DqPair(i_d, i_q), replace(st, vd_pi=vd_pi, vq_pi=vq_pi)


def current_loop(
    i_ref: DqPair,
    i_meas: DqPair,
    st: ControllerState,
    gains: LoopGains,
    omega_pu: float,
    l_f_pu: float,
    v_meas: DqPair,
    dt: float,
) -> tuple[DqPair, ControllerState]:
    """Inner current loop: produces the modulation voltage.

    v_rd* = PI(i_ref.d - i_meas.d) - omega*l_f*i_meas.q + v_meas.d
    v_rq* = PI(i_ref.q - i_meas.q) + omega*l_f*i_meas.d + v_meas.q
    """
    id_pi, u_d = pi_step(st.id_pi, i_ref.d - i_meas.d, dt)
    iq_pi, u_q = pi_step(st.iq_pi, i_ref.q - i_meas.q, dt)
    cross = omega_pu * l_f_pu
    v_d = u_d - cross * i_meas.q + v_meas.d
    v_q = u_q + cross * i_meas.d + v_meas.q
    v_d, v_q = _clamp_vector(v_d, v_q, gains.v_limit)
    return DqPair(v_d, v_q), replace(st, id_pi=id_pi, iq_pi=iq_pi)


def controller_step(
    st: ControllerState,
    v_meas_abc: AbcTriple,
    i_meas_abc: AbcTriple,
    i_out_abc: AbcTriple,
    params: GfmParams,
    dt: float,
) -> tuple[ControllerState, DqPair, float]:
    """One discrete controller update.

    Measurements are parked at the incoming angle; the returned modulation
    voltage is expressed in the frame of the returned (advanced) angle.
    Returns (new state, modulation voltage dq, new frame angle).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    v_dq = park(v_meas_abc, st.theta)
    i_dq = park(i_meas_abc, st.theta)
    io_dq = park(i_out_abc, st.theta)

    p_raw, q_raw = measure_power(v_dq, io_dq, params.measure_mode)
    p_lpf = lpf_step(st.p_lpf, p_raw, dt)
    q_lpf = lpf_step(st.q_lpf, q_raw, dt)
    pm = PowerMeasurement(p_raw, q_raw, p_lpf.y, q_lpf.y)

    omega, v_mag = droop_update(pm, params.droop)
    theta_new = advance_angle(st.theta, omega, dt)
    omega_pu = omega / params.droop.omega_ref

    st = replace(st, p_lpf=p_lpf, q_lpf=q_lpf)
    i_ref, st = voltage_loop(
        DqPair(v_mag, 0.0), v_dq, io_dq, st, params.gains, omega_pu, params.c_f_pu, dt
    )
    v_mod, st = current_loop(
        i_ref, i_dq, st, params.gains, omega_pu, params.l_f_pu, v_dq, dt
    )
    st = replace(
        st,
        theta=theta_new,
        last_refs=(i_ref.d, i_ref.q, v_mod.d, v_mod.q),
    )
    return st, v_mod, theta_new
