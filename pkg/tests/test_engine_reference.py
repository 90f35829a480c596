"""Cross-check of the compiled engine kernel against a pure-Python step.

The reference right-hand side below is assembled from the public module
operations (plant_derivatives, measure_power, droop_update, grid_derivatives,
solve_pcc, load_admittance_target) plus the loop algebra written out longhand,
then integrated with a hand-rolled RK4. The kernel must reproduce it to
floating-point noise.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from gfmsim import _kernel
from gfmsim.control import PowerMeasurement, droop_update, measure_power
from gfmsim.engine import (
    ScenarioConfig,
    _initial_state,
    _unit_params,
    default_grid,
    default_unit_config,
)
from gfmsim.network import (
    InverterPlantState,
    grid_derivatives,
    load_admittance_target,
    make_load,
    plant_derivatives,
    solve_pcc,
)
from gfmsim.signals import DqPair


def build_config() -> ScenarioConfig:
    unit = default_unit_config()
    return ScenarioConfig(
        duration_s=1.0,
        units=[unit],
        grid=default_grid(),
        load=2.0,
        system_base_va=5e6,
        reference_mode="fixed",
        reference_schedule_mw=[(0.0, 1.5)],
    )


def rotate(pair: DqPair, angle: float) -> DqPair:
    c, s = math.cos(angle), math.sin(angle)
    return DqPair(pair.d * c - pair.q * s, pair.d * s + pair.q * c)


def reference_rhs(x: np.ndarray, cfg: ScenarioConfig, dem: float, pref: float) -> np.ndarray:
    unit = cfg.units[0]
    omega_b = unit.base.omega_base
    dx = np.zeros_like(x)
    nb = 13

    i_lg = DqPair(x[4], x[5])
    injections = [DqPair(i_lg.d * unit.base.s_nominal / cfg.system_base_va,
                         i_lg.q * unit.base.s_nominal / cfg.system_base_va)]
    grid = replace(cfg.grid, delta=x[nb], omega_g=x[nb + 1], p_sched=x[nb + 2])
    emf = DqPair(grid.e_mag * math.cos(grid.delta), grid.e_mag * math.sin(grid.delta))
    g_l, b_l = x[nb + 3], x[nb + 4]
    v_pcc = solve_pcc(emf, grid.x_th, True, injections, g_l, b_l)

    # load smoothing
    load = make_load(dem, 0.0, tau=cfg.load_tau_s)
    g_t, b_t = load_admittance_target(load, v_pcc.magnitude())
    dx[nb + 3] = (1.0 / cfg.load_tau_s) * (g_t - g_l)
    dx[nb + 4] = (1.0 / cfg.load_tau_s) * (b_t - b_l)

    # grid swing
    i_grid = DqPair((emf.q - v_pcc.q) / grid.x_th, -(emf.d - v_pcc.d) / grid.x_th)
    p_elec = emf.d * i_grid.d + emf.q * i_grid.q
    d_delta, d_omega, d_sched = grid_derivatives(grid, p_elec, omega_b)
    dx[nb + 0] = d_delta
    dx[nb + 1] = d_omega
    dx[nb + 2] = d_sched

    # controller algebra in its own frame
    theta = x[6]
    p_f, q_f = x[7], x[8]
    ref_u = min(pref / (unit.base.s_nominal / cfg.system_base_va), unit.p_ref_cap_pu)
    droop = replace(unit.droop, p_ref=ref_u)
    omega_u, v_mag_ref = droop_update(PowerMeasurement(0.0, 0.0, p_f, q_f), droop)
    w_pu = omega_u / omega_b

    v_meas = rotate(DqPair(x[2], x[3]), -theta)
    i_meas = rotate(DqPair(x[0], x[1]), -theta)
    i_out = rotate(i_lg, -theta)
    p_raw, q_raw = measure_power(v_meas, i_out, unit.measure_mode)
    dx[7] = unit.droop.omega_p * (p_raw - p_f)
    dx[8] = unit.droop.omega_q * (q_raw - q_f)
    dx[6] = omega_u - omega_b

    gains = unit.gains
    z = unit.base.z_base
    b_c = omega_b * unit.filt.c_f * z
    x_lf = omega_b * unit.filt.l_f / z

    e_vd = v_mag_ref - v_meas.d
    e_vq = -v_meas.q
    u_vd = gains.k_pv * e_vd + gains.k_iv * x[9]
    u_vq = gains.k_pv * e_vq + gains.k_iv * x[10]
    f_vd = 0.0 if (abs(u_vd) > gains.i_limit and u_vd * e_vd > 0.0) else 1.0
    f_vq = 0.0 if (abs(u_vq) > gains.i_limit and u_vq * e_vq > 0.0) else 1.0
    u_vd = min(max(u_vd, -gains.i_limit), gains.i_limit)
    u_vq = min(max(u_vq, -gains.i_limit), gains.i_limit)
    i_ref_d = u_vd - w_pu * b_c * v_meas.q + gains.feed_forward * i_out.d
    i_ref_q = u_vq + w_pu * b_c * v_meas.d + gains.feed_forward * i_out.q
    mag = math.hypot(i_ref_d, i_ref_q)
    if mag > gains.i_limit:
        scale = gains.i_limit / mag
        i_ref_d *= scale
        i_ref_q *= scale
    dx[9] = e_vd * f_vd
    dx[10] = e_vq * f_vq

    e_id = i_ref_d - i_meas.d
    e_iq = i_ref_q - i_meas.q
    u_id = gains.k_pi * e_id + gains.k_ii * x[11]
    u_iq = gains.k_pi * e_iq + gains.k_ii * x[12]
    f_id = 0.0 if (abs(u_id) > gains.v_limit and u_id * e_id > 0.0) else 1.0
    f_iq = 0.0 if (abs(u_iq) > gains.v_limit and u_iq * e_iq > 0.0) else 1.0
    u_id = min(max(u_id, -gains.v_limit), gains.v_limit)
    u_iq = min(max(u_iq, -gains.v_limit), gains.v_limit)
    v_mod_d = u_id - w_pu * x_lf * i_meas.q + v_meas.d
    v_mod_q = u_iq + w_pu * x_lf * i_meas.d + v_meas.q
    mag = math.hypot(v_mod_d, v_mod_q)
    if mag > gains.v_limit:
        scale = gains.v_limit / mag
        v_mod_d *= scale
        v_mod_q *= scale
    dx[11] = e_id * f_id
    dx[12] = e_iq * f_iq

    v_mod = rotate(DqPair(v_mod_d, v_mod_q), theta)

    plant = plant_derivatives(
        state=InverterPlantState(
            i_lf=DqPair(x[0], x[1]), v_cf=DqPair(x[2], x[3]), i_lg=i_lg
        ),
        v_mod=v_mod,
        v_pcc=v_pcc,
        filt=unit.filt,
        base=unit.base,
        omega=omega_b,
        r_f_pu=unit.r_f_pu,
        r_g_pu=unit.r_g_pu,
    )
    dx[0] = plant.i_lf.d
    dx[1] = plant.i_lf.q
    dx[2] = plant.v_cf.d
    dx[3] = plant.v_cf.q
    dx[4] = plant.i_lg.d
    dx[5] = plant.i_lg.q
    return dx


def test_kernel_matches_reference_composition():
    cfg = build_config()
    cfg.validate()
    n_steps = 200
    dt = cfg.dt_s
    dem = 2.0 * 1e6 / cfg.system_base_va
    pref = 1.5 * 1e6 / cfg.system_base_va

    up = _unit_params(cfg)
    x_kernel = _initial_state(cfg, up, dem, 0.0)
    x_ref = x_kernel.copy()

    dem_step = np.full(n_steps + 1, dem)
    dem_mid = np.full(n_steps, dem)
    pref_step = np.full(n_steps + 1, pref)
    pref_mid = np.full(n_steps, pref)
    rec = np.zeros((n_steps + 1, 10))
    status, k_stop, _ = _kernel.simulate(
        x_kernel, 1, up, n_steps, dt, 10**9,
        dem_step, dem_mid, pref_step, pref_mid, 0.0,
        -1, -1, 1.0, -1, True, True,
        cfg.grid.e_mag, cfg.grid.x_th, cfg.grid.h, cfg.grid.d,
        cfg.grid.r_gov, cfg.grid.t_dispatch,
        cfg.units[0].base.omega_base, 60.0, 1.0 / cfg.load_tau_s,
        cfg.load_i_cap_pu, cfg.load_v_floor_pu, cfg.system_base_va, rec,
    )
    assert status == 0 and k_stop == n_steps

    two_pi = 2.0 * math.pi
    for _ in range(n_steps):
        k1 = reference_rhs(x_ref, cfg, dem, pref)
        k2 = reference_rhs(x_ref + 0.5 * dt * k1, cfg, dem, pref)
        k3 = reference_rhs(x_ref + 0.5 * dt * k2, cfg, dem, pref)
        k4 = reference_rhs(x_ref + dt * k3, cfg, dem, pref)
        x_ref = x_ref + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for idx in (6, 13):
            wrapped = x_ref[idx] % two_pi
            if wrapped > math.pi:
                wrapped -= two_pi
            x_ref[idx] = wrapped

    np.testing.assert_allclose(x_kernel, x_ref, rtol=1e-10, atol=1e-12)
