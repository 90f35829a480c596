"""Numba kernel: fused controller + plant + bus RK4 loop.

All continuous states live in one flat float64 vector so a classic RK4 sweep
advances the whole system fourth-order; the controller algebra (droop, loops,
saturations) is evaluated inside the right-hand side at every stage. The
pure-Python reference step in the test suite mirrors this function exactly.

State layout, unit u at offset 13*u:
    0 i_lf_d  1 i_lf_q  2 v_cf_d  3 v_cf_q  4 i_lg_d  5 i_lg_q
    6 theta_rel (controller frame minus common frame)
    7 p_filt  8 q_filt  9 int_vd  10 int_vq  11 int_id  12 int_iq
tail at 13*n_units:
    +0 grid delta  +1 grid omega [pu]  +2 grid p_sched
    +3 load g      +4 load b
"""

import math

import numpy as np
from numba import njit

# Unit parameter matrix columns.
(
    UP_LF, UP_CF, UP_LG, UP_RF, UP_RG, UP_BC, UP_XLF,
    UP_KP, UP_KQ, UP_WP, UP_WQ, UP_QREF, UP_VREF, UP_WREF,
    UP_KPV, UP_KIV, UP_KPI, UP_KII, UP_FF, UP_ILIM, UP_VLIM,
    UP_SRATIO, UP_SHARE, UP_EXACT, UP_REFCAP,
) = range(25)
N_UP_COLS = 25

# Run status codes.
STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_DEAD_BUS = 2
STATUS_ILL_POSED = 3

PLANT_LIMIT = 3.0
GRID_BAND = 0.05

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _bus(x, n_units, up, closed, active, fscale, e_mag, x_th):
    """Solve the PCC voltage; returns (status, Vd, Vq, Ed, Eq, Igd, Igq)."""
    nb = 13 * n_units
    delta = x[nb + 0]
    g_l = x[nb + 3]
    b_l = x[nb + 4]
    e_abs = fscale * e_mag
    e_d = e_abs * math.cos(delta)
    e_q = e_abs * math.sin(delta)

    if not closed and not active:
        return STATUS_DEAD_BUS, 0.0, 0.0, e_d, e_q, 0.0, 0.0

    num_d = 0.0
    num_q = 0.0
    if active:
        for u in range(n_units):
            o = 13 * u
            sr = up[u, UP_SRATIO]
            num_d += x[o + 4] * sr
            num_q += x[o + 5] * sr
    den_g = g_l
    den_b = -b_l
    if closed:
        # grid branch admittance 1/(j*x_th) = -j/x_th
        y_b = -1.0 / x_th
        num_d += -y_b * e_q
        num_q += y_b * e_d
        den_b += y_b
    mag2 = den_g * den_g + den_b * den_b
    if mag2 < 1e-18:
        return STATUS_ILL_POSED, 0.0, 0.0, e_d, e_q, 0.0, 0.0
    v_d = (num_d * den_g + num_q * den_b) / mag2
    v_q = (num_q * den_g - num_d * den_b) / mag2
    if closed:
        ig_d = (e_q - v_q) / x_th
        ig_q = -(e_d - v_d) / x_th
    else:
        ig_d = 0.0
        ig_q = 0.0
    return STATUS_OK, v_d, v_q, e_d, e_q, ig_d, ig_q


@njit(cache=True)
def _rhs(
    x, dx, n_units, up, dem, pref, q_dem,
    fscale, closed, active,
    e_mag, x_th, h, damp, r_gov, t_disp,
    omega_b, w_load, i_cap, v_floor,
):
    """Fill dx with state derivatives; returns a status code."""
    for i in range(x.shape[0]):
        dx[i] = 0.0

    status, v_d, v_q, e_d, e_q, ig_d, ig_q = _bus(
        x, n_units, up, closed, active, fscale, e_mag, x_th
    )
    if status != STATUS_OK:
        return status

    nb = 13 * n_units
    omega_g = x[nb + 1]
    p_sched = x[nb + 2]
    g_l = x[nb + 3]
    b_l = x[nb + 4]

    # Load admittance tracks P/|V|^2 through the smoothing filter.
    v_mag = math.sqrt(v_d * v_d + v_q * v_q)
    v_eff = v_mag if v_mag > v_floor else v_floor
    g_t = dem / (v_eff * v_eff)
    b_t = q_dem / (v_eff * v_eff)
    y_mag = math.sqrt(g_t * g_t + b_t * b_t)
    i_implied = y_mag * v_eff
    if i_implied > i_cap:
        scale = i_cap / i_implied
        g_t *= scale
        b_t *= scale
    dx[nb + 3] = w_load * (g_t - g_l)
    dx[nb + 4] = w_load * (b_t - b_l)

    # Grid swing + governor + dispatch tracking.
    p_elec = e_d * ig_d + e_q * ig_q
    p_mech = p_sched + (1.0 - omega_g) / r_gov
    dx[nb + 0] = omega_b * (omega_g - 1.0)
    dx[nb + 1] = (p_mech - p_elec - damp * (omega_g - 1.0)) / (2.0 * h)
    if t_disp > 0.0:
        dx[nb + 2] = (p_elec - p_sched) / t_disp

    if not active:
        return STATUS_OK

    for u in range(n_units):
        o = 13 * u
        i_lf_d = x[o + 0]
        i_lf_q = x[o + 1]
        v_cf_d = x[o + 2]
        v_cf_q = x[o + 3]
        i_lg_d = x[o + 4]
        i_lg_q = x[o + 5]
        theta = x[o + 6]
        p_f = x[o + 7]
        q_f = x[o + 8]
        int_vd = x[o + 9]
        int_vq = x[o + 10]
        int_id = x[o + 11]
        int_iq = x[o + 12]

        ref_u = pref * up[u, UP_SHARE] / up[u, UP_SRATIO]
        if ref_u > up[u, UP_REFCAP]:
            ref_u = up[u, UP_REFCAP]

        w_ref = up[u, UP_WREF]
        omega_u = w_ref * (1.0 + up[u, UP_KP] * (ref_u - p_f))
        w_pu = omega_u / omega_b

        # Measurements rotated into the controller frame.
        ct = math.cos(theta)
        st = math.sin(theta)
        vm_d = v_cf_d * ct + v_cf_q * st
        vm_q = v_cf_q * ct - v_cf_d * st
        im_d = i_lf_d * ct + i_lf_q * st
        im_q = i_lf_q * ct - i_lf_d * st
        io_d = i_lg_d * ct + i_lg_q * st
        io_q = i_lg_q * ct - i_lg_d * st

        if up[u, UP_EXACT] > 0.5:
            p_raw = vm_d * io_d + vm_q * io_q
            q_raw = -vm_d * io_q + vm_q * io_d
        else:
            p_raw = vm_d * io_d
            q_raw = -vm_d * io_q

        dx[o + 7] = up[u, UP_WP] * (p_raw - p_f)
        dx[o + 8] = up[u, UP_WQ] * (q_raw - q_f)
        dx[o + 6] = omega_u - omega_b

        v_mag_ref = up[u, UP_VREF] + up[u, UP_KQ] * (up[u, UP_QREF] - q_f)

        # Voltage loop -> current reference.
        i_lim = up[u, UP_ILIM]
        e_vd = v_mag_ref - vm_d
        e_vq = -vm_q
        u_vd = up[u, UP_KPV] * e_vd + up[u, UP_KIV] * int_vd
        u_vq = up[u, UP_KPV] * e_vq + up[u, UP_KIV] * int_vq
        f_vd = 1.0
        f_vq = 1.0
        if abs(u_vd) > i_lim and u_vd * e_vd > 0.0:
            f_vd = 0.0
        if abs(u_vq) > i_lim and u_vq * e_vq > 0.0:
            f_vq = 0.0
        if u_vd > i_lim:
            u_vd = i_lim
        elif u_vd < -i_lim:
            u_vd = -i_lim
        if u_vq > i_lim:
            u_vq = i_lim
        elif u_vq < -i_lim:
            u_vq = -i_lim
        cross_c = w_pu * up[u, UP_BC]
        ir_d = u_vd - cross_c * vm_q + up[u, UP_FF] * io_d
        ir_q = u_vq + cross_c * vm_d + up[u, UP_FF] * io_q
        ir_mag = math.sqrt(ir_d * ir_d + ir_q * ir_q)
        if ir_mag > i_lim:
            s = i_lim / ir_mag
            ir_d *= s
            ir_q *= s
        dx[o + 9] = e_vd * f_vd
        dx[o + 10] = e_vq * f_vq

        # Current loop -> modulation voltage.
        v_lim = up[u, UP_VLIM]
        e_id = ir_d - im_d
        e_iq = ir_q - im_q
        u_id = up[u, UP_KPI] * e_id + up[u, UP_KII] * int_id
        u_iq = up[u, UP_KPI] * e_iq + up[u, UP_KII] * int_iq
        f_id = 1.0
        f_iq = 1.0
        if abs(u_id) > v_lim and u_id * e_id > 0.0:
            f_id = 0.0
        if abs(u_iq) > v_lim and u_iq * e_iq > 0.0:
            f_iq = 0.0
        if u_id > v_lim:
            u_id = v_lim
        elif u_id < -v_lim:
            u_id = -v_lim
        if u_iq > v_lim:
            u_iq = v_lim
        elif u_iq < -v_lim:
            u_iq = -v_lim
        cross_l = w_pu * up[u, UP_XLF]
        vr_d = u_id - cross_l * im_q + vm_d
        vr_q = u_iq + cross_l * im_d + vm_q
        vr_mag = math.sqrt(vr_d * vr_d + vr_q * vr_q)
        if vr_mag > v_lim:
            s = v_lim / vr_mag
            vr_d *= s
            vr_q *= s
        dx[o + 11] = e_id * f_id
        dx[o + 12] = e_iq * f_iq

        # Modulation voltage back to the common frame (averaged bridge).
        vmod_d = vr_d * ct - vr_q * st
        vmod_q = vr_d * st + vr_q * ct

        # Filter dynamics in the common frame (rotating at omega_b).
        l_f = up[u, UP_LF]
        c_f = up[u, UP_CF]
        l_g = up[u, UP_LG]
        r_f = up[u, UP_RF]
        r_g = up[u, UP_RG]
        dx[o + 0] = (vmod_d - v_cf_d - r_f * i_lf_d) / l_f + omega_b * i_lf_q
        dx[o + 1] = (vmod_q - v_cf_q - r_f * i_lf_q) / l_f - omega_b * i_lf_d
        dx[o + 2] = (i_lf_d - i_lg_d) / c_f + omega_b * v_cf_q
        dx[o + 3] = (i_lf_q - i_lg_q) / c_f - omega_b * v_cf_d
        dx[o + 4] = (v_cf_d - v_d - r_g * i_lg_d) / l_g + omega_b * i_lg_q
        dx[o + 5] = (v_cf_q - v_q - r_g * i_lg_q) / l_g - omega_b * i_lg_d

    return STATUS_OK


@njit(cache=True)
def _measure(
    x, row, t, n_units, up, pref,
    fscale, closed, active, fault_on,
    e_mag, x_th, omega_b, f_n, s_sys,
):
    """Record one trace row at the current state; returns a status code."""
    status, v_d, v_q, e_d, e_q, ig_d, ig_q = _bus(
        x, n_units, up, closed, active, fscale, e_mag, x_th
    )
    if status != STATUS_OK:
        return status
    nb = 13 * n_units
    mw = s_sys / 1e6

    row[0] = t
    row[1] = math.sqrt(v_d * v_d + v_q * v_q)

    if active and n_units > 0:
        f_sum = 0.0
        for u in range(n_units):
            o = 13 * u
            ref_u = pref * up[u, UP_SHARE] / up[u, UP_SRATIO]
            if ref_u > up[u, UP_REFCAP]:
                ref_u = up[u, UP_REFCAP]
            omega_u = up[u, UP_WREF] * (1.0 + up[u, UP_KP] * (ref_u - x[o + 7]))
            f_sum += omega_u / TWO_PI
        row[2] = f_sum / n_units
    else:
        row[2] = x[nb + 1] * f_n

    p_units = 0.0
    for u in range(n_units):
        o = 13 * u
        if active:
            inj_d = x[o + 4] * up[u, UP_SRATIO]
            inj_q = x[o + 5] * up[u, UP_SRATIO]
        else:
            inj_d = 0.0
            inj_q = 0.0
        p_u = v_d * inj_d + v_q * inj_q
        q_u = v_q * inj_d - v_d * inj_q
        p_units += p_u
        row[3 + u] = p_u * mw
        row[3 + n_units + u] = q_u * mw

    p_grid = v_d * ig_d + v_q * ig_q
    g_l = x[nb + 3]
    b_l = x[nb + 4]
    il_d = g_l * v_d + b_l * v_q
    il_q = g_l * v_q - b_l * v_d
    p_load = v_d * il_d + v_q * il_q

    row[3 + 2 * n_units] = p_grid * mw
    row[4 + 2 * n_units] = p_load * mw
    row[5 + 2 * n_units] = 1.0 if fault_on else 0.0
    row[6 + 2 * n_units] = 1.0 if closed else 0.0
    row[7 + 2 * n_units] = p_grid + p_units - p_load  # KCL power residual [pu]
    return STATUS_OK


@njit(cache=True)
def simulate(
    x, n_units, up, n_steps, dt, decim,
    dem_step, dem_mid, pref_step, pref_mid, q_dem,
    k_fault_on, k_fault_off, fault_residual,
    k_brk_open, brk_init_closed, bess_on,
    e_mag, x_th, h, damp, r_gov, t_disp,
    omega_b, f_n, w_load, i_cap, v_floor,
    s_sys, rec,
):
    """Fixed-step RK4 over the whole run; returns (status, k_stop, n_rec)."""
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xt = np.empty(n)
    active = bess_on and n_units > 0
    nb = 13 * n_units
    n_rec = 0

    for k in range(n_steps):
        fault_on = k_fault_on >= 0 and k >= k_fault_on and k < k_fault_off
        fscale = fault_residual if fault_on else 1.0
        closed = brk_init_closed and (k_brk_open < 0 or k < k_brk_open)

        if k % decim == 0:
            status = _measure(
                x, rec[n_rec], k * dt, n_units, up, pref_step[k],
                fscale, closed, active, fault_on,
                e_mag, x_th, omega_b, f_n, s_sys,
            )
            if status != STATUS_OK:
                return status, k, n_rec
            n_rec += 1

        status = _rhs(
            x, k1, n_units, up, dem_step[k], pref_step[k], q_dem,
            fscale, closed, active, e_mag, x_th, h, damp, r_gov, t_disp,
            omega_b, w_load, i_cap, v_floor,
        )
        if status != STATUS_OK:
            return status, k, n_rec
        half = 0.5 * dt
        for i in range(n):
            xt[i] = x[i] + half * k1[i]
        status = _rhs(
            xt, k2, n_units, up, dem_mid[k], pref_mid[k], q_dem,
            fscale, closed, active, e_mag, x_th, h, damp, r_gov, t_disp,
            omega_b, w_load, i_cap, v_floor,
        )
        if status != STATUS_OK:
            return status, k, n_rec
        for i in range(n):
            xt[i] = x[i] + half * k2[i]
        status = _rhs(
            xt, k3, n_units, up, dem_mid[k], pref_mid[k], q_dem,
            fscale, closed, active, e_mag, x_th, h, damp, r_gov, t_disp,
            omega_b, w_load, i_cap, v_floor,
        )
        if status != STATUS_OK:
            return status, k, n_rec
        for i in range(n):
            xt[i] = x[i] + dt * k3[i]
        status = _rhs(
            xt, k4, n_units, up, dem_step[k + 1], pref_step[k + 1], q_dem,
            fscale, closed, active, e_mag, x_th, h, damp, r_gov, t_disp,
            omega_b, w_load, i_cap, v_floor,
        )
        if status != STATUS_OK:
            return status, k, n_rec
        sixth = dt / 6.0
        for i in range(n):
            x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

        # Keep angles bounded; only their sines/cosines are ever used.
        for u in range(n_units):
            o = 13 * u
            th = x[o + 6] % TWO_PI
            if th > math.pi:
                th -= TWO_PI
            x[o + 6] = th
        d = x[nb + 0] % TWO_PI
        if d > math.pi:
            d -= TWO_PI
        x[nb + 0] = d

        # Divergence detector (NaN fails the <= comparison).
        if active:
            for u in range(n_units):
                o = 13 * u
                for j in range(6):
                    if not abs(x[o + j]) <= PLANT_LIMIT:
                        return STATUS_DIVERGED, k + 1, n_rec
        if not abs(x[nb + 1] - 1.0) <= GRID_BAND:
            return STATUS_DIVERGED, k + 1, n_rec

    if n_steps % decim == 0:
        fault_on = k_fault_on >= 0 and n_steps >= k_fault_on and n_steps < k_fault_off
        fscale = fault_residual if fault_on else 1.0
        closed = brk_init_closed and (k_brk_open < 0 or n_steps < k_brk_open)
        status = _measure(
            x, rec[n_rec], n_steps * dt, n_units, up, pref_step[n_steps],
            fscale, closed, active, fault_on,
            e_mag, x_th, omega_b, f_n, s_sys,
        )
        if status != STATUS_OK:
            return status, n_steps, n_rec
        n_rec += 1

    return STATUS_OK, n_steps, n_rec
