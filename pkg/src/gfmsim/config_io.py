"""Scenario configuration as JSON: parsing with named diagnostics.

Every physical quantity carries an explicit unit suffix in its field name
(dt_s, p_idle_mw, x_th_pu, ...). Parsing is total: any invalid or missing
field raises ConfigError naming the offending path instead of crashing.
"""

from __future__ import annotations

import json
from pathlib import Path

from .control import DroopParams, LoopGains
from .engine import ScenarioConfig, UnitConfig
from .network import BreakerSpec, FaultSpec, GridEquivalent
from .per_unit import FilterParams, PerUnitBase, compute_base_impedance, design_filter
from .workload import WorkloadProfile, load_trace_csv

SCHEMA_VERSION = 1

_MISSING = object()


class ConfigError(ValueError):
    """Invalid configuration; the message names the field."""


def _require(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _number(d: dict, key: str, path: str, default=_MISSING) -> float:
    if key not in d:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _integer(d: dict, key: str, path: str, default=_MISSING) -> int:
    value = _number(d, key, path, default)
    if value != int(value):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    return int(value)


def _boolean(d: dict, key: str, path: str, default=_MISSING) -> bool:
    if key not in d:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = d[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected true/false, got {value!r}")
    return value


def _string(d: dict, key: str, path: str, default=_MISSING) -> str:
    if key not in d:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = d[key]
    if not isinstance(value, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {value!r}")
    return value


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_unit(d: dict, path: str, seed_default: int) -> tuple[UnitConfig, int]:
    count = _integer(d, "count", path, 1)
    if count < 1:
        raise ConfigError(f"{path}.count: must be >= 1")
    base = _wrap(
        path,
        PerUnitBase,
        _number(d, "v_nominal_v", path),
        _number(d, "s_nominal_va", path),
        _number(d, "f_nominal_hz", path),
    )
    fd = _require(d, "filter", path)
    fpath = f"{path}.filter"
    if "l_f_h" in fd:
        filt = _wrap(
            fpath,
            FilterParams,
            _number(fd, "l_f_h", fpath),
            _number(fd, "c_f_f", fpath),
            _number(fd, "l_g_h", fpath),
        )
    else:
        filt = _wrap(
            fpath,
            design_filter,
            compute_base_impedance(base),
            base.f_nominal,
            l_g_ratio=_number(fd, "l_g_ratio", fpath, 0.5),
            x_ratio=_number(fd, "x_ratio", fpath, 0.15),
        )
    r_f_pu = _number(fd, "r_f_pu", fpath, 0.0)
    r_g_pu = _number(fd, "r_g_pu", fpath, 0.0)

    dd = _require(d, "droop", path)
    dpath = f"{path}.droop"
    droop = _wrap(
        dpath,
        DroopParams,
        k_p=_number(dd, "k_p_pu", dpath),
        k_q=_number(dd, "k_q_pu", dpath),
        omega_p=_number(dd, "omega_p_rad_s", dpath),
        omega_q=_number(dd, "omega_q_rad_s", dpath),
        p_ref=0.0,
        q_ref=_number(dd, "q_ref_pu", dpath, 0.0),
        v_ref=_number(dd, "v_ref_pu", dpath, 1.0),
        omega_ref=base.omega_base,
    )
    gd = _require(d, "gains", path)
    gpath = f"{path}.gains"
    gains = _wrap(
        gpath,
        LoopGains,
        k_pv=_number(gd, "k_pv", gpath),
        k_iv=_number(gd, "k_iv", gpath),
        k_pi=_number(gd, "k_pi", gpath),
        k_ii=_number(gd, "k_ii", gpath),
        feed_forward=_number(gd, "feed_forward", gpath, 0.75),
        i_limit=_number(gd, "i_limit_pu", gpath, 1.2),
        v_limit=_number(gd, "v_limit_pu", gpath, 1.5),
    )
    measure_mode = _string(d, "measure_mode", path, "exact")
    if measure_mode not in ("exact", "approximate"):
        raise ConfigError(f"{path}.measure_mode: must be 'exact' or 'approximate'")
    unit = UnitConfig(
        base=base,
        filt=filt,
        droop=droop,
        gains=gains,
        r_f_pu=r_f_pu,
        r_g_pu=r_g_pu,
        measure_mode=measure_mode,
        p_ref_cap_pu=_number(d, "p_ref_cap_pu", path, 1.0),
    )
    return unit, count


def config_from_dict(d: dict, base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object at top level")
    version = _integer(d, "schema_version", "config", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.schema_version: unsupported version {version}")
    seed = _integer(d, "seed", "config", 0)

    units: list[UnitConfig] = []
    raw_units = d.get("units", [])
    if not isinstance(raw_units, list):
        raise ConfigError("config.units: expected a list")
    for i, ud in enumerate(raw_units):
        unit, count = _parse_unit(ud, f"config.units[{i}]", seed)
        units.extend([unit] * count)

    gd = _require(d, "grid", "config")
    grid = _wrap(
        "config.grid",
        GridEquivalent,
        e_mag=_number(gd, "e_mag_pu", "config.grid", 1.0),
        x_th=_number(gd, "x_th_pu", "config.grid"),
        h=_number(gd, "h_s", "config.grid"),
        d=_number(gd, "d_pu", "config.grid", 1.0),
        r_gov=_number(gd, "r_gov_pu", "config.grid"),
        t_dispatch=_number(gd, "t_dispatch_s", "config.grid", 0.0),
    )

    ld = _require(d, "load", "config")
    lpath = "config.load"
    if "constant_mw" in ld:
        load: object = _number(ld, "constant_mw", lpath)
        if load < 0.0:
            raise ConfigError(f"{lpath}.constant_mw: must be >= 0")
    elif "profile" in ld:
        pd = ld["profile"]
        ppath = f"{lpath}.profile"
        load = _wrap(
            ppath,
            WorkloadProfile,
            p_idle=_number(pd, "p_idle_mw", ppath),
            p_train=_number(pd, "p_train_mw", ppath),
            ramp_rate=_number(pd, "ramp_rate_mw_s", ppath),
            train_duration=_number(pd, "train_duration_s", ppath),
            checkpoint_duration=_number(pd, "checkpoint_duration_s", ppath),
            noise_amp=_number(pd, "noise_amp_mw", ppath, 0.0),
            noise_bandwidth=_number(pd, "noise_bandwidth_hz", ppath, 1.0),
            seed=_integer(pd, "seed", ppath, seed),
        )
    elif "trace_csv" in ld:
        rel = _string(ld, "trace_csv", lpath)
        trace_path = Path(rel)
        if base_dir is not None and not trace_path.is_absolute():
            trace_path = Path(base_dir) / trace_path
        load = _wrap(f"{lpath}.trace_csv", load_trace_csv, trace_path)
    else:
        raise ConfigError(f"{lpath}: need one of constant_mw / profile / trace_csv")

    rd = d.get("reference", {"mode": "follow_load"})
    rpath = "config.reference"
    mode = _string(rd, "mode", rpath, "follow_load")
    schedule = None
    if mode == "fixed":
        raw_sched = _require(rd, "schedule_mw", rpath)
        if not isinstance(raw_sched, list) or not raw_sched:
            raise ConfigError(f"{rpath}.schedule_mw: expected a non-empty list of [t_s, mw]")
        schedule = []
        for j, pair in enumerate(raw_sched):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ConfigError(f"{rpath}.schedule_mw[{j}]: expected [t_s, mw]")
            schedule.append((float(pair[0]), float(pair[1])))
    elif mode != "follow_load":
        raise ConfigError(f"{rpath}.mode: must be 'follow_load' or 'fixed'")

    ed = d.get("events", {})
    fault = None
    breaker = None
    if isinstance(ed, dict):
        fd = ed.get("fault")
        if fd is not None:
            fault = _wrap(
                "config.events.fault",
                FaultSpec,
                t_start=_number(fd, "t_start_s", "config.events.fault"),
                t_clear=_number(fd, "t_clear_s", "config.events.fault"),
                residual_v=_number(fd, "residual_v_pu", "config.events.fault"),
            )
        bd = ed.get("breaker")
        if bd is not None:
            breaker = _wrap(
                "config.events.breaker",
                BreakerSpec,
                t_open=_number(bd, "t_open_s", "config.events.breaker"),
                initially_closed=_boolean(bd, "initially_closed", "config.events.breaker", True),
            )
    elif ed is not None:
        raise ConfigError("config.events: expected an object")

    config = ScenarioConfig(
        duration_s=_number(d, "duration_s", "config"),
        units=units,
        grid=grid,
        load=load,
        dt_s=_number(d, "dt_s", "config", 1.0e-4),
        decimation=_integer(d, "decimation", "config", 10),
        seed=seed,
        system_base_va=_number(d, "system_base_va", "config", 40.0e6),
        bess_enabled=_boolean(d, "bess_enabled", "config", True),
        load_q_mvar=_number(d, "load_q_mvar", "config", 0.0),
        load_tau_s=_number(d, "load_tau_s", "config", 0.01),
        load_i_cap_pu=_number(d, "load_i_cap_pu", "config", 2.0),
        load_v_floor_pu=_number(d, "load_v_floor_pu", "config", 0.1),
        reference_mode=mode,
        reference_schedule_mw=schedule,
        fault=fault,
        breaker=breaker,
        label=_string(d, "label", "config", ""),
    )
    _wrap("config", config.validate)
    return config


def config_to_dict(config: ScenarioConfig) -> dict:
    """Canonical JSON form of a configuration (identical units grouped)."""
    units = []
    for unit in config.units:
        entry = {
            "v_nominal_v": unit.base.v_nominal,
            "s_nominal_va": unit.base.s_nominal,
            "f_nominal_hz": unit.base.f_nominal,
            "filter": {
                "l_f_h": unit.filt.l_f,
                "c_f_f": unit.filt.c_f,
                "l_g_h": unit.filt.l_g,
                "r_f_pu": unit.r_f_pu,
                "r_g_pu": unit.r_g_pu,
            },
            "droop": {
                "k_p_pu": unit.droop.k_p,
                "k_q_pu": unit.droop.k_q,
                "omega_p_rad_s": unit.droop.omega_p,
                "omega_q_rad_s": unit.droop.omega_q,
                "v_ref_pu": unit.droop.v_ref,
                "q_ref_pu": unit.droop.q_ref,
            },
            "gains": {
                "k_pv": unit.gains.k_pv,
                "k_iv": unit.gains.k_iv,
                "k_pi": unit.gains.k_pi,
                "k_ii": unit.gains.k_ii,
                "feed_forward": unit.gains.feed_forward,
                "i_limit_pu": unit.gains.i_limit,
                "v_limit_pu": unit.gains.v_limit,
            },
            "measure_mode": unit.measure_mode,
            "p_ref_cap_pu": unit.p_ref_cap_pu,
            "count": 1,
        }
        if units and {**units[-1], "count": 1} == entry:
            units[-1]["count"] += 1
        else:
            units.append(entry)

    if isinstance(config.load, (int, float)):
        load: dict = {"constant_mw": float(config.load)}
    elif isinstance(config.load, WorkloadProfile):
        load = {
            "profile": {
                "p_idle_mw": config.load.p_idle,
                "p_train_mw": config.load.p_train,
                "ramp_rate_mw_s": config.load.ramp_rate,
                "train_duration_s": config.load.train_duration,
                "checkpoint_duration_s": config.load.checkpoint_duration,
                "noise_amp_mw": config.load.noise_amp,
                "noise_bandwidth_hz": config.load.noise_bandwidth,
                "seed": config.load.seed,
            }
        }
    else:
        raise ConfigError(
            "config.load: a CSV-trace load cannot be serialized back to JSON"
        )

    out = {
        "schema_version": SCHEMA_VERSION,
        "label": config.label,
        "duration_s": config.duration_s,
        "dt_s": config.dt_s,
        "decimation": config.decimation,
        "seed": config.seed,
        "system_base_va": config.system_base_va,
        "bess_enabled": config.bess_enabled,
        "units": units,
        "grid": {
            "e_mag_pu": config.grid.e_mag,
            "x_th_pu": config.grid.x_th,
            "h_s": config.grid.h,
            "d_pu": config.grid.d,
            "r_gov_pu": config.grid.r_gov,
            "t_dispatch_s": config.grid.t_dispatch,
        },
        "load": load,
        "load_q_mvar": config.load_q_mvar,
        "load_tau_s": config.load_tau_s,
        "load_i_cap_pu": config.load_i_cap_pu,
        "load_v_floor_pu": config.load_v_floor_pu,
        "reference": (
            {"mode": "follow_load"}
            if config.reference_mode == "follow_load"
            else {
                "mode": "fixed",
                "schedule_mw": [[t, p] for t, p in config.reference_schedule_mw],
            }
        ),
        "events": {
            "fault": (
                None
                if config.fault is None
                else {
                    "t_start_s": config.fault.t_start,
                    "t_clear_s": config.fault.t_clear,
                    "residual_v_pu": config.fault.residual_v,
                }
            ),
            "breaker": (
                None
                if config.breaker is None
                else {
                    "t_open_s": config.breaker.t_open,
                    "initially_closed": config.breaker.initially_closed,
                }
            ),
        },
    }
    return out


def load_config_file(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, base_dir=p.parent)


def save_config_file(config: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")


def apply_override(d: dict, dotted_key: str, raw_value: str) -> None:
    """Apply a --set override onto the config dict; value parsed as JSON."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value  # bare strings allowed
    keys = dotted_key.split(".")
    target = d
    for key in keys[:-1]:
        nxt = target.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            target[key] = nxt
        target = nxt
    target[keys[-1]] = value
