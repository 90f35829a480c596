"""Per-unit bases and output-filter sizing for converter units.

The converter rating defines the per-unit system (Z_base = V**2 / S) and the
output filter is sized so inductor and capacitor each present a fixed fraction
of Z_base (default 0.15) as reactance at nominal frequency. All control and
plant dynamics downstream run in per-unit on the unit's own base; fleet
aggregation converts to a common system base at the bus solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Filter reactance as a fraction of Z_base; kept configurable so sensitivity
# studies can sweep it.
DEFAULT_X_RATIO = 0.15
# Grid-side inductance as a fraction of L_f (no published sizing rule exists).
DEFAULT_LG_RATIO = 0.5

PU_KINDS = ("voltage", "current", "power", "impedance", "frequency")


@dataclass(frozen=True)
class PerUnitBase:
    """Nominal ratings defining a per-unit system.

    v_nominal : line-line RMS voltage [V]
    s_nominal : apparent power [VA]
    f_nominal : frequency [Hz]
    """

    v_nominal: float
    s_nominal: float
    f_nominal: float

    def __post_init__(self) -> None:
        for name in ("v_nominal", "s_nominal", "f_nominal"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def z_base(self) -> float:
        return compute_base_impedance(self)

    @property
    def i_base(self) -> float:
        """Line current base [A]."""
        return self.s_nominal / (math.sqrt(3.0) * self.v_nominal)

    @property
    def omega_base(self) -> float:
        """Nominal electrical angular frequency [rad/s]."""
        return 2.0 * math.pi * self.f_nominal


@dataclass(frozen=True)
class FilterParams:
    """Output L-C(-L) filter values in SI units.

    l_f : inverter-side inductance [H]
    c_f : shunt capacitance [F]
    l_g : grid-side inductance [H]
    """

    l_f: float
    c_f: float
    l_g: float

    def __post_init__(self) -> None:
        for name in ("l_f", "c_f", "l_g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")


def compute_base_impedance(base: PerUnitBase) -> float:
    """Base impedance from the converter rating: V**2 / S [ohm]."""
    return base.v_nominal ** 2 / base.s_nominal


def design_filter(
    z_base: float,
    f: float,
    l_g_ratio: float = DEFAULT_LG_RATIO,
    x_ratio: float = DEFAULT_X_RATIO,
) -> FilterParams:
    """Size the output filter from the base impedance.

    l_f = x_ratio * z_base / (2*pi*f)   (x_ratio pu reactance at nominal f)
    c_f = x_ratio / (2*pi*f * z_base)   (x_ratio pu susceptance at nominal f)
    l_g = l_g_ratio * l_f
    """
    if not (math.isfinite(z_base) and z_base > 0.0):
        raise ValueError(f"z_base must be finite and > 0, got {z_base!r}")
    if not (math.isfinite(f) and f > 0.0):
        raise ValueError(f"f must be finite and > 0, got {f!r}")
    if not (math.isfinite(x_ratio) and x_ratio > 0.0):
        raise ValueError(f"x_ratio must be finite and > 0, got {x_ratio!r}")
    if l_g_ratio < 0.0:
        raise ValueError(f"l_g_ratio must be >= 0, got {l_g_ratio!r}")
    omega = 2.0 * math.pi * f
    l_f = x_ratio * z_base / omega
    c_f = x_ratio / (omega * z_base)
    # l_g_ratio == 0 would merge the capacitor and bus nodes, which the plant
    # model does not support; FilterParams rejects it.
    return FilterParams(l_f=l_f, c_f=c_f, l_g=l_g_ratio * l_f)


def _base_value(base: PerUnitBase, kind: str) -> float:
    if kind == "voltage":
        return base.v_nominal
    if kind == "current":
        return base.i_base
    if kind == "power":
        return base.s_nominal
    if kind == "impedance":
        return base.z_base
    if kind == "frequency":
        return base.f_nominal
    raise ValueError(f"unknown per-unit kind {kind!r}, expected one of {PU_KINDS}")


def to_per_unit(value: float, base: PerUnitBase, kind: str) -> float:
    """Normalize an SI quantity onto the given base."""
    return value / _base_value(base, kind)


def from_per_unit(value: float, base: PerUnitBase, kind: str) -> float:
    """Scale a per-unit quantity back to SI units."""
    return value * _base_value(base, kind)
