import math

import numpy as np
import pytest

from gfmsim.per_unit import (
    FilterParams,
    PerUnitBase,
    compute_base_impedance,
    design_filter,
    from_per_unit,
    to_per_unit,
)


def test_base_impedance_unit_case():
    assert compute_base_impedance(PerUnitBase(1.0, 1.0, 60.0)) == 1.0


def test_base_impedance_mv_unit():
    z = compute_base_impedance(PerUnitBase(13800.0, 5e6, 60.0))
    assert z == pytest.approx(13800.0**2 / 5e6, rel=1e-15)
    assert z == pytest.approx(38.088, abs=1e-9)


def test_base_impedance_lv_unit():
    z = compute_base_impedance(PerUnitBase(480.0, 1e6, 60.0))
    assert z == pytest.approx(0.2304, abs=1e-12)


def test_base_impedance_homogeneous():
    rng = np.random.default_rng(11)
    for _ in range(100):
        v = rng.uniform(100.0, 5e5)
        s = rng.uniform(1e4, 1e8)
        k = rng.uniform(0.1, 10.0)
        z1 = compute_base_impedance(PerUnitBase(v, s, 60.0))
        z2 = compute_base_impedance(PerUnitBase(k * v, k * k * s, 60.0))
        assert z2 == pytest.approx(z1, rel=1e-12)


def test_design_filter_unit_omega():
    # 2*pi*f = 1 collapses the sizing rule to the bare ratio
    f = 1.0 / (2.0 * math.pi)
    filt = design_filter(1.0, f)
    assert filt.l_f == pytest.approx(0.15, rel=1e-12)
    assert filt.c_f == pytest.approx(0.15, rel=1e-12)


def test_design_filter_mv_values():
    filt = design_filter(38.088, 60.0)
    omega = 2.0 * math.pi * 60.0
    assert filt.l_f == pytest.approx(0.15 * 38.088 / omega, rel=1e-15)
    assert filt.c_f == pytest.approx(0.15 / (omega * 38.088), rel=1e-15)
    assert filt.l_f == pytest.approx(1.5155e-2, rel=1e-4)
    assert filt.c_f == pytest.approx(1.0447e-5, rel=1e-4)
    assert filt.l_g == pytest.approx(0.5 * filt.l_f, rel=1e-15)


def test_design_filter_unit_impedance():
    filt = design_filter(1.0, 60.0)
    assert filt.l_f == pytest.approx(3.9789e-4, rel=1e-4)
    assert filt.c_f == pytest.approx(3.9789e-4, rel=1e-4)


def test_design_filter_products_invariant():
    rng = np.random.default_rng(3)
    for _ in range(200):
        z = rng.uniform(1e-2, 1e3)
        f = rng.uniform(10.0, 400.0)
        filt = design_filter(z, f)
        omega = 2.0 * math.pi * f
        assert omega * filt.l_f / z == pytest.approx(0.15, rel=1e-12)
        assert omega * filt.c_f * z == pytest.approx(0.15, rel=1e-12)
        assert omega**2 * filt.l_f * filt.c_f == pytest.approx(0.0225, rel=1e-12)


def test_per_unit_round_trip():
    base = PerUnitBase(13800.0, 5e6, 60.0)
    rng = np.random.default_rng(5)
    for kind in ("voltage", "current", "power", "impedance", "frequency"):
        for _ in range(50):
            value = rng.uniform(1e-3, 1e7)
            pu = to_per_unit(value, base, kind)
            back = from_per_unit(pu, base, kind)
            assert back == pytest.approx(value, rel=1e-12)


def test_per_unit_power_examples():
    base = PerUnitBase(13800.0, 5e6, 60.0)
    assert to_per_unit(5e6, base, "power") == 1.0
    assert to_per_unit(2.5e6, base, "power") == 0.5
    assert to_per_unit(60.3, base, "frequency") == pytest.approx(1.005, rel=1e-12)


def test_invalid_base_rejected():
    with pytest.raises(ValueError):
        PerUnitBase(0.0, 5e6, 60.0)
    with pytest.raises(ValueError):
        PerUnitBase(13800.0, -1.0, 60.0)
    with pytest.raises(ValueError):
        PerUnitBase(13800.0, 5e6, float("nan"))


def test_design_filter_rejects_bad_inputs():
    with pytest.raises(ValueError):
        design_filter(0.0, 60.0)
    with pytest.raises(ValueError):
        design_filter(38.0, -60.0)
    with pytest.raises(ValueError):
        design_filter(38.0, 60.0, l_g_ratio=-0.1)
    with pytest.raises(ValueError):
        # zero grid-side inductance would merge the capacitor and bus nodes
        design_filter(38.0, 60.0, l_g_ratio=0.0)


def test_filter_params_positive():
    with pytest.raises(ValueError):
        FilterParams(1e-3, 1e-6, 0.0)


def test_unknown_kind_rejected():
    base = PerUnitBase(13800.0, 5e6, 60.0)
    with pytest.raises(ValueError):
        to_per_unit(1.0, base, "torque")
