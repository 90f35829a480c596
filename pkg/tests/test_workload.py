import numpy as np
import pytest

from gfmsim.workload import LoadTrace, WorkloadProfile, load_trace_csv, sample_load


def profile(**kw) -> WorkloadProfile:
    params = dict(
        p_idle=15.0, p_train=48.0, ramp_rate=10.0,
        train_duration=60.0, checkpoint_duration=15.0,
        noise_amp=0.0, noise_bandwidth=1.0, seed=42,
    )
    params.update(kw)
    return WorkloadProfile(**params)


class TestEnvelope:
    def test_training_plateau(self):
        p = profile()
        t_mid_train = p.checkpoint_duration + p.ramp_duration + 0.5 * p.train_duration
        assert p.sample_mw(t_mid_train) == pytest.approx(48.0, rel=1e-12)

    def test_ramp_midpoint(self):
        p = profile()
        t_mid_ramp = p.checkpoint_duration + 0.5 * p.ramp_duration
        assert p.sample_mw(t_mid_ramp) == pytest.approx((15.0 + 48.0) / 2.0, rel=1e-12)

    def test_idle_plateau(self):
        p = profile()
        assert p.sample_mw(0.5 * p.checkpoint_duration) == pytest.approx(15.0, rel=1e-12)

    def test_full_cycle_mean(self):
        p = profile()
        cycle = p.cycle_duration
        # duty-weighted closed form of the trapezoidal cycle
        ramp = p.ramp_duration
        expected = (
            p.p_idle * p.checkpoint_duration
            + p.p_train * p.train_duration
            + (p.p_idle + p.p_train) * ramp
        ) / cycle
        t = np.linspace(0.0, cycle, 200001)
        numeric = np.trapezoid(p.sample_mw(t), t) / cycle
        assert numeric == pytest.approx(expected, rel=1e-6)

    def test_periodicity(self):
        p = profile()
        t = np.linspace(0.0, p.cycle_duration, 1001)
        a = p.sample_mw(t)
        b = p.sample_mw(t + 3.0 * p.cycle_duration)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


class TestNoise:
    def test_deterministic(self):
        p = profile(noise_amp=2.0, seed=123)
        t = np.linspace(0.0, 100.0, 5001)
        a = p.sample_mw(t)
        b = p.sample_mw(t)
        assert np.array_equal(a, b)
        # scalar samples agree with vectorized ones
        assert p.sample_mw(37.5) == a[np.searchsorted(t, 37.5)]

    def test_seed_changes_noise(self):
        t = np.linspace(0.0, 50.0, 1001)
        a = profile(noise_amp=2.0, seed=1).sample_mw(t)
        b = profile(noise_amp=2.0, seed=2).sample_mw(t)
        assert not np.array_equal(a, b)

    def test_zero_amp_is_pure_envelope(self):
        p0 = profile(noise_amp=0.0)
        t = np.linspace(0.0, 120.0, 4001)
        np.testing.assert_array_equal(p0.sample_mw(t), p0.envelope(t))

    def test_bounds(self):
        p = profile(noise_amp=3.0, seed=9)
        t = np.linspace(0.0, 300.0, 30001)
        values = p.sample_mw(t)
        assert values.min() >= p.p_idle - p.noise_amp - 1e-12
        assert values.max() <= p.p_train + p.noise_amp + 1e-12

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            profile().sample_mw(-1.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        profile(p_idle=50.0, p_train=48.0)
    with pytest.raises(ValueError):
        profile(ramp_rate=0.0)
    with pytest.raises(ValueError):
        profile(noise_amp=-1.0)


class TestLoadTrace:
    def test_constant_trace(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,10\n10,10\n")
        trace = load_trace_csv(path)
        assert trace.sample_mw(5.0) == pytest.approx(10.0, rel=1e-12)

    def test_interpolation(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,0\n10,50\n")
        trace = load_trace_csv(path)
        assert trace.sample_mw(5.0) == pytest.approx(25.0, rel=1e-12)

    def test_flat_extrapolation(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,0\n10,50\n")
        trace = load_trace_csv(path)
        assert trace.sample_mw(20.0) == pytest.approx(50.0, rel=1e-12)
        assert trace.sample_mw(0.0) == pytest.approx(0.0, abs=1e-12)

    def test_header_and_comments_skipped(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# facility A\nt_seconds,p_megawatts\n0,5\n1,6\n")
        trace = load_trace_csv(path)
        assert trace.sample_mw(1.0) == 6.0

    def test_malformed_row_names_row_number(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,5\n1,abc\n")
        with pytest.raises(ValueError, match="row 2"):
            load_trace_csv(path)

    def test_non_monotonic_names_row_number(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,5\n2,6\n1,7\n")
        with pytest.raises(ValueError, match="row 3"):
            load_trace_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# nothing\n")
        with pytest.raises(ValueError, match="no data"):
            load_trace_csv(path)

    def test_sample_load_dispatch(self):
        trace = LoadTrace(t=np.array([0.0, 1.0]), p_mw=np.array([1.0, 3.0]))
        assert sample_load(trace, 0.5) == pytest.approx(2.0)
        assert sample_load(profile(), 0.0) == pytest.approx(15.0)
