"""Data-center demand traces: train/checkpoint cycles plus band-limited noise.

The synthetic profile cycles through an idle (checkpoint) plateau, a linear
ramp up to the training plateau, the training plateau, and a linear ramp back
down. Noise is seeded uniform white noise on a fixed internal grid passed
through a first-order low-pass and linearly interpolated, so it is a pure
function of (profile, t) independent of any simulation step size, and it can
never leave [-noise_amp, +noise_amp].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WorkloadProfile:
    """Synthetic train/checkpoint demand cycle [MW]."""

    p_idle: float
    p_train: float
    ramp_rate: float  # [MW/s]
    train_duration: float  # [s]
    checkpoint_duration: float  # [s]
    noise_amp: float = 0.0  # [MW]
    noise_bandwidth: float = 1.0  # [Hz]
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_idle <= self.p_train:
            raise ValueError("require 0 <= p_idle <= p_train")
        if not self.ramp_rate > 0.0:
            raise ValueError("ramp_rate must be > 0")
        if not (self.train_duration > 0.0 and self.checkpoint_duration > 0.0):
            raise ValueError("durations must be > 0")
        if self.noise_amp < 0.0:
            raise ValueError("noise_amp must be >= 0")
        if self.noise_amp > 0.0 and not self.noise_bandwidth > 0.0:
            raise ValueError("noise_bandwidth must be > 0 when noise is enabled")

    @property
    def ramp_duration(self) -> float:
        return (self.p_train - self.p_idle) / self.ramp_rate

    @property
    def cycle_duration(self) -> float:
        return self.checkpoint_duration + self.train_duration + 2.0 * self.ramp_duration

    def envelope(self, t):
        """Piecewise-linear cycle without noise; accepts scalars or arrays."""
        t = np.asarray(t, dtype=float)
        tau = np.mod(t, self.cycle_duration)
        ramp = self.ramp_duration
        t1 = self.checkpoint_duration          # idle plateau end
        t2 = t1 + ramp                          # ramp-up end
        t3 = t2 + self.train_duration           # training plateau end
        out = np.where(
            tau < t1,
            self.p_idle,
            np.where(
                tau < t2,
                self.p_idle + self.ramp_rate * (tau - t1),
                np.where(
                    tau < t3,
                    self.p_train,
                    self.p_train - self.ramp_rate * (tau - t3),
                ),
            ),
        )
        return out if out.ndim else float(out)

    def sample_mw(self, t):
        """Demand at time(s) t >= 0 [MW]; deterministic in (profile, t)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0):
            raise ValueError("t must be >= 0")
        power = self.envelope(t_arr)
        if self.noise_amp > 0.0:
            power = power + self._noise(t_arr)
        return power if np.ndim(power) else float(power)

    def _noise(self, t: np.ndarray) -> np.ndarray:
        # Fixed internal grid at 8x the noise bandwidth; uniform white noise
        # through an exponential smoother stays inside [-amp, amp] because
        # every output is a convex combination of the inputs.
        grid_dt = 1.0 / (8.0 * self.noise_bandwidth)
        n = int(np.max(t) / grid_dt) + 2
        rng = np.random.default_rng(self.seed)
        white = rng.uniform(-self.noise_amp, self.noise_amp, n)
        alpha = 1.0 - math.exp(-2.0 * math.pi * self.noise_bandwidth * grid_dt)
        smooth = np.empty(n)
        y = 0.0
        for k in range(n):
            y += alpha * (white[k] - y)
            smooth[k] = y
        return np.interp(t, np.arange(n) * grid_dt, smooth)


def sample_load(profile, t):
    """Demand of a WorkloadProfile or LoadTrace at time(s) t [MW]."""
    return profile.sample_mw(t)


@dataclass(frozen=True)
class LoadTrace:
    """Measured demand trace; linear interpolation, flat extrapolation."""

    t: np.ndarray
    p_mw: np.ndarray

    def sample_mw(self, t):
        out = np.interp(np.asarray(t, dtype=float), self.t, self.p_mw)
        return out if out.ndim else float(out)


def load_trace_csv(path) -> LoadTrace:
    """Read a two-column (t_seconds, p_megawatts) CSV with strictly increasing t.

    Rows starting with '#' and a single header row of non-numeric cells are
    skipped. Malformed rows and non-monotonic time raise ValueError naming the
    row number.
    """
    times: list[float] = []
    powers: list[float] = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {row_no}: expected 2 columns, got {len(row)}")
            try:
                t_val = float(row[0])
                p_val = float(row[1])
            except ValueError:
                if row_no == 1:
                    continue  # header row
                raise ValueError(f"{path}: row {row_no}: non-numeric value {row!r}") from None
            if times and t_val <= times[-1]:
                raise ValueError(
                    f"{path}: row {row_no}: time {t_val} not strictly increasing"
                )
            times.append(t_val)
            powers.append(p_val)
    if not times:
        raise ValueError(f"{path}: no data rows")
    return LoadTrace(t=np.asarray(times), p_mw=np.asarray(powers))
