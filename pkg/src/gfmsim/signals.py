"""Signal-processing blocks shared by the controller and plant models.

Reference-frame transforms use the amplitude-invariant Park convention: a
balanced three-phase set of peak amplitude A whose phase-a angle equals theta
maps to (d, q) = (A, 0), and (d + jq) rotates as exp(j*(phase - theta)). With
this convention the dq power expressions hold in per-unit without a 3/2
factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

_TWO_THIRDS = 2.0 / 3.0
_SHIFT = 2.0 * math.pi / 3.0


@dataclass(frozen=True)
class AbcTriple:
    """Instantaneous phase quantities [pu]."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class DqPair:
    """Direct/quadrature components [pu]."""

    d: float
    q: float

    def magnitude(self) -> float:
        return math.hypot(self.d, self.q)


@dataclass(frozen=True)
class LpfState:
    """First-order low-pass filter: y' = omega_c * (u - y)."""

    y: float
    omega_c: float  # cutoff [rad/s]

    def __post_init__(self) -> None:
        if not self.omega_c > 0.0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c!r}")


@dataclass(frozen=True)
class PiState:
    """PI controller with symmetric output saturation and anti-windup.

    kp, ki : gains [pu]
    integ  : integrator state
    limit  : symmetric output bound [pu]
    """

    kp: float
    ki: float
    integ: float = 0.0
    limit: float = float("inf")

    def __post_init__(self) -> None:
        if self.kp < 0.0 or self.ki < 0.0:
            raise ValueError("gains must be >= 0")
        if not self.limit > 0.0:
            raise ValueError(f"limit must be > 0, got {self.limit!r}")


def park(abc: AbcTriple, theta: float) -> DqPair:
    """abc -> dq at frame angle theta (amplitude-invariant)."""
    ct, st = math.cos(theta), math.sin(theta)
    cm = math.cos(theta - _SHIFT)
    sm = math.sin(theta - _SHIFT)
    cp = math.cos(theta + _SHIFT)
    sp = math.sin(theta + _SHIFT)
    d = _TWO_THIRDS * (abc.a * ct + abc.b * cm + abc.c * cp)
    q = -_TWO_THIRDS * (abc.a * st + abc.b * sm + abc.c * sp)
    return DqPair(d, q)


def inverse_park(dq: DqPair, theta: float) -> AbcTriple:
    """dq -> abc at frame angle theta; park(inverse_park(x, t), t) == x."""
    ct, st = math.cos(theta), math.sin(theta)
    cm = math.cos(theta - _SHIFT)
    sm = math.sin(theta - _SHIFT)
    cp = math.cos(theta + _SHIFT)
    sp = math.sin(theta + _SHIFT)
    return AbcTriple(
        a=dq.d * ct - dq.q * st,
        b=dq.d * cm - dq.q * sm,
        c=dq.d * cp - dq.q * sp,
    )


def lpf_step(state: LpfState, u: float, dt: float, mode: str = "exact") -> LpfState:
    """Advance the filter by one step of width dt [s].

    "exact" uses the exponential discretization y <- u + (y - u)*exp(-wc*dt),
    stable for any dt. "euler" is the forward-Euler cross-check and requires
    dt*omega_c < 2.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if mode == "exact":
        y = u + (state.y - u) * math.exp(-state.omega_c * dt)
    elif mode == "euler":
        if dt * state.omega_c >= 2.0:
            raise ValueError(
                f"euler discretization unstable: dt*omega_c = {dt * state.omega_c:.3g} >= 2"
            )
        y = state.y + dt * state.omega_c * (u - state.y)
    else:
        raise ValueError(f"unknown lpf mode {mode!r}")
    return replace(state, y=y)


def pi_step(state: PiState, error: float, dt: float) -> tuple[PiState, float]:
    """Advance the PI by one step; returns (new state, saturated output).

    Conditional-integration anti-windup: the integrator holds whenever the
    output is saturated and the error would drive it further into saturation.
    The integrator itself is clamped so |ki * integ| never exceeds the limit.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    integ = state.integ + error * dt
    if state.ki > 0.0:
        bound = state.limit / state.ki
        integ = min(max(integ, -bound), bound)
    raw = state.kp * error + state.ki * integ
    if abs(raw) > state.limit and raw * error > 0.0:
        integ = state.integ  # hold: pushing deeper into saturation
        raw = state.kp * error + state.ki * integ
    output = min(max(raw, -state.limit), state.limit)
    return replace(state, integ=integ), output


def advance_angle(theta: float, omega: float, dt: float) -> float:
    """theta + omega*dt wrapped into (-pi, pi]."""
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    return wrap_angle(theta + omega * dt)


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = theta % (2.0 * math.pi)  # [0, 2*pi)
    if wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped
