"""Coupled phase oscillators and the hip/knee reference trajectories.

One oscillator per leg runs at a shared frequency; sinusoidal coupling pulls
the pair toward a half-cycle offset so one leg swings while the other stands.
Each oscillator phase is warped so that the stance-shaped part of a joint's
trajectory occupies a configurable fraction of the cycle (the duty factor),
then mapped through a cosine (hip) or sine (knee) to angle commands in
degrees.  Everything here is feed-forward: no state other than the phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CpgParams:
    """The eight gait parameters plus the oscillator network constants."""

    frequency_hz: float = 1.0
    hip_duty: float = 0.65  # fraction of the cycle holding the stance sweep
    knee_duty: float = 0.65  # fraction of the cycle with the knee held at offset
    hip_amplitude_deg: float = 30.0
    knee_amplitude_deg: float = 70.0
    hip_offset_deg: float = 5.0
    knee_offset_deg: float = 2.0
    hip_swing_steady: float = 0.05  # hold at the end of swing, fraction of cycle
    alpha_dyn: float = 5.0  # coupling gain, rad/s per unit weight
    coupling: tuple = ((0.0, 1.0), (1.0, 0.0))
    desired_phase_diff: tuple = ((0.0, math.pi), (math.pi, 0.0))

    def __post_init__(self):
        if not 0.0 < self.hip_duty < 1.0:
            raise ValueError(f"hip_duty must lie in (0, 1), got {self.hip_duty}")
        if not 0.0 < self.knee_duty < 1.0:
            raise ValueError(f"knee_duty must lie in (0, 1), got {self.knee_duty}")
        if not 0.0 <= self.hip_swing_steady < 1.0 - self.hip_duty:
            raise ValueError(
                "hip_swing_steady must lie in [0, 1 - hip_duty), got "
                f"{self.hip_swing_steady} with hip_duty {self.hip_duty}"
            )
        if self.frequency_hz <= 0.0:
            raise ValueError(f"frequency_hz must be positive, got {self.frequency_hz}")
        n = len(self.coupling)
        if any(len(row) != n for row in self.coupling) or len(self.desired_phase_diff) != n:
            raise ValueError("coupling and desired_phase_diff must be square and same size")


@dataclass(frozen=True)
class OscillatorState:
    phases: tuple  # rad, one per leg, wrapped to [0, 2*pi)
    time: float = 0.0


def initial_state(params: CpgParams) -> OscillatorState:
    """Both legs phase-locked from the start: left at 0, right half a cycle on."""
    n = len(params.coupling)
    return OscillatorState(phases=tuple((TWO_PI * i / 2.0) % TWO_PI for i in range(n)))


def phase_rates(state: OscillatorState, params: CpgParams):
    """Instantaneous phase velocities (rad/s) of every oscillator."""
    phases = state.phases
    base = TWO_PI * params.frequency_hz
    rates = []
    for i, phi_i in enumerate(phases):
        coupling = 0.0
        for j, phi_j in enumerate(phases):
            c = params.coupling[i][j]
            if c != 0.0:
                coupling += params.alpha_dyn * c * math.sin(phi_j - phi_i - params.desired_phase_diff[i][j])
        rates.append(base + coupling)
    return tuple(rates)


def step_phase(state: OscillatorState, params: CpgParams, dt: float) -> OscillatorState:
    """Advance the network one explicit-Euler step and wrap to [0, 2*pi)."""
    if not 0.0 < dt <= 1.0 / (100.0 * params.frequency_hz):
        raise ValueError(f"dt must lie in (0, 1/(100 f)], got {dt}")
    rates = phase_rates(state, params)
    new = []
    for phi, rate in zip(state.phases, rates):
        phi = phi + dt * rate
        if not math.isfinite(phi):
            raise FloatingPointError(f"oscillator phase became non-finite at t={state.time}")
        new.append(phi % TWO_PI)
    return OscillatorState(phases=tuple(new), time=state.time + dt)


def hip_phase(phi: float, hip_duty: float, hip_swing_steady: float) -> float:
    """Warp an oscillator phase into the hip's trajectory phase.

    Three pieces: a slow stance sweep over ``hip_duty`` of the cycle mapping
    to [0, pi], a faster swing sweep mapping to [pi, 2*pi], and a terminal
    hold at 2*pi for the last ``hip_swing_steady`` of the cycle.  Continuous
    at both joins.
    """
    if phi < TWO_PI * hip_duty:
        return phi / (2.0 * hip_duty)
    if phi < TWO_PI * (1.0 - hip_swing_steady):
        return (phi + TWO_PI * (1.0 - 2.0 * hip_duty - hip_swing_steady)) / (
            2.0 * (1.0 - hip_duty - hip_swing_steady)
        )
    return TWO_PI


def knee_phase(phi: float, knee_duty: float) -> float:
    """Knee trajectory phase: exactly 0 through stance, then a sweep to pi."""
    if phi < TWO_PI * knee_duty:
        return 0.0
    return (phi - TWO_PI * knee_duty) / (2.0 * (1.0 - knee_duty))


def hip_angle(warped: float, params: CpgParams) -> float:
    """Hip command in degrees at a warped phase in [0, 2*pi]."""
    return params.hip_amplitude_deg * math.cos(warped) + params.hip_offset_deg


def knee_angle(warped: float, params: CpgParams) -> float:
    """Knee command in degrees at a warped phase in [0, pi]."""
    return params.knee_amplitude_deg * math.sin(warped) + params.knee_offset_deg


def _hip_slope(phi: float, hip_duty: float, hip_swing_steady: float) -> float:
    # d(warped)/d(oscillator phase), piecewise constant
    if phi < TWO_PI * hip_duty:
        return 1.0 / (2.0 * hip_duty)
    if phi < TWO_PI * (1.0 - hip_swing_steady):
        return 1.0 / (2.0 * (1.0 - hip_duty - hip_swing_steady))
    return 0.0


def _knee_slope(phi: float, knee_duty: float) -> float:
    if phi < TWO_PI * knee_duty:
        return 0.0
    return 1.0 / (2.0 * (1.0 - knee_duty))


@dataclass(frozen=True)
class JointCommand:
    """Commanded hip/knee angle (deg) and angular rate (deg/s) for one leg."""

    hip_deg: float
    knee_deg: float
    hip_rate_dps: float = 0.0
    knee_rate_dps: float = 0.0


def leg_command(phi: float, phi_rate: float, params: CpgParams) -> JointCommand:
    """Evaluate both joint commands and their rates at one oscillator phase."""
    wh = hip_phase(phi, params.hip_duty, params.hip_swing_steady)
    wk = knee_phase(phi, params.knee_duty)
    hip = hip_angle(wh, params)
    knee = knee_angle(wk, params)
    hip_rate = -params.hip_amplitude_deg * math.sin(wh) * _hip_slope(
        phi, params.hip_duty, params.hip_swing_steady
    ) * phi_rate
    knee_rate = params.knee_amplitude_deg * math.cos(wk) * _knee_slope(phi, params.knee_duty) * phi_rate
    return JointCommand(hip, knee, hip_rate, knee_rate)


def reference_at(state: OscillatorState, params: CpgParams) -> dict:
    """Joint commands for both legs at the current oscillator state (degrees)."""
    rates = phase_rates(state, params)
    left = leg_command(state.phases[0], rates[0], params)
    right = leg_command(state.phases[1], rates[1], params)
    return {
        "hip_left": left.hip_deg,
        "hip_right": right.hip_deg,
        "knee_left": left.knee_deg,
        "knee_right": right.knee_deg,
    }


CPG_PRESETS = {
    "GAS+SOL": CpgParams(),
    "SOL": CpgParams(hip_offset_deg=2.5),
    "GAS": CpgParams(knee_duty=0.60, hip_amplitude_deg=27.5, hip_offset_deg=2.5),
}


def cpg_preset(name: str) -> CpgParams:
    if name not in CPG_PRESETS:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(CPG_PRESETS)}")
    return CPG_PRESETS[name]


TRAJECTORY_COLUMNS = (
    "time_s",
    "phase_left_rad",
    "phase_right_rad",
    "hip_phase_left_rad",
    "hip_phase_right_rad",
    "knee_phase_left_rad",
    "knee_phase_right_rad",
    "hip_left_deg",
    "hip_right_deg",
    "knee_left_deg",
    "knee_right_deg",
)


def trajectory_table(params: CpgParams, cycles: float = 1.0, dt: float = 1e-3) -> np.ndarray:
    """Tabulate commanded trajectories over ``cycles`` gait cycles.

    Integrates the oscillator network at the given step and returns one row
    per step with the columns in TRAJECTORY_COLUMNS order.
    """
    state = initial_state(params)
    n = int(round(cycles / (params.frequency_hz * dt)))
    out = np.empty((n + 1, len(TRAJECTORY_COLUMNS)))
    for i in range(n + 1):
        pl, pr = state.phases
        out[i] = (
            state.time,
            pl,
            pr,
            hip_phase(pl, params.hip_duty, params.hip_swing_steady),
            hip_phase(pr, params.hip_duty, params.hip_swing_steady),
            knee_phase(pl, params.knee_duty),
            knee_phase(pr, params.knee_duty),
            hip_angle(hip_phase(pl, params.hip_duty, params.hip_swing_steady), params),
            hip_angle(hip_phase(pr, params.hip_duty, params.hip_swing_steady), params),
            knee_angle(knee_phase(pl, params.knee_duty), params),
            knee_angle(knee_phase(pr, params.knee_duty), params),
        )
        if i < n:
            state = step_phase(state, params, dt)
    return out
