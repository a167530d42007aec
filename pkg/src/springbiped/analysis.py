"""Gait measurement pipeline: cycle segmentation, averaging and energetics.

The pipeline mirrors how the hardware trials are evaluated: logs are
interpolated onto a uniform 1 kHz grid, cycles are cut at touch-down (the
moment the ankle starts dorsiflexing after swing), the steady-state window is
averaged over up to 100 cycles without any filtering, and the scalar metrics
are ankle power amplification, walking speed and the total/net positive-power
cost of transport.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION
from . import __version__ as _pkg_version
from .triallog import TrialLog

G = 9.81
_RAD2DEG = 180.0 / math.pi


class AnalysisError(ValueError):
    """Log unusable for gait analysis (too short, malformed, not walking)."""


# ----------------------------------------------------------------------
# resampling and segmentation


def resample_log(log: TrialLog, rate_hz: float = 1000.0) -> TrialLog:
    """Linear interpolation of every channel onto a uniform grid."""
    t = log.time
    if np.any(np.diff(t) <= 0.0):
        raise AnalysisError("log timestamps must be strictly increasing")
    n = int(math.floor((t[-1] - t[0]) * rate_hz)) + 1
    grid = t[0] + np.arange(n) / rate_hz
    data = np.empty((n, log.data.shape[1]))
    for j in range(log.data.shape[1]):
        data[:, j] = np.interp(grid, t, log.data[:, j])
    data[:, 0] = grid
    return TrialLog(data=data, meta=dict(log.meta), columns=log.columns)


def detect_touchdowns(
    time: np.ndarray,
    ankle_rate: np.ndarray,
    swing: np.ndarray,
    min_swing_s: float = 0.1,
    debounce_s: float = 0.05,
) -> np.ndarray:
    """Touch-down samples: first dorsiflexion-rate up-crossing after each swing.

    ``swing`` marks samples with the foot unloaded.  For every swing interval
    at least ``min_swing_s`` long, the first sample at or after its end where
    the ankle rate crosses from <= 0 to > 0 becomes one event; crossings
    closer than ``debounce_s`` to the previous event are ignored.  Raises
    AnalysisError when fewer than 3 events are found.
    """
    swing = np.asarray(swing, dtype=bool)
    n = len(time)
    if n < 3:
        raise AnalysisError("log too short for touch-down detection")
    dt = float(np.median(np.diff(time)))
    min_run = max(1, int(round(min_swing_s / dt)))
    debounce = max(1, int(round(debounce_s / dt)))

    # maximal swing runs [start, end) of sufficient length
    padded = np.concatenate(([False], swing, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    runs = [(a, b) for a, b in zip(edges[::2], edges[1::2]) if b - a >= min_run]

    crossing = np.flatnonzero((ankle_rate[:-1] <= 0.0) & (ankle_rate[1:] > 0.0)) + 1
    events = []
    for i, (_, end) in enumerate(runs):
        next_start = runs[i + 1][0] if i + 1 < len(runs) else n
        k = crossing[(crossing >= end) & (crossing < next_start)]
        if len(k) == 0:
            continue
        if events and k[0] - events[-1] < debounce:
            continue
        events.append(int(k[0]))
    if len(events) < 3:
        raise AnalysisError(f"only {len(events)} touch-down events detected, need at least 3")
    return np.asarray(events, dtype=int)


def segment_cycles(
    events: np.ndarray,
    time: np.ndarray,
    period_s: float,
    window: tuple,
    max_cycles: int = 100,
    duration_tol: float = 0.2,
) -> list:
    """(start, end) index pairs of complete cycles in the steady window.

    Cycles whose duration deviates from the nominal period by more than
    ``duration_tol`` (fraction) are dropped; at most the last ``max_cycles``
    survive.
    """
    t0, t1 = window
    cycles = []
    for a, b in zip(events[:-1], events[1:]):
        if time[a] < t0 or time[b] > t1:
            continue
        duration = time[b] - time[a]
        if abs(duration - period_s) > duration_tol * period_s:
            continue
        cycles.append((int(a), int(b)))
    return cycles[-max_cycles:]


def average_cycles(time: np.ndarray, channels: dict, bins: int = 1000):
    """Per-bin mean and population standard deviation over normalized cycles.

    ``channels`` maps a name to a list of ((start, end), series) entries, one
    per cycle.  Each cycle is linearly resampled onto ``bins`` points covering
    [0, 100)% of the cycle; no smoothing is applied.
    """
    frac = np.arange(bins) / bins
    out = {}
    for name, entries in channels.items():
        if not entries:
            raise AnalysisError(f"no cycles to average for channel {name!r}")
        samples = np.empty((len(entries), bins))
        for row, ((a, b), series) in enumerate(entries):
            tq = time[a] + frac * (time[b] - time[a])
            samples[row] = np.interp(tq, time[a : b + 1], series[a : b + 1])
        out[name] = (samples.mean(axis=0), samples.std(axis=0))
    return 100.0 * frac, out


# ----------------------------------------------------------------------
# energetics


def ankle_power(alpha_ankle, alpha_knee, ankle_rate, k_sol, k_gas, r_sol, r_gas):
    """Ankle joint power (W) from the spring states.

    With the biarticular element engaged (ankle excursion at or above knee
    flexion) both springs contribute; otherwise only the monoarticular one:

        P = w * (k_sol*r_sol^2*a + k_gas*r_gas^2*(a - k))   if a >= k
        P = w * k_sol*r_sol^2*a                             otherwise

    with angles in rad and the ankle rate in rad/s.
    """
    alpha_ankle = np.asarray(alpha_ankle, dtype=float)
    alpha_knee = np.asarray(alpha_knee, dtype=float)
    ankle_rate = np.asarray(ankle_rate, dtype=float)
    sol_term = k_sol * r_sol**2 * alpha_ankle
    gas_term = k_gas * r_gas**2 * (alpha_ankle - alpha_knee)
    return np.where(
        alpha_ankle >= alpha_knee,
        ankle_rate * (sol_term + gas_term),
        ankle_rate * sol_term,
    )


def power_amplification(curve: np.ndarray):
    """max(P)/|min(P)| plus peak timings in % cycle; None when undefined.

    Undefined when the curve lacks a positive or a negative excursion.
    """
    curve = np.asarray(curve, dtype=float)
    p_max = float(curve.max())
    p_min = float(curve.min())
    pos_pct = 100.0 * int(np.argmax(curve)) / len(curve)
    neg_pct = 100.0 * int(np.argmin(curve)) / len(curve)
    if p_max <= 0.0 or p_min >= 0.0:
        return None, pos_pct, neg_pct
    return p_max / abs(p_min), pos_pct, neg_pct


def cot_from_power(mean_positive_power_w: float, mass_kg: float, speed_mps: float, standby_w: float):
    """(total, net) cost of transport: P / (m g v), net with standby removed."""
    if speed_mps <= 0.0:
        raise AnalysisError(f"cost of transport needs a positive speed, got {speed_mps}")
    denom = mass_kg * G * speed_mps
    total = mean_positive_power_w / denom
    net = max(mean_positive_power_w - standby_w, 0.0) / denom
    return total, net


@dataclass(frozen=True)
class FroudeSpeeds:
    """Speed scales from the inverted-pendulum limit at a given leg length."""

    max_walk_mps: float  # Froude number 1
    transition_mps: float  # preferred walk/run transition, 2/3 of the limit
    test_mps: float  # half the transition speed


def froude_speeds(leg_length_m: float) -> FroudeSpeeds:
    if leg_length_m <= 0.0:
        raise ValueError(f"leg length must be positive, got {leg_length_m}")
    v_max = math.sqrt(G * leg_length_m)
    transition = 2.0 / 3.0 * v_max
    return FroudeSpeeds(v_max, transition, 0.5 * transition)


# ----------------------------------------------------------------------
# full-log analysis


@dataclass
class GaitReport:
    """Averaged curves and scalar gait metrics of one trial."""

    phase_pct: np.ndarray
    curves: dict  # name -> (mean, std) over the normalized cycle
    n_cycles: int
    speed_mps: float
    mean_positive_power_w: float
    cot_total: float
    cot_net: float
    amplification: float | None
    positive_peak_pct: float
    negative_peak_pct: float
    toe_off_pct: float
    ankle_df_at_knee_onset_deg: float | None
    knee_at_pushoff_onset_deg: float | None
    meta: dict = field(default_factory=dict)

    def scalars(self) -> dict:
        return {
            "schema_version": self.meta.get("schema_version", SCHEMA_VERSION),
            "springbiped_version": self.meta.get("springbiped_version", _pkg_version),
            "configuration": self.meta.get("configuration"),
            "n_cycles": self.n_cycles,
            "walking_speed_mps": self.speed_mps,
            "mean_positive_power_w": self.mean_positive_power_w,
            "cot_total": self.cot_total,
            "cot_net": self.cot_net,
            "ankle_power_amplification": self.amplification,
            "positive_peak_pct": self.positive_peak_pct,
            "negative_peak_pct": self.negative_peak_pct,
            "toe_off_pct": self.toe_off_pct,
            "ankle_df_at_knee_onset_deg": self.ankle_df_at_knee_onset_deg,
            "knee_at_pushoff_onset_deg": self.knee_at_pushoff_onset_deg,
        }


def walking_speed(log: TrialLog, window: tuple | None = None) -> float:
    """Mean forward trunk velocity over the steady window."""
    t = log.time
    if window is None:
        window = (float(log.meta.get("steady_start_s", 0.0)), float(t[-1]))
    mask = (t >= window[0]) & (t <= window[1])
    return float(log.column("trunk_vx_mps")[mask].mean())


def electrical_power(log: TrialLog) -> np.ndarray:
    """Reconstructed electrical draw: standby plus |torque * rate| per motor."""
    standby = float(log.meta.get("standby_power_w", 0.0))
    p = np.full(len(log), standby)
    for joint in ("hip_l", "knee_l", "hip_r", "knee_r"):
        p += np.abs(log.column(f"{joint}_torque_nm") * log.column(f"{joint}_radps"))
    return p


def cost_of_transport(log: TrialLog, window: tuple | None = None):
    """(total, net, mean positive power) for one trial log."""
    t = log.time
    if window is None:
        window = (float(log.meta.get("steady_start_s", 0.0)), float(t[-1]))
    mask = (t >= window[0]) & (t <= window[1])
    power = np.maximum(electrical_power(log)[mask], 0.0)
    mean_p = float(power.mean())
    mass = float(log.meta["model"]["total_mass_kg"])
    speed = walking_speed(log, window)
    standby = float(log.meta.get("standby_power_w", 0.0))
    total, net = cot_from_power(mean_p, mass, speed, standby)
    return total, net, mean_p


def _knee_onset_bin(knee_mean: np.ndarray, threshold_deg: float = 5.0):
    bins = len(knee_mean)
    hold = float(knee_mean[: bins // 2].min())
    lo, hi = int(0.30 * bins), int(0.95 * bins)
    above = knee_mean > hold + threshold_deg
    for k in range(lo, hi):
        if above[k] and above[k : k + 10].all():
            return k
    return None


def _pushoff_onset_bin(ankle_mean: np.ndarray):
    bins = len(ankle_mean)
    lo, hi = int(0.20 * bins), int(0.90 * bins)
    return lo + int(np.argmax(ankle_mean[lo:hi]))


def knee_ankle_phase_curve(report: GaitReport):
    """Counterclockwise (knee, ankle) coordination path with event markers."""
    knee = report.curves["knee_deg"][0]
    ankle = report.curves["ankle_deg"][0]
    path = np.column_stack([knee, ankle])
    markers = {
        "touchdown_pct": 0.0,
        "toe_off_pct": report.toe_off_pct,
        "ankle_df_at_knee_onset_deg": report.ankle_df_at_knee_onset_deg,
        "knee_at_pushoff_onset_deg": report.knee_at_pushoff_onset_deg,
    }
    return path, markers


def analyze(log: TrialLog, bins: int = 1000, max_cycles: int = 100, rate_hz: float = 1000.0) -> GaitReport:
    """Run the full pipeline on one trial log."""
    meta = log.meta
    for key in ("tendons", "model", "cpg"):
        if key not in meta:
            raise AnalysisError(f"log metadata lacks {key!r}; cannot analyze")
    if meta.get("fall"):
        raise AnalysisError("trial ended in a fall; no steady gait to analyze")

    log = resample_log(log, rate_hz)
    t = log.time
    f = float(meta["cpg"]["frequency_hz"])
    window = (float(meta.get("steady_start_s", 0.0)), float(t[-1]))

    k_sol = float(meta["tendons"]["k_sol"])
    k_gas = float(meta["tendons"]["k_gas"])
    radii = meta["model"]["pulley_radii_m"]
    r_sol, r_gas = float(radii["sol_ankle"]), float(radii["gas_ankle"])

    channels = {"hip_deg": [], "knee_deg": [], "ankle_deg": [], "ankle_power_w": []}
    toe_off_pcts = []
    all_cycles = 0
    for side in ("l", "r"):
        contact = log.column(f"contact_{side}")
        swing = contact < 0.5
        events = detect_touchdowns(t, log.column(f"ankle_{side}_radps"), swing)
        cycles = segment_cycles(events, t, 1.0 / f, window, max_cycles=max_cycles)
        if not cycles:
            continue
        all_cycles += len(cycles)
        hip = log.column(f"hip_{side}_rad") * _RAD2DEG
        knee = log.column(f"knee_{side}_rad") * _RAD2DEG
        ankle = log.column(f"ankle_{side}_rad") * _RAD2DEG
        power = ankle_power(
            log.column(f"ankle_{side}_rad"),
            log.column(f"knee_{side}_rad"),
            log.column(f"ankle_{side}_radps"),
            k_sol,
            k_gas,
            r_sol,
            r_gas,
        )
        for a, b in cycles:
            channels["hip_deg"].append(((a, b), hip))
            channels["knee_deg"].append(((a, b), knee))
            channels["ankle_deg"].append(((a, b), ankle))
            channels["ankle_power_w"].append(((a, b), power))
            loaded = np.flatnonzero(contact[a:b] > 0.5)
            drops = loaded[np.diff(np.append(loaded, b - a)) > 1]
            if len(drops):
                toe_off_pcts.append(100.0 * float(drops[-1]) / (b - a))

    if all_cycles < 3:
        raise AnalysisError(f"only {all_cycles} usable cycles in the steady window, need at least 3")

    phase_pct, curves = average_cycles(t, channels, bins)

    amp, pos_pct, neg_pct = power_amplification(curves["ankle_power_w"][0])
    knee_onset = _knee_onset_bin(curves["knee_deg"][0])
    ankle_at_onset = float(curves["ankle_deg"][0][knee_onset]) if knee_onset is not None else None
    push_bin = _pushoff_onset_bin(curves["ankle_deg"][0])
    knee_at_push = float(curves["knee_deg"][0][push_bin])

    speed = walking_speed(log, window)
    cot_total, cot_net, mean_p = cost_of_transport(log, window)

    report_meta = {
        "schema_version": meta.get("schema_version", SCHEMA_VERSION),
        "springbiped_version": meta.get("springbiped_version", _pkg_version),
        "configuration": meta.get("configuration"),
        "standby_power_w": meta.get("standby_power_w"),
        "total_mass_kg": meta["model"]["total_mass_kg"],
        "frequency_hz": f,
        "window_s": list(window),
    }
    return GaitReport(
        phase_pct=phase_pct,
        curves=curves,
        n_cycles=all_cycles,
        speed_mps=speed,
        mean_positive_power_w=mean_p,
        cot_total=cot_total,
        cot_net=cot_net,
        amplification=amp,
        positive_peak_pct=pos_pct,
        negative_peak_pct=neg_pct,
        toe_off_pct=float(np.mean(toe_off_pcts)) if toe_off_pcts else float("nan"),
        ankle_df_at_knee_onset_deg=ankle_at_onset,
        knee_at_pushoff_onset_deg=knee_at_push,
        meta=report_meta,
    )


# ----------------------------------------------------------------------
# report files


def write_report(report: GaitReport, stem: str | Path):
    """Write <stem>_metrics.json and <stem>_curves.csv; returns both paths."""
    stem = Path(stem)
    metrics_path = stem.parent / (stem.name + "_metrics.json")
    curves_path = stem.parent / (stem.name + "_curves.csv")

    metrics_path.write_text(json.dumps(report.scalars(), indent=2, sort_keys=True) + "\n")

    frame = {"phase_pct": report.phase_pct}
    for name in ("hip_deg", "knee_deg", "ankle_deg", "ankle_power_w"):
        mean, std = report.curves[name]
        frame[f"{name}_mean"] = mean
        frame[f"{name}_std"] = std
    pd.DataFrame(frame).to_csv(curves_path, index=False, float_format="%.10g", lineterminator="\n")
    return metrics_path, curves_path


def load_report(metrics_path: str | Path) -> dict:
    data = json.loads(Path(metrics_path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise AnalysisError(
            f"{metrics_path}: schema version {data.get('schema_version')!r} "
            f"does not match {SCHEMA_VERSION!r}"
        )
    return data


_COMPARE_ROWS = (
    ("ankle_power_amplification", "Ankle power amplification [-]"),
    ("walking_speed_mps", "Walking speed [m/s]"),
    ("cot_total", "Total positive-power CoT [-]"),
    ("cot_net", "Net positive-power CoT [-]"),
)


def compare_table(reports: list) -> tuple:
    """(header, rows) comparison across configurations, one metric per row."""
    if len(reports) < 2:
        raise AnalysisError(f"comparison needs at least 2 reports, got {len(reports)}")
    header = ["metric"] + [str(r.get("configuration")) for r in reports]
    rows = []
    for key, label in _COMPARE_ROWS:
        row = [label]
        for r in reports:
            value = r.get(key)
            row.append("n/a" if value is None else f"{value:.3f}")
        rows.append(row)
    return header, rows


def format_table(header: list, rows: list) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)
