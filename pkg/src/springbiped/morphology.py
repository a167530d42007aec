"""Physical description of the biped and the three named tendon setups.

All geometry is fixed by the robot design; only the ankle spring stiffnesses
and the total mass differ between the named configurations.  Quantities that
the design sheet states as ratios (trunk length, foot height, segment masses)
are derived here so the rest of the package only sees resolved SI values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

GRAVITY = 9.81  # m/s^2

# segment geometry shared by every configuration (m)
THIGH_LENGTH = 0.160
SHANK_LENGTH = 0.160
HEEL_LENGTH = 0.048  # ankle to heel contact, along the sole
METATARSAL_LENGTH = 0.024  # ankle to toe hinge, along the sole
TOE_LENGTH = 0.024  # toe hinge to toe tip
LEG_LENGTH = 0.35  # hip axis to ground in upright stance

# cable pulley radii at the joints (m)
R_SOL = 0.013
R_GAS = 0.013
R_VAS = 0.012

# segment weight ratios, normalised to one foot
WEIGHT_RATIOS = {"trunk": 9.42, "thigh": 6.68, "shank": 1.76, "foot": 1.00}

# length ratios fix the two dimensions not given directly: one ratio unit
# equals thigh_length / 5.82
_LENGTH_UNIT = THIGH_LENGTH / 5.82
TRUNK_LENGTH = 5.09 * _LENGTH_UNIT  # ~0.140 m
FOOT_HEIGHT = 1.00 * _LENGTH_UNIT  # ankle axis above the sole, ~0.0275 m

# joint range of motion, degrees (lo, hi); flexion positive for hip/knee,
# dorsiflexion positive for ankle, extension (toes up) positive for the toe.
# Ankle and toe ranges are design values; hip and knee stops are wide enough
# to clear every commanded trajectory and only act as safety stops.
DEFAULT_JOINT_LIMITS = {
    "hip": (-40.0, 120.0),
    "knee": (0.0, 120.0),
    "ankle": (-22.0, 15.0),
    "toe": (0.0, 45.0),
}

# rotational toe spring: 8.04 N*mm/deg expressed in N*m/rad
K_TOE = 8.04e-3 * (180.0 / math.pi)

PRESET_NAMES = ("GAS+SOL", "SOL", "GAS")


@dataclass(frozen=True)
class RobotModel:
    """Resolved planar model: lengths, masses, pulleys and joint stops."""

    thigh_length: float = THIGH_LENGTH
    shank_length: float = SHANK_LENGTH
    heel_length: float = HEEL_LENGTH
    metatarsal_length: float = METATARSAL_LENGTH
    toe_length: float = TOE_LENGTH
    trunk_length: float = TRUNK_LENGTH
    foot_height: float = FOOT_HEIGHT
    leg_length: float = LEG_LENGTH
    total_mass: float = 2.22
    segment_masses: dict = field(default_factory=dict)  # kg per trunk/thigh/shank/foot
    pulley_radii: dict = field(
        default_factory=lambda: {
            "sol_ankle": R_SOL,
            "gas_ankle": R_GAS,
            "gas_knee": R_GAS,
            "vas_knee": R_VAS,
        }
    )
    joint_limits: dict = field(default_factory=lambda: dict(DEFAULT_JOINT_LIMITS))
    # centre of mass location as a fraction of segment length from the
    # proximal end; mid-segment unless configured otherwise
    com_fractions: dict = field(
        default_factory=lambda: {"trunk": 0.5, "thigh": 0.5, "shank": 0.5, "foot": 0.5, "toe": 0.5}
    )
    # share of the foot mass carried by the hinged toe segment
    toe_mass_fraction: float = 0.25


@dataclass(frozen=True)
class TendonConfig:
    """Spring-tendon stiffnesses, rest angles and engagement thresholds.

    Linear stiffnesses in N/m, the toe spring in N*m/rad, angles in degrees.
    A zero stiffness removes that element entirely.
    """

    name: str = "custom"
    k_sol: float = 0.0
    k_gas: float = 0.0
    k_vas: float = 2160.0
    k_toe: float = K_TOE
    k_toe_tendon: float = 60e3
    sol_rest_deg: float = 0.0  # ankle angle where the SOL tendon goes slack
    gas_rest_deg: float = 0.0  # ankle-minus-knee excursion where GAS goes slack
    vas_rest_deg: float = 0.0
    toe_rest_deg: float = 15.0  # toe spring engages above this angle
    toe_tendon_engage_knee_deg: float = 20.0
    # effective moment arm of the toe-lifting tendon at both knee and toe;
    # not a design-sheet value, chosen small enough to keep the very light
    # toe segment stable at the 1 kHz default timestep
    toe_tendon_arm: float = 0.006


# stiffness/mass table for the three named setups: (k_sol, k_gas, total mass)
_PRESET_TABLE = {
    "GAS+SOL": (4500.0, 1400.0, 2.22),
    "SOL": (6100.0, 0.0, 2.05),
    "GAS": (0.0, 6100.0, 2.05),
}


def tendon_preset(name: str) -> TendonConfig:
    """Return the tendon setup for one of the named configurations."""
    if name not in _PRESET_TABLE:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}")
    k_sol, k_gas, _ = _PRESET_TABLE[name]
    return TendonConfig(name=name, k_sol=k_sol, k_gas=k_gas)


def preset_total_mass(name: str) -> float:
    if name not in _PRESET_TABLE:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}")
    return _PRESET_TABLE[name][2]


def derive_segment_masses(total_mass: float, weight_ratios: dict | None = None) -> dict:
    """Split the total mass over trunk + 2x(thigh, shank, foot) by ratio.

    The unit mass is total_mass / (r_trunk + 2*(r_thigh + r_shank + r_foot));
    each segment gets ratio * unit.  The returned masses are per single
    segment and satisfy trunk + 2*(thigh + shank + foot) == total_mass.
    """
    ratios = dict(WEIGHT_RATIOS if weight_ratios is None else weight_ratios)
    if total_mass <= 0.0:
        raise ValueError(f"total mass must be positive, got {total_mass}")
    for name in ("trunk", "thigh", "shank", "foot"):
        if name not in ratios:
            raise ValueError(f"missing weight ratio for {name!r}")
        if ratios[name] <= 0.0:
            raise ValueError(f"weight ratio for {name!r} must be positive, got {ratios[name]}")
    unit = total_mass / (ratios["trunk"] + 2.0 * (ratios["thigh"] + ratios["shank"] + ratios["foot"]))
    return {name: ratios[name] * unit for name in ("trunk", "thigh", "shank", "foot")}


def robot_model(total_mass: float = 2.22, **overrides) -> RobotModel:
    """Build a RobotModel with masses derived from the standard weight ratios."""
    model = RobotModel(total_mass=total_mass, segment_masses=derive_segment_masses(total_mass), **overrides)
    return model


def preset_robot_model(name: str) -> RobotModel:
    return robot_model(total_mass=preset_total_mass(name))


@dataclass
class ValidationReport:
    """Outcome of a model/tendon consistency check.

    ``violations`` lists hard failures by field name; an empty list means the
    configuration is valid.  ``advisories`` carries informational cross-checks
    (static load capacities) that are reported but never enforced.
    """

    violations: list = field(default_factory=list)
    advisories: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(model: RobotModel, tendons: TendonConfig) -> ValidationReport:
    """Check every structural invariant; failures are reported, not raised."""
    report = ValidationReport()
    v = report.violations

    for attr in (
        "thigh_length",
        "shank_length",
        "heel_length",
        "metatarsal_length",
        "toe_length",
        "trunk_length",
        "foot_height",
        "leg_length",
        "total_mass",
    ):
        value = getattr(model, attr)
        if not (value > 0.0) or not math.isfinite(value):
            v.append(f"{attr} must be strictly positive, got {value}")

    if abs(model.thigh_length - THIGH_LENGTH) > 1e-12 or abs(model.shank_length - SHANK_LENGTH) > 1e-12:
        v.append(f"thigh/shank length must equal {THIGH_LENGTH} m (design geometry)")
    if abs(model.heel_length - HEEL_LENGTH) > 1e-12:
        v.append(f"heel_length must equal {HEEL_LENGTH} m")
    if abs(model.toe_length - TOE_LENGTH) > 1e-12:
        v.append(f"toe_length must equal {TOE_LENGTH} m")

    for key, expected in (("sol_ankle", R_SOL), ("gas_ankle", R_GAS), ("gas_knee", R_GAS), ("vas_knee", R_VAS)):
        r = model.pulley_radii.get(key)
        if r is None or abs(r - expected) > 1e-12:
            v.append(f"pulley_radii[{key!r}] must equal {expected} m, got {r}")

    masses = model.segment_masses
    if set(masses) != {"trunk", "thigh", "shank", "foot"}:
        v.append(f"segment_masses must cover trunk/thigh/shank/foot, got {sorted(masses)}")
    else:
        for name, m in masses.items():
            if not (m > 0.0):
                v.append(f"segment mass {name!r} must be positive, got {m}")
        total = masses["trunk"] + 2.0 * (masses["thigh"] + masses["shank"] + masses["foot"])
        if abs(total - model.total_mass) > 1e-9:
            v.append(
                f"segment masses sum to {total!r} kg but total_mass is {model.total_mass!r} kg"
            )

    for joint, limits in model.joint_limits.items():
        lo, hi = limits
        if not lo < hi:
            v.append(f"joint_limits[{joint!r}] range is reversed or empty: ({lo}, {hi})")
    ankle = model.joint_limits.get("ankle")
    if ankle != (-22.0, 15.0):
        v.append(f"ankle joint limits must be (-22.0, 15.0) deg, got {ankle}")

    for attr in ("k_sol", "k_gas", "k_vas", "k_toe", "k_toe_tendon"):
        k = getattr(tendons, attr)
        if k < 0.0 or not math.isfinite(k):
            v.append(f"{attr} >= 0 violated, got {k}")

    if tendons.name in _PRESET_TABLE:
        k_sol, k_gas, mass = _PRESET_TABLE[tendons.name]
        if tendons.k_sol != k_sol or tendons.k_gas != k_gas:
            v.append(
                f"preset {tendons.name!r} requires k_sol={k_sol}, k_gas={k_gas}; "
                f"got k_sol={tendons.k_sol}, k_gas={tendons.k_gas}"
            )
        if abs(model.total_mass - mass) > 1e-12:
            v.append(f"preset {tendons.name!r} requires total_mass={mass} kg, got {model.total_mass}")
    elif tendons.name != "custom":
        v.append(f"unknown configuration name {tendons.name!r}")

    if report.ok:
        _static_advisories(model, tendons, report)
    return report


def _static_advisories(model: RobotModel, tendons: TendonConfig, report: ValidationReport) -> None:
    # informational: lever arm each element would need in order to carry the
    # design static loads (one third of body weight at the ankle/toe, one
    # tenth at the knee); reported because the arms are not design values.
    weight = model.total_mass * GRAVITY
    r_sol = model.pulley_radii["sol_ankle"]
    r_gas = model.pulley_radii["gas_ankle"]
    dorsi = math.radians(model.joint_limits["ankle"][1] - tendons.sol_rest_deg)
    tau_ankle = (tendons.k_sol * r_sol**2 + tendons.k_gas * r_gas**2) * dorsi
    if tau_ankle > 0.0:
        report.advisories.append(
            f"ankle springs at peak dorsiflexion give {tau_ankle:.3f} N*m; "
            f"supports weight/3 at a {1e3 * tau_ankle / (weight / 3.0):.1f} mm lever"
        )
    tau_vas = tendons.k_vas * model.pulley_radii["vas_knee"] ** 2 * math.radians(20.0)
    if tau_vas > 0.0:
        report.advisories.append(
            f"knee spring at 20 deg flexion gives {tau_vas:.3f} N*m; "
            f"supports weight/10 at a {1e3 * tau_vas / (weight / 10.0):.1f} mm lever"
        )
    tau_toe = tendons.k_toe * math.radians(model.joint_limits["toe"][1] - tendons.toe_rest_deg)
    if tau_toe > 0.0:
        report.advisories.append(
            f"toe spring at its 45 deg stop gives {tau_toe:.3f} N*m; "
            f"supports weight/3 at a {1e3 * tau_toe / (weight / 3.0):.1f} mm lever"
        )


def with_total_mass(model: RobotModel, total_mass: float) -> RobotModel:
    """Rescale the mass distribution to a new total, keeping the ratios."""
    return replace(model, total_mass=total_mass, segment_masses=derive_segment_masses(total_mass))
