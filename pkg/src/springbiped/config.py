"""Flat key-value configuration files and the named experiment presets.

Format: INI-style sections with one ``key = value`` per line, parsed with
:mod:`configparser`.  A file names a preset (``GAS+SOL``, ``SOL``, ``GAS`` or
``custom``) and may override any schema key; unspecified keys take the preset
or package defaults.  ``save_config`` writes every resolved value with
round-trip-exact float formatting, so load -> save -> load is an identity.

The full schema (section, key, meaning, default) is documented in the README.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .cpg import CpgParams, cpg_preset
from .dynamics import SimSettings
from .morphology import (
    PRESET_NAMES,
    RobotModel,
    TendonConfig,
    preset_total_mass,
    robot_model,
    tendon_preset,
    validate,
    with_total_mass,
)


class ConfigError(ValueError):
    """Unparseable or invalid configuration."""


@dataclass(frozen=True)
class Bundle:
    """Everything needed to run one trial."""

    robot: RobotModel
    tendons: TendonConfig
    cpg: CpgParams
    sim: SimSettings


# (section, key) -> (bundle part, attribute, type)
_SCHEMA = {
    "robot": [
        ("total_mass_kg", "robot", "total_mass", float),
        ("toe_mass_fraction", "robot", "toe_mass_fraction", float),
    ],
    "tendons": [
        ("k_sol_n_per_m", "tendons", "k_sol", float),
        ("k_gas_n_per_m", "tendons", "k_gas", float),
        ("k_vas_n_per_m", "tendons", "k_vas", float),
        ("k_toe_nm_per_rad", "tendons", "k_toe", float),
        ("k_toe_tendon_n_per_m", "tendons", "k_toe_tendon", float),
        ("sol_rest_deg", "tendons", "sol_rest_deg", float),
        ("gas_rest_deg", "tendons", "gas_rest_deg", float),
        ("vas_rest_deg", "tendons", "vas_rest_deg", float),
        ("toe_rest_deg", "tendons", "toe_rest_deg", float),
        ("toe_tendon_engage_knee_deg", "tendons", "toe_tendon_engage_knee_deg", float),
        ("toe_tendon_arm_m", "tendons", "toe_tendon_arm", float),
    ],
    "cpg": [
        ("frequency_hz", "cpg", "frequency_hz", float),
        ("hip_duty_factor", "cpg", "hip_duty", float),
        ("knee_duty_factor", "cpg", "knee_duty", float),
        ("hip_amplitude_deg", "cpg", "hip_amplitude_deg", float),
        ("knee_amplitude_deg", "cpg", "knee_amplitude_deg", float),
        ("hip_offset_deg", "cpg", "hip_offset_deg", float),
        ("knee_offset_deg", "cpg", "knee_offset_deg", float),
        ("hip_swing_steady", "cpg", "hip_swing_steady", float),
        ("alpha_dyn", "cpg", "alpha_dyn", float),
    ],
    "simulation": [
        ("timestep_s", "sim", "timestep_s", float),
        ("integrator", "sim", "integrator", str),
        ("duration_s", "sim", "duration_s", float),
        ("discard_s", "sim", "discard_s", float),
        ("gravity", "sim", "gravity", float),
        ("contact_stiffness", "sim", "contact_stiffness", float),
        ("contact_damping", "sim", "contact_damping", float),
        ("friction_mu", "sim", "friction_mu", float),
        ("friction_stiffness", "sim", "friction_stiffness", float),
        ("friction_damping", "sim", "friction_damping", float),
        ("toe_contact_stiffness", "sim", "toe_contact_stiffness", float),
        ("toe_contact_damping", "sim", "toe_contact_damping", float),
        ("toe_friction_stiffness", "sim", "toe_friction_stiffness", float),
        ("toe_friction_damping", "sim", "toe_friction_damping", float),
        ("kp_hip", "sim", "kp_hip", float),
        ("kd_hip", "sim", "kd_hip", float),
        ("kp_knee", "sim", "kp_knee", float),
        ("kd_knee", "sim", "kd_knee", float),
        ("motor_torque_constant", "sim", "motor_torque_constant", float),
        ("motor_torque_limit", "sim", "motor_torque_limit", float),
        ("standby_power_w", "sim", "standby_power_w", float),
        ("initial_forward_speed", "sim", "initial_forward_speed", float),
        ("fall_height", "sim", "fall_height", float),
        ("ankle_bearing_damping", "sim", "ankle_bearing_damping", float),
        ("toe_bearing_damping", "sim", "toe_bearing_damping", float),
    ],
}

_SECTIONS = ("experiment", "robot", "tendons", "cpg", "simulation")


def preset_bundle(name: str) -> Bundle:
    """Fully resolved bundle for a named configuration (or 'custom')."""
    if name == "custom":
        return Bundle(robot=robot_model(2.22), tendons=TendonConfig(), cpg=CpgParams(), sim=SimSettings())
    try:
        tendons = tendon_preset(name)
        return Bundle(
            robot=robot_model(preset_total_mass(name)),
            tendons=tendons,
            cpg=cpg_preset(name),
            sim=SimSettings(),
        )
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> Bundle:
    """Parse, merge with preset defaults and validate a configuration file."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from None

    if not parser.sections():
        raise ConfigError(f"{path}: empty configuration (no sections)")
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}")

    preset = "custom"
    if parser.has_section("experiment"):
        for key in parser.options("experiment"):
            if key != "preset":
                raise ConfigError(f"{path}: unknown key {key!r} in section [experiment]")
        preset = parser.get("experiment", "preset", fallback="custom")
    bundle = preset_bundle(preset)

    overrides = {"robot": {}, "tendons": {}, "cpg": {}, "sim": {}}
    for section, entries in _SCHEMA.items():
        if not parser.has_section(section):
            continue
        known = {key: (part, attr, typ) for key, part, attr, typ in entries}
        for key in parser.options(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            part, attr, typ = known[key]
            raw = parser.get(section, key)
            try:
                value = typ(raw)
            except ValueError:
                raise ConfigError(
                    f"{path}: [{section}] {key}: cannot parse {raw!r} as {typ.__name__}"
                ) from None
            overrides[part][attr] = value

    robot = bundle.robot
    if "total_mass" in overrides["robot"]:
        robot = with_total_mass(robot, overrides["robot"].pop("total_mass"))
    if overrides["robot"]:
        robot = replace(robot, **overrides["robot"])
    try:
        tendons = replace(bundle.tendons, **overrides["tendons"])
        cpg = replace(bundle.cpg, **overrides["cpg"])
        sim = replace(bundle.sim, **overrides["sim"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    report = validate(robot, tendons)
    if not report.ok:
        raise ConfigError(f"{path}: invalid configuration: " + "; ".join(report.violations))
    return Bundle(robot=robot, tendons=tendons, cpg=cpg, sim=sim)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def save_config(bundle: Bundle, path: str | Path) -> None:
    """Write every resolved value; floats use repr so reloading is exact."""
    parts = {"robot": bundle.robot, "tendons": bundle.tendons, "cpg": bundle.cpg, "sim": bundle.sim}
    lines = ["[experiment]", f"preset = {bundle.tendons.name}", ""]
    for section in ("robot", "tendons", "cpg", "simulation"):
        lines.append(f"[{section}]")
        for key, part, attr, _ in _SCHEMA[section]:
            lines.append(f"{key} = {_fmt(getattr(parts[part], attr))}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def resolve(source: str) -> Bundle:
    """Accept either a preset name or a config-file path."""
    if source in PRESET_NAMES or source == "custom":
        return preset_bundle(source)
    if Path(source).exists():
        return load_config(source)
    raise ConfigError(
        f"{source!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor an existing config file"
    )
