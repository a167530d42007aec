"""Passive torques and stored energies of the spring-tendon network.

Five elements: a monoarticular ankle plantarflexor spring (SOL), a biarticular
ankle/knee spring (GAS), a knee extensor spring parallel to the knee motor
(VAS), a rotational toe spring, and a stiff toe-lifting tendon that engages
only when the knee is flexed beyond a threshold (i.e. in swing).

All elements are ideal unilateral linear springs: they pull when stretched
past their rest configuration and go slack otherwise, so every torque is
continuous in the pose and reaches zero exactly at the engagement boundary.

Sign conventions match the joint coordinates used by the simulator: ankle
dorsiflexion, knee flexion and toe extension (toes up) are positive.  A taut
SOL or GAS therefore produces a negative (plantarflexing) ankle torque, a
taut GAS a positive (flexing) knee torque, and the VAS a negative (extending)
knee torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .morphology import RobotModel, TendonConfig

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class JointPose:
    """Joint state the tendon network responds to.

    Ankle and knee angles in rad, the toe angle in degrees (the toe spring is
    specified per degree), ankle rate in rad/s.
    """

    ankle_rad: float
    knee_rad: float
    toe_deg: float = 0.0
    ankle_rate: float = 0.0


@dataclass
class TendonForces:
    """Joint-conjugate torques (N*m) and per-element stored energies (J)."""

    tau_ankle_sol: float = 0.0
    tau_ankle_gas: float = 0.0
    tau_knee_gas: float = 0.0
    tau_knee_vas: float = 0.0
    tau_toe_spring: float = 0.0
    tau_toe_tendon: float = 0.0
    energy: dict = field(default_factory=dict)

    @property
    def total_energy(self) -> float:
        return sum(self.energy.values())


def sol_torque(ankle_rad: float, config: TendonConfig, model: RobotModel) -> float:
    """Ankle torque of the monoarticular plantarflexor spring (<= 0)."""
    if config.k_sol == 0.0:
        return 0.0
    stretch = ankle_rad - config.sol_rest_deg * _DEG
    if stretch <= 0.0:
        return 0.0
    r = model.pulley_radii["sol_ankle"]
    return -config.k_sol * r * r * stretch


def gas_torques(ankle_rad: float, knee_rad: float, config: TendonConfig, model: RobotModel):
    """(ankle, knee) torques of the biarticular spring.

    The tendon elongation is r * ((ankle - knee) - rest); when taut it
    plantarflexes the ankle and flexes the knee with equal magnitude.
    """
    if config.k_gas == 0.0:
        return 0.0, 0.0
    excursion = (ankle_rad - knee_rad) - config.gas_rest_deg * _DEG
    if excursion <= 0.0:
        return 0.0, 0.0
    r = model.pulley_radii["gas_ankle"]
    tau = config.k_gas * r * r * excursion
    return -tau, tau


def vas_torque(knee_rad: float, config: TendonConfig, model: RobotModel) -> float:
    """Knee torque of the extensor spring, engaged for any flexion (<= 0)."""
    stretch = knee_rad - config.vas_rest_deg * _DEG
    if config.k_vas == 0.0 or stretch <= 0.0:
        return 0.0
    r = model.pulley_radii["vas_knee"]
    return -config.k_vas * r * r * stretch


def toe_spring_torque(toe_deg: float, config: TendonConfig) -> float:
    """Rotational toe spring, resisting extension past its rest angle (<= 0)."""
    stretch_deg = toe_deg - config.toe_rest_deg
    if config.k_toe == 0.0 or stretch_deg <= 0.0:
        return 0.0
    return -config.k_toe * stretch_deg * _DEG


def _toe_tendon_stretch(knee_rad: float, toe_deg: float, config: TendonConfig) -> float:
    # cable elongation (m): lengthened by knee flexion past the engagement
    # angle, released by toe extension; slack through stance where the knee
    # stays below the threshold
    arm = config.toe_tendon_arm
    return arm * ((knee_rad - config.toe_tendon_engage_knee_deg * _DEG) - toe_deg * _DEG)


def toe_tendon_torque(knee_rad: float, toe_deg: float, config: TendonConfig) -> float:
    """Toe-lifting torque of the swing-phase tendon (>= 0 when engaged)."""
    if config.k_toe_tendon == 0.0:
        return 0.0
    if knee_rad <= config.toe_tendon_engage_knee_deg * _DEG:
        return 0.0
    stretch = _toe_tendon_stretch(knee_rad, toe_deg, config)
    if stretch <= 0.0:
        return 0.0
    return config.k_toe_tendon * config.toe_tendon_arm * stretch


def stored_energy(pose: JointPose, config: TendonConfig, model: RobotModel):
    """Elastic energy per element and in total (J); zero for slack elements."""
    energies = {}
    r_sol = model.pulley_radii["sol_ankle"]
    stretch = pose.ankle_rad - config.sol_rest_deg * _DEG
    energies["sol"] = 0.5 * config.k_sol * (r_sol * stretch) ** 2 if stretch > 0.0 else 0.0

    r_gas = model.pulley_radii["gas_ankle"]
    excursion = (pose.ankle_rad - pose.knee_rad) - config.gas_rest_deg * _DEG
    energies["gas"] = 0.5 * config.k_gas * (r_gas * excursion) ** 2 if excursion > 0.0 else 0.0

    r_vas = model.pulley_radii["vas_knee"]
    stretch = pose.knee_rad - config.vas_rest_deg * _DEG
    energies["vas"] = 0.5 * config.k_vas * (r_vas * stretch) ** 2 if stretch > 0.0 else 0.0

    stretch_deg = pose.toe_deg - config.toe_rest_deg
    energies["toe_spring"] = 0.5 * config.k_toe * (stretch_deg * _DEG) ** 2 if stretch_deg > 0.0 else 0.0

    if pose.knee_rad > config.toe_tendon_engage_knee_deg * _DEG:
        cable = _toe_tendon_stretch(pose.knee_rad, pose.toe_deg, config)
        energies["toe_tendon"] = 0.5 * config.k_toe_tendon * cable**2 if cable > 0.0 else 0.0
    else:
        energies["toe_tendon"] = 0.0

    return energies, sum(energies.values())


def compute_forces(pose: JointPose, config: TendonConfig, model: RobotModel) -> TendonForces:
    """Evaluate every element at one pose."""
    tau_a_gas, tau_k_gas = gas_torques(pose.ankle_rad, pose.knee_rad, config, model)
    energies, _ = stored_energy(pose, config, model)
    return TendonForces(
        tau_ankle_sol=sol_torque(pose.ankle_rad, config, model),
        tau_ankle_gas=tau_a_gas,
        tau_knee_gas=tau_k_gas,
        tau_knee_vas=vas_torque(pose.knee_rad, config, model),
        tau_toe_spring=toe_spring_torque(pose.toe_deg, config),
        tau_toe_tendon=toe_tendon_torque(pose.knee_rad, pose.toe_deg, config),
        energy=energies,
    )
