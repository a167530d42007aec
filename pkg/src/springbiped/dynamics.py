"""Planar articulated rigid-body simulation of the biped.

The mechanism has 10 degrees of freedom: the trunk translates in the sagittal
plane (its rotations are locked by the guide frame, so pitch is structurally
zero) and each leg has hip, knee, ankle and toe revolute joints.  Hip and
knee are driven by PD current controllers through a linear torque constant
with saturation; ankle and toe are passive and loaded only by the
spring-tendon network, joint-limit stops and ground contact.

Equations of motion are assembled body by body from closed-form centre-of-
mass Jacobians (d'Alembert form), so the mass matrix and velocity-product
terms are exact.  Ground contact is a compliant normal spring-damper with an
anchored stick-slip Coulomb friction model at three points per foot (heel,
metatarsal, toe tip).  Integration is fixed-step semi-implicit Euler by
default (RK4 available); purely viscous joint terms are folded into the
velocity update implicitly, which keeps the very light toe segment stable at
the default 1 kHz step.  A trial is strictly deterministic: identical inputs
produce bit-identical logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import cpg as cpg_mod
from .morphology import RobotModel, TendonConfig
from .tendons import JointPose, compute_forces
from .triallog import COLUMNS, TrialLog

_DEG = math.pi / 180.0
_RAD2DEG = 180.0 / math.pi

COORD_NAMES = (
    "trunk_x",
    "trunk_z",
    "hip_l",
    "knee_l",
    "ankle_l",
    "toe_l",
    "hip_r",
    "knee_r",
    "ankle_r",
    "toe_r",
)

# column index of each leg's joint block: (hip, knee, ankle, toe)
_LEG_COLS = ((2, 3, 4, 5), (6, 7, 8, 9))


class SimulationError(RuntimeError):
    """Numerical blow-up or an otherwise unusable trial state."""


@dataclass(frozen=True)
class SimSettings:
    """Integration, contact, motor and protocol parameters.

    Contact and motor constants are calibration values of the simulator, not
    design-sheet numbers; they are exposed here so experiments can vary them.
    """

    timestep_s: float = 1e-3
    integrator: str = "semi-implicit-euler"  # or "rk4"
    gravity: float = 9.81

    # compliant ground: normal spring-damper, anchored tangential friction;
    # normal damping is folded implicitly into the velocity solve, so it can
    # be high enough for nearly dead impacts
    contact_stiffness: float = 12000.0  # N/m
    contact_damping: float = 120.0  # N*s/m
    friction_mu: float = 0.9
    friction_stiffness: float = 8000.0  # N/m toward the stick anchor
    friction_damping: float = 20.0
    # the toe tip gets a softer pad: the hinged toe is very light and a stiff
    # contact there would need a smaller timestep
    toe_contact_stiffness: float = 2500.0
    toe_contact_damping: float = 25.0
    toe_friction_stiffness: float = 2500.0
    toe_friction_damping: float = 8.0

    # PD current gains (A per degree, A per degree/s) and motor constants
    kp_hip: float = 30.0
    kd_hip: float = 0.2
    kp_knee: float = 15.0
    kd_knee: float = 0.2
    motor_torque_constant: float = 0.1  # N*m/A
    motor_torque_limit: float = 5.0  # N*m; below ~4 the stance hip stalls mid-vault

    # unilateral joint-limit stops (N*m/rad, N*m*s/rad); the toe stop is soft
    # on purpose, the toe's ground contact does the real work
    joint_stop_stiffness: dict = field(
        default_factory=lambda: {"hip": 25.0, "knee": 25.0, "ankle": 30.0, "toe": 1.5}
    )
    joint_stop_damping: dict = field(
        default_factory=lambda: {"hip": 0.3, "knee": 0.3, "ankle": 0.2, "toe": 0.003}
    )
    # bearing friction at the passive joints: a small viscous term plus
    # velocity-regularized dry friction (cable-on-pulley and bearing drag);
    # dry friction is what settles the freely dangling foot in swing without
    # braking the spring-driven push-off, whose torques are 10-50x larger
    ankle_bearing_damping: float = 0.02  # N*m*s/rad
    toe_bearing_damping: float = 0.002
    ankle_dry_friction: float = 0.02  # N*m
    toe_dry_friction: float = 0.001
    dry_friction_vel: float = 0.5  # rad/s regularization scale

    # trial protocol
    duration_s: float = 120.0
    discard_s: float = 18.0  # settling time excluded from analysis
    standby_power_w: float = 9.0  # electronics draw added to the power budget
    initial_forward_speed: float = 0.4  # m/s, gentle launch toward steady gait
    fall_height: float = 0.18  # trunk below this aborts the trial as a fall
    blowup_limit: float = 1e4

    # coordinates excluded from integration (held fixed), by COORD_NAME
    locked: tuple = ()

    def __post_init__(self):
        if self.timestep_s <= 0.0:
            raise ValueError(f"timestep must be positive, got {self.timestep_s}")
        if self.integrator not in ("semi-implicit-euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.duration_s < self.discard_s:
            raise ValueError("duration must cover the discard window")
        for name, value in (("contact_stiffness", self.contact_stiffness), ("friction_stiffness", self.friction_stiffness)):
            if value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        unknown = set(self.locked) - set(COORD_NAMES)
        if unknown:
            raise ValueError(f"unknown locked coordinates {sorted(unknown)}")


@dataclass
class MotorCommand:
    """Desired currents and saturated applied torques, order (hipL, kneeL, hipR, kneeR)."""

    current_a: np.ndarray
    torque_nm: np.ndarray


@dataclass
class SimState:
    """Full mechanical state plus per-contact-point stick anchors."""

    q: np.ndarray  # (10,) trunk x,z then hip/knee/ankle/toe per leg, rad
    v: np.ndarray  # (10,)
    time: float = 0.0
    # contact bookkeeping, point order: L heel, L met, L toe, R heel, R met, R toe
    anchor_x: np.ndarray = field(default_factory=lambda: np.zeros(6))
    in_contact: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=bool))

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.v.copy(), self.time, self.anchor_x.copy(), self.in_contact.copy())


def pd_current(error_deg: float, error_rate_dps: float, kp: float, kd: float) -> float:
    """Desired motor current from a tracking error and its rate."""
    return kp * error_deg + kd * error_rate_dps


def motor_torque(current_a: float, settings: SimSettings) -> float:
    """Linear torque map with symmetric saturation."""
    tau = settings.motor_torque_constant * current_a
    limit = settings.motor_torque_limit
    return max(-limit, min(limit, tau))


def contact_force(
    z: float,
    vz: float,
    x: float,
    vx: float,
    anchor_x: float,
    was_contact: bool,
    k_n: float,
    c_n: float,
    k_t: float,
    c_t: float,
    mu: float,
):
    """One contact point: (fx, fz, new_anchor, in_contact).

    Normal force k*depth + c*depth_rate clamped at zero (no adhesion);
    tangential force is a spring-damper toward the stick anchor, capped at
    mu*N; when the cap engages the anchor slides so the spring carries
    exactly the sliding force.
    """
    if z >= 0.0:
        return 0.0, 0.0, x, False
    depth = -z
    normal = k_n * depth - c_n * vz
    if normal <= 0.0:
        return 0.0, 0.0, x, True
    if not was_contact:
        anchor_x = x
    f_t = -k_t * (x - anchor_x) - c_t * vx
    cap = mu * normal
    if f_t > cap:
        f_t = cap
        anchor_x = x + f_t / k_t
    elif f_t < -cap:
        f_t = -cap
        anchor_x = x + f_t / k_t
    return f_t, normal, anchor_x, True


class Simulator:
    """Closed-form dynamics of one robot; stateless between calls to step()."""

    def __init__(self, model: RobotModel, tendons: TendonConfig, settings: SimSettings):
        self.model = model
        self.tendons = tendons
        self.settings = settings

        m = model.segment_masses
        self.m_trunk = m["trunk"]
        self.m_thigh = m["thigh"]
        self.m_shank = m["shank"]
        self.m_toe = model.toe_mass_fraction * m["foot"]
        self.m_foot = m["foot"] - self.m_toe

        self.lt = model.thigh_length
        self.ls = model.shank_length
        self.lh = model.heel_length
        self.lm = model.metatarsal_length
        self.lte = model.toe_length
        self.hf = model.foot_height

        cf = model.com_fractions
        self.ct = cf["thigh"]
        self.cs = cf["shank"]
        self.c_toe = cf["toe"]
        # foot centre of mass measured forward from the ankle along the sole
        self.of = -self.lh + cf["foot"] * (self.lh + self.lm)
        self.trunk_com_rise = cf["trunk"] * model.trunk_length

        sole = self.lh + self.lm
        self.i_thigh = self.m_thigh * self.lt**2 / 12.0
        self.i_shank = self.m_shank * self.ls**2 / 12.0
        self.i_foot = self.m_foot * sole**2 / 12.0
        self.i_toe = self.m_toe * self.lte**2 / 12.0

        self.total_mass = self.m_trunk + 2.0 * (self.m_thigh + self.m_shank + self.m_foot + self.m_toe)

        # joint limits in rad, per coordinate 2..9
        lim = model.joint_limits
        self.joint_lo = np.array(
            [lim[j][0] * _DEG for j in ("hip", "knee", "ankle", "toe")] * 2
        )
        self.joint_hi = np.array(
            [lim[j][1] * _DEG for j in ("hip", "knee", "ankle", "toe")] * 2
        )
        self.stop_k = np.array(
            [settings.joint_stop_stiffness[j] for j in ("hip", "knee", "ankle", "toe")] * 2
        )
        self.stop_c = np.array(
            [settings.joint_stop_damping[j] for j in ("hip", "knee", "ankle", "toe")] * 2
        )

        self.active = np.array([name not in settings.locked for name in COORD_NAMES])
        self.free_idx = np.flatnonzero(self.active)

        # per-point contact constants: heel, met use the main pad, toe tip the soft pad
        s = settings
        self.point_kn = np.array([s.contact_stiffness, s.contact_stiffness, s.toe_contact_stiffness] * 2)
        self.point_cn = np.array([s.contact_damping, s.contact_damping, s.toe_contact_damping] * 2)
        self.point_kt = np.array([s.friction_stiffness, s.friction_stiffness, s.toe_friction_stiffness] * 2)
        self.point_ct = np.array([s.friction_damping, s.friction_damping, s.toe_friction_damping] * 2)

    # ------------------------------------------------------------------
    # kinematics and generalized-force assembly

    def _assemble(self, q, v):
        """Mass matrix, gravity/bias forces and contact-point kinematics.

        Returns (M, q_grav, q_bias, pe, points) where points is a list of six
        tuples (px, pz, vx, vz, jac) and jac maps force components onto the
        generalized coordinates via the chain vectors of that point.
        """
        g = self.settings.gravity
        M = np.zeros((10, 10))
        q_grav = np.zeros(10)
        q_bias = np.zeros(10)
        pe = 0.0

        x, z = q[0], q[1]
        vx, vz = v[0], v[1]

        # trunk: translates only
        M[0, 0] += self.m_trunk
        M[1, 1] += self.m_trunk
        q_grav[1] -= self.m_trunk * g
        pe += self.m_trunk * g * (z + self.trunk_com_rise)

        points = []
        for (iH, iK, iA, iT) in _LEG_COLS:
            H, K, A, T = q[iH], q[iK], q[iA], q[iT]
            dH, dK, dA, dT = v[iH], v[iK], v[iA], v[iT]
            w2 = dH - dK
            wb = w2 + dA
            wt = wb + dT

            s1, c1 = math.sin(H), math.cos(H)
            t2 = H - K
            s2, c2 = math.sin(t2), math.cos(t2)
            b = t2 + A
            sb, cb = math.sin(b), math.cos(b)
            t4 = b + T
            s4, c4 = math.sin(t4), math.cos(t4)

            # unit vectors: e(th) = (sin, -cos) points down the segment,
            # u(th) = (cos, sin) points forward; de/dth = u, du/dth = -e
            e1 = (s1, -c1)
            u1 = (c1, s1)
            e2 = (s2, -c2)
            u2 = (c2, s2)
            e3 = (sb, -cb)
            u3 = (cb, sb)
            e4 = (s4, -c4)
            u4 = (c4, s4)

            lt, ls, lh, lm, lte, hf = self.lt, self.ls, self.lh, self.lm, self.lte, self.hf

            knee_x = x + lt * s1
            knee_z = z - lt * c1
            ankle_x = knee_x + ls * s2
            ankle_z = knee_z - ls * c2

            # chain derivative vectors shared by every distal body/point
            ltu1 = (lt * u1[0], lt * u1[1])
            lsu2 = (ls * u2[0], ls * u2[1])

            # --- thigh ---------------------------------------------------
            m = self.m_thigh
            jx, jz = self.ct * lt * u1[0], self.ct * lt * u1[1]
            M[0, 0] += m
            M[1, 1] += m
            M[0, iH] += m * jx
            M[1, iH] += m * jz
            M[iH, iH] += m * (jx * jx + jz * jz) + self.i_thigh
            q_grav[1] -= m * g
            q_grav[iH] -= m * g * jz
            a0x = -dH * dH * self.ct * lt * e1[0]
            a0z = -dH * dH * self.ct * lt * e1[1]
            q_bias[0] += m * a0x
            q_bias[1] += m * a0z
            q_bias[iH] += m * (jx * a0x + jz * a0z)
            pe += m * g * (z + self.ct * lt * e1[1])

            # --- shank ---------------------------------------------------
            m = self.m_shank
            jHx = ltu1[0] + self.cs * lsu2[0]
            jHz = ltu1[1] + self.cs * lsu2[1]
            jKx = -self.cs * lsu2[0]
            jKz = -self.cs * lsu2[1]
            M[0, 0] += m
            M[1, 1] += m
            M[0, iH] += m * jHx
            M[1, iH] += m * jHz
            M[0, iK] += m * jKx
            M[1, iK] += m * jKz
            M[iH, iH] += m * (jHx * jHx + jHz * jHz) + self.i_shank
            M[iH, iK] += m * (jHx * jKx + jHz * jKz) - self.i_shank
            M[iK, iK] += m * (jKx * jKx + jKz * jKz) + self.i_shank
            q_grav[1] -= m * g
            q_grav[iH] -= m * g * jHz
            q_grav[iK] -= m * g * jKz
            a0x = -dH * dH * lt * e1[0] - w2 * w2 * self.cs * ls * e2[0]
            a0z = -dH * dH * lt * e1[1] - w2 * w2 * self.cs * ls * e2[1]
            q_bias[0] += m * a0x
            q_bias[1] += m * a0z
            q_bias[iH] += m * (jHx * a0x + jHz * a0z)
            q_bias[iK] += m * (jKx * a0x + jKz * a0z)
            pe += m * g * (knee_z + self.cs * ls * e2[1])

            # --- foot (rigid heel-to-metatarsal body) ---------------------
            m = self.m_foot
            # w translates a foot-frame offset (a along the sole, hf down)
            # into the derivative wrt any upstream angle
            wfx = self.of * -e3[0] + hf * u3[0]
            wfz = self.of * -e3[1] + hf * u3[1]
            jHx = ltu1[0] + lsu2[0] + wfx
            jHz = ltu1[1] + lsu2[1] + wfz
            jKx = -(lsu2[0] + wfx)
            jKz = -(lsu2[1] + wfz)
            jAx, jAz = wfx, wfz
            M[0, 0] += m
            M[1, 1] += m
            M[0, iH] += m * jHx
            M[1, iH] += m * jHz
            M[0, iK] += m * jKx
            M[1, iK] += m * jKz
            M[0, iA] += m * jAx
            M[1, iA] += m * jAz
            M[iH, iH] += m * (jHx * jHx + jHz * jHz) + self.i_foot
            M[iH, iK] += m * (jHx * jKx + jHz * jKz) - self.i_foot
            M[iH, iA] += m * (jHx * jAx + jHz * jAz) + self.i_foot
            M[iK, iK] += m * (jKx * jKx + jKz * jKz) + self.i_foot
            M[iK, iA] += m * (jKx * jAx + jKz * jAz) - self.i_foot
            M[iA, iA] += m * (jAx * jAx + jAz * jAz) + self.i_foot
            q_grav[1] -= m * g
            q_grav[iH] -= m * g * jHz
            q_grav[iK] -= m * g * jKz
            q_grav[iA] -= m * g * jAz
            foot_ax = -dH * dH * lt * e1[0] - w2 * w2 * ls * e2[0]
            foot_az = -dH * dH * lt * e1[1] - w2 * w2 * ls * e2[1]
            a0x = foot_ax - wb * wb * (self.of * u3[0] + hf * e3[0])
            a0z = foot_az - wb * wb * (self.of * u3[1] + hf * e3[1])
            q_bias[0] += m * a0x
            q_bias[1] += m * a0z
            q_bias[iH] += m * (jHx * a0x + jHz * a0z)
            q_bias[iK] += m * (jKx * a0x + jKz * a0z)
            q_bias[iA] += m * (jAx * a0x + jAz * a0z)
            pe += m * g * (ankle_z + self.of * u3[1] + hf * e3[1])

            # --- toe -----------------------------------------------------
            m = self.m_toe
            wmx = lm * -e3[0] + hf * u3[0]
            wmz = lm * -e3[1] + hf * u3[1]
            w4x = self.c_toe * lte * -e4[0]
            w4z = self.c_toe * lte * -e4[1]
            jHx = ltu1[0] + lsu2[0] + wmx + w4x
            jHz = ltu1[1] + lsu2[1] + wmz + w4z
            jKx = -(lsu2[0] + wmx + w4x)
            jKz = -(lsu2[1] + wmz + w4z)
            jAx, jAz = wmx + w4x, wmz + w4z
            jTx, jTz = w4x, w4z
            M[0, 0] += m
            M[1, 1] += m
            M[0, iH] += m * jHx
            M[1, iH] += m * jHz
            M[0, iK] += m * jKx
            M[1, iK] += m * jKz
            M[0, iA] += m * jAx
            M[1, iA] += m * jAz
            M[0, iT] += m * jTx
            M[1, iT] += m * jTz
            M[iH, iH] += m * (jHx * jHx + jHz * jHz) + self.i_toe
            M[iH, iK] += m * (jHx * jKx + jHz * jKz) - self.i_toe
            M[iH, iA] += m * (jHx * jAx + jHz * jAz) + self.i_toe
            M[iH, iT] += m * (jHx * jTx + jHz * jTz) + self.i_toe
            M[iK, iK] += m * (jKx * jKx + jKz * jKz) + self.i_toe
            M[iK, iA] += m * (jKx * jAx + jKz * jAz) - self.i_toe
            M[iK, iT] += m * (jKx * jTx + jKz * jTz) - self.i_toe
            M[iA, iA] += m * (jAx * jAx + jAz * jAz) + self.i_toe
            M[iA, iT] += m * (jAx * jTx + jAz * jTz) + self.i_toe
            M[iT, iT] += m * (jTx * jTx + jTz * jTz) + self.i_toe
            q_grav[1] -= m * g
            q_grav[iH] -= m * g * jHz
            q_grav[iK] -= m * g * jKz
            q_grav[iA] -= m * g * jAz
            q_grav[iT] -= m * g * jTz
            a0x = foot_ax - wb * wb * (lm * u3[0] + hf * e3[0]) - wt * wt * self.c_toe * lte * u4[0]
            a0z = foot_az - wb * wb * (lm * u3[1] + hf * e3[1]) - wt * wt * self.c_toe * lte * u4[1]
            q_bias[0] += m * a0x
            q_bias[1] += m * a0z
            q_bias[iH] += m * (jHx * a0x + jHz * a0z)
            q_bias[iK] += m * (jKx * a0x + jKz * a0z)
            q_bias[iA] += m * (jAx * a0x + jAz * a0z)
            q_bias[iT] += m * (jTx * a0x + jTz * a0z)
            hinge_x = ankle_x + lm * u3[0] + hf * e3[0]
            hinge_z = ankle_z + lm * u3[1] + hf * e3[1]
            pe += m * g * (hinge_z + self.c_toe * lte * u4[1])

            # --- contact points ------------------------------------------
            vxa = vx + ltu1[0] * dH + lsu2[0] * w2
            vza = vz + ltu1[1] * dH + lsu2[1] * w2

            whx = -lh * -e3[0] + hf * u3[0]
            whz = -lh * -e3[1] + hf * u3[1]
            heel = (
                ankle_x - lh * u3[0] + hf * e3[0],
                ankle_z - lh * u3[1] + hf * e3[1],
                vxa + whx * wb,
                vza + whz * wb,
                # (jH, jK, jA, jT) chain vectors for J^T F
                (
                    (ltu1[0] + lsu2[0] + whx, ltu1[1] + lsu2[1] + whz),
                    (-(lsu2[0] + whx), -(lsu2[1] + whz)),
                    (whx, whz),
                    None,
                ),
            )
            met = (
                hinge_x,
                hinge_z,
                vxa + wmx * wb,
                vza + wmz * wb,
                (
                    (ltu1[0] + lsu2[0] + wmx, ltu1[1] + lsu2[1] + wmz),
                    (-(lsu2[0] + wmx), -(lsu2[1] + wmz)),
                    (wmx, wmz),
                    None,
                ),
            )
            wtx = lte * -e4[0]
            wtz = lte * -e4[1]
            tip = (
                hinge_x + lte * u4[0],
                hinge_z + lte * u4[1],
                vxa + wmx * wb + wtx * wt,
                vza + wmz * wb + wtz * wt,
                (
                    (ltu1[0] + lsu2[0] + wmx + wtx, ltu1[1] + lsu2[1] + wmz + wtz),
                    (-(lsu2[0] + wmx + wtx), -(lsu2[1] + wmz + wtz)),
                    (wmx + wtx, wmz + wtz),
                    (wtx, wtz),
                ),
            )
            points.extend((heel, met, tip))

        # mirror the upper triangle
        iu = np.triu_indices(10, 1)
        M[(iu[1], iu[0])] = M[iu]
        return M, q_grav, q_bias, pe, points

    # ------------------------------------------------------------------

    def _passive_joint_forces(self, q, v):
        """Tendon + stop spring torques and the viscous fold coefficients."""
        q_tendon = np.zeros(10)
        q_stop = np.zeros(10)
        damp = np.zeros(10)
        tendon_forces = []
        energy = 0.0

        for (iH, iK, iA, iT) in _LEG_COLS:
            pose = JointPose(
                ankle_rad=q[iA], knee_rad=q[iK], toe_deg=q[iT] * _RAD2DEG, ankle_rate=v[iA]
            )
            tf = compute_forces(pose, self.tendons, self.model)
            q_tendon[iA] += tf.tau_ankle_sol + tf.tau_ankle_gas
            q_tendon[iK] += tf.tau_knee_gas + tf.tau_knee_vas
            q_tendon[iT] += tf.tau_toe_spring + tf.tau_toe_tendon
            damp[iA] += self.settings.ankle_bearing_damping
            damp[iT] += self.settings.toe_bearing_damping
            v_eps = self.settings.dry_friction_vel
            q_stop[iA] -= self.settings.ankle_dry_friction * math.tanh(v[iA] / v_eps)
            q_stop[iT] -= self.settings.toe_dry_friction * math.tanh(v[iT] / v_eps)
            tendon_forces.append(tf)
            energy += tf.total_energy

        for c in range(2, 10):
            th = q[c]
            lo, hi = self.joint_lo[c - 2], self.joint_hi[c - 2]
            if th > hi:
                q_stop[c] = -self.stop_k[c - 2] * (th - hi)
                damp[c] += self.stop_c[c - 2]
            elif th < lo:
                q_stop[c] = -self.stop_k[c - 2] * (th - lo)
                damp[c] += self.stop_c[c - 2]
        return q_tendon, q_stop, damp, tendon_forces, energy

    @staticmethod
    def _point_rows(p, jac):
        """Dense (x-row, z-row) generalized Jacobian of one contact point."""
        cols = _LEG_COLS[0 if p < 3 else 1]
        jx = np.zeros(10)
        jz = np.zeros(10)
        jx[0] = 1.0
        jz[1] = 1.0
        for vec, c in zip(jac, cols):
            if vec is not None:
                jx[c] = vec[0]
                jz[c] = vec[1]
        return jx, jz

    def _contact_forces(self, points, anchors, flags):
        """Explicit evaluation of all six points (RK4 path and step probes)."""
        q_contact = np.zeros(10)
        forces = np.zeros((6, 2))
        new_anchors = anchors.copy()
        new_flags = flags.copy()
        for p, (px, pz, pvx, pvz, jac) in enumerate(points):
            fx, fz, new_anchors[p], new_flags[p] = contact_force(
                pz,
                pvz,
                px,
                pvx,
                anchors[p],
                bool(flags[p]),
                self.point_kn[p],
                self.point_cn[p],
                self.point_kt[p],
                self.point_ct[p],
                self.settings.friction_mu,
            )
            if fx == 0.0 and fz == 0.0:
                continue
            forces[p, 0] = fx
            forces[p, 1] = fz
            jx, jz = self._point_rows(p, jac)
            q_contact += jx * fx + jz * fz
        return q_contact, forces, new_anchors, new_flags

    def _contact_semi_implicit(self, points, anchors, flags):
        """Split contact into explicit forces plus implicit damping terms.

        The normal spring and the anchored friction are applied explicitly;
        the normal damper of every compressing point is returned as a
        (coefficient, z-row) pair to be folded into the velocity solve, which
        keeps high damping stable on the very light foot at impact.  The
        no-adhesion clamp is applied explicitly on separating points and
        post-hoc on the others.
        """
        mu = self.settings.friction_mu
        q_expl = np.zeros(10)
        fric = np.zeros(6)
        spring_n = np.zeros(6)
        implicit = []  # (point, c_n, jz row)
        rows = [None] * 6
        new_anchors = anchors.copy()
        new_flags = flags.copy()
        for p, (px, pz, pvx, pvz, jac) in enumerate(points):
            if pz >= 0.0:
                new_anchors[p] = px
                new_flags[p] = False
                continue
            new_flags[p] = True
            jx, jz = self._point_rows(p, jac)
            rows[p] = (jx, jz)
            depth = -pz
            n_spring = self.point_kn[p] * depth
            if pvz > 0.0:
                # separating: explicit damper with the no-adhesion clamp
                n_total = n_spring - self.point_cn[p] * pvz
                if n_total <= 0.0:
                    new_anchors[p] = px
                    continue
                spring_n[p] = n_total
                q_expl += jz * n_total
            else:
                spring_n[p] = n_spring
                q_expl += jz * n_spring
                implicit.append((p, self.point_cn[p], jz))

            if not flags[p]:
                new_anchors[p] = px
            f_t = -self.point_kt[p] * (px - new_anchors[p]) - self.point_ct[p] * pvx
            cap = mu * spring_n[p]
            if f_t > cap:
                f_t = cap
                new_anchors[p] = px + f_t / self.point_kt[p]
            elif f_t < -cap:
                f_t = -cap
                new_anchors[p] = px + f_t / self.point_kt[p]
            fric[p] = f_t
            q_expl += jx * f_t
        return q_expl, spring_n, fric, implicit, rows, new_anchors, new_flags

    # ------------------------------------------------------------------

    def _advance(self, state: SimState, tau_const: np.ndarray, motor_visc: np.ndarray):
        """One semi-implicit Euler step.

        ``tau_const`` holds the velocity-independent motor torque per actuated
        joint (hipL, kneeL, hipR, kneeR) and ``motor_visc`` the viscous
        coefficient of the derivative gain, folded implicitly together with
        bearing and engaged stop dampers.
        """
        dt = self.settings.timestep_s
        q, v = state.q, state.v

        M, q_grav, q_bias, pe, points = self._assemble(q, v)
        q_tendon, q_stop, damp, tendon_forces, tendon_e = self._passive_joint_forces(q, v)
        q_cont_expl, spring_n, fric, implicit, rows, new_anchors, new_flags = (
            self._contact_semi_implicit(points, state.anchor_x, state.in_contact)
        )

        q_motor = np.zeros(10)
        motor_cols = (2, 3, 6, 7)
        for m_i, c in enumerate(motor_cols):
            q_motor[c] = tau_const[m_i]
            damp[c] += motor_visc[m_i]

        rhs = q_motor + q_tendon + q_stop + q_cont_expl + q_grav - q_bias

        A = M + dt * np.diag(damp)
        for _, c_n, jz in implicit:
            A += (dt * c_n) * np.outer(jz, jz)
        b = M @ v + dt * rhs
        if len(self.free_idx) == 10:
            v_new = np.linalg.solve(A, b)
        else:
            v_new = np.zeros(10)
            f = self.free_idx
            v_new[f] = np.linalg.solve(A[np.ix_(f, f)], b[f])
        q_new = q + dt * v_new

        # resolved contact forces (implicit dampers act on the new velocity)
        forces = np.zeros((6, 2))
        q_contact = q_cont_expl.copy()
        for p in range(6):
            if rows[p] is None:
                continue
            forces[p, 0] = fric[p]
            forces[p, 1] = spring_n[p]
        for p, c_n, jz in implicit:
            f_damp = -c_n * float(jz @ v_new)
            forces[p, 1] += f_damp
            q_contact += jz * f_damp

        ke = 0.5 * float(v @ (M @ v))
        v_mid = 0.5 * (v + v_new)
        limit = self.settings.motor_torque_limit
        tau_applied = np.empty(4)
        w_motor = 0.0
        for m_i, c in enumerate(motor_cols):
            tau = tau_const[m_i] - motor_visc[m_i] * v_new[c]
            tau = max(-limit, min(limit, tau))
            tau_applied[m_i] = tau
            w_motor += (tau_const[m_i] - motor_visc[m_i] * v_new[c]) * v_mid[c]
        w_motor *= dt
        w_contact = dt * float(q_contact @ v_mid)
        w_stop = dt * float(q_stop @ v_mid)
        visc = damp.copy()
        for m_i, c in enumerate(motor_cols):
            visc[c] -= motor_visc[m_i]
        w_damp = -dt * float((visc * v_new) @ v_mid)

        diag = {
            "ke": ke,
            "pe": pe,
            "tendon_energy": tendon_e,
            "tendon_forces": tendon_forces,
            "contact_forces": forces,
            "tau_applied": tau_applied,
            "w_motor": w_motor,
            "w_contact": w_contact,
            "w_stop": w_stop,
            "w_damp": w_damp,
        }
        new_state = SimState(q_new, v_new, state.time + dt, new_anchors, new_flags)
        return new_state, diag

    def _acceleration(self, q, v, anchors, flags, tau_const, motor_visc):
        """Explicit accelerations for the RK4 path (contact anchors frozen)."""
        M, q_grav, q_bias, _, points = self._assemble(q, v)
        q_tendon, q_stop, damp, _, _ = self._passive_joint_forces(q, v)
        q_contact, _, _, _ = self._contact_forces(points, anchors, flags)
        rhs = q_tendon + q_stop + q_contact + q_grav - q_bias - damp * v
        limit = self.settings.motor_torque_limit
        for m_i, c in enumerate((2, 3, 6, 7)):
            tau = tau_const[m_i] - motor_visc[m_i] * v[c]
            rhs[c] += max(-limit, min(limit, tau))
        if len(self.free_idx) == 10:
            return np.linalg.solve(M, rhs)
        acc = np.zeros(10)
        f = self.free_idx
        acc[f] = np.linalg.solve(M[np.ix_(f, f)], rhs[f])
        return acc

    def _advance_rk4(self, state: SimState, tau_const, motor_visc):
        dt = self.settings.timestep_s
        q, v = state.q, state.v
        anchors, flags = state.anchor_x, state.in_contact

        def deriv(qq, vv):
            return vv, self._acceleration(qq, vv, anchors, flags, tau_const, motor_visc)

        k1q, k1v = deriv(q, v)
        k2q, k2v = deriv(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
        k3q, k3v = deriv(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
        k4q, k4v = deriv(q + dt * k3q, v + dt * k3v)
        q_new = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if len(self.free_idx) < 10:
            mask = ~self.active
            q_new[mask] = q[mask]
            v_new[mask] = 0.0

        # refresh anchors and diagnostics at the start-of-step state
        mid = SimState(q, v, state.time, anchors, flags)
        _, diag = self._advance(mid, tau_const, motor_visc)
        M, _, _, _, points = self._assemble(q_new, v_new)
        _, _, new_anchors, new_flags = self._contact_forces(points, anchors, flags)
        return SimState(q_new, v_new, state.time + dt, new_anchors, new_flags), diag

    def step(self, state: SimState, motor_torques=(0.0, 0.0, 0.0, 0.0)) -> SimState:
        """Advance one step under fixed motor torques (hipL, kneeL, hipR, kneeR)."""
        tau = np.asarray(motor_torques, dtype=float)
        zeros = np.zeros(4)
        if self.settings.integrator == "rk4":
            new_state, _ = self._advance_rk4(state, tau, zeros)
        else:
            new_state, _ = self._advance(state, tau, zeros)
        self._check_finite(new_state)
        return new_state

    def _check_finite(self, state: SimState):
        limit = self.settings.blowup_limit
        if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.v))):
            raise SimulationError(f"non-finite state at t={state.time:.4f} s")
        if np.max(np.abs(state.q)) > limit or np.max(np.abs(state.v)) > limit:
            worst = int(np.argmax(np.abs(state.v)))
            raise SimulationError(
                f"state exceeded bound {limit:g} at t={state.time:.4f} s "
                f"(coordinate {COORD_NAMES[worst]})"
            )

    # ------------------------------------------------------------------

    def initial_state(self, params: cpg_mod.CpgParams) -> SimState:
        """Standing double-support pose at the commanded touchdown posture."""
        osc = cpg_mod.initial_state(params)
        rates = cpg_mod.phase_rates(osc, params)
        q = np.zeros(10)
        for leg, (iH, iK, iA, iT) in enumerate(_LEG_COLS):
            cmd = cpg_mod.leg_command(osc.phases[leg], rates[leg], params)
            q[iH] = cmd.hip_deg * _DEG
            q[iK] = cmd.knee_deg * _DEG
            flat = -(q[iH] - q[iK])  # ankle angle that lays the sole flat
            q[iA] = min(max(flat, self.joint_lo[2]), self.joint_hi[2])
            q[iT] = 0.0

        # drop the trunk so the lowest contact point grazes the ground
        _, _, _, _, points = self._assemble(q, np.zeros(10))
        lowest = min(p[1] for p in points)
        q[1] = -lowest

        v = np.zeros(10)
        v[0] = self.settings.initial_forward_speed
        _, _, _, _, points = self._assemble(q, v)
        anchors = np.array([p[0] for p in points])
        return SimState(q=q, v=v, time=0.0, anchor_x=anchors, in_contact=np.zeros(6, dtype=bool))


def run_trial(
    model: RobotModel,
    tendons: TendonConfig,
    params: cpg_mod.CpgParams,
    settings: SimSettings,
    extra_meta: dict | None = None,
) -> TrialLog:
    """Run the closed loop (oscillators -> PD -> dynamics) and log every step.

    The log carries one row per control step including the initial state; a
    fall (trunk below the configured height) ends the trial early and marks
    the log as non-steady.  Numerical blow-up raises SimulationError.
    """
    sim = Simulator(model, tendons, settings)
    state = sim.initial_state(params)
    osc = cpg_mod.initial_state(params)

    dt = settings.timestep_s
    n_steps = int(round(settings.duration_s / dt))
    rows = np.zeros((n_steps + 1, len(COLUMNS)))

    kp = (settings.kp_hip, settings.kp_knee, settings.kp_hip, settings.kp_knee)
    kd = (settings.kd_hip, settings.kd_knee, settings.kd_hip, settings.kd_knee)
    kt = settings.motor_torque_constant
    limit = settings.motor_torque_limit
    motor_cols = (2, 3, 6, 7)

    work = {"motor": 0.0, "contact": 0.0, "stop": 0.0, "damp": 0.0}
    fall_time = None
    n_logged = 0

    for i in range(n_steps + 1):
        q, v = state.q, state.v
        rates = cpg_mod.phase_rates(osc, params)
        cmd_l = cpg_mod.leg_command(osc.phases[0], rates[0], params)
        cmd_r = cpg_mod.leg_command(osc.phases[1], rates[1], params)
        refs = (cmd_l.hip_deg, cmd_l.knee_deg, cmd_r.hip_deg, cmd_r.knee_deg)
        ref_rates = (cmd_l.hip_rate_dps, cmd_l.knee_rate_dps, cmd_r.hip_rate_dps, cmd_r.knee_rate_dps)

        currents = np.empty(4)
        tau_const = np.empty(4)
        motor_visc = np.empty(4)
        for m_i, c in enumerate(motor_cols):
            err = refs[m_i] - q[c] * _RAD2DEG
            err_rate = ref_rates[m_i] - v[c] * _RAD2DEG
            currents[m_i] = pd_current(err, err_rate, kp[m_i], kd[m_i])
            tau_unsat = kt * currents[m_i]
            if tau_unsat > limit or tau_unsat < -limit:
                tau_const[m_i] = limit if tau_unsat > limit else -limit
                motor_visc[m_i] = 0.0
            else:
                tau_const[m_i] = kt * (kp[m_i] * err + kd[m_i] * ref_rates[m_i])
                motor_visc[m_i] = kt * kd[m_i] * _RAD2DEG

        if settings.integrator == "rk4":
            new_state, diag = sim._advance_rk4(state, tau_const, motor_visc)
        else:
            new_state, diag = sim._advance(state, tau_const, motor_visc)

        tf_l, tf_r = diag["tendon_forces"]
        cf = diag["contact_forces"]
        rows[i] = (
            i * dt,
            q[0],
            q[1],
            v[0],
            v[1],
            q[2],
            q[3],
            q[4],
            q[5],
            q[6],
            q[7],
            q[8],
            q[9],
            v[2],
            v[3],
            v[4],
            v[5],
            v[6],
            v[7],
            v[8],
            v[9],
            refs[0],
            refs[1],
            refs[2],
            refs[3],
            currents[0],
            currents[1],
            currents[2],
            currents[3],
            diag["tau_applied"][0],
            diag["tau_applied"][1],
            diag["tau_applied"][2],
            diag["tau_applied"][3],
            tf_l.tau_ankle_sol,
            tf_l.tau_ankle_gas,
            tf_l.tau_knee_gas,
            tf_l.tau_knee_vas,
            tf_l.tau_toe_spring,
            tf_l.tau_toe_tendon,
            tf_r.tau_ankle_sol,
            tf_r.tau_ankle_gas,
            tf_r.tau_knee_gas,
            tf_r.tau_knee_vas,
            tf_r.tau_toe_spring,
            tf_r.tau_toe_tendon,
            cf[0, 0],
            cf[0, 1],
            cf[1, 0],
            cf[1, 1],
            cf[2, 0],
            cf[2, 1],
            cf[3, 0],
            cf[3, 1],
            cf[4, 0],
            cf[4, 1],
            cf[5, 0],
            cf[5, 1],
            1.0 if (cf[0, 1] > 0.0 or cf[1, 1] > 0.0 or cf[2, 1] > 0.0) else 0.0,
            1.0 if (cf[3, 1] > 0.0 or cf[4, 1] > 0.0 or cf[5, 1] > 0.0) else 0.0,
            osc.phases[0],
            osc.phases[1],
            diag["tendon_energy"],
            diag["ke"],
            diag["pe"],
            work["motor"],
            work["contact"],
            work["stop"],
            work["damp"],
        )
        n_logged = i + 1

        if i == n_steps:
            break

        work["motor"] += diag["w_motor"]
        work["contact"] += diag["w_contact"]
        work["stop"] += diag["w_stop"]
        work["damp"] += diag["w_damp"]

        state = new_state
        sim._check_finite(state)
        osc = cpg_mod.step_phase(osc, params, dt)

        if state.q[1] < settings.fall_height:
            fall_time = state.time
            break

    data = rows[:n_logged]
    meta = {
        "configuration": tendons.name,
        "duration_s": settings.duration_s,
        "timestep_s": dt,
        "integrator": settings.integrator,
        "steady_start_s": settings.discard_s,
        "fall": fall_time is not None,
        "fall_time_s": fall_time,
        "steady": fall_time is None,
        "n_rows": int(n_logged),
        "model": {
            "total_mass_kg": model.total_mass,
            "leg_length_m": model.leg_length,
            "segment_masses_kg": dict(model.segment_masses),
            "pulley_radii_m": dict(model.pulley_radii),
            "joint_limits_deg": {k: list(vv) for k, vv in model.joint_limits.items()},
        },
        "tendons": {
            "k_sol": tendons.k_sol,
            "k_gas": tendons.k_gas,
            "k_vas": tendons.k_vas,
            "k_toe": tendons.k_toe,
            "k_toe_tendon": tendons.k_toe_tendon,
            "sol_rest_deg": tendons.sol_rest_deg,
            "gas_rest_deg": tendons.gas_rest_deg,
            "toe_rest_deg": tendons.toe_rest_deg,
            "toe_tendon_engage_knee_deg": tendons.toe_tendon_engage_knee_deg,
        },
        "cpg": {
            "frequency_hz": params.frequency_hz,
            "hip_duty": params.hip_duty,
            "knee_duty": params.knee_duty,
            "hip_amplitude_deg": params.hip_amplitude_deg,
            "knee_amplitude_deg": params.knee_amplitude_deg,
            "hip_offset_deg": params.hip_offset_deg,
            "knee_offset_deg": params.knee_offset_deg,
            "hip_swing_steady": params.hip_swing_steady,
            "alpha_dyn": params.alpha_dyn,
        },
        "standby_power_w": settings.standby_power_w,
    }
    if extra_meta:
        meta.update(extra_meta)
    return TrialLog(data=data, meta=meta)
