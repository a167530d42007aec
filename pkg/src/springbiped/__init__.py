"""Planar walking simulator for a child-sized biped with spring-tendon ankles.

The package is organised around six pieces:

* ``morphology`` -- segment geometry, mass split, tendon stiffness presets
* ``cpg``        -- coupled phase oscillators and joint reference trajectories
* ``tendons``    -- passive spring-tendon torques and stored energies
* ``dynamics``   -- articulated rigid-body simulation with compliant contacts
* ``analysis``   -- gait segmentation, cycle averaging, energetics metrics
* ``cli``        -- experiment runner (``run | analyze | compare | trajectories``)
"""

__version__ = "0.1.0"

SCHEMA_VERSION = "1"

from .morphology import (  # noqa: F401
    RobotModel,
    TendonConfig,
    ValidationReport,
    derive_segment_masses,
    robot_model,
    tendon_preset,
    validate,
    PRESET_NAMES,
)
from .cpg import CpgParams, OscillatorState, cpg_preset  # noqa: F401
from .dynamics import SimSettings, SimState, Simulator, run_trial  # noqa: F401
from .config import Bundle, load_config, save_config, preset_bundle  # noqa: F401
