"""Trial log container and its on-disk CSV + JSON-sidecar format.

A trial log is a fixed-width table, one row per control step, with the column
order given by ``COLUMNS``.  The CSV is written with a stable float format so
identical runs produce byte-identical files; the sidecar records the fully
resolved configuration and versioning next to the data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__ as _pkg_version
from . import SCHEMA_VERSION

COLUMNS = (
    "time_s",
    "trunk_x_m",
    "trunk_z_m",
    "trunk_vx_mps",
    "trunk_vz_mps",
    "hip_l_rad",
    "knee_l_rad",
    "ankle_l_rad",
    "toe_l_rad",
    "hip_r_rad",
    "knee_r_rad",
    "ankle_r_rad",
    "toe_r_rad",
    "hip_l_radps",
    "knee_l_radps",
    "ankle_l_radps",
    "toe_l_radps",
    "hip_r_radps",
    "knee_r_radps",
    "ankle_r_radps",
    "toe_r_radps",
    "hip_l_ref_deg",
    "knee_l_ref_deg",
    "hip_r_ref_deg",
    "knee_r_ref_deg",
    "hip_l_current_a",
    "knee_l_current_a",
    "hip_r_current_a",
    "knee_r_current_a",
    "hip_l_torque_nm",
    "knee_l_torque_nm",
    "hip_r_torque_nm",
    "knee_r_torque_nm",
    "sol_l_nm",
    "gas_ankle_l_nm",
    "gas_knee_l_nm",
    "vas_l_nm",
    "toe_spring_l_nm",
    "toe_tendon_l_nm",
    "sol_r_nm",
    "gas_ankle_r_nm",
    "gas_knee_r_nm",
    "vas_r_nm",
    "toe_spring_r_nm",
    "toe_tendon_r_nm",
    "heel_l_fx_n",
    "heel_l_fz_n",
    "met_l_fx_n",
    "met_l_fz_n",
    "toe_l_fx_n",
    "toe_l_fz_n",
    "heel_r_fx_n",
    "heel_r_fz_n",
    "met_r_fx_n",
    "met_r_fz_n",
    "toe_r_fx_n",
    "toe_r_fz_n",
    "contact_l",
    "contact_r",
    "phase_l_rad",
    "phase_r_rad",
    "tendon_energy_j",
    "kinetic_j",
    "potential_j",
    "motor_work_j",
    "contact_work_j",
    "stop_work_j",
    "damping_work_j",
)

_FLOAT_FORMAT = "%.10g"


@dataclass
class TrialLog:
    """One simulated trial: a (rows x columns) float table plus metadata."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)
    columns: tuple = COLUMNS

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError(
                f"log data must have {len(self.columns)} columns, got shape {self.data.shape}"
            )
        self._index = {name: i for i, name in enumerate(self.columns)}

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self._index[name]]

    @property
    def time(self) -> np.ndarray:
        return self.column("time_s")

    def save(self, csv_path: str | Path) -> Path:
        """Write the CSV and its metadata sidecar; returns the sidecar path."""
        csv_path = Path(csv_path)
        frame = pd.DataFrame(self.data, columns=list(self.columns))
        frame.to_csv(csv_path, index=False, float_format=_FLOAT_FORMAT, lineterminator="\n")
        meta_path = sidecar_path(csv_path)
        meta = dict(self.meta)
        meta.setdefault("schema_version", SCHEMA_VERSION)
        meta.setdefault("springbiped_version", _pkg_version)
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return meta_path

    @classmethod
    def load(cls, csv_path: str | Path) -> "TrialLog":
        csv_path = Path(csv_path)
        frame = pd.read_csv(csv_path)
        columns = tuple(frame.columns)
        meta = {}
        mp = sidecar_path(csv_path)
        if mp.exists():
            meta = json.loads(mp.read_text())
        return cls(data=frame.to_numpy(dtype=float), meta=meta, columns=columns)


def sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix("").with_suffix(".meta.json") if csv_path.suffix == ".csv" else Path(
        str(csv_path) + ".meta.json"
    )
