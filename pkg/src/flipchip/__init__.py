"""Analysis and design models for flip-chip bonded superconducting CPW resonators."""

__version__ = "0.1.0"

from .cpw import CpwGeometry, LineParams, line_params, shift_curve, solve_gap_for_impedance
from .errors import FlipchipError
from .heightmap import HeightMap, corner_tilt_worst_case, process_map
from .losses import ParticipationRecord, relative_q
from .resonator import ResonatorRecord, design_length, fit_vph, loaded_frequency_exact
from .vnafit import fit_notch, photon_calc

__all__ = [
    "CpwGeometry",
    "FlipchipError",
    "HeightMap",
    "LineParams",
    "ParticipationRecord",
    "ResonatorRecord",
    "corner_tilt_worst_case",
    "design_length",
    "fit_notch",
    "fit_vph",
    "line_params",
    "loaded_frequency_exact",
    "photon_calc",
    "process_map",
    "relative_q",
    "shift_curve",
    "solve_gap_for_impedance",
]
