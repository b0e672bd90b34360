"""Capacitively loaded quarter-wave resonator model.

The resonator is a shorted lambda/4 line coupled to a feedline through a
coupling capacitance, with a parasitic capacitance to ground on the resonator
side.  Writing ``b = (C_c + C_cgr) * Z0_r`` the exact resonance condition is

    tan(pi/2 - omega * l / v_ph) = b * omega

and expanding the tangent to first order about the quarter-wave point gives

    omega_r = (pi / 2) / (l / v_ph + b).

Lengths are in micrometres, ``b`` in seconds, angular frequencies in rad/s.
"""

import dataclasses
import itertools
import math

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import FlipchipError, RootNotFoundError
from .numerics import bisect

UM = 1e-6
TWO_PI = 2.0 * math.pi


@dataclasses.dataclass(frozen=True)
class ResonatorRecord:
    index: int
    length_l: float
    measured_f: float = None
    facing: str = None
    copy_id: str = None

    def __post_init__(self):
        if not self.length_l > 0:
            raise FlipchipError(f"resonator {self.index}: length must be positive")
        if self.measured_f is not None and not self.measured_f > 0:
            raise FlipchipError(f"resonator {self.index}: measured frequency must be positive")


@dataclasses.dataclass(frozen=True)
class CouplerModel:
    """Lumped coupler; capacitances in fF, impedances in ohm.

    ``c_cgf`` is carried for completeness and does not enter the resonance
    condition at the order implemented here.
    """

    c_c: float = 0.44
    c_cgr: float = 0.6
    c_cgf: float = 0.6
    z0_r: float = 50.0
    z0_f: float = 50.0

    def __post_init__(self):
        if min(self.c_c, self.c_cgr, self.c_cgf) < 0:
            raise FlipchipError("capacitances must be non-negative")
        if not (self.z0_r > 0 and self.z0_f > 0):
            raise FlipchipError("impedances must be positive")

    @property
    def b(self):
        return (self.c_c + self.c_cgr) * 1e-15 * self.z0_r


@dataclasses.dataclass(frozen=True)
class FrequencyFit:
    v_ph: float
    b: float
    residual_rms: float
    per_resonator_residuals: tuple
    indices: tuple = ()

    def as_dict(self):
        return {
            "v_ph": self.v_ph,
            "b_s": self.b,
            "residual_rms_mhz": self.residual_rms,
            "residuals_mhz": list(self.per_resonator_residuals),
            "indices": list(self.indices),
        }


def loaded_frequency_approx(length_l, v_ph, b=0.0):
    """First-order loaded resonance, returned as angular frequency (rad/s)."""
    delay = length_l * UM / v_ph + b
    if not delay > 0:
        raise FlipchipError(f"l/v_ph + b must be positive, got {delay}")
    return 0.5 * math.pi / delay


def loaded_frequency_exact(length_l, v_ph, b=0.0, xtol_hz=1.0):
    """Fundamental root of the exact resonance condition (rad/s), by bisection."""
    omega_approx = loaded_frequency_approx(length_l, v_ph, b)
    electrical = length_l * UM / v_ph

    def condition(omega):
        return math.tan(0.5 * math.pi - electrical * omega) - b * omega

    try:
        return bisect(condition, 0.5 * omega_approx, 1.5 * omega_approx, xtol=TWO_PI * xtol_hz)
    except RootNotFoundError as exc:
        raise RootNotFoundError(
            f"no fundamental resonance near {omega_approx / TWO_PI:.6g} Hz "
            f"for l={length_l} um, v_ph={v_ph}, b={b}"
        ) from exc


def fit_vph(records):
    """Fit (v_ph, b) by linear least squares in the 1/omega domain.

    ``1/omega_r = (2/pi) * (l/v_ph + b)`` is linear in ``l``; the slope gives
    v_ph and the intercept gives b.  Residuals are measured minus model, in MHz.
    """
    records = [r for r in records if r.measured_f is not None]
    if len(records) < 2:
        raise FlipchipError("need at least two resonators with measured frequencies")
    length = np.array([r.length_l for r in records]) * UM
    f_meas = np.array([r.measured_f for r in records]) * 1e9
    if np.ptp(length) == 0:
        raise FlipchipError("all resonator lengths are equal; fit is singular")

    inv_omega = 1.0 / (TWO_PI * f_meas)
    design = np.column_stack([length - length.mean(), np.ones_like(length)])
    (slope, offset), *_ = np.linalg.lstsq(design, inv_omega, rcond=None)
    intercept = offset - slope * length.mean()
    v_ph = 2.0 / (math.pi * slope)
    b = 0.5 * math.pi * intercept
    if not 0 < v_ph < C_LIGHT:
        raise FlipchipError(f"fitted phase velocity {v_ph:.4g} m/s is not physical")

    f_model = np.array([loaded_frequency_approx(r.length_l, v_ph, b) for r in records]) / TWO_PI
    residuals = (f_meas - f_model) / 1e6
    return FrequencyFit(
        v_ph=float(v_ph),
        b=float(b),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        per_resonator_residuals=tuple(float(x) for x in residuals),
        indices=tuple(r.index for r in records),
    )


def design_length(target_f, v_ph, b=0.0):
    """Physical length (µm) whose first-order loaded resonance is ``target_f`` GHz."""
    if not target_f > 0:
        raise FlipchipError("target frequency must be positive")
    omega = TWO_PI * target_f * 1e9
    length = v_ph * (0.5 * math.pi / omega - b) / UM
    if not length > 0:
        raise FlipchipError(
            f"target unreachable: {target_f} GHz needs non-positive length ({length:.4g} um)"
        )
    return length


@dataclasses.dataclass(frozen=True)
class DeviationStats:
    deviations_mhz: dict  # index -> {copy_id: deviation}
    mean_abs_deviation_mhz: float
    max_abs_deviation_mhz: float
    max_pair_difference_mhz: float

    def as_dict(self):
        return {
            "deviations_mhz": {
                str(i): dict(sorted(devs.items())) for i, devs in sorted(self.deviations_mhz.items())
            },
            "mean_abs_deviation_mhz": self.mean_abs_deviation_mhz,
            "max_abs_deviation_mhz": self.max_abs_deviation_mhz,
            "max_pair_difference_mhz": self.max_pair_difference_mhz,
        }


def deviation_stats(copies):
    """Copy-to-copy frequency deviations from the per-resonator mean.

    ``copies`` maps copy_id to an iterable of (index, frequency in GHz).
    Only indices measured on at least two copies contribute.
    """
    by_index = {}
    for copy_id, rows in copies.items():
        for index, f_ghz in rows:
            by_index.setdefault(index, {})[copy_id] = float(f_ghz)
    shared = {i: fs for i, fs in by_index.items() if len(fs) >= 2}
    if len(copies) < 2 or not shared:
        raise FlipchipError("no resonator index is shared by two or more copies")

    deviations = {}
    pair_max = 0.0
    for index, fs in shared.items():
        mean = sum(fs.values()) / len(fs)
        deviations[index] = {cid: (f - mean) * 1e3 for cid, f in fs.items()}
        for f1, f2 in itertools.combinations(fs.values(), 2):
            pair_max = max(pair_max, abs(f1 - f2) * 1e3)
    flat = np.array([v for devs in deviations.values() for v in devs.values()])
    return DeviationStats(
        deviations_mhz=deviations,
        mean_abs_deviation_mhz=float(np.mean(np.abs(flat))),
        max_abs_deviation_mhz=float(np.max(np.abs(flat))),
        max_pair_difference_mhz=pair_max,
    )
