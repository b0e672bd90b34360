"""Quasi-static conformal-mapping model of coplanar waveguides in flip-chip stacks.

Partial-capacitance method with zero-thickness conductors and laterally
semi-infinite grounds.  Three configurations are supported:

``planar``
    substrate of thickness ``h_substrate`` (vacuum below it), vacuum above.
``metal``
    as planar, plus a grounded metal sheet a distance ``d`` above the
    conductor plane.
``dielectric``
    as planar, plus a dielectric slab of thickness ``h_superstrate`` and
    permittivity ``eps_superstrate`` starting a distance ``d`` above the
    conductor plane.

All lengths are in micrometres.  Because only ratios of lengths enter the
moduli, results are invariant under a common rescaling of the geometry.
"""

import dataclasses
import math

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0

from .errors import FlipchipError, UnreachableImpedanceError
from .numerics import bisect, ellipk_ratio

FACINGS = ("planar", "metal", "dielectric")
EPS_SILICON = 11.45


@dataclasses.dataclass(frozen=True)
class CpwGeometry:
    w: float
    s: float
    eps_substrate: float = EPS_SILICON
    h_substrate: float = 525.0
    facing: str = "planar"
    d: float = None
    eps_superstrate: float = None
    h_superstrate: float = 525.0

    def __post_init__(self):
        if self.facing not in FACINGS:
            raise FlipchipError(f"facing must be one of {FACINGS}, got {self.facing!r}")
        if not (self.w > 0 and self.s > 0 and self.h_substrate > 0):
            raise FlipchipError("w, s and h_substrate must be positive")
        if self.eps_substrate < 1:
            raise FlipchipError("eps_substrate must be >= 1")
        if self.facing != "planar" and not (self.d is not None and self.d > 0):
            raise FlipchipError(f"{self.facing}-facing geometry needs a positive separation d")
        if self.facing == "dielectric":
            if self.eps_superstrate is None:
                raise FlipchipError("dielectric-facing geometry needs eps_superstrate")
            if self.eps_superstrate < 1:
                raise FlipchipError("eps_superstrate must be >= 1")
            if not self.h_superstrate > 0:
                raise FlipchipError("h_superstrate must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class LineParams:
    c_per_len: float
    l_per_len: float
    z0: float
    eps_eff: float
    v_ph: float

    def as_dict(self):
        return {
            "eps_eff": self.eps_eff,
            "z0_ohm": self.z0,
            "v_ph_m_per_s": self.v_ph,
            "c_per_m": self.c_per_len,
            "l_per_m": self.l_per_len,
        }


def _q_open(a, b):
    # half-space filling: k0 = a/b
    k = a / b
    kp = math.sqrt((b - a) * (b + a)) / b
    return ellipk_ratio(k, kp)


def _q_layer(a, b, h):
    """Modulus ratio for a layer of height ``h`` adjoining the conductor plane."""
    if math.isinf(h):
        return _q_open(a, b)
    x_a = math.pi * a / (2.0 * h)
    x_b = math.pi * b / (2.0 * h)
    sinh_b = math.sinh(x_b)
    k = math.sinh(x_a) / sinh_b
    kp = math.sqrt(math.sinh(x_b - x_a) * math.sinh(x_b + x_a)) / sinh_b
    return ellipk_ratio(k, kp)


def _q_cover(a, b, h):
    """Modulus ratio for a homogeneous region closed by a ground plane at height ``h``."""
    x_a = math.pi * a / (2.0 * h)
    x_b = math.pi * b / (2.0 * h)
    k = math.tanh(x_a) / math.tanh(x_b)
    kp = math.sqrt(math.sinh(x_b - x_a) * math.sinh(x_b + x_a)) / (math.cosh(x_a) * math.sinh(x_b))
    if not (math.isfinite(k) and math.isfinite(kp)):
        raise FlipchipError(f"cover modulus overflow for a={a}, b={b}, h={h}")
    return ellipk_ratio(k, kp)


def line_params(geom):
    """Per-length capacitance, inductance, impedance and phase velocity of ``geom``."""
    a = geom.w / 2.0
    b = geom.w / 2.0 + geom.s

    q_below = _q_open(a, b)
    if geom.facing == "metal":
        q_above = _q_cover(a, b, geom.d)
    else:
        q_above = _q_open(a, b)
    q_vacuum = q_below + q_above

    q_total = q_vacuum + (geom.eps_substrate - 1.0) * _q_layer(a, b, geom.h_substrate)
    if geom.facing == "dielectric":
        # slab between d and d + h_sup, expressed as the difference of two layers
        q_slab = _q_layer(a, b, geom.d + geom.h_superstrate) - _q_layer(a, b, geom.d)
        q_total += (geom.eps_superstrate - 1.0) * q_slab

    c_vac = 2.0 * epsilon_0 * q_vacuum
    c_tot = 2.0 * epsilon_0 * q_total
    l_per_len = 1.0 / (C_LIGHT**2 * c_vac)
    v_ph = 1.0 / math.sqrt(l_per_len * c_tot)
    if not (math.isfinite(v_ph) and 0 < v_ph < C_LIGHT * (1 + 1e-12)):
        raise FlipchipError(f"non-physical phase velocity {v_ph} for {geom}")
    return LineParams(
        c_per_len=c_tot,
        l_per_len=l_per_len,
        z0=math.sqrt(l_per_len / c_tot),
        eps_eff=c_tot / c_vac,
        v_ph=v_ph,
    )


def solve_gap_for_impedance(w, target_z0, s_range=(0.1, 100.0), tol_ohm=0.01, **geometry):
    """Gap width (µm) giving ``target_z0`` for centre width ``w``.

    ``geometry`` holds the remaining CpwGeometry fields (facing, d, eps...).
    """
    s_lo, s_hi = s_range

    def z0_of(s):
        return line_params(CpwGeometry(w=w, s=s, **geometry)).z0

    probe = np.geomspace(s_lo, s_hi, 25)
    z_probe = np.array([z0_of(s) for s in probe])
    if np.any(np.diff(z_probe) <= 0):
        raise FlipchipError("impedance is not monotone in the gap over the search bracket")
    z_lo, z_hi = z_probe[0], z_probe[-1]
    if not z_lo <= target_z0 <= z_hi:
        raise UnreachableImpedanceError(
            f"target {target_z0} ohm outside achievable range [{z_lo:.3f}, {z_hi:.3f}] ohm "
            f"for s in [{s_lo}, {s_hi}] um",
            z_low=float(z_lo),
            z_high=float(z_hi),
        )
    s = bisect(lambda s: z0_of(s) - target_z0, s_lo, s_hi, xtol=1e-10 * s_hi)
    if abs(z0_of(s) - target_z0) >= tol_ohm:
        raise FlipchipError(f"gap solve missed target: {z0_of(s)} vs {target_z0}")
    return s


def shift_curve(geom, d_values, d_ref=10.0):
    """Relative frequency shift v_ph(d) / v_ph(d_ref) for each separation in ``d_values``."""
    d_values = [float(d) for d in d_values]
    if any(not d > 0 for d in d_values) or not d_ref > 0:
        raise FlipchipError("separations must be positive")
    v_ref = line_params(geom.replace(d=d_ref)).v_ph
    out = []
    for d in d_values:
        v = v_ref if d == d_ref else line_params(geom.replace(d=d)).v_ph
        out.append((d, v / v_ref))
    return out
