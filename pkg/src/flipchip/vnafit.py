"""Notch-type resonator S21 fitting and intra-resonator photon number.

The transmission of a side-coupled resonator with an impedance-mismatch
rotation ``phi`` and an environment background is modelled as

    S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2 i Ql (f/f0 - 1))]

The fit follows the circle-fit route: remove the cable delay, fit a circle to
the trace in the complex plane, fit the phase around the circle centre for f0
and Ql, then read |Qc| and phi off the normalized circle ("diameter
correction").  Those estimates seed a final least-squares fit of the full
model.  Qi follows from 1/Ql = 1/Qi + cos(phi)/|Qc|.
"""

import dataclasses
import math

import numpy as np
from scipy import optimize
from scipy.constants import hbar

from .errors import FitError, FlipchipError, NoResonanceError

WING_FRACTION = 0.2
DIP_MAD_FACTOR = 5.0
MIN_POINTS = 50


@dataclasses.dataclass
class ComplexTrace:
    freqs: np.ndarray
    s21: np.ndarray
    vna_power: float = None
    line_attenuation: float = None

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.freqs.shape != self.s21.shape or self.freqs.ndim != 1:
            raise FlipchipError("freqs and s21 must be 1D arrays of equal length")
        if len(self.freqs) < MIN_POINTS:
            raise FlipchipError(f"trace needs at least {MIN_POINTS} points, got {len(self.freqs)}")
        if np.any(np.diff(self.freqs) <= 0):
            raise FlipchipError("frequencies must be strictly increasing")


@dataclasses.dataclass(frozen=True)
class NotchFit:
    f0: float
    q_l: float
    q_c_mag: float
    phi: float
    q_i: float
    background: tuple  # (a, alpha, tau)
    rms_residual: float
    noise_floor: float = 0.0

    def model(self, freqs):
        a, alpha, tau = self.background
        return notch_s21(freqs, self.f0, self.q_l, self.q_c_mag, self.phi, a, alpha, tau)

    def as_dict(self):
        a, alpha, tau = self.background
        return {
            "f0_hz": self.f0,
            "q_l": self.q_l,
            "q_c_mag": self.q_c_mag,
            "phi_rad": self.phi,
            "q_i": self.q_i,
            "background": {"a": a, "alpha_rad": alpha, "tau_s": tau},
            "rms_residual": self.rms_residual,
            "noise_floor": self.noise_floor,
        }


def loaded_q(q_i, q_c_mag, phi=0.0):
    return 1.0 / (1.0 / q_i + math.cos(phi) / q_c_mag)


def notch_s21(freqs, f0, q_l, q_c_mag, phi=0.0, a=1.0, alpha=0.0, tau=0.0):
    freqs = np.asarray(freqs, dtype=float)
    env = a * np.exp(1j * (alpha - 2 * np.pi * freqs * tau))
    return env * (1 - (q_l / q_c_mag) * np.exp(1j * phi) / (1 + 2j * q_l * (freqs / f0 - 1)))


def _wings(n, fraction=WING_FRACTION):
    k = max(3, int(round(fraction * n)))
    return np.r_[0:k], np.r_[n - k : n]


def circle_fit_algebraic(z):
    """Pratt-constrained algebraic circle fit; returns (centre, radius).

    Minimizes the algebraic distance A(x^2+y^2) + Bx + Cy + D under
    B^2 + C^2 - 4AD = 1, solved as a generalized eigenproblem on normalized data.
    """
    shift = z.mean()
    scale = np.abs(z - shift).mean()
    if not scale > 0:
        return shift, 0.0
    w = (z - shift) / scale
    x, y = w.real, w.imag
    rows = np.column_stack([x * x + y * y, x, y, np.ones_like(x)])
    moments = rows.T @ rows / len(z)
    constraint = np.array([[0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]], dtype=float)
    # generalized problem M v = eta B v, B indefinite: use eig of B^-1 M
    eta, vecs = np.linalg.eig(np.linalg.solve(constraint, moments))
    eta = eta.real
    candidates = [i for i in np.argsort(eta) if eta[i] >= -1e-12]
    if not candidates:
        raise FitError("algebraic circle fit found no admissible solution")
    A, B, C, D = vecs[:, candidates[0]].real
    if A == 0:
        raise FitError("algebraic circle fit degenerated to a line")
    centre = complex(-B / (2 * A), -C / (2 * A))
    radius = math.sqrt(max(B * B + C * C - 4 * A * D, 0.0)) / (2 * abs(A))
    return shift + scale * centre, scale * radius


def circle_fit(z):
    """Algebraic fit refined by geometric least squares on |z - zc| - r."""
    zc, r = circle_fit_algebraic(z)
    if not r > 0:
        return zc, r

    def resid(p):
        return np.abs(z - complex(p[0], p[1])) - p[2]

    sol = optimize.least_squares(resid, [zc.real, zc.imag, r], method="lm")
    if sol.success and sol.x[2] > 0:
        return complex(sol.x[0], sol.x[1]), float(sol.x[2])
    return zc, r


def _circle_rms(z):
    try:
        zc, r = circle_fit_algebraic(z)
    except FitError:
        return math.inf
    return float(np.sqrt(np.mean((np.abs(z - zc) - r) ** 2)))


def estimate_delay(freqs, s21, wing_fraction=WING_FRACTION):
    """Cable delay from a linear phase fit on both wings, refined on circle quality.

    The wing estimate is biased by the resonance tail, so it seeds a bounded
    search that minimizes the residual of an algebraic circle fit.
    """
    n = len(freqs)
    left, right = _wings(n, wing_fraction)
    idx = np.r_[left, right]
    phase = np.unwrap(np.angle(s21))
    slope = np.polyfit(freqs[idx] - freqs.mean(), phase[idx], 1)[0]
    tau0 = -slope / (2 * np.pi)

    span = freqs[-1] - freqs[0]
    half = 0.5 / span
    f_rel = freqs - freqs.mean()

    def cost(tau):
        return _circle_rms(s21 * np.exp(2j * np.pi * f_rel * tau))

    grid = tau0 + np.linspace(-half, half, 41)
    best = grid[np.argmin([cost(t) for t in grid])]
    step = grid[1] - grid[0]
    sol = optimize.minimize_scalar(
        cost, bounds=(best - step, best + step), method="bounded", options={"xatol": step * 1e-6}
    )
    return float(sol.x if sol.fun <= cost(best) else best)


def _noise_floor(freqs, z, wing_fraction=WING_FRACTION):
    """Median absolute deviation of the wing samples about a linear trend per wing."""
    devs = []
    for idx in _wings(len(freqs), wing_fraction):
        f = freqs[idx] - freqs[idx].mean()
        design = np.column_stack([np.ones_like(f), f])
        coef, *_ = np.linalg.lstsq(design, z[idx], rcond=None)
        devs.append(np.abs(z[idx] - design @ coef))
    # numerical floor, so a noise-free flat trace cannot pass as a dip
    return max(float(np.median(np.concatenate(devs))), 1e-9 * float(np.mean(np.abs(z))))


def _wrap(x):
    return np.angle(np.exp(1j * x))


def phase_fit(freqs, z_centred, f0_guess, q_guess):
    """Fit theta(f) = theta0 + 2 arctan(2 Ql (1 - f/f0)) to the phase about the circle centre."""
    theta = np.angle(z_centred)
    f_ref = f0_guess
    lw = f0_guess / q_guess

    def model(p):
        theta0, log_q, df = p
        fr = f_ref + df * lw
        return theta0 + 2 * np.arctan(2 * np.exp(log_q) * (1 - freqs / fr))

    def resid(p):
        return _wrap(theta - model(p))

    # theta0 guess from the point nearest f0 (arctan term vanishes there)
    i0 = int(np.argmin(np.abs(freqs - f0_guess)))
    p0 = [theta[i0], math.log(q_guess), 0.0]
    sol = optimize.least_squares(resid, p0, method="lm", x_scale=[1.0, 1.0, 1.0])
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitError("phase fit did not converge", {"message": sol.message, "x": list(sol.x)})
    theta0, log_q, df = sol.x
    return float(_wrap(theta0)), float(math.exp(log_q)), float(f_ref + df * lw)


def _initial_f0_q(freqs, z_centred, off_point_dir):
    """Resonance guess: sample farthest from the off-resonant side, width from the half-angle points."""
    # angle of each sample measured from the off-resonant direction, in (-pi, pi]
    rel = _wrap(np.angle(z_centred) - off_point_dir)
    i0 = int(np.argmax(np.abs(rel)))
    f0 = freqs[i0]
    inner = np.abs(rel) > np.pi / 2  # within the half-power band
    if inner.sum() >= 2:
        band = freqs[inner]
        width = band.max() - band.min()
    else:
        width = 0.0
    if not width > 0:
        width = 2 * np.median(np.diff(freqs))
    return f0, f0 / width


def fit_notch(trace, wing_fraction=WING_FRACTION, refine=True):
    """Extract f0, Ql, |Qc|, phi, Qi and the background from a notch-type S21 trace.

    With ``refine`` the circle-fit estimates seed a full complex least-squares
    fit of the model (``refine_notch``).
    """
    if not isinstance(trace, ComplexTrace):
        trace = ComplexTrace(*trace)
    freqs, s21 = trace.freqs, trace.s21
    if not np.all(np.isfinite(s21)):
        raise FlipchipError("trace contains non-finite samples")

    try:
        tau = estimate_delay(freqs, s21, wing_fraction)
        z = s21 * np.exp(2j * np.pi * freqs * tau)
        noise = _noise_floor(freqs, z, wing_fraction)
        zc, r = circle_fit(z)
    except FitError as exc:
        raise NoResonanceError(f"no resonance: {exc}") from exc
    if not (np.isfinite(r) and r > 0) or 2 * r <= DIP_MAD_FACTOR * noise:
        raise NoResonanceError(
            f"no resonance: circle diameter {2 * r:.3g} vs noise floor {noise:.3g}"
        )
    wing_centre = np.mean(z[np.r_[_wings(len(z), wing_fraction)]])
    # a notch circle never encloses the origin: |zc|^2 - r^2 = a^2 (1 - Ql cos(phi) / |Qc|) > 0
    if 2 * r > 4 * abs(wing_centre) or r >= abs(zc):
        raise NoResonanceError("circle fit is not consistent with a resonance dip")

    zcent = z - zc
    f0_guess, q_guess = _initial_f0_q(freqs, zcent, np.angle(wing_centre - zc))
    theta0, q_l, f0 = phase_fit(freqs, zcent, f0_guess, q_guess)
    if not (freqs[0] <= f0 <= freqs[-1]) or not q_l > 0:
        raise FitError(
            "phase fit landed outside the trace",
            {"f0": f0, "q_l": q_l, "f_range": (freqs[0], freqs[-1])},
        )

    off_point = zc + r * np.exp(1j * (theta0 + np.pi))
    a = abs(off_point)
    alpha = float(np.angle(off_point))
    zc_norm = zc / off_point
    r_norm = r / a
    phi = float(np.angle(1 - zc_norm))
    q_c_mag = q_l / (2 * r_norm)
    inv_qi = 1 / q_l - math.cos(phi) / q_c_mag
    if not inv_qi > 0:
        raise FitError(
            "fitted parameters imply non-positive internal loss",
            {"q_l": q_l, "q_c_mag": q_c_mag, "phi": phi},
        )
    q_i = 1 / inv_qi

    fit = NotchFit(
        f0=float(f0),
        q_l=float(q_l),
        q_c_mag=float(q_c_mag),
        phi=phi,
        q_i=float(q_i),
        background=(float(a), float(_wrap(alpha)), float(tau)),
        rms_residual=0.0,
        noise_floor=noise,
    )
    if refine:
        fit = refine_notch(freqs, s21, fit)
    rms = float(np.sqrt(np.mean(np.abs(s21 - fit.model(freqs)) ** 2)))
    return dataclasses.replace(fit, rms_residual=rms)


def refine_notch(freqs, s21, fit):
    """Least-squares polish of all seven model parameters on the complex residual.

    Seeded from the circle-fit result.  The background phase is re-referenced
    to the trace centre during the solve to decorrelate it from the delay.
    """
    lw = fit.f0 / fit.q_l
    a0, alpha0, tau0 = fit.background
    f_mid = freqs.mean()
    alpha_mid0 = alpha0 - 2 * np.pi * f_mid * tau0

    def unpack(p):
        tau = tau0 + p[6] / (freqs[-1] - freqs[0])
        alpha = alpha_mid0 + p[5] + 2 * np.pi * f_mid * tau
        return (
            fit.f0 + p[0] * lw,
            fit.q_l * math.exp(p[1]),
            fit.q_c_mag * math.exp(p[2]),
            p[3],
            a0 * math.exp(p[4]),
            alpha,
            tau,
        )

    def resid(p):
        d = s21 - notch_s21(freqs, *unpack(p))
        return np.r_[d.real, d.imag]

    sol = optimize.least_squares(resid, [0, 0, 0, fit.phi, 0, 0, 0], method="lm")
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitError("model refinement did not converge", {"message": sol.message})
    f0, q_l, q_c_mag, phi, a, alpha, tau = unpack(sol.x)
    inv_qi = 1 / q_l - math.cos(phi) / q_c_mag
    if not (inv_qi > 0 and freqs[0] <= f0 <= freqs[-1]):
        raise FitError(
            "refined parameters are not physical",
            {"f0": f0, "q_l": q_l, "q_c_mag": q_c_mag, "phi": phi},
        )
    return dataclasses.replace(
        fit,
        f0=float(f0),
        q_l=float(q_l),
        q_c_mag=float(q_c_mag),
        phi=float(_wrap(phi)),
        q_i=float(1 / inv_qi),
        background=(float(a), float(_wrap(alpha)), float(tau)),
    )


def applied_power(vna_power, line_attenuation):
    """Power at the sample input in watts, from VNA output (dBm) and input-line attenuation (dB)."""
    return 1e-3 * 10 ** ((vna_power - line_attenuation) / 10)


def photon_number_from_rates(omega0, kappa, gamma, p_app):
    total = kappa + gamma
    if not total > 0:
        raise FlipchipError("total linewidth kappa + gamma must be positive")
    return 2 * kappa * p_app / (hbar * omega0 * total**2)


def photon_number(fit, p_app):
    """Mean internal photon number for a fitted resonator driven with ``p_app`` watts."""
    omega0 = 2 * math.pi * fit.f0
    return photon_number_from_rates(omega0, omega0 / fit.q_c_mag, omega0 / fit.q_i, p_app)


@dataclasses.dataclass(frozen=True)
class PhotonCalc:
    kappa: float
    gamma: float
    p_app: float
    n_int: float
    n_int_low: float = None
    n_int_high: float = None

    def as_dict(self):
        return dataclasses.asdict(self)


def photon_calc(fit, vna_power, line_attenuation, band_db=3.0):
    """Photon number with an optional +-``band_db`` attenuation-uncertainty band."""
    omega0 = 2 * math.pi * fit.f0
    kappa, gamma = omega0 / fit.q_c_mag, omega0 / fit.q_i
    p_app = applied_power(vna_power, line_attenuation)
    n = photon_number_from_rates(omega0, kappa, gamma, p_app)
    low = high = None
    if band_db:
        low = n * 10 ** (-band_db / 10)
        high = n * 10 ** (band_db / 10)
    return PhotonCalc(kappa, gamma, p_app, n, low, high)
