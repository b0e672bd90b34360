"""Synthetic profilometry maps and S21 traces with known parameters."""

import math

import numpy as np

from .heightmap import HeightMap
from .vnafit import loaded_q, notch_s21


def device_map(
    pitch=50.0,
    top_size=11000.0,
    margin=500.0,
    separation=10.0,
    substrate=525.2,
    tilt_urad=0.0,
    tilt_direction_deg=0.0,
    bow_um=0.0,
    bottom_slope=(0.0, 0.0),
    bottom_offset=0.0,
    noise_sigma=0.0,
    artifact_columns=(),
    artifact_offset=5.0,
    rng=None,
):
    """Flip-chip module scan: a square top chip centred on a larger bottom-chip field.

    ``bottom_slope`` tilts the whole scan (stage misalignment).  The top chip
    carries an extra relative tilt and a paraboloidal bow whose corner-minus-
    centre height is ``bow_um``; the bow has zero mean over the chip, so the
    mean top-chip height stays substrate + separation.  ``artifact_columns``
    are column indices whose entire scan is offset by ``artifact_offset``.
    """
    rng = np.random.default_rng(rng)
    extent = top_size + 2 * margin
    n = int(round(extent / pitch)) + 1
    coords = np.arange(n) * pitch
    xx, yy = np.meshgrid(coords, coords)
    centre = extent / 2
    half = top_size / 2

    z = bottom_slope[0] * xx + bottom_slope[1] * yy + bottom_offset
    on_top = (np.abs(xx - centre) <= half + 1e-9) & (np.abs(yy - centre) <= half + 1e-9)
    slope = math.tan(tilt_urad * 1e-6)
    theta = math.radians(tilt_direction_deg)
    rx, ry = xx - centre, yy - centre
    rel = slope * (math.cos(theta) * rx + math.sin(theta) * ry)
    rho2 = (rx**2 + ry**2) / (2 * half**2)  # 1 at the corners
    rel = rel + bow_um * (rho2 - rho2[on_top].mean())
    z = z + np.where(on_top, substrate + separation + rel, 0.0)
    if noise_sigma:
        z = z + rng.normal(0.0, noise_sigma, z.shape)
    for j in artifact_columns:
        z[:, j] += artifact_offset
    return HeightMap(z, pitch, pitch, origin=(0.0, 0.0))


def notch_trace(
    f0=5e9,
    q_i=5e5,
    q_c_mag=2e6,
    phi=0.0,
    a=1.0,
    alpha=0.0,
    tau=0.0,
    n_points=201,
    half_span_linewidths=5.0,
    snr_db=None,
    rng=None,
):
    """Notch S21 trace; ``snr_db`` sets complex Gaussian noise RMS to a * 10**(-snr/20)."""
    rng = np.random.default_rng(rng)
    q_l = loaded_q(q_i, q_c_mag, phi)
    half = half_span_linewidths * f0 / q_l
    freqs = np.linspace(f0 - half, f0 + half, n_points)
    s21 = notch_s21(freqs, f0, q_l, q_c_mag, phi, a, alpha, tau)
    if snr_db is not None:
        sigma = a * 10 ** (-snr_db / 20) / math.sqrt(2)
        s21 = s21 + rng.normal(0, sigma, n_points) + 1j * rng.normal(0, sigma, n_points)
    return freqs, s21
