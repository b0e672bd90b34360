#!/usr/bin/env python3
"""Regenerate the bundled sample dataset under src/flipchip/data/dataset.

The resonator table is measured data.  Everything else is synthetic with a
fixed seed: per-device separations and tilts are drawn and then rescaled so
that their sample mean and standard deviation equal the target group
statistics exactly, which keeps the recovered values inside the bands.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from flipchip.fileio import write_csv, write_heightmap_csv, write_trace_csv
from flipchip.synthetic import device_map, notch_trace

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_OUT = ROOT / "src" / "flipchip" / "data" / "dataset"
SEED = 20231016

# index, w, s, length (um), mean measured frequency (GHz)
MEASURED_RESONATORS = [
    (0, 5.00, 3.24, 6049.8, 4.9729),
    (1, 5.00, 3.24, 5816.1, 5.1724),
    (2, 5.00, 3.24, 5599.7, 5.3748),
    (3, 5.00, 3.24, 5398.7, 5.5797),
    (4, 5.00, 3.24, 5211.6, 5.7865),
    (5, 5.00, 3.24, 5037.0, 5.9921),
    (6, 5.00, 3.24, 4873.7, 6.1990),
    (7, 5.00, 3.24, 4720.5, 6.3988),
    (8, 5.00, 3.14, 6749.1, 4.3347),
    (9, 5.00, 3.14, 6447.9, 4.5386),
    (10, 5.00, 3.14, 6172.4, 4.7407),
    (11, 5.00, 3.14, 5919.4, 4.9423),
    (12, 5.00, 3.14, 5686.2, 5.1448),
    (13, 5.00, 3.14, 5470.6, 5.3458),
    (14, 5.00, 3.14, 5270.7, 5.5467),
    (15, 5.00, 3.14, 5082.8, 5.7475),
]

N_DEVICES = 9
SEPARATION = (9.6, 0.8)  # mean, sample std (um)
TILT = (76.0, 35.0)  # urad
CORNER_SEPARATION = (11.0, 0.3)
CORNER_TILT = (62.0, 26.0)
CORNER_SPAN = 11000.0  # um between adjacent corners


def pinned(rng, n, mean, std, positive=True):
    """n draws rescaled to an exact sample mean and std (ddof=1)."""
    while True:
        x = rng.normal(size=n)
        x = (x - x.mean()) / x.std(ddof=1)
        x = mean + std * x
        if not positive or x.min() > 0:
            return x


def write_resonators(out):
    rows = [(i, w, s, l, f, "metal" if i < 8 else "dielectric", "mean") for i, w, s, l, f in MEASURED_RESONATORS]
    with open(out / "resonators.csv", "w") as fh:
        fh.write("index,w_um,s_um,length_um,f_ghz,facing,copy_id\n")
        for i, w, s, l, f, facing, cid in rows:
            fh.write(f"{i},{w:.2f},{s:.2f},{l:.1f},{f:.4f},{facing},{cid}\n")


def write_heightmaps(out, rng):
    hm_dir = out / "heightmaps"
    hm_dir.mkdir(parents=True, exist_ok=True)
    seps = pinned(rng, N_DEVICES, *SEPARATION)
    tilts = pinned(rng, N_DEVICES, *TILT)
    for k in range(N_DEVICES):
        artifacts = (int(rng.integers(8, 50)),) if k % 3 == 0 else ()
        hm = device_map(
            pitch=200.0,
            top_size=11000.0,
            margin=600.0,
            separation=float(seps[k]),
            tilt_urad=float(tilts[k]),
            tilt_direction_deg=float(rng.uniform(0, 360)),
            bow_um=float(rng.uniform(0.6, 1.2)),
            bottom_slope=tuple(rng.normal(0, 2e-4, 2)),
            bottom_offset=float(rng.uniform(-5, 5)),
            noise_sigma=0.05,
            artifact_columns=artifacts,
            artifact_offset=float(rng.choice([-1, 1]) * rng.uniform(4, 8)),
            rng=rng,
        )
        with open(hm_dir / f"spacer_{k + 1:02d}.csv", "w") as fh:
            write_heightmap_csv(fh, hm)


def write_corners(out, rng):
    seps = pinned(rng, N_DEVICES, *CORNER_SEPARATION)
    tilts = pinned(rng, N_DEVICES, *CORNER_TILT)
    half = CORNER_SPAN / 2
    labels = {"TL": (-half, half), "TR": (half, half), "BL": (-half, -half), "BR": (half, -half)}
    rows = []
    for k in range(N_DEVICES):
        theta = rng.uniform(0, 2 * math.pi)
        c, s = math.cos(theta), math.sin(theta)
        # worst pair of a plane on a square: largest of the edge and diagonal projections
        worst_factor = max(abs(c), abs(s), abs(c + s) / math.sqrt(2), abs(c - s) / math.sqrt(2))
        g = math.tan(tilts[k] * 1e-6 / worst_factor)
        for label, (x, y) in labels.items():
            z = seps[k] + g * (c * x + s * y)
            z_inlens, z_se = z + rng.normal(0, 0.005, 2)
            rows.append((f"M{k + 1}", label, x + half, y + half, round(z_inlens, 3), round(z_se, 3)))
    with open(out / "corners.csv", "w") as fh:
        write_csv(fh, ["module", "corner", "x_um", "y_um", "z_inlens_um", "z_se_um"], rows)


def write_traces(out, rng):
    tr_dir = out / "traces"
    tr_dir.mkdir(parents=True, exist_ok=True)
    freqs, s21 = notch_trace(
        f0=5.1724e9, q_i=5e5, q_c_mag=8e5, phi=0.2, a=0.8, alpha=1.1, tau=40e-9, snr_db=40, rng=rng
    )
    with open(tr_dir / "res01.csv", "w") as fh:
        write_trace_csv(fh, freqs, s21)


def write_participation(out):
    # illustrative power laws, not simulated values
    widths = [2.5, 5.0, 10.0, 15.0, 20.0, 30.0]
    rows = []
    for facing, scale in (("metal", 1.25), ("dielectric", 1.0)):
        for w in widths:
            r = 5.0 / w
            rows.append((w, facing, scale * 1.1e-3 * r**0.95, scale * 1.4e-5 * r**0.95, scale * 4.5e-4 * r**0.9))
    with open(out / "participation.csv", "w") as fh:
        write_csv(fh, ["w_um", "facing", "p_ms", "p_mv", "p_sv"], rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    write_resonators(args.out)
    write_heightmaps(args.out, rng)
    write_corners(args.out, rng)
    write_traces(args.out, rng)
    write_participation(args.out)
    print(f"wrote sample dataset to {args.out}")


if __name__ == "__main__":
    main()
