"""Profilometer height-map processing.

A map is a rectangular grid of heights (µm) built from vertical line scans:
each grid column is one scan at fixed x, each row one y position.  Invalid
cells hold NaN.  The processing chain is

    level_to_bottom_plane -> crop_top_chip -> mask_artifact_scans -> summarize_chip

and ``corner_tilt_worst_case`` handles the separate four-corner measurement.
"""

import dataclasses
import itertools
import math

import numpy as np

from .errors import EmptySelectionError, FlipchipError, UnlevelableError

DEFAULT_STEP_THRESHOLD = 400.0
DEFAULT_MASK_THRESHOLD = 2.0
DEFAULT_SUBSTRATE_THICKNESS = 525.2


@dataclasses.dataclass
class LineScan:
    scan_index: int
    x_position: float
    samples: np.ndarray  # shape (n, 2): columns y, z
    masked: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 2)
        if len(self.samples) == 0:
            raise FlipchipError(f"scan {self.scan_index} has no samples")
        if np.any(np.diff(self.samples[:, 0]) <= 0):
            raise FlipchipError(f"scan {self.scan_index}: y values must be strictly increasing")


@dataclasses.dataclass(frozen=True)
class PlaneModel:
    """z = a*x + b*y + c, slopes dimensionless (µm/µm), offset in µm."""

    a: float
    b: float
    c: float

    def __call__(self, x, y):
        return self.a * x + self.b * y + self.c

    @property
    def tilt_urad(self):
        return 1e6 * math.atan(math.hypot(self.a, self.b))

    def as_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c}


@dataclasses.dataclass
class HeightMap:
    z: np.ndarray  # shape (ny, nx); column j is the scan at x0 + j*x_pitch
    x_pitch: float
    y_pitch: float
    origin: tuple = (0.0, 0.0)
    masked_x: tuple = ()
    plane: PlaneModel = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 2 or self.z.size == 0:
            raise FlipchipError("height map must be a non-empty 2D grid")
        if not (self.x_pitch > 0 and self.y_pitch > 0):
            raise FlipchipError("pitches must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def shape(self):
        return self.z.shape

    @property
    def x(self):
        return self.origin[0] + self.x_pitch * np.arange(self.z.shape[1])

    @property
    def y(self):
        return self.origin[1] + self.y_pitch * np.arange(self.z.shape[0])

    @property
    def valid(self):
        return np.isfinite(self.z)

    def grid(self):
        return np.meshgrid(self.x, self.y)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_points(cls, x, y, z, decimals=6):
        """Build a grid from scattered (x, y, z) samples lying on a regular lattice."""
        x = np.round(np.asarray(x, dtype=float), decimals)
        y = np.round(np.asarray(y, dtype=float), decimals)
        z = np.asarray(z, dtype=float)
        if not (x.shape == y.shape == z.shape) or x.size == 0:
            raise FlipchipError("x, y, z must be equal-length, non-empty")
        ux, uy = np.unique(x), np.unique(y)
        x_pitch = float(np.min(np.diff(ux))) if len(ux) > 1 else 1.0
        y_pitch = float(np.min(np.diff(uy))) if len(uy) > 1 else 1.0
        ix = np.rint((x - ux[0]) / x_pitch).astype(int)
        iy = np.rint((y - uy[0]) / y_pitch).astype(int)
        grid = np.full((iy.max() + 1, ix.max() + 1), np.nan)
        grid[iy, ix] = z
        return cls(grid, x_pitch, y_pitch, origin=(ux[0], uy[0]))

    @classmethod
    def from_scans(cls, scans):
        xs, ys, zs = [], [], []
        for scan in scans:
            n = len(scan.samples)
            xs.append(np.full(n, scan.x_position))
            ys.append(scan.samples[:, 0])
            zs.append(np.full(n, np.nan) if scan.masked else scan.samples[:, 1])
        hm = cls.from_points(np.concatenate(xs), np.concatenate(ys), np.concatenate(zs))
        masked = tuple(sorted(float(s.x_position) for s in scans if s.masked))
        return hm.replace(masked_x=masked)

    def to_points(self):
        """(x, y, z) arrays for every grid cell, scan by scan."""
        xx, yy = self.grid()
        return xx.T.ravel(), yy.T.ravel(), self.z.T.ravel()

    def scans(self):
        masked = set(self.masked_x)
        return [
            LineScan(j, float(xj), np.column_stack([self.y, self.z[:, j]]), masked=float(xj) in masked)
            for j, xj in enumerate(self.x)
        ]


def fit_plane(x, y, z):
    """Least-squares plane through the points; coordinates are centred before solving."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.size < 3:
        raise UnlevelableError(f"plane fit needs at least 3 points, got {x.size}")
    xm, ym, zm = x.mean(), y.mean(), z.mean()
    design = np.column_stack([x - xm, y - ym])
    (a, b), _, rank, _ = np.linalg.lstsq(design, z - zm, rcond=None)
    if rank < 2:
        raise UnlevelableError("plane fit points are collinear")
    return PlaneModel(float(a), float(b), float(zm - a * xm - b * ym))


def _fit_plane_on(hm, mask):
    xx, yy = hm.grid()
    return fit_plane(xx[mask], yy[mask], hm.z[mask])


def region_mask(hm, rectangles):
    """Valid cells inside any of the (x_min, x_max, y_min, y_max) rectangles."""
    xx, yy = hm.grid()
    inside = np.zeros(hm.shape, dtype=bool)
    for x0, x1, y0, y1 in rectangles:
        inside |= (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)
    return inside & hm.valid


def auto_bottom_region(hm, step_threshold=DEFAULT_STEP_THRESHOLD):
    """Cells belonging to the bottom chip, found without user-supplied rectangles.

    Heights are split into two clusters by iterated mean thresholding; a plane
    through the low cluster gives a provisional leveling, and every cell whose
    provisionally leveled height is below half the step threshold is kept.
    """
    valid = hm.valid
    z = hm.z[valid]
    split = 0.5 * (z.min() + z.max())
    for _ in range(50):
        low, high = z[z <= split], z[z > split]
        if len(low) == 0 or len(high) == 0:
            break
        new = 0.5 * (low.mean() + high.mean())
        if new == split:
            break
        split = new
    coarse = valid & (hm.z <= split)
    plane = _fit_plane_on(hm, coarse)
    xx, yy = hm.grid()
    with np.errstate(invalid="ignore"):
        return valid & (hm.z - plane(xx, yy) < 0.5 * step_threshold)


def level_to_bottom_plane(data, bottom_region=None, step_threshold=DEFAULT_STEP_THRESHOLD):
    """Subtract the least-squares plane of the bottom-chip region from every sample.

    ``data`` is a HeightMap or a list of LineScan.  ``bottom_region`` is a list
    of (x_min, x_max, y_min, y_max) rectangles in µm; when omitted the region
    is detected by ``auto_bottom_region``.
    """
    hm = data if isinstance(data, HeightMap) else HeightMap.from_scans(data)
    if not hm.valid.any():
        raise FlipchipError("all samples are masked")
    if bottom_region is None:
        region = auto_bottom_region(hm, step_threshold)
    else:
        region = region_mask(hm, bottom_region)
    plane = _fit_plane_on(hm, region)
    xx, yy = hm.grid()
    return hm.replace(z=hm.z - plane(xx, yy), plane=plane)


def crop_top_chip(hm, step_threshold=DEFAULT_STEP_THRESHOLD):
    """Sub-grid bounding the cells above ``step_threshold``; other cells become invalid."""
    with np.errstate(invalid="ignore"):
        selected = hm.valid & (hm.z > step_threshold)
    if not selected.any():
        raise EmptySelectionError(f"no cells above step threshold {step_threshold} um")
    rows = np.flatnonzero(selected.any(axis=1))
    cols = np.flatnonzero(selected.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    z = np.where(selected, hm.z, np.nan)[r0:r1, c0:c1]
    origin = (hm.origin[0] + c0 * hm.x_pitch, hm.origin[1] + r0 * hm.y_pitch)
    return hm.replace(z=z, origin=origin)


def _reference_medians(medians, neighbors):
    """Median of the 2*neighbors nearest other columns, balanced across both sides where possible."""
    n = len(medians)
    want = 2 * neighbors
    refs = np.empty(n)
    for i in range(n):
        left = list(range(i - 1, -1, -1))
        right = list(range(i + 1, n))
        n_left = min(len(left), max(neighbors, want - len(right)))
        n_right = min(len(right), want - n_left)
        refs[i] = np.median(medians[left[:n_left] + right[:n_right]])
    return refs


def mask_artifact_scans(hm, median_jump_threshold=DEFAULT_MASK_THRESHOLD, neighbors=2):
    """Invalidate scans whose median height jumps away from their neighbours.

    Each scan's median is compared with the median of the medians of the
    ``2*neighbors`` nearest unmasked scans that carry data.  The worst offender
    is masked first and the references recomputed, so a run of adjacent offset
    scans is removed one by one without dragging clean neighbours along.
    """
    cols = np.flatnonzero(hm.valid.any(axis=0))
    if len(cols) < 3:
        raise FlipchipError("artifact masking needs at least 3 scans with data")
    medians = np.nanmedian(hm.z[:, cols], axis=0)
    keep = np.ones(len(cols), dtype=bool)
    bad = []
    while keep.sum() >= 3:
        live = np.flatnonzero(keep)
        jumps = np.abs(medians[live] - _reference_medians(medians[live], neighbors))
        worst = int(np.argmax(jumps))
        if jumps[worst] <= median_jump_threshold:
            break
        keep[live[worst]] = False
        bad.append(cols[live[worst]])

    z = hm.z.copy()
    z[:, bad] = np.nan
    xs = hm.x
    masked = tuple(sorted(set(hm.masked_x) | {float(xs[j]) for j in bad}))
    return hm.replace(z=z, masked_x=masked)


@dataclasses.dataclass(frozen=True)
class ChipSummary:
    mean_separation: float
    tilt: float
    bow: float
    substrate_thickness_used: float
    n_masked_scans: int
    plane: PlaneModel = None
    masked_x: tuple = ()

    def as_dict(self):
        return {
            "mean_separation_um": self.mean_separation,
            "tilt_urad": self.tilt,
            "bow_um": self.bow,
            "substrate_thickness_um": self.substrate_thickness_used,
            "masked_columns": self.n_masked_scans,
            "masked_x_um": list(self.masked_x),
            "plane": self.plane.as_dict() if self.plane else None,
        }


def bow(hm, plane, patch_fraction=0.1):
    """Mean corner residual minus centre residual after removing ``plane``.

    Patches are squares of ``patch_fraction`` of the valid extent.  Positive
    values mean raised corners.  Returns NaN when a patch has no valid cells.
    """
    xx, yy = hm.grid()
    valid = hm.valid
    resid = hm.z - plane(xx, yy)
    x_lo, x_hi = xx[valid].min(), xx[valid].max()
    y_lo, y_hi = yy[valid].min(), yy[valid].max()
    dx = patch_fraction * (x_hi - x_lo)
    dy = patch_fraction * (y_hi - y_lo)
    xc, yc = 0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)

    def patch_mean(sel):
        sel = sel & valid
        return resid[sel].mean() if sel.any() else np.nan

    corners = [
        patch_mean((xx <= x_lo + dx) & (yy <= y_lo + dy)),
        patch_mean((xx >= x_hi - dx) & (yy <= y_lo + dy)),
        patch_mean((xx <= x_lo + dx) & (yy >= y_hi - dy)),
        patch_mean((xx >= x_hi - dx) & (yy >= y_hi - dy)),
    ]
    centre = patch_mean((np.abs(xx - xc) <= dx / 2) & (np.abs(yy - yc) <= dy / 2))
    return float(np.mean(corners) - centre)


def summarize_chip(hm, substrate_thickness=DEFAULT_SUBSTRATE_THICKNESS, patch_fraction=0.1):
    """Separation, plane-fit tilt and bow of a leveled, cropped, masked top-chip map."""
    valid = hm.valid
    plane = _fit_plane_on(hm, valid)
    return ChipSummary(
        mean_separation=float(hm.z[valid].mean() - substrate_thickness),
        tilt=plane.tilt_urad,
        bow=bow(hm, plane, patch_fraction),
        substrate_thickness_used=float(substrate_thickness),
        n_masked_scans=len(hm.masked_x),
        plane=plane,
        masked_x=hm.masked_x,
    )


def process_map(
    hm,
    substrate_thickness=DEFAULT_SUBSTRATE_THICKNESS,
    step_threshold=DEFAULT_STEP_THRESHOLD,
    mask_threshold=DEFAULT_MASK_THRESHOLD,
    bottom_region=None,
):
    """Full chain; returns (leveled map, cropped+masked top-chip map, summary).

    Artifact scans are found on the top chip, but the whole trace is bad, so
    when any are found the chain is rerun with those scans removed from the
    raw map; otherwise their bottom-chip samples would bias the leveling plane.
    """
    leveled = level_to_bottom_plane(hm, bottom_region, step_threshold)
    top = mask_artifact_scans(crop_top_chip(leveled, step_threshold), mask_threshold)
    if top.masked_x != hm.masked_x:
        cleaned = _drop_scans(hm, top.masked_x)
        leveled = level_to_bottom_plane(cleaned, bottom_region, step_threshold)
        top = mask_artifact_scans(crop_top_chip(leveled, step_threshold), mask_threshold)
    return leveled, top, summarize_chip(top, substrate_thickness)


def _drop_scans(hm, xs):
    z = hm.z.copy()
    cols = np.rint((np.asarray(xs) - hm.origin[0]) / hm.x_pitch).astype(int)
    z[:, cols] = np.nan
    return hm.replace(z=z, masked_x=tuple(sorted(set(hm.masked_x) | set(xs))))


@dataclasses.dataclass(frozen=True)
class Corner:
    label: str
    x: float
    y: float
    z: float


@dataclasses.dataclass(frozen=True)
class CornerSet:
    corners: tuple

    def __post_init__(self):
        corners = tuple(c if isinstance(c, Corner) else Corner(*c) for c in self.corners)
        object.__setattr__(self, "corners", corners)
        if len(corners) != 4:
            raise FlipchipError(f"a corner set needs exactly four corners, got {len(corners)}")
        positions = {(c.x, c.y) for c in corners}
        if len(positions) != 4:
            raise FlipchipError("corner lateral positions must be distinct")


@dataclasses.dataclass(frozen=True)
class CornerTilt:
    worst_tilt_urad: float
    mean_separation: float
    pair_tilts_urad: dict  # (label_i, label_j) -> tilt

    def as_dict(self):
        return {
            "worst_tilt_urad": self.worst_tilt_urad,
            "mean_separation_um": self.mean_separation,
            "pair_tilts_urad": {f"{i}-{j}": t for (i, j), t in self.pair_tilts_urad.items()},
        }


def corner_tilt_worst_case(corners):
    """Largest arctan(|dz| / lateral distance) over the six corner pairs, in µrad."""
    if not isinstance(corners, CornerSet):
        corners = CornerSet(tuple(corners))
    pairs = {}
    for c1, c2 in itertools.combinations(corners.corners, 2):
        dist = math.hypot(c2.x - c1.x, c2.y - c1.y)
        pairs[(c1.label, c2.label)] = 1e6 * math.atan(abs(c2.z - c1.z) / dist)
    return CornerTilt(
        worst_tilt_urad=max(pairs.values()),
        mean_separation=sum(c.z for c in corners.corners) / 4.0,
        pair_tilts_urad=pairs,
    )
