"""Interface participation ratios to relative quality-factor predictions.

Participation ratios (metal-substrate, metal-vacuum, substrate-vacuum) come
from an external electrostatic solver.  With all interfaces weighted equally,
the internal Q of a geometry is predicted by scaling a measured anchor:

    Q_pr(w) = Q_meas(w_anchor) * p_sum(w_anchor) / p_sum(w)
"""

import dataclasses
import math

import numpy as np

from .errors import FlipchipError

SUM_TOLERANCE = 1e-6


@dataclasses.dataclass(frozen=True)
class ParticipationRecord:
    w: float
    facing: str
    p_ms: float = None
    p_mv: float = None
    p_sv: float = None
    p_bulk_substrate: float = None
    p_vacuum: float = None
    metadata: dict = dataclasses.field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.w > 0:
            raise FlipchipError("w must be positive")
        provided = [p for p in self.ratios() if p is not None]
        for p in provided:
            if not 0 <= p <= 1:
                raise FlipchipError(f"participation ratio {p} outside [0, 1]")
        if sum(provided) > 1 + SUM_TOLERANCE:
            raise FlipchipError(f"participation ratios sum to {sum(provided)} > 1")

    def ratios(self):
        return (self.p_ms, self.p_mv, self.p_sv, self.p_bulk_substrate, self.p_vacuum)


@dataclasses.dataclass(frozen=True)
class RelativeQCurve:
    anchor_w: float
    anchor_q: float
    points: tuple  # ((w, q_pr), ...)
    facing: str = None

    def as_dict(self):
        return {
            "facing": self.facing,
            "anchor_w_um": self.anchor_w,
            "anchor_q": self.anchor_q,
            "points": [{"w_um": w, "q_pr": q} for w, q in self.points],
        }


def total_participation(rec):
    """Sum of the three lossy-interface participation ratios."""
    parts = (rec.p_ms, rec.p_mv, rec.p_sv)
    if any(p is None for p in parts):
        raise FlipchipError(f"record at w={rec.w} is missing an interface ratio")
    return rec.p_ms + rec.p_mv + rec.p_sv


def _select(records, facing):
    if facing is None:
        facings = {r.facing for r in records}
        if len(facings) > 1:
            raise FlipchipError(f"records mix facings {sorted(facings)}; select one facing")
        return list(records)
    return [r for r in records if r.facing == facing]


def relative_q(records, anchor_w, anchor_q, facing=None):
    """Scale the anchor Q by the participation ratio of each geometry."""
    recs = sorted(_select(records, facing), key=lambda r: r.w)
    anchor = [r for r in recs if r.w == anchor_w]
    if not anchor:
        raise FlipchipError(f"no participation record at anchor w={anchor_w} um")
    p_anchor = total_participation(anchor[0])
    if p_anchor == 0:
        raise FlipchipError("anchor participation is zero")
    points = []
    for r in recs:
        p = total_participation(r)
        if p == 0:
            raise FlipchipError(f"zero total participation at w={r.w} um")
        q = anchor_q if r.w == anchor_w else anchor_q * p_anchor / p
        points.append((r.w, q))
    return RelativeQCurve(anchor_w, anchor_q, tuple(points), facing=recs[0].facing)


def interpolate_p_sigma(records, w_query, facing=None):
    """Total participation at ``w_query`` by linear interpolation in log(w)-log(p)."""
    recs = sorted(_select(records, facing), key=lambda r: r.w)
    if not recs:
        raise FlipchipError("no participation records")
    ws = np.array([r.w for r in recs])
    ps = np.array([total_participation(r) for r in recs])
    exact = np.flatnonzero(ws == w_query)
    if exact.size:
        return float(ps[exact[0]])
    if not ws[0] <= w_query <= ws[-1]:
        raise FlipchipError(f"w={w_query} um outside record range [{ws[0]}, {ws[-1]}]; no extrapolation")
    if np.any(ps <= 0):
        raise FlipchipError("log interpolation needs positive participation values")
    return float(math.exp(np.interp(math.log(w_query), np.log(ws), np.log(ps))))
