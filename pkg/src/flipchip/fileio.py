"""CSV readers and writers for the package's tabular formats."""

import csv
import io
import math

import numpy as np

from .errors import FlipchipError
from .heightmap import Corner, CornerSet, HeightMap
from .losses import ParticipationRecord
from .resonator import ResonatorRecord
from .vnafit import ComplexTrace


def fmt(x):
    """Fixed float formatting for every emitted file (9 significant digits)."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".9g")
    return str(x)


def _rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FlipchipError(f"{path}: empty file")
        fields = [f.strip() for f in reader.fieldnames]
        rows = [{k.strip(): (v or "").strip() for k, v in row.items() if k} for row in reader]
    return fields, rows


def _require(path, fields, needed):
    missing = [c for c in needed if c not in fields]
    if missing:
        raise FlipchipError(f"{path}: missing column(s) {', '.join(missing)}")


def _float(value):
    return float(value) if value not in ("", None) else math.nan


def read_heightmap_csv(path):
    fields, rows = _rows(path)
    _require(path, fields, ["x_um", "y_um", "z_um"])
    if not rows:
        raise FlipchipError(f"{path}: no samples")
    arr = np.array([[_float(r["x_um"]), _float(r["y_um"]), _float(r["z_um"])] for r in rows])
    return HeightMap.from_points(arr[:, 0], arr[:, 1], arr[:, 2])


def write_csv(fh, header, rows):
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(fmt(v) for v in row) + "\n")


def heightmap_rows(hm):
    x, y, z = hm.to_points()
    return zip(x.tolist(), y.tolist(), z.tolist())


def write_heightmap_csv(fh, hm):
    write_csv(fh, ["x_um", "y_um", "z_um"], heightmap_rows(hm))


def heightmap_csv_text(hm):
    buf = io.StringIO()
    write_heightmap_csv(buf, hm)
    return buf.getvalue()


def read_resonators_csv(path):
    """Rows of ``index,length_um,f_ghz,copy_id`` with an optional ``facing`` column."""
    fields, rows = _rows(path)
    _require(path, fields, ["index", "length_um", "f_ghz"])
    out = []
    for r in rows:
        f = r.get("f_ghz", "")
        out.append(
            ResonatorRecord(
                index=int(r["index"]),
                length_l=float(r["length_um"]),
                measured_f=float(f) if f else None,
                facing=r.get("facing") or None,
                copy_id=r.get("copy_id") or None,
            )
        )
    return out


def read_corners_csv(path):
    """Corner table -> {module: CornerSet}.

    Columns ``corner,x_um,y_um`` plus either ``z_um`` or several ``z_*_um``
    columns (one per detector), which are averaged.  A ``module`` column
    groups rows; without it the whole file is one module named "".
    """
    fields, rows = _rows(path)
    _require(path, fields, ["corner", "x_um", "y_um"])
    z_cols = ["z_um"] if "z_um" in fields else [f for f in fields if f.startswith("z_") and f.endswith("_um")]
    if not z_cols:
        raise FlipchipError(f"{path}: no separation column (z_um or z_<detector>_um)")
    grouped = {}
    for r in rows:
        z = float(np.mean([float(r[c]) for c in z_cols]))
        corner = Corner(r["corner"], float(r["x_um"]), float(r["y_um"]), z)
        grouped.setdefault(r.get("module", ""), []).append(corner)
    return {m: CornerSet(tuple(cs)) for m, cs in grouped.items()}


def read_trace_csv(path):
    fields, rows = _rows(path)
    _require(path, fields, ["f_hz", "re_s21", "im_s21"])
    arr = np.array([[float(r["f_hz"]), float(r["re_s21"]), float(r["im_s21"])] for r in rows])
    return ComplexTrace(arr[:, 0], arr[:, 1] + 1j * arr[:, 2])


def write_trace_csv(fh, freqs, s21):
    write_csv(fh, ["f_hz", "re_s21", "im_s21"], zip(freqs.tolist(), s21.real.tolist(), s21.imag.tolist()))


def read_participation_csv(path):
    fields, rows = _rows(path)
    _require(path, fields, ["w_um", "facing", "p_ms", "p_mv", "p_sv"])
    out = []
    for r in rows:
        def opt(key):
            v = r.get(key, "")
            return float(v) if v else None

        out.append(
            ParticipationRecord(
                w=float(r["w_um"]),
                facing=r["facing"],
                p_ms=opt("p_ms"),
                p_mv=opt("p_mv"),
                p_sv=opt("p_sv"),
                p_bulk_substrate=opt("p_bulk_substrate"),
                p_vacuum=opt("p_vacuum"),
            )
        )
    return out
