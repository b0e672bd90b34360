"""Batch report over a dataset directory.

Layout of a dataset directory (every part optional, at least one required)::

    heightmaps/*.csv      x_um,y_um,z_um profilometry maps
    resonators.csv        index,length_um,f_ghz,copy_id[,facing]
    corners.csv           module,corner,x_um,y_um,z_um (or z_<detector>_um)
    traces/*.csv          f_hz,re_s21,im_s21
    participation.csv     w_um,facing,p_ms,p_mv,p_sv

The report is a single JSON document with sorted keys and floats rounded to
9 significant digits, so identical inputs give byte-identical output.
"""

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FlipchipError
from .fileio import (
    read_corners_csv,
    read_heightmap_csv,
    read_participation_csv,
    read_resonators_csv,
    read_trace_csv,
    write_csv,
    write_heightmap_csv,
)
from .heightmap import corner_tilt_worst_case, process_map, summarize_chip
from .losses import relative_q, total_participation
from .resonator import deviation_stats, fit_vph
from .vnafit import fit_notch

SIG_DIGITS = 9
EXIT_OK = 0
EXIT_STAGE_ERROR = 1
EXIT_NO_INPUTS = 2


def normalize(obj):
    """JSON-ready copy: floats at fixed precision, NaN as null, tuples as lists."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, f".{SIG_DIGITS}g"))
    return obj


def dumps(obj):
    return json.dumps(normalize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def discover(dataset):
    dataset = Path(dataset)
    found = {
        "heightmaps": sorted((dataset / "heightmaps").glob("*.csv")),
        "resonators": [p for p in [dataset / "resonators.csv"] if p.is_file()],
        "corners": [p for p in [dataset / "corners.csv"] if p.is_file()],
        "traces": sorted((dataset / "traces").glob("*.csv")),
        "participation": [p for p in [dataset / "participation.csv"] if p.is_file()],
    }
    return {k: v for k, v in found.items() if v}


def _stats(values):
    arr = np.asarray(values, dtype=float)
    return {
        "n": len(arr),
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
    }


class _Run:
    def __init__(self, config, dataset, out):
        self.config = config
        self.dataset = Path(dataset)
        self.out = Path(out)
        self.errors = []

    def rel(self, path):
        return Path(path).relative_to(self.dataset).as_posix()

    def fail(self, stage, path, exc):
        self.errors.append({"stage": stage, "input": self.rel(path) if path else None, "message": str(exc)})

    # -- stages ---------------------------------------------------------
    def _one_map(self, path):
        cfg = self.config
        hm = read_heightmap_csv(path)
        leveled, top, _ = process_map(
            hm,
            substrate_thickness=cfg.substrate_thickness_um,
            step_threshold=cfg.step_threshold_um,
            mask_threshold=cfg.mask_threshold_um,
        )
        summary = summarize_chip(top, cfg.substrate_thickness_um, cfg.bow_patch_fraction)
        return leveled, top, summary

    def heightmaps(self, paths):
        results = {}
        # maps are independent; the reduction below is sequential and ordered
        with ThreadPoolExecutor() as pool:
            futures = [(p, pool.submit(self._one_map, p)) for p in paths]
        outdir = self.out / "heightmaps"
        outdir.mkdir(parents=True, exist_ok=True)
        for path, fut in futures:
            try:
                leveled, top, summary = fut.result()
            except (FlipchipError, ValueError, OSError) as exc:
                self.fail("heightmaps", path, exc)
                continue
            with open(outdir / f"{path.stem}_leveled.csv", "w") as fh:
                write_heightmap_csv(fh, leveled)
            with open(outdir / f"{path.stem}_top.csv", "w") as fh:
                write_heightmap_csv(fh, top)
            results[path.stem] = summary.as_dict()
        section = {"maps": results}
        if results:
            section["mean_separation_um"] = _stats([r["mean_separation_um"] for r in results.values()])
            section["tilt_urad"] = _stats([r["tilt_urad"] for r in results.values()])
            rows = [
                (name, r["mean_separation_um"], r["tilt_urad"], r["bow_um"], r["masked_columns"])
                for name, r in sorted(results.items())
            ]
            with open(self.out / "heightmap_summary.csv", "w") as fh:
                write_csv(fh, ["map", "mean_separation_um", "tilt_urad", "bow_um", "masked_columns"], rows)
        return section

    def resonators(self, path):
        try:
            records = read_resonators_csv(path)
        except (FlipchipError, ValueError, OSError) as exc:
            self.fail("resonators", path, exc)
            return {}
        groups = {}
        for r in records:
            groups.setdefault(r.facing or "all", []).append(r)
        fits, rows = {}, []
        for facing, recs in sorted(groups.items()):
            try:
                fit = fit_vph(recs)
            except FlipchipError as exc:
                self.fail(f"fit-vph[{facing}]", path, exc)
                continue
            fits[facing] = fit.as_dict()
            measured = [r for r in recs if r.measured_f is not None]
            for r, res in zip(measured, fit.per_resonator_residuals):
                rows.append((facing, r.index, r.length_l, r.measured_f, r.copy_id or "", res))
        with open(self.out / "resonator_fits.csv", "w") as fh:
            write_csv(fh, ["facing", "index", "length_um", "f_ghz", "copy_id", "residual_mhz"], rows)
        section = {"fits": fits}
        copies = {}
        for r in records:
            if r.copy_id and r.measured_f is not None:
                copies.setdefault(r.copy_id, []).append((r.index, r.measured_f))
        if len(copies) > 1:
            try:
                section["copy_deviation"] = deviation_stats(copies).as_dict()
            except FlipchipError as exc:
                self.fail("copy-deviation", path, exc)
        return section

    def corners(self, path):
        try:
            modules = read_corners_csv(path)
        except (FlipchipError, ValueError, OSError) as exc:
            self.fail("corners", path, exc)
            return {}
        results = {m: corner_tilt_worst_case(cs).as_dict() for m, cs in sorted(modules.items())}
        with open(self.out / "corner_tilts.csv", "w") as fh:
            write_csv(
                fh,
                ["module", "mean_separation_um", "worst_tilt_urad"],
                [(m, r["mean_separation_um"], r["worst_tilt_urad"]) for m, r in results.items()],
            )
        return {
            "modules": results,
            "mean_separation_um": _stats([r["mean_separation_um"] for r in results.values()]),
            "worst_tilt_urad": _stats([r["worst_tilt_urad"] for r in results.values()]),
        }

    def traces(self, paths):
        results, rows = {}, []
        for path in paths:
            try:
                fit = fit_notch(read_trace_csv(path), wing_fraction=self.config.wing_fraction)
            except (FlipchipError, ValueError, OSError) as exc:
                self.fail("fit-notch", path, exc)
                continue
            results[path.stem] = fit.as_dict()
            rows.append((path.stem, fit.f0, fit.q_l, fit.q_c_mag, fit.phi, fit.q_i, fit.rms_residual))
        with open(self.out / "notch_fits.csv", "w") as fh:
            write_csv(fh, ["trace", "f0_hz", "q_l", "q_c_mag", "phi_rad", "q_i", "rms_residual"], rows)
        return results

    def participation(self, path):
        cfg = self.config
        try:
            records = read_participation_csv(path)
        except (FlipchipError, ValueError, OSError) as exc:
            self.fail("participation", path, exc)
            return {}
        section = {
            "p_sigma": [
                {"w_um": r.w, "facing": r.facing, "p_sigma": total_participation(r)}
                for r in sorted(records, key=lambda r: (r.facing, r.w))
            ]
        }
        if cfg.relq_anchor_q is not None:
            curves = {}
            for facing in sorted({r.facing for r in records}):
                try:
                    curve = relative_q(records, cfg.relq_anchor_w_um, cfg.relq_anchor_q, facing)
                except FlipchipError as exc:
                    self.fail(f"relq[{facing}]", path, exc)
                    continue
                curves[facing] = curve.as_dict()
                with open(self.out / f"relq_{facing}.csv", "w") as fh:
                    write_csv(fh, ["w_um", "q_pr"], curve.points)
            section["relative_q"] = curves
        return section


def run_report(config, dataset, out):
    """Run every applicable stage; returns (exit code, report dict).

    Writes ``report.json`` and per-stage CSVs into ``out``.  When any stage
    fails the remaining stages still run, the partial artifacts stay on
    disk, ``errors.json`` lists the failures and the exit code is nonzero.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = Path(dataset)
    inputs = discover(dataset) if dataset.is_dir() else {}
    if not inputs:
        manifest = {
            "status": "no inputs",
            "errors": [{"stage": "inputs", "input": None, "message": f"no inputs found in {dataset}"}],
        }
        (out / "errors.json").write_text(dumps(manifest))
        return EXIT_NO_INPUTS, manifest

    run = _Run(config, dataset, out)
    all_paths = sorted(p for paths in inputs.values() for p in paths)
    embedded_config = {k: v for k, v in config.as_dict().items() if k != "output_dir"}
    report = {
        "version": __version__,
        "config": embedded_config,
        "inputs": {run.rel(p): sha256(p) for p in all_paths},
    }
    if "heightmaps" in inputs:
        report["heightmaps"] = run.heightmaps(inputs["heightmaps"])
    if "resonators" in inputs:
        report["resonators"] = run.resonators(inputs["resonators"][0])
    if "corners" in inputs:
        report["corners"] = run.corners(inputs["corners"][0])
    if "traces" in inputs:
        report["notch_fits"] = run.traces(inputs["traces"])
    if "participation" in inputs:
        report["participation"] = run.participation(inputs["participation"][0])

    report["errors"] = run.errors
    report["status"] = "error" if run.errors else "ok"
    (out / "report.json").write_text(dumps(report))
    if run.errors:
        (out / "errors.json").write_text(dumps({"status": "error", "errors": run.errors}))
        return EXIT_STAGE_ERROR, report
    return EXIT_OK, report
