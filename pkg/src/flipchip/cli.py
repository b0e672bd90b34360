"""Command-line front end.

Every subcommand prints its result to stdout, or writes it into ``--out``
when that is given.  ``--format`` picks JSON or CSV where both make sense;
scalar results rendered as CSV become ``key,value`` rows.
"""

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .cpw import CpwGeometry, line_params, shift_curve, solve_gap_for_impedance
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
from .heightmap import (
    corner_tilt_worst_case,
    level_to_bottom_plane,
    process_map,
    summarize_chip,
)
from .losses import relative_q
from .report import dumps, run_report
from .resonator import design_length, fit_vph
from .vnafit import applied_power, fit_notch, photon_calc, photon_number_from_rates

BUNDLED_DATASET = Path(__file__).parent / "data" / "dataset"


# -- output ----------------------------------------------------------------
def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def _csv_text(header, rows):
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()


def _emit(args, name, payload=None, table=None, default="json"):
    """Render ``payload`` (JSON) or ``table`` (header, rows) per --format and --out."""
    fmt = args.format or default
    if fmt == "csv":
        if table is None:
            table = (["key", "value"], list(_flatten(json.loads(dumps(payload)))))
        text, ext = _csv_text(*table), "csv"
    else:
        if payload is None:
            header, rows = table
            payload = [dict(zip(header, row)) for row in rows]
        text, ext = dumps(payload), "json"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{ext}").write_text(text)
    else:
        sys.stdout.write(text)


def _write_map(args, name, hm):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w") as fh:
        write_heightmap_csv(fh, hm)


# -- subcommands -----------------------------------------------------------
def _rectangles(args):
    return [tuple(r) for r in args.bottom_rect] if args.bottom_rect else None


def cmd_level(args, cfg):
    hm = read_heightmap_csv(args.input)
    step = args.step_threshold or cfg.step_threshold_um
    leveled = level_to_bottom_plane(hm, _rectangles(args), step)
    if args.format == "json":
        _emit(args, "level", {"plane": leveled.plane.as_dict(), "tilt_urad": leveled.plane.tilt_urad})
    elif args.out:
        _write_map(args, "leveled", leveled)
    else:
        write_heightmap_csv(sys.stdout, leveled)


def cmd_tilt(args, cfg):
    hm = read_heightmap_csv(args.input)
    leveled, top, _ = process_map(
        hm,
        substrate_thickness=args.substrate_thickness or cfg.substrate_thickness_um,
        step_threshold=args.step_threshold or cfg.step_threshold_um,
        mask_threshold=args.mask_threshold or cfg.mask_threshold_um,
        bottom_region=_rectangles(args),
    )
    summary = summarize_chip(top, args.substrate_thickness or cfg.substrate_thickness_um, cfg.bow_patch_fraction)
    if args.out:
        _write_map(args, "leveled", leveled)
        _write_map(args, "top", top)
    _emit(args, "tilt", summary.as_dict())


def cmd_corner_tilt(args, cfg):
    modules = read_corners_csv(args.input)
    results = {m: corner_tilt_worst_case(cs) for m, cs in sorted(modules.items())}
    payload = {
        "modules": {m: r.as_dict() for m, r in results.items()},
        "mean_separation_um": float(np.mean([r.mean_separation for r in results.values()])),
        "mean_worst_tilt_urad": float(np.mean([r.worst_tilt_urad for r in results.values()])),
    }
    table = (
        ["module", "mean_separation_um", "worst_tilt_urad"],
        [(m, r.mean_separation, r.worst_tilt_urad) for m, r in results.items()],
    )
    _emit(args, "corner_tilt", payload, table if args.format == "csv" else None)


def _geometry_kwargs(args, cfg):
    facing = args.facing
    kw = {
        "eps_substrate": args.eps if args.eps is not None else cfg.eps,
        "h_substrate": args.h if args.h is not None else cfg.h_um,
        "facing": facing,
    }
    if facing != "planar":
        d = getattr(args, "d", None)
        kw["d"] = d if d is not None else cfg.d_um
    if facing == "dielectric":
        kw["eps_superstrate"] = args.eps_top if args.eps_top is not None else cfg.eps_top
        kw["h_superstrate"] = args.h_top if args.h_top is not None else cfg.h_top_um
    return kw


def cmd_cpw(args, cfg):
    kw = _geometry_kwargs(args, cfg)
    if args.z0 is not None:
        s = solve_gap_for_impedance(args.w, args.z0, **kw)
    elif args.s is not None:
        s = args.s
    else:
        raise FlipchipError("cpw needs --s or --z0")
    payload = line_params(CpwGeometry(w=args.w, s=s, **kw)).as_dict()
    payload["w_um"], payload["s_um"] = args.w, s
    _emit(args, "cpw", payload)


def cmd_shift_curve(args, cfg):
    if args.facing == "planar":
        raise FlipchipError("shift curves need a metal or dielectric facing")
    if not (args.d_step > 0 and args.d_max >= args.d_min > 0):
        raise FlipchipError("need 0 < d-min <= d-max and d-step > 0")
    geom = CpwGeometry(w=args.w, s=args.s, **_geometry_kwargs(args, cfg))
    n = int(round((args.d_max - args.d_min) / args.d_step)) + 1
    d_values = args.d_min + args.d_step * np.arange(n)
    d_ref = args.d_ref if args.d_ref is not None else cfg.d_um
    curve = shift_curve(geom, d_values, d_ref)
    _emit(args, "shift_curve", table=(["d_um", "ratio"], curve), default="csv")


def cmd_fit_vph(args, cfg):
    records = read_resonators_csv(args.input)
    if args.facing:
        records = [r for r in records if r.facing == args.facing]
        if not records:
            raise FlipchipError(f"no rows with facing {args.facing!r}")
    facings = sorted({r.facing for r in records if r.facing})
    if len(facings) > 1:
        payload = {f: fit_vph([r for r in records if r.facing == f]).as_dict() for f in facings}
    else:
        payload = fit_vph(records).as_dict()
    _emit(args, "fit_vph", payload)


def cmd_design_length(args, cfg):
    length = design_length(args.f_ghz, args.v_ph, args.b)
    _emit(args, "design_length", {"length_um": length, "f_ghz": args.f_ghz, "v_ph": args.v_ph, "b_s": args.b})


def cmd_fit_notch(args, cfg):
    trace = read_trace_csv(args.input)
    fit = fit_notch(trace, wing_fraction=cfg.wing_fraction, refine=not args.no_refine)
    payload = fit.as_dict()
    if args.power_dbm is not None:
        if args.attenuation_db is None:
            raise FlipchipError("--power-dbm needs --attenuation-db")
        band = args.band_db if args.band_db is not None else cfg.attenuation_band_db
        calc = photon_calc(fit, args.power_dbm, args.attenuation_db, band)
        payload.update({k: v for k, v in calc.as_dict().items() if k not in ("n_int", "p_app")})
        payload["p_app_w"] = calc.p_app
        payload["n_int"] = calc.n_int
    _emit(args, "fit_notch", payload)


def cmd_photons(args, cfg):
    omega0 = 2 * np.pi * args.f0_hz
    kappa, gamma = omega0 / args.qc, omega0 / args.qi
    p_app = applied_power(args.power_dbm, args.attenuation_db)
    n = photon_number_from_rates(omega0, kappa, gamma, p_app)
    band = args.band_db if args.band_db is not None else cfg.attenuation_band_db
    payload = {"kappa": kappa, "gamma": gamma, "p_app_w": p_app, "n_int": n}
    if band:
        payload["n_int_low"] = n * 10 ** (-band / 10)
        payload["n_int_high"] = n * 10 ** (band / 10)
    _emit(args, "photons", payload)


def cmd_relq(args, cfg):
    records = read_participation_csv(args.input)
    anchor_w = args.anchor_w if args.anchor_w is not None else cfg.relq_anchor_w_um
    anchor_q = args.anchor_q if args.anchor_q is not None else cfg.relq_anchor_q
    if anchor_q is None:
        raise FlipchipError("relq needs --anchor-q (or relq_anchor_q in the config)")
    curve = relative_q(records, anchor_w, anchor_q, args.facing)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "relq.csv", "w") as fh:
            write_csv(fh, ["w_um", "q_pr"], curve.points)
        (out / "relq.json").write_text(dumps(curve.as_dict()))
    elif (args.format or "csv") == "csv":
        write_csv(sys.stdout, ["w_um", "q_pr"], curve.points)
    else:
        sys.stdout.write(dumps(curve.as_dict()))


def cmd_report(args, cfg):
    out = args.out or cfg.output_dir
    code, report = run_report(cfg, args.dataset or BUNDLED_DATASET, out)
    status = report.get("status")
    print(f"report {status}: {Path(out) / ('report.json' if status != 'no inputs' else 'errors.json')}")
    for err in report.get("errors", []):
        print(f"  [{err['stage']}] {err['input']}: {err['message']}", file=sys.stderr)
    return code


# -- parser ----------------------------------------------------------------
def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON config file (else $FLIPCHIP_CONFIG)")
    parser.add_argument("--out", default=default, help="write outputs into this directory")
    parser.add_argument("--format", choices=("json", "csv"), default=default)


def _geometry_options(p, with_d=True):
    p.add_argument("--w", type=float, required=True, help="centre conductor width (um)")
    p.add_argument("--facing", choices=("planar", "metal", "dielectric"), default="planar")
    p.add_argument("--eps", type=float, help="substrate permittivity")
    p.add_argument("--eps-top", type=float, help="top-chip permittivity (dielectric facing)")
    p.add_argument("--h", type=float, help="substrate thickness (um)")
    p.add_argument("--h-top", type=float, help="top-chip thickness (um)")
    if with_d:
        p.add_argument("--d", type=float, help="chip separation (um)")


def _map_options(p):
    p.add_argument("input", help="height-map CSV (x_um,y_um,z_um)")
    p.add_argument("--step-threshold", type=float)
    p.add_argument(
        "--bottom-rect",
        nargs=4,
        type=float,
        action="append",
        metavar=("X0", "X1", "Y0", "Y1"),
        help="bottom-chip reference rectangle (um); repeatable",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="flipchip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        _global_options(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("level", cmd_level, "level a height map to its bottom-chip plane")
    _map_options(p)

    p = add("tilt", cmd_tilt, "separation, tilt and bow of a flip-chip module scan")
    _map_options(p)
    p.add_argument("--substrate-thickness", type=float)
    p.add_argument("--mask-threshold", type=float)

    p = add("corner-tilt", cmd_corner_tilt, "worst-case tilt from four corner separations")
    p.add_argument("input", help="corner CSV (module,corner,x_um,y_um,z_um)")

    p = add("cpw", cmd_cpw, "per-unit-length parameters of a CPW")
    _geometry_options(p)
    p.add_argument("--s", type=float, help="gap width (um)")
    p.add_argument("--z0", type=float, help="solve the gap for this impedance instead of --s")

    p = add("shift-curve", cmd_shift_curve, "v_ph(d)/v_ph(d_ref) over a separation sweep")
    _geometry_options(p, with_d=False)
    p.add_argument("--s", type=float, required=True, help="gap width (um)")
    p.add_argument("--d-min", type=float, default=2.0)
    p.add_argument("--d-max", type=float, default=20.0)
    p.add_argument("--d-step", type=float, default=0.5)
    p.add_argument("--d-ref", type=float)

    p = add("fit-vph", cmd_fit_vph, "fit phase velocity and coupling delay to resonator frequencies")
    p.add_argument("input", help="CSV index,length_um,f_ghz,copy_id[,facing]")
    p.add_argument("--facing", help="only fit rows with this facing")

    p = add("design-length", cmd_design_length, "resonator length for a target frequency")
    p.add_argument("--f-ghz", type=float, required=True)
    p.add_argument("--v-ph", type=float, required=True)
    p.add_argument("--b", type=float, default=0.0, help="coupling delay (s)")

    p = add("fit-notch", cmd_fit_notch, "fit a notch resonance in an S21 trace")
    p.add_argument("input", help="CSV f_hz,re_s21,im_s21")
    p.add_argument("--power-dbm", type=float)
    p.add_argument("--attenuation-db", type=float)
    p.add_argument("--band-db", type=float)
    p.add_argument("--no-refine", action="store_true", help="skip the final full-model fit")

    p = add("photons", cmd_photons, "mean photon number from quality factors and drive power")
    p.add_argument("--f0-hz", type=float, required=True)
    p.add_argument("--qi", type=float, required=True)
    p.add_argument("--qc", type=float, required=True, help="|Qc|")
    p.add_argument("--power-dbm", type=float, required=True)
    p.add_argument("--attenuation-db", type=float, required=True)
    p.add_argument("--band-db", type=float)

    p = add("relq", cmd_relq, "relative quality factor from participation ratios")
    p.add_argument("input", help="CSV w_um,facing,p_ms,p_mv,p_sv")
    p.add_argument("--anchor-w", type=float)
    p.add_argument("--anchor-q", type=float)
    p.add_argument("--facing")

    p = add("report", cmd_report, "run the whole chain over a dataset directory")
    p.add_argument("--dataset", help="dataset directory (default: bundled sample data)")
    return parser


def _normalize_argv(argv):
    # accept the nested spelling "cpw shift-curve" as well
    argv = list(argv)
    for i in range(len(argv) - 1):
        if argv[i] == "cpw" and argv[i + 1] == "shift-curve":
            return argv[:i] + argv[i + 1 :]
    return argv


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_normalize_argv(argv))
    try:
        cfg = load_config(args.config)
        code = args.func(args, cfg)
    except BrokenPipeError:
        # downstream pipe closed early (e.g. `| head`)
        sys.stderr.close()
        return 0
    except FlipchipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
