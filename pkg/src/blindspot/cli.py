"""Command-line entry point.

    blindspot synth --preset approach --out scene/
    blindspot detect scene/ --out run.jsonl --report-dir report/
    blindspot flow a.pgm b.pgm --dump flow.bin
    blindspot stereo --depth scene/depth/
    blindspot ttc scene/ --csv profile.csv

Exit status: 0 on success, 1 for usage errors, 2 for unreadable or invalid data.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import SHAPE_MODES, PipelineConfig, load_config
from .errors import BlindspotError, DataError
from .flow import FlowField, dump_flow, estimate_derivatives, flow_energy, solve_derivatives, solve_horn_schunck
from .frames import frame_filename, load_depth_sequence, load_sequence, read_depth, read_frame, save_sequence
from .pipeline import RunReport, flow_pair, iter_detection, records_to_jsonl
from .stereo import classify_alert, compute_disparity
from .synth import preset_scenarios, render_depth_sequence, render_sequence, scene_from_ini
from .tracking import Box
from .ttc import column_ttc, estimate_foe, heading_angle, region_mask
from .vectors import classify_samples, object_mask, rose_histogram, sample_vectors

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; 2 is reserved for data errors
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    return cfg


def _write(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_flow(args) -> int:
    cfg = _config(args)
    solver = cfg.solver
    over = {k: v for k, v in (("alpha", args.alpha), ("max_iters", args.iters), ("epsilon", args.epsilon)) if v is not None}
    if over:
        solver = dataclasses.replace(solver, **over)
    f1, f2 = read_frame(args.frame1), read_frame(args.frame2)
    d = estimate_derivatives(f1, f2)
    flow = solve_derivatives(d, solver)
    if args.dump:
        Path(args.dump).write_bytes(dump_flow(flow))
    if args.quiver:
        from .plots import quiver_plot

        samples = classify_samples(sample_vectors(flow, cfg.classify.grid_stride), cfg.classify_params)
        quiver_plot(f1, samples, args.quiver)
    out = {
        "width": flow.width,
        "height": flow.height,
        "iterations": flow.iterations,
        "energy": flow_energy(flow, d, solver.alpha),
        "zero_field_energy": flow_energy(FlowField.zeros(flow.height, flow.width), d, solver.alpha),
        "mean_u": float(flow.u.mean()),
        "mean_v": float(flow.v.mean()),
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    over = {}
    if args.frame_skip is not None:
        over["frame_skip"] = args.frame_skip
    if args.shape_mode is not None:
        over["shape_mode"] = args.shape_mode
    if args.mirror:
        over["mirrored"] = True
    if args.no_flow:
        over["flow_enabled"] = False
    if args.no_ttc:
        over["ttc_enabled"] = False
    if args.overlays:
        over["overlays"] = True
    if over:
        cfg = dataclasses.replace(cfg, **over)
    seq = load_sequence(args.frames)
    depth = load_depth_sequence(args.depth) if args.depth else None
    overlay_dir = Path(args.overlays) if args.overlays else None
    if overlay_dir:
        overlay_dir.mkdir(parents=True, exist_ok=True)
        from .overlay import overlay_ppm
    t0 = time.perf_counter()
    records = []
    for rec in iter_detection(seq, depth, cfg):
        records.append(rec)
        if overlay_dir:
            name = frame_filename(rec.frame_index, "overlay_").replace(".pgm", ".ppm")
            (overlay_dir / name).write_bytes(overlay_ppm(seq[rec.frame_index], rec, pure=args.pure))
    elapsed = time.perf_counter() - t0
    _write(args.out, records_to_jsonl(records, canonical=args.canonical))
    report = RunReport.from_records(records, len(seq), elapsed)
    if args.report_dir:
        _write_report(Path(args.report_dir), seq, records, report, cfg, args.canonical)
    print(report.to_json(args.canonical), file=sys.stderr)
    return EXIT_OK


def _write_report(out: Path, seq, records, report, cfg, canonical: bool):
    from .plots import quiver_plot, rose_plot, timeline_plot

    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(canonical) + "\n")
    (out / "records.jsonl").write_text(records_to_jsonl(records, canonical))
    timeline_plot(records, out / "timeline.png")
    # the frame with the most object vectors tells the clearest story
    best = max(records, key=lambda r: (r.object_count, -r.frame_index))
    if best.samples:
        hist = rose_histogram(best.samples)
        (out / "rose.csv").write_text(hist.to_csv())
        rose_plot(hist, out / "rose.png", title=f"flow directions, frame {best.frame_index}")
        quiver_plot(seq[best.frame_index], best.samples, out / "quiver.png", box=best.box,
                    title=f"flow vectors, frame {best.frame_index}")
    with open(out / "timeline.csv", "w") as fh:
        fh.write("frame_index,ratio,box,circles,ttc_min,heading,alert\n")
        for r in records:
            ttc = "" if r.ttc_min is None else ("inf" if r.ttc_min == float("inf") else f"{r.ttc_min:.6g}")
            head = "" if r.heading is None else f"{r.heading:.6g}"
            fh.write(f"{r.frame_index},{r.ratio:.6g},{int(r.box is not None)},{len(r.circles)},{ttc},{head},{r.alert.value}\n")


def cmd_stereo(args) -> int:
    cfg = _config(args)
    p = cfg.stereo
    if args.max_disparity is not None:
        p = dataclasses.replace(p, max_disparity=args.max_disparity)
    if args.depth:
        src = Path(args.depth)
        depths = [read_depth(src)] if src.is_file() else load_depth_sequence(src)
    else:
        if not (args.left and args.right):
            raise UsageError("stereo: give --depth, or both --left and --right")
        left, right = Path(args.left), Path(args.right)
        if left.is_file():
            pairs = [(read_frame(left), read_frame(right))]
        else:
            ls, rs = load_sequence(left), load_sequence(right)
            if len(ls) != len(rs):
                raise DataError(f"left has {len(ls)} frames, right has {len(rs)}")
            pairs = list(zip(ls, rs))
        depths = [compute_disparity(a, b, p) for a, b in pairs]
    lines = []
    for i, d in enumerate(depths):
        v = classify_alert(d, cfg.bands, p)
        lines.append(json.dumps({"frame_index": i, "alert": v.alert.value, "band_counts": list(v.band_counts)}))
    _write(args.out, "".join(line + "\n" for line in lines))
    return EXIT_OK


def _parse_box(text: str) -> Box:
    try:
        cx, cy, hw, hh = (float(x) for x in text.split(","))
        return Box(cx, cy, hw, hh)
    except ValueError:
        raise UsageError(f"--box expects cx,cy,half_w,half_h, got {text!r}") from None


def cmd_ttc(args) -> int:
    cfg = _config(args)
    seq = load_sequence(args.frames)
    i = len(seq) - 2 if args.frame is None else args.frame
    if not 0 <= i < len(seq):
        raise DataError(f"frame {i} outside the sequence (0..{len(seq) - 1})")
    a, b = flow_pair(len(seq), i)
    flow = solve_horn_schunck(seq[a], seq[b], cfg.solver)
    region = object_mask(flow, cfg.classify_params)
    if args.box:
        region &= region_mask(flow.shape, _parse_box(args.box))
    foe = estimate_foe(flow, cfg.ttc.magnitude_floor, region)
    profile = column_ttc(flow, foe, cfg.ttc.column_width, region, cfg.ttc.magnitude_floor)
    head = heading_angle(profile, cfg.ttc.max_steer, cfg.ttc.heading_rule)
    _write(args.csv, profile.to_csv())
    if args.plot:
        from .plots import ttc_profile_plot

        ttc_profile_plot(profile, args.plot, head)
    summary = {
        "frame_index": i,
        "foe": [foe.x, foe.y],
        "ttc_min_frames": None if profile.minimum() == float("inf") else profile.minimum(),
        "ttc_min_seconds": None if profile.minimum() == float("inf") else profile.minimum() * seq.frame_period,
        "heading": head.angle,
        "heading_column": head.column,
    }
    print(json.dumps(summary), file=sys.stderr if args.csv in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.preset:
        presets = preset_scenarios()
        if args.preset not in presets:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(presets))}")
        spec = presets[args.preset]
    else:
        try:
            text = Path(args.scene).read_text()
        except OSError as exc:
            raise DataError(f"cannot read scene file: {exc}") from None
        spec = scene_from_ini(text)
    if args.frames is not None:
        spec = dataclasses.replace(spec, n_frames=args.frames)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out = Path(args.out)
    seq, truth = render_sequence(spec)
    save_sequence(out, seq)
    (out / "truth.jsonl").write_text("".join(t.to_json() + "\n" for t in truth))
    if args.depth:
        save_sequence(out / "depth", render_depth_sequence(spec))
    print(json.dumps({"scene": spec.name, "frames": len(seq), "width": spec.width, "height": spec.height, "out": str(out)}))
    return EXIT_OK


def cmd_presets(args) -> int:
    for name, spec in preset_scenarios().items():
        print(f"{name}\t{spec.width}x{spec.height}\t{spec.n_frames} frames\t{len(spec.objects)} objects")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file overriding the default parameters")

    ap = _Parser(prog="blindspot", description="Blind-spot motion detection on frame sequences.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("flow", parents=[common], help="optical flow between two frames")
    p.add_argument("frame1")
    p.add_argument("frame2")
    p.add_argument("--alpha", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dump", help="write the binary flow dump here")
    p.add_argument("--quiver", help="write a quiver plot (PNG) here")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("detect", parents=[common], help="run detection over a frame directory")
    p.add_argument("frames", help="directory of frame_NNNNNN.pgm files")
    p.add_argument("--depth", help="directory of aligned depth frames")
    p.add_argument("--out", default="-", help="JSON-lines output (default stdout)")
    p.add_argument("--frame-skip", type=int)
    p.add_argument("--shape-mode", choices=SHAPE_MODES)
    p.add_argument("--mirror", action="store_true", help="objects approach from the right")
    p.add_argument("--no-flow", action="store_true")
    p.add_argument("--no-ttc", action="store_true")
    p.add_argument("--overlays", help="write PPM overlays into this directory")
    p.add_argument("--pure", action="store_true", help="overlays on black, annotations only")
    p.add_argument("--report-dir", help="write report.json, CSVs and figures here")
    p.add_argument("--canonical", action="store_true", help="leave timing out of the outputs")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("stereo", parents=[common], help="depth-band alerts")
    p.add_argument("--depth", help="depth frame or directory of depth frames")
    p.add_argument("--left", help="left frame or directory")
    p.add_argument("--right", help="right frame or directory")
    p.add_argument("--max-disparity", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_stereo)

    p = sub.add_parser("ttc", parents=[common], help="time-to-collision profile and heading")
    p.add_argument("frames", help="directory of frames")
    p.add_argument("--frame", type=int, help="frame index (default: second to last)")
    p.add_argument("--box", help="restrict to cx,cy,half_w,half_h")
    p.add_argument("--csv", default="-", help="profile CSV output (default stdout)")
    p.add_argument("--plot", help="write a profile plot (PNG) here")
    p.set_defaults(func=cmd_ttc)

    p = sub.add_parser("synth", parents=[common], help="render a synthetic scene")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--scene", help="scene INI file")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", action="store_true", help="also write depth frames to OUT/depth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("presets", help="list the preset scenes")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (BlindspotError, OSError) as exc:
        print(f"blindspot: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # parameter validation on values given at the command line
        print(f"blindspot: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
