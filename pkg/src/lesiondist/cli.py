"""Command line interface.

Subcommands: dt, maps, detect, synth, simulate, eval, froc-plotdata, pipeline.
Errors are reported as one JSON object on stderr; exit codes are 0 ok,
2 config error, 3 data error, 4 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .detection import detections_write_csv, local_maxima, threshold_detections
from .errors import ConfigError, DataError, LesionDistError
from .evaluation import (
    BOOTSTRAP_SAMPLES,
    FP_LIMIT,
    HIT_RADIUS,
    INTRA_RATER_SENSITIVITY,
    bootstrap_fauc,
    froc,
    metrics_at,
    operating_point,
)
from .grid import DotSet, dots_read_csv, dots_write_csv, grid_read, grid_write
from .maps import DEFAULT_DECAY, ShiftConfig, normalize_map, shift_dots
from .reports import dumps_json, read_curve_csv, read_json, write_curve_csv, write_json
from .synthetic import SimulatorConfig, SynthConfig, generate_case, simulate_prediction
from .transform import DEFAULT_MAX_PASSES, DistanceKind, distance_transform

log = logging.getLogger("lesiondist")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _jobs(args) -> int:
    if args.jobs is not None:
        n = args.jobs
    else:
        env = os.environ.get("LESIONDIST_JOBS", "1")
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"LESIONDIST_JOBS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("jobs must be at least 1")
    return n


def _load_dots(path, ndim) -> DotSet:
    return dots_read_csv(path, ndim)


def cmd_dt(args):
    image = grid_read(args.image)
    dots = _load_dots(args.dots, image.ndim)
    dm = distance_transform(image, dots, args.kind, args.max_passes, args.spacing)
    grid_write(dm.grid, args.out)
    log.info("converged after %d passes", dm.passes)


def cmd_maps(args):
    image = grid_read(args.image)
    dots = _load_dots(args.dots, image.ndim)
    kind = DistanceKind.parse(args.kind)
    decay = args.decay if args.decay is not None else DEFAULT_DECAY[kind]
    notes = None
    if args.shift_dots:
        res = shift_dots(image, dots, ShiftConfig(radius=args.shift_radius, threshold=args.shift_threshold))
        dots, notes = res.dots, res.notes
    dm = distance_transform(image, dots, kind, args.max_passes, args.spacing)
    tm = normalize_map(dm, decay)
    grid_write(tm.grid, args.out)
    sidecar = {
        "kind": kind.value,
        "p": decay,
        "shifted": bool(args.shift_dots),
        "degenerate": tm.degenerate,
        "passes": dm.passes,
    }
    if notes is not None:
        sidecar["shift_notes"] = notes
    write_json(sidecar, Path(args.out).with_suffix(".json"))


def cmd_detect(args):
    pred = grid_read(args.map)
    cands = local_maxima(pred)
    dets = threshold_detections(cands, args.threshold) if args.threshold is not None else cands
    detections_write_csv(dets, args.out)


def cmd_synth(args):
    cfg = SynthConfig.from_dict(read_json(args.config)) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k in range(args.count):
        case = generate_case(cfg, k)
        grid_write(case.image, out / f"case_{k}.ldgr")
        dots_write_csv(case.dots, out / f"case_{k}.csv", 2)
        files.append({"image": f"case_{k}.ldgr", "dots": f"case_{k}.csv", "lesions": len(case.dots)})
    write_json(
        {"tool": {"name": "lesiondist", "version": __version__}, "config": cfg.to_dict(),
         "count": args.count, "cases": files},
        out / "manifest.json",
    )


def cmd_simulate(args):
    truth = grid_read(args.target)
    cfg = SimulatorConfig.from_dict(read_json(args.config)) if args.config else SimulatorConfig()
    dots = _load_dots(args.dots, 2) if args.dots else None
    grid_write(simulate_prediction(truth, cfg, dots, index=args.index), args.out)


def _paired_inputs(pred_dir, annot_dir):
    preds = sorted(Path(pred_dir).glob("*.ldgr"))
    if not preds:
        raise DataError(f"no .ldgr files in {pred_dir}")
    pairs = []
    for p in preds:
        a = Path(annot_dir) / f"{p.stem}.csv"
        if not a.exists():
            raise DataError(f"missing annotations {a} for {p.name}")
        pairs.append((p, a))
    return pairs


def cmd_eval(args):
    jobs = _jobs(args)
    per_image = []
    for p, a in _paired_inputs(args.pred_dir, args.annot_dir):
        per_image.append((local_maxima(grid_read(p)), _load_dots(a, 2)))
    curve = froc(per_image, args.fp_limit, args.radius, args.sensitivity)
    op_t = operating_point(curve, args.target_sensitivity)
    report = {
        "tool": {"name": "lesiondist", "version": __version__},
        "n_images": curve.n_images,
        "n_annotations": curve.n_annotations,
        "fauc": curve.fauc,
        "fauc_extended": curve.extended,
        "operating_point": {
            "target_sensitivity": args.target_sensitivity,
            **metrics_at(per_image, op_t, args.radius),
        }
        if math.isfinite(op_t)
        else None,
        "at_threshold": metrics_at(per_image, args.threshold, args.radius)
        if args.threshold is not None
        else None,
        "bootstrap": bootstrap_fauc(
            per_image, args.bootstrap, args.seed, args.fp_limit, args.radius, jobs
        ).as_dict()
        if args.bootstrap
        else None,
        "config": {
            "radius": args.radius,
            "fp_limit": args.fp_limit,
            "bootstrap": args.bootstrap,
            "seed": args.seed,
            "sensitivity": args.sensitivity,
            "threshold": args.threshold,
        },
    }
    write_json(report, args.out)
    if args.curve:
        write_curve_csv(curve, args.curve)
    if args.figure:
        from .plotting import plot_froc

        op = report["operating_point"]
        marks = {"FROC": (op["fp_avg"], op["sensitivity"])} if op else None
        plot_froc({"FROC": curve}, args.figure, args.fp_limit, marks)


def cmd_froc_plotdata(args):
    curves = {}
    for item in args.curve:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        if label in curves:
            raise ConfigError(f"duplicate curve label {label!r}")
        _, fp, sens = read_curve_csv(path)
        curves[label] = (fp, sens)
    lines = ["label,fp_avg,sensitivity"]
    for label, (fp, sens) in curves.items():
        lines += [f"{label},{f!r},{s!r}" for f, s in zip(fp, sens)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    if args.figure:
        from .plotting import plot_froc

        plot_froc(curves, args.figure, args.fp_limit)


def cmd_pipeline(args):
    from .pipeline import PipelineConfig, run_pipeline

    if args.manifest:
        data = read_json(args.manifest)
        if not isinstance(data, dict) or "config" not in data:
            raise ConfigError(f"{args.manifest} has no config section")
        data = data["config"]
    elif args.config:
        data = read_json(args.config)
    else:
        data = {}
    cfg = PipelineConfig.from_dict(data)
    report = run_pipeline(cfg, args.out_dir, jobs=_jobs(args))
    if args.print:
        sys.stdout.write(dumps_json(report))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lesiondist", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lesiondist {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def kind_arg(sp):
        sp.add_argument("--kind", required=True, choices=[k.value for k in DistanceKind])

    def transform_args(sp):
        sp.add_argument("--spacing", type=_floats, default=None, help="per-axis voxel spacing, e.g. 1,1")
        sp.add_argument("--max-passes", type=int, default=DEFAULT_MAX_PASSES)

    s = sub.add_parser("dt", help="distance map from an image and dots")
    s.add_argument("--image", required=True)
    s.add_argument("--dots", required=True)
    kind_arg(s)
    transform_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dt)

    s = sub.add_parser("maps", help="decay-normalized target map (+ JSON sidecar)")
    s.add_argument("--image", required=True)
    s.add_argument("--dots", required=True)
    kind_arg(s)
    s.add_argument("--decay", type=float, default=None, help="default: 5 geodesic, 6 intensity, 9 euclidean")
    s.add_argument("--shift-dots", action="store_true")
    s.add_argument("--shift-radius", type=float, default=3.0)
    s.add_argument("--shift-threshold", type=float, default=0.6)
    transform_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_maps)

    s = sub.add_parser("detect", help="non-maximum suppression + threshold")
    s.add_argument("--map", required=True)
    s.add_argument("--threshold", type=float, default=None, help="omit to keep every candidate")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="generate synthetic cases")
    s.add_argument("--config", default=None, help="SynthConfig JSON")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("simulate", help="corrupt a target map into a simulated prediction")
    s.add_argument("--target", required=True)
    s.add_argument("--dots", default=None)
    s.add_argument("--config", default=None, help="SimulatorConfig JSON")
    s.add_argument("--index", type=int, default=0, help="case index mixed into the seed")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("eval", help="FROC / FAUC / bootstrap over a directory of predictions")
    s.add_argument("--pred-dir", required=True)
    s.add_argument("--annot-dir", required=True)
    s.add_argument("--radius", type=float, default=HIT_RADIUS)
    s.add_argument("--fp-limit", type=float, default=FP_LIMIT)
    s.add_argument("--bootstrap", type=int, default=BOOTSTRAP_SAMPLES, help="0 disables")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threshold", type=float, default=None)
    s.add_argument("--target-sensitivity", type=float, default=INTRA_RATER_SENSITIVITY)
    s.add_argument("--sensitivity", choices=["pooled", "per_image"], default="pooled")
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--curve", default=None, help="write threshold,fp_avg,sensitivity CSV")
    s.add_argument("--figure", default=None, help="render the FROC curve to this image file")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("froc-plotdata", help="merge curve CSVs into plot-ready data")
    s.add_argument("--curve", action="append", required=True, metavar="LABEL=froc.csv")
    s.add_argument("--fp-limit", type=float, default=FP_LIMIT)
    s.add_argument("--out", required=True)
    s.add_argument("--figure", default=None)
    s.set_defaults(func=cmd_froc_plotdata)

    s = sub.add_parser("pipeline", help="synth -> maps -> simulate -> detect -> eval")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--config", default=None, help="PipelineConfig JSON")
    g.add_argument("--manifest", default=None, help="rerun from a previous manifest.json")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--print", action="store_true", help="echo the report to stdout")
    s.set_defaults(func=cmd_pipeline)
    return p


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    stage = getattr(exc, "stage", None)
    if stage:
        payload["stage"] = stage
        payload["cause"] = type(exc.cause).__name__
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except LesionDistError as exc:
        return _fail(exc, exc.exit_code)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        return _fail(exc, 4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
