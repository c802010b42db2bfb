"""End-to-end synthetic benchmark: synth -> maps -> simulate -> detect -> eval."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .detection import detections_write_csv, local_maxima
from .errors import ConfigError, LesionDistError, StageError
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
from .grid import dots_write_csv, grid_write
from .maps import DEFAULT_DECAY, DEFAULT_THRESHOLD, ShiftConfig, normalize_map, shift_dots
from .reports import write_curve_csv, write_json
from .synthetic import SimulatorConfig, SynthConfig, generate_case, simulate_prediction
from .transform import DEFAULT_MAX_PASSES, DistanceKind, distance_transform

log = logging.getLogger(__name__)

ALL_KINDS = tuple(k.value for k in DistanceKind)


def _reject_unknown(name, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {name} keys: {unknown}")


@dataclass(frozen=True)
class EvalConfig:
    radius: float = HIT_RADIUS
    fp_limit: float = FP_LIMIT
    bootstrap: int = BOOTSTRAP_SAMPLES
    seed: int = 0
    target_sensitivity: float = INTRA_RATER_SENSITIVITY
    sensitivity: str = "pooled"

    def __post_init__(self):
        if not self.radius > 0 or not self.fp_limit > 0:
            raise ConfigError("radius and fp_limit must be positive")
        if int(self.bootstrap) != self.bootstrap or self.bootstrap < 0:
            raise ConfigError("bootstrap must be a non-negative integer (0 disables it)")
        if not 0 <= self.target_sensitivity <= 1:
            raise ConfigError("target_sensitivity must lie in [0, 1]")
        if self.sensitivity not in ("pooled", "per_image"):
            raise ConfigError("sensitivity must be 'pooled' or 'per_image'")


@dataclass(frozen=True)
class PipelineConfig:
    cases: int = 200
    synth: SynthConfig = field(default_factory=SynthConfig)
    simulator: SimulatorConfig = field(
        default_factory=lambda: SimulatorConfig(noise_sigma=0.05, spurious_bumps=2, seed=1)
    )
    kinds: tuple = ALL_KINDS
    decay: dict = field(default_factory=lambda: {k.value: v for k, v in DEFAULT_DECAY.items()})
    threshold: dict = field(
        default_factory=lambda: {k.value: v for k, v in DEFAULT_THRESHOLD.items()}
    )
    shift_dots: bool = True
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    spacing: tuple | None = None
    max_passes: int = DEFAULT_MAX_PASSES
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    figures: bool = True

    def __post_init__(self):
        if int(self.cases) != self.cases or self.cases < 1:
            raise ConfigError("cases must be a positive integer")
        kinds = tuple(DistanceKind.parse(k).value for k in self.kinds)
        if not kinds or len(set(kinds)) != len(kinds):
            raise ConfigError("kinds must be a non-empty list without repeats")
        object.__setattr__(self, "kinds", kinds)
        for name in ("decay", "threshold"):
            table = getattr(self, name)
            if not isinstance(table, dict):
                raise ConfigError(f"{name} must map kind -> value")
            parsed = {DistanceKind.parse(k).value: float(v) for k, v in table.items()}
            missing = [k for k in kinds if k not in parsed]
            if missing:
                raise ConfigError(f"{name} missing values for {missing}")
            object.__setattr__(self, name, parsed)
        for k in kinds:
            if not (self.decay[k] > 0 and math.isfinite(self.decay[k])):
                raise ConfigError(f"decay for {k} must be positive")
            if not math.isfinite(self.threshold[k]):
                raise ConfigError(f"threshold for {k} must be finite")
        if self.spacing is not None:
            sp = tuple(float(s) for s in self.spacing)
            if len(sp) != 2 or min(sp) <= 0:
                raise ConfigError("spacing must be two positive numbers")
            object.__setattr__(self, "spacing", sp)
        if self.max_passes < 1:
            raise ConfigError("max_passes must be positive")
        if not isinstance(self.shift_dots, bool) or not isinstance(self.figures, bool):
            raise ConfigError("shift_dots and figures must be booleans")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        _reject_unknown("pipeline config", data, {f.name for f in fields(cls)})
        data = dict(data)
        try:
            if "synth" in data:
                data["synth"] = SynthConfig.from_dict(data["synth"])
            if "simulator" in data:
                data["simulator"] = SimulatorConfig.from_dict(data["simulator"])
            if "shift" in data:
                _reject_unknown("shift", data["shift"], {f.name for f in fields(ShiftConfig)})
                data["shift"] = ShiftConfig(**data["shift"])
            if "evaluation" in data:
                _reject_unknown("evaluation", data["evaluation"], {f.name for f in fields(EvalConfig)})
                data["evaluation"] = EvalConfig(**data["evaluation"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid pipeline config: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "cases": self.cases,
            "synth": self.synth.to_dict(),
            "simulator": self.simulator.to_dict(),
            "kinds": list(self.kinds),
            "decay": dict(self.decay),
            "threshold": dict(self.threshold),
            "shift_dots": self.shift_dots,
            "shift": {f.name: getattr(self.shift, f.name) for f in fields(ShiftConfig)},
            "spacing": list(self.spacing) if self.spacing else None,
            "max_passes": self.max_passes,
            "evaluation": {f.name: getattr(self.evaluation, f.name) for f in fields(EvalConfig)},
            "figures": self.figures,
        }


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, StageError):
            return False
        if isinstance(exc, (LesionDistError, ValueError, ArithmeticError, OSError)):
            raise StageError(self.name, exc) from exc
        return False


def _pmap(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_pipeline(config: PipelineConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run every stage and return the report.

    With ``out_dir`` every intermediate artifact is written under it together
    with ``report.json`` and ``manifest.json``. The report does not depend on
    ``jobs`` or ``out_dir``.
    """
    cfg = config
    ev = cfg.evaluation
    out = Path(out_dir) if out_dir is not None else None
    written = []

    def record(p):
        if out is not None:
            written.append(Path(p).relative_to(out).as_posix())

    with _Stage("synth"):
        cases = _pmap(lambda i: generate_case(cfg.synth, i), range(cfg.cases), jobs)
        if out is not None:
            for i, c in enumerate(cases):
                grid_write(c.image, _mk(out / "cases" / f"case_{i:04d}.ldgr"))
                dots_write_csv(c.dots, out / "cases" / f"case_{i:04d}.csv", 2)
                record(out / "cases" / f"case_{i:04d}.ldgr")
                record(out / "cases" / f"case_{i:04d}.csv")

    with _Stage("shift"):
        if cfg.shift_dots:
            map_dots = _pmap(lambda c: shift_dots(c.image, c.dots, cfg.shift).dots, cases, jobs)
        else:
            map_dots = [c.dots for c in cases]

    report_kinds = {}
    curves = {}
    marks = {}
    example = {}
    for kind_name in cfg.kinds:
        kind = DistanceKind(kind_name)
        p = cfg.decay[kind_name]
        t = cfg.threshold[kind_name]
        kdir = out / kind_name if out is not None else None

        def make_target(i):
            c = cases[i]
            if len(map_dots[i]) == 0:
                return None
            dm = distance_transform(c.image, map_dots[i], kind, cfg.max_passes, cfg.spacing)
            return normalize_map(dm, p)

        with _Stage(f"maps:{kind_name}"):
            targets = _pmap(make_target, range(cfg.cases), jobs)

        def predict(i):
            tm = targets[i]
            base = np.zeros(cfg.synth.dims) if tm is None else tm.data
            return simulate_prediction(base, cfg.simulator, map_dots[i], index=i)

        with _Stage(f"simulate:{kind_name}"):
            preds = _pmap(predict, range(cfg.cases), jobs)

        with _Stage(f"detect:{kind_name}"):
            cands = _pmap(local_maxima, preds, jobs)

        per_image = [(cands[i], cases[i].dots) for i in range(cfg.cases)]
        with _Stage(f"eval:{kind_name}"):
            curve = froc(per_image, ev.fp_limit, ev.radius, ev.sensitivity)
            at_t = metrics_at(per_image, t, ev.radius)
            op_t = operating_point(curve, ev.target_sensitivity)
            op = metrics_at(per_image, op_t, ev.radius) if math.isfinite(op_t) else None
            boot = (
                bootstrap_fauc(per_image, ev.bootstrap, ev.seed, ev.fp_limit, ev.radius, jobs)
                if ev.bootstrap
                else None
            )

        report_kinds[kind_name] = {
            "label": f"{kind.short}_{p:g}",
            "decay": p,
            "fauc": curve.fauc,
            "fauc_extended": curve.extended,
            "curve_points": len(curve.points),
            "at_threshold": at_t,
            "operating_point": {"target_sensitivity": ev.target_sensitivity, **(op or {})},
            "bootstrap": boot.as_dict() if boot else None,
        }
        curves[kind.short] = curve
        if op:
            marks[kind.short] = (op["fp_avg"], op["sensitivity"])
        example[kind_name] = (targets[0], preds[0], cands[0], t)

        if kdir is not None:
            with _Stage(f"write:{kind_name}"):
                for i in range(cfg.cases):
                    stem = f"case_{i:04d}"
                    if targets[i] is not None:
                        grid_write(targets[i].grid, _mk(kdir / "targets" / f"{stem}.ldgr"))
                        record(kdir / "targets" / f"{stem}.ldgr")
                    grid_write(preds[i], _mk(kdir / "predictions" / f"{stem}.ldgr"))
                    detections_write_csv(cands[i], _mk(kdir / "candidates" / f"{stem}.csv"))
                    record(kdir / "predictions" / f"{stem}.ldgr")
                    record(kdir / "candidates" / f"{stem}.csv")
                record(write_curve_csv(curve, kdir / "froc.csv"))

    ranking = sorted(cfg.kinds, key=lambda k: (-report_kinds[k]["fauc"], k))
    report = {
        "tool": {"name": "lesiondist", "version": __version__},
        "n_cases": cfg.cases,
        "n_annotations": sum(len(c.dots) for c in cases),
        "kinds": report_kinds,
        "fauc_ranking": ranking,
        "config": cfg.to_dict(),
    }

    if out is not None:
        if cfg.figures:
            with _Stage("figures"):
                from .plotting import plot_case, plot_froc

                record(plot_froc(curves, out / "figures" / "froc.png", ev.fp_limit, marks))
                panels, dets = {}, {}
                for k, (tm, pred, cand, t) in example.items():
                    short = DistanceKind(k).short
                    if tm is not None:
                        panels[f"{short} target"] = tm.data
                    panels[f"{short} predicted"] = pred.data
                    dets[f"{short} predicted"] = [d.coord for d in cand if d.score >= t]
                record(plot_case(cases[0].image, cases[0].dots, panels, out / "figures" / "case_0000.png", dets))
        write_json(report, out / "report.json")
        record(out / "report.json")
        manifest = {
            "tool": {"name": "lesiondist", "version": __version__},
            "config": cfg.to_dict(),
            "seeds": {
                "synth": cfg.synth.seed,
                "simulator": cfg.simulator.seed,
                "bootstrap": ev.seed,
            },
            "files": sorted(written),
        }
        write_json(manifest, out / "manifest.json")
    return report


def _mk(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
