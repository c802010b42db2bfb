"""CSV/JSON writers shared by the CLI and the pipeline."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .errors import DataError, IoFailure
from .evaluation import FrocCurve

CURVE_HEADER = ["threshold", "fp_avg", "sensitivity"]


def _write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> Path:
    return _write_text(path, dumps_json(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def curve_csv(curve: FrocCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for p in curve.points:
        w.writerow([repr(p.threshold), repr(p.fp_avg), repr(p.sensitivity)])
    return buf.getvalue()


def write_curve_csv(curve: FrocCurve, path) -> Path:
    return _write_text(path, curve_csv(curve))


def read_curve_csv(path):
    """Return (thresholds, fp_avg, sensitivity) lists from a curve CSV."""
    try:
        rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        cols = [[float(r[k]) for r in rows] for k in CURVE_HEADER]
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{path}: expected columns {','.join(CURVE_HEADER)}") from None
    return tuple(cols)


def finite_or_none(v: float):
    return v if math.isfinite(v) else None
