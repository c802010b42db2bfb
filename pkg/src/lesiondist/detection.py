"""Non-maximum suppression on predicted maps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError, IoFailure
from .grid import VoxelGrid

NMS_SIZE = 5


@dataclass(frozen=True)
class Detection:
    coord: tuple[int, ...]
    score: float


@dataclass(frozen=True)
class DetectionSet:
    """Candidates sorted by descending score (ties in raster order)."""

    detections: tuple[Detection, ...] = ()
    threshold: float = -math.inf

    def __len__(self):
        return len(self.detections)

    def __iter__(self):
        return iter(self.detections)

    @property
    def coords(self) -> list[tuple[int, ...]]:
        return [d.coord for d in self.detections]

    @property
    def scores(self) -> np.ndarray:
        return np.array([d.score for d in self.detections], dtype=np.float64)

    @classmethod
    def from_pairs(cls, pairs, threshold: float = -math.inf) -> "DetectionSet":
        dets = [Detection(tuple(int(v) for v in c), float(s)) for c, s in pairs]
        dets.sort(key=lambda d: (-d.score, d.coord))
        return cls(tuple(dets), threshold)


def _round_half_down(v: float) -> int:
    # nearest integer, exact halves go to the smaller index
    return int(math.ceil(v - 0.5))


def local_maxima(pred: VoxelGrid, size: int = NMS_SIZE) -> DetectionSet:
    """Unthresholded candidates from a ``size`` x ``size`` maximum filter.

    A voxel is a candidate when it equals the maximum of its window (windows
    are truncated at the border). Eight-connected groups of candidates form a
    plateau of equal value and are reported once, at the plateau centroid.
    """
    if pred.ndim != 2:
        raise DataError("non-maximum suppression works on 2D maps")
    m = pred.data
    # 'nearest' padding only repeats values already inside the window, so the
    # result equals a truncated window.
    peak = m == ndimage.maximum_filter(m, size=size, mode="nearest")
    labels, n = ndimage.label(peak, structure=np.ones((3, 3), bool))
    if n == 0:
        return DetectionSet()
    idx = np.arange(1, n + 1)
    centroids = ndimage.center_of_mass(peak, labels, idx)
    values = ndimage.maximum(m, labels, idx)
    best = {}
    for c, v in zip(centroids, values):
        coord = tuple(_round_half_down(x) for x in c)
        if coord not in best or v > best[coord]:
            best[coord] = float(v)
    return DetectionSet.from_pairs(best.items())


def threshold_detections(cands: DetectionSet, t: float) -> DetectionSet:
    return DetectionSet(tuple(d for d in cands if d.score >= t), float(t))


def detections_write_csv(dets: DetectionSet, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y", "x", "score"])
    for d in dets:
        w.writerow([*d.coord, repr(d.score)])
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def detections_read_csv(path) -> DetectionSet:
    try:
        rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    pairs = []
    for lineno, row in enumerate(rows, start=1):
        if not row or (lineno == 1 and row[0].strip().lower() == "y"):
            continue
        try:
            y, x, s = row
            pairs.append(((int(y), int(x)), float(s)))
        except ValueError:
            raise DataError(f"{path}:{lineno}: expected y,x,score") from None
    return DetectionSet.from_pairs(pairs)
