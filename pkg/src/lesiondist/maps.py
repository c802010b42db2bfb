"""Target maps and annotation preprocessing.

A distance map DM is turned into a regression target by inverting and
max-normalizing it, then raising to a decay power p::

    M_p = (1 - DM / max(DM)) ** p

so dots get 1 and the farthest voxel gets 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DataError, NonPositiveDecay, NonPositiveMax
from .grid import DotSet, VoxelGrid
from .transform import DistanceKind, DistanceMap

# Decay powers and operating thresholds chosen per kind on the validation data.
DEFAULT_DECAY = {
    DistanceKind.GEODESIC: 5.0,
    DistanceKind.INTENSITY: 6.0,
    DistanceKind.EUCLIDEAN: 9.0,
}
DEFAULT_THRESHOLD = {
    DistanceKind.GEODESIC: 0.525,
    DistanceKind.INTENSITY: 0.495,
    DistanceKind.EUCLIDEAN: 0.500,
}


@dataclass(frozen=True)
class TargetMap:
    grid: VoxelGrid
    decay: float
    kind: DistanceKind | None = None
    # Set when max(DM) == 0; the map is then all ones.
    degenerate: bool = False

    @property
    def data(self) -> np.ndarray:
        return self.grid.data


def normalize_map(dm, p: float, kind: DistanceKind | None = None) -> TargetMap:
    if isinstance(dm, DistanceMap):
        kind = kind or dm.kind
        dm = dm.grid
    p = float(p)
    if not (p > 0 and math.isfinite(p)):
        raise NonPositiveDecay(f"decay must be positive, got {p}")
    d = dm.data.astype(np.float64)
    if (d < 0).any():
        raise DataError("distance map has negative values")
    top = d.max()
    if top == 0:
        return TargetMap(VoxelGrid(np.ones_like(d)), p, kind, degenerate=True)
    m = (1.0 - d / top) ** p
    return TargetMap(VoxelGrid(m), p, kind)


def image_normalize(image: VoxelGrid) -> VoxelGrid:
    """Divide by the maximum intensity so the result peaks at exactly 1."""
    top = float(image.data.max())
    if top <= 0:
        raise NonPositiveMax(f"image maximum is {top}, cannot normalize")
    return VoxelGrid(image.data / np.float32(top))


@dataclass(frozen=True)
class ShiftConfig:
    """Dot shifting parameters.

    A dot moves to the brightest voxel within ``radius`` (Euclidean) that is
    8-connected to it in the mask ``image >= threshold * local_max``, where
    ``local_max`` is the maximum over a ``window`` x ``window`` box centered on
    the dot.
    """

    radius: float = 3.0
    threshold: float = 0.6
    window: int = 7
    connectivity: int = 8

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("shift radius must be positive")
        if not 0 < self.threshold < 1:
            raise ConfigError("shift threshold must lie in (0, 1)")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError("shift window must be a positive odd integer")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")


@dataclass
class ShiftResult:
    dots: DotSet
    not_on_component: list = field(default_factory=list)
    # dots that landed on a voxel already taken by an earlier dot
    merged: list = field(default_factory=list)

    @property
    def notes(self) -> dict:
        return {
            "not_on_component": [list(c) for c in self.not_on_component],
            "merged": [list(c) for c in self.merged],
        }


def _shift_one(img: np.ndarray, dot, cfg: ShiftConfig):
    y0, x0 = dot
    h, w = img.shape
    half = cfg.window // 2
    win = img[max(0, y0 - half) : y0 + half + 1, max(0, x0 - half) : x0 + half + 1]
    level = cfg.threshold * float(win.max())
    if level <= 0 or img[y0, x0] < level:
        return dot, False
    mask = img >= level
    structure = np.ones((3, 3), bool) if cfg.connectivity == 8 else None
    labels, _ = ndimage.label(mask, structure=structure)
    r = int(math.floor(cfg.radius))
    ys = slice(max(0, y0 - r), min(h, y0 + r + 1))
    xs = slice(max(0, x0 - r), min(w, x0 + r + 1))
    yy, xx = np.mgrid[ys, xs]
    eligible = (labels[ys, xs] == labels[y0, x0]) & (
        (yy - y0) ** 2 + (xx - x0) ** 2 <= cfg.radius**2
    )
    vals = np.where(eligible, img[ys, xs], -np.inf)
    k = int(np.argmax(vals))  # first maximum in raster order
    return (int(yy.flat[k]), int(xx.flat[k])), True


def shift_dots(image: VoxelGrid, dots: DotSet, cfg: ShiftConfig = ShiftConfig()) -> ShiftResult:
    """Move each dot onto the brightest nearby voxel of its bright structure.

    Dots whose own intensity is below the component threshold (e.g. on empty
    background) stay put and are listed in ``not_on_component``.
    """
    if image.ndim != 2:
        raise DataError("dot shifting works on 2D images")
    dots.check_bounds(image.dims)
    img = image.data.astype(np.float64)
    out, off, merged = [], [], []
    taken = set()
    for dot in dots:
        new, on = _shift_one(img, dot, cfg)
        if not on:
            off.append(dot)
        if new in taken:
            merged.append(dot)
            continue
        taken.add(new)
        out.append(new)
    return ShiftResult(DotSet(out, ndim=2), off, merged)
