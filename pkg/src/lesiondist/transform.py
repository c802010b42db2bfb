"""Gray-weighted distance transforms from dot annotations.

Three edge costs between neighboring voxels a and b are supported:

* geodesic:  sqrt(|G(a) - G(b)|**2 + step**2)
* intensity: |G(a) - G(b)|
* euclidean: step

where ``step`` is the spatial length of the neighbor offset (1, sqrt(2) or
sqrt(3) for unit spacing). The distance of a voxel is the minimum summed edge
cost over all 8-connected (2D) or 26-connected (3D) paths to any dot.

:func:`distance_transform` solves this with alternating forward/backward raster
sweeps; :func:`dijkstra_oracle` solves it with a heap-based multi-source
Dijkstra and exists to cross-check the sweeps.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import ConfigError, DataError, DidNotConverge, EmptyDotSet
from .grid import DotSet, VoxelGrid

# Finite stand-in for +inf so that sentinel + cost never overflows.
SENTINEL = np.finfo(np.float64).max / 2
# Relaxations must beat the current value by this relative margin; smaller
# gains are summation-order rounding and would only cost extra passes.
RELAX_RTOL = 1e-12
DEFAULT_MAX_PASSES = 100


class DistanceKind(str, enum.Enum):
    GEODESIC = "geodesic"
    INTENSITY = "intensity"
    EUCLIDEAN = "euclidean"

    @classmethod
    def parse(cls, value) -> "DistanceKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown distance kind {value!r}") from None

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @property
    def short(self) -> str:
        return {"geodesic": "GDM", "intensity": "IDM", "euclidean": "EDM"}[self.value]


_KIND_CODES = {DistanceKind.GEODESIC: 0, DistanceKind.INTENSITY: 1, DistanceKind.EUCLIDEAN: 2}


@dataclass(frozen=True)
class DistanceMap:
    grid: VoxelGrid
    kind: DistanceKind
    passes: int = 0

    @property
    def data(self) -> np.ndarray:
        return self.grid.data

    @property
    def dims(self):
        return self.grid.dims


@dataclass(frozen=True)
class Neighborhood:
    """Neighbor offsets with their spatial step lengths.

    ``forward`` holds the offsets that precede the center in raster order
    (lexicographically negative); ``backward`` holds their negations.
    """

    forward: tuple[tuple[int, ...], ...]
    backward: tuple[tuple[int, ...], ...]
    steps: dict

    @property
    def offsets(self):
        return self.forward + self.backward


def _check_spacing(ndim: int, spacing) -> tuple[float, ...]:
    if spacing is None:
        return (1.0,) * ndim
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != ndim:
        raise ConfigError(f"spacing needs {ndim} values, got {len(spacing)}")
    if any(not math.isfinite(s) or s <= 0 for s in spacing):
        raise ConfigError(f"spacing must be positive, got {spacing}")
    return spacing


def neighborhood(ndim: int, spacing: Sequence[float] | None = None) -> Neighborhood:
    """8-neighborhood in 2D, 26-neighborhood in 3D."""
    if ndim not in (2, 3):
        raise DataError(f"ndim must be 2 or 3, got {ndim}")
    spacing = _check_spacing(ndim, spacing)
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=ndim) if any(o)]
    forward = tuple(o for o in offsets if o < (0,) * ndim)
    backward = tuple(tuple(-v for v in o) for o in forward)
    steps = {o: math.sqrt(sum((v * s) ** 2 for v, s in zip(o, spacing))) for o in offsets}
    return Neighborhood(forward=forward, backward=backward, steps=steps)


def edge_cost(kind: DistanceKind, g_from: float, g_to: float, step: float) -> float:
    if kind is DistanceKind.EUCLIDEAN:
        return step
    di = abs(g_from - g_to)
    if kind is DistanceKind.INTENSITY:
        return di
    return math.sqrt(di * di + step * step)


def _prepare(image: VoxelGrid, dots: DotSet):
    if len(dots) == 0:
        raise EmptyDotSet("distance transform needs at least one dot")
    dots.check_bounds(image.dims)


@numba.njit(cache=True, nogil=True)
def _sweep(img, dist, offs, steps, kind, reverse, rtol):
    depth, height, width = img.shape
    changed = 0
    for zz in range(depth):
        z = depth - 1 - zz if reverse else zz
        for yy in range(height):
            y = height - 1 - yy if reverse else yy
            for xx in range(width):
                x = width - 1 - xx if reverse else xx
                best = dist[z, y, x]
                g = img[z, y, x]
                for k in range(offs.shape[0]):
                    nz = z + offs[k, 0]
                    ny = y + offs[k, 1]
                    nx = x + offs[k, 2]
                    if nz < 0 or nz >= depth or ny < 0 or ny >= height or nx < 0 or nx >= width:
                        continue
                    if kind == 2:
                        cost = steps[k]
                    else:
                        di = abs(img[nz, ny, nx] - g)
                        if kind == 1:
                            cost = di
                        else:
                            cost = np.sqrt(di * di + steps[k] * steps[k])
                    cand = dist[nz, ny, nx] + cost
                    if cand < best - rtol * best:
                        best = cand
                        changed += 1
                dist[z, y, x] = best
    return changed


@numba.njit(cache=True, nogil=True)
def _raster_scan(img, dist, fwd, fwd_steps, bwd, bwd_steps, kind, max_passes):
    for it in range(max_passes):
        changed = _sweep(img, dist, fwd, fwd_steps, kind, False, RELAX_RTOL)
        changed += _sweep(img, dist, bwd, bwd_steps, kind, True, RELAX_RTOL)
        if changed == 0:
            return it + 1, True
    return max_passes, False


def _lift3(offsets, ndim):
    # 2D problems run through the 3D kernel with a singleton depth axis.
    arr = np.array(offsets, dtype=np.int64).reshape(-1, ndim)
    if ndim == 2:
        arr = np.hstack([np.zeros((arr.shape[0], 1), dtype=np.int64), arr])
    return np.ascontiguousarray(arr)


def distance_transform(
    image: VoxelGrid,
    dots: DotSet,
    kind: DistanceKind | str = DistanceKind.GEODESIC,
    max_passes: int = DEFAULT_MAX_PASSES,
    spacing: Sequence[float] | None = None,
) -> DistanceMap:
    """Iterative raster-scan distance transform.

    Dots start at 0 and every other voxel at :data:`SENTINEL`. Each pass is a
    forward sweep using the preceding neighbors followed by a backward sweep
    using the following neighbors; passes repeat until one changes nothing.
    Accumulation is float64, the returned map is float32.

    Raises DidNotConverge if ``max_passes`` passes do not reach a fixed point.
    """
    kind = DistanceKind.parse(kind)
    if max_passes < 1:
        raise ConfigError("max_passes must be positive")
    _prepare(image, dots)
    nb = neighborhood(image.ndim, spacing)

    img = image.data.astype(np.float64)
    if image.ndim == 2:
        img = img[np.newaxis]
    img = np.ascontiguousarray(img)
    dist = np.full(img.shape, SENTINEL, dtype=np.float64)
    for c in dots:
        dist[(0,) * (3 - image.ndim) + tuple(c)] = 0.0

    fwd = _lift3(nb.forward, image.ndim)
    bwd = _lift3(nb.backward, image.ndim)
    fwd_steps = np.array([nb.steps[o] for o in nb.forward])
    bwd_steps = np.array([nb.steps[o] for o in nb.backward])

    passes, converged = _raster_scan(
        img, dist, fwd, fwd_steps, bwd, bwd_steps, kind.code, int(max_passes)
    )
    if not converged:
        raise DidNotConverge(max_passes)
    out = dist.reshape(image.dims)
    return DistanceMap(grid=VoxelGrid(out), kind=kind, passes=int(passes))


def dijkstra_oracle(
    image: VoxelGrid,
    dots: DotSet,
    kind: DistanceKind | str = DistanceKind.GEODESIC,
    spacing: Sequence[float] | None = None,
) -> DistanceMap:
    """Multi-source Dijkstra on the voxel graph, same edge costs as the sweeps.

    Pure Python; meant for small grids (up to roughly 32**3).
    """
    kind = DistanceKind.parse(kind)
    _prepare(image, dots)
    nb = neighborhood(image.ndim, spacing)
    dims = image.dims
    g = image.data.astype(np.float64)
    dist = {}
    heap = [(0.0, tuple(c)) for c in dots]
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if v in dist:
            continue
        dist[v] = d
        gv = float(g[v])
        for o in nb.offsets:
            n = tuple(a + b for a, b in zip(v, o))
            if n in dist or any(c < 0 or c >= s for c, s in zip(n, dims)):
                continue
            heapq.heappush(heap, (d + edge_cost(kind, float(g[n]), gv, nb.steps[o]), n))
    out = np.empty(dims, dtype=np.float64)
    for v, d in dist.items():
        out[v] = d
    return DistanceMap(grid=VoxelGrid(out), kind=kind, passes=0)
