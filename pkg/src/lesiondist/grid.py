"""Voxel grids, dot annotations and their on-disk formats.

Grids are stored in the LDGR container::

    magic   4 bytes  b"LDGR"
    version u16      1
    ndim    u16      2 or 3
    dims    u32 * ndim
    payload float32 * prod(dims), little-endian, row-major

All integers are little-endian. Coordinates are always ordered (z,) y, x.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DataError,
    DuplicateDot,
    IoFailure,
    NonFiniteValue,
    OutOfBounds,
    ParseError,
    Truncated,
    UnsupportedVersion,
    WrongArity,
)

MAGIC = b"LDGR"
VERSION = 1
_HEADER = struct.Struct("<4sHH")
_PAYLOAD_DTYPE = np.dtype("<f4")


class VoxelGrid:
    """Immutable 2D or 3D float32 scalar field.

    The array is copied on construction and marked read-only, so instances can
    be shared freely.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float32, copy=True)
        if arr.ndim not in (2, 3):
            raise DataError(f"grid must be 2D or 3D, got ndim={arr.ndim}")
        if any(d <= 0 for d in arr.shape):
            raise DataError(f"grid dims must be positive, got {arr.shape}")
        bad = ~np.isfinite(arr)
        if bad.any():
            raise NonFiniteValue(np.argwhere(bad)[0])
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self._data.shape)

    @property
    def size(self) -> int:
        return int(self._data.size)

    def __getitem__(self, coord) -> float:
        return float(self._data[tuple(coord)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.dims == other.dims and self._data.tobytes() == other._data.tobytes()

    def __hash__(self):
        return hash((self.dims, self._data.tobytes()))

    def __repr__(self):
        return f"VoxelGrid(dims={self.dims})"


class DotSet:
    """Ordered set of integer voxel coordinates; duplicates are an error."""

    __slots__ = ("_coords", "_ndim")

    def __init__(self, coords: Iterable[Sequence[int]] = (), ndim: int | None = None):
        out = []
        seen = set()
        for c in coords:
            t = tuple(int(v) for v in c)
            if ndim is None:
                ndim = len(t)
            if len(t) != ndim:
                raise DataError(f"coordinate {t} does not have {ndim} components")
            if t in seen:
                raise DuplicateDot(t)
            seen.add(t)
            out.append(t)
        if ndim is not None and ndim not in (2, 3):
            raise DataError(f"dots must be 2D or 3D, got ndim={ndim}")
        self._coords = tuple(out)
        self._ndim = ndim

    @property
    def coords(self) -> tuple[tuple[int, ...], ...]:
        return self._coords

    @property
    def ndim(self) -> int | None:
        return self._ndim

    def __len__(self):
        return len(self._coords)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self._coords)

    def __contains__(self, coord):
        return tuple(coord) in set(self._coords)

    def __eq__(self, other):
        if not isinstance(other, DotSet):
            return NotImplemented
        return set(self._coords) == set(other._coords)

    def __repr__(self):
        return f"DotSet({list(self._coords)})"

    def as_array(self) -> np.ndarray:
        n = self._ndim or 0
        return np.array(self._coords, dtype=np.int64).reshape(len(self._coords), n)

    def check_bounds(self, dims: Sequence[int]) -> None:
        """Raise OutOfBounds unless every dot lies inside a grid of ``dims``."""
        for c in self._coords:
            if len(c) != len(dims):
                raise OutOfBounds(f"dot {c} has {len(c)} components, grid has {len(dims)}")
            if any(v < 0 or v >= d for v, d in zip(c, dims)):
                raise OutOfBounds(f"dot {c} outside grid {tuple(dims)}")


def encode_grid(grid: VoxelGrid) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, grid.ndim)
    header += struct.pack(f"<{grid.ndim}I", *grid.dims)
    return header + grid.data.astype(_PAYLOAD_DTYPE, copy=False).tobytes(order="C")


def decode_grid(buf: bytes) -> VoxelGrid:
    if len(buf) < _HEADER.size:
        if len(buf) >= 4 and buf[:4] != MAGIC:
            raise BadMagic(f"bad magic {buf[:4]!r}")
        raise Truncated("file shorter than header")
    magic, version, ndim = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported container version {version}")
    if ndim not in (2, 3):
        raise DataError(f"unsupported ndim {ndim}")
    off = _HEADER.size
    if len(buf) < off + 4 * ndim:
        raise Truncated("file ends inside dims header")
    dims = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    need = 4 * int(np.prod(dims, dtype=np.int64))
    have = len(buf) - off
    if have < need:
        raise Truncated(f"payload has {have} bytes, expected {need}")
    if have > need:
        raise DataError(f"{have - need} trailing bytes after payload")
    payload = np.frombuffer(buf, dtype=_PAYLOAD_DTYPE, offset=off).reshape(dims)
    return VoxelGrid(payload)


def grid_write(grid: VoxelGrid, path) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(encode_grid(grid))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def grid_read(path) -> VoxelGrid:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_grid(buf)


_HEADERS = {2: ["y", "x"], 3: ["z", "y", "x"]}


def parse_dots_csv(text: str, ndim: int) -> DotSet:
    if ndim not in (2, 3):
        raise DataError(f"ndim must be 2 or 3, got {ndim}")
    coords = []
    seen = set()
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells):
            continue
        if lineno == 1 and [c.lower() for c in cells] == _HEADERS[ndim]:
            continue
        if len(cells) != ndim:
            raise WrongArity(lineno, ndim, len(cells))
        try:
            coord = tuple(int(c) for c in cells)
        except ValueError:
            raise ParseError(lineno, f"non-integer coordinate {row!r}") from None
        if coord in seen:
            raise DuplicateDot(coord)
        seen.add(coord)
        coords.append(coord)
    return DotSet(coords, ndim=ndim)


def dots_read_csv(path, ndim: int) -> DotSet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_dots_csv(text, ndim)


def dots_write_csv(dots: DotSet, path, ndim: int | None = None) -> None:
    ndim = ndim or dots.ndim or 2
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADERS[ndim])
    w.writerows(dots)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
