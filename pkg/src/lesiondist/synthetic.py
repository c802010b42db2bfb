"""Seeded synthetic lesion images and a stand-in predictor.

Lesions are elongated anisotropic Gaussian ridges with one dot each at the
ridge center. The predictor corrupts a ground-truth target map with lesion
dropout, spurious bumps and voxelwise noise.

Every random draw comes from ``default_rng([seed, case, stream, ...])`` so a
case, or a lesion within a case, never depends on how many others exist.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, PlacementFailure
from .grid import DotSet, VoxelGrid

# stream ids
_COUNT, _LESION, _NOISE = 0, 1, 2
_DROPOUT, _BUMPS, _PRED_NOISE = 10, 11, 12


def _pair(value, name, cast=float):
    try:
        lo, hi = (cast(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a [low, high] pair") from None
    if lo > hi:
        raise ConfigError(f"{name} range is empty: [{lo}, {hi}]")
    return lo, hi


def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
    return cls(**data)


@dataclass(frozen=True)
class SynthConfig:
    dims: tuple = (64, 64)
    lesion_count: tuple = (3, 8)
    ridge_length: tuple = (3.0, 15.0)
    ridge_width: tuple = (0.5, 1.5)
    amplitude: tuple = (0.5, 1.0)
    noise_sigma: float = 0.02
    min_spacing: float = 13.0
    margin: int = 3
    max_retries: int = 1000
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 2 or min(dims) <= 0:
            raise ConfigError(f"dims must be two positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lesion_count", _pair(self.lesion_count, "lesion_count", int))
        for name in ("ridge_length", "ridge_width", "amplitude"):
            object.__setattr__(self, name, _pair(getattr(self, name), name))
        if self.lesion_count[0] < 0:
            raise ConfigError("lesion_count must be non-negative")
        if self.ridge_length[0] <= 0 or self.ridge_width[0] <= 0 or self.amplitude[0] <= 0:
            raise ConfigError("ridge length, width and amplitude must be positive")
        if self.noise_sigma < 0 or self.min_spacing < 0 or self.margin < 0:
            raise ConfigError("noise_sigma, min_spacing and margin must be non-negative")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be positive")
        if 2 * self.margin >= min(dims):
            raise ConfigError("margin leaves no room for lesions")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class SimulatorConfig:
    noise_sigma: float = 0.0
    spurious_bumps: int = 0
    dropout: float = 0.0
    bump_amplitude: tuple = (0.3, 0.8)
    bump_sigma: tuple = (1.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if not 0 <= self.dropout <= 1:
            raise ConfigError("dropout must lie in [0, 1]")
        if self.spurious_bumps < 0 or int(self.spurious_bumps) != self.spurious_bumps:
            raise ConfigError("spurious_bumps must be a non-negative integer")
        object.__setattr__(self, "spurious_bumps", int(self.spurious_bumps))
        object.__setattr__(self, "bump_amplitude", _pair(self.bump_amplitude, "bump_amplitude"))
        object.__setattr__(self, "bump_sigma", _pair(self.bump_sigma, "bump_sigma"))
        if self.bump_sigma[0] <= 0:
            raise ConfigError("bump_sigma must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "SimulatorConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class Ridge:
    center: tuple[int, int]
    angle: float
    length: float
    width: float
    amplitude: float

    def render(self, dims) -> np.ndarray:
        yy, xx = np.mgrid[0 : dims[0], 0 : dims[1]].astype(np.float64)
        dy, dx = yy - self.center[0], xx - self.center[1]
        c, s = math.cos(self.angle), math.sin(self.angle)
        along = dx * c + dy * s
        across = -dx * s + dy * c
        # +-2 sigma along the axis spans the ridge length
        s_along = max(self.length / 4.0, self.width)
        return self.amplitude * np.exp(
            -0.5 * ((along / s_along) ** 2 + (across / self.width) ** 2)
        )


@dataclass(frozen=True)
class Case:
    image: VoxelGrid
    dots: DotSet
    ridges: tuple = ()


def _place(rng, cfg: SynthConfig, taken) -> tuple[int, int]:
    h, w = cfg.dims
    for _ in range(cfg.max_retries):
        c = (
            int(rng.integers(cfg.margin, h - cfg.margin)),
            int(rng.integers(cfg.margin, w - cfg.margin)),
        )
        if all(math.dist(c, t) >= cfg.min_spacing for t in taken):
            return c
    raise PlacementFailure(
        f"could not place lesion {len(taken) + 1} with spacing {cfg.min_spacing} "
        f"after {cfg.max_retries} tries"
    )


def generate_case(cfg: SynthConfig, index: int = 0) -> Case:
    """Build one image with its dot annotations.

    The image is the sum of ridges divided by its maximum, plus Gaussian noise,
    clipped to [0, 1].
    """
    seed = cfg.seed
    lo, hi = cfg.lesion_count
    count = int(np.random.default_rng([seed, index, _COUNT]).integers(lo, hi + 1))
    ridges = []
    for k in range(count):
        rng = np.random.default_rng([seed, index, _LESION, k])
        center = _place(rng, cfg, [r.center for r in ridges])
        ridges.append(
            Ridge(
                center=center,
                angle=float(rng.uniform(0.0, math.pi)),
                length=float(rng.uniform(*cfg.ridge_length)),
                width=float(rng.uniform(*cfg.ridge_width)),
                amplitude=float(rng.uniform(*cfg.amplitude)),
            )
        )
    img = np.zeros(cfg.dims, dtype=np.float64)
    for r in ridges:
        img += r.render(cfg.dims)
    if ridges:
        img /= img.max()
    if cfg.noise_sigma > 0:
        img += cfg.noise_sigma * np.random.default_rng([seed, index, _NOISE]).standard_normal(cfg.dims)
    img = np.clip(img, 0.0, 1.0)
    dots = DotSet([r.center for r in ridges], ndim=2)
    return Case(VoxelGrid(img), dots, tuple(ridges))


def _voronoi_owner(dims, dots: np.ndarray) -> np.ndarray:
    yy, xx = np.mgrid[0 : dims[0], 0 : dims[1]]
    d2 = (yy[..., None] - dots[:, 0]) ** 2 + (xx[..., None] - dots[:, 1]) ** 2
    return np.argmin(d2, axis=-1)  # ties go to the earlier dot


def simulate_prediction(truth, cfg: SimulatorConfig, dots: DotSet | None = None, index: int = 0) -> VoxelGrid:
    """Corrupt a target map into a plausible regressor output.

    Dropped lesions have their Voronoi cell (nearest-dot region) zeroed. When
    ``dots`` is omitted they are taken as the voxels where the truth equals 1.
    """
    data = truth.data if hasattr(truth, "data") else np.asarray(truth)
    m = np.array(data, dtype=np.float64)
    dims = m.shape
    seed = cfg.seed

    if cfg.dropout > 0:
        pts = dots.as_array() if dots is not None else np.argwhere(m == 1.0)
        if len(pts):
            rng = np.random.default_rng([seed, index, _DROPOUT])
            drop = rng.random(len(pts)) < cfg.dropout
            if drop.any():
                owner = _voronoi_owner(dims, pts)
                m[drop[owner]] = 0.0

    if cfg.spurious_bumps:
        rng = np.random.default_rng([seed, index, _BUMPS])
        yy, xx = np.mgrid[0 : dims[0], 0 : dims[1]].astype(np.float64)
        for _ in range(cfg.spurious_bumps):
            cy = rng.uniform(0, dims[0] - 1)
            cx = rng.uniform(0, dims[1] - 1)
            amp = rng.uniform(*cfg.bump_amplitude)
            sig = rng.uniform(*cfg.bump_sigma)
            m += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig * sig))

    if cfg.noise_sigma > 0:
        m += cfg.noise_sigma * np.random.default_rng([seed, index, _PRED_NOISE]).standard_normal(dims)
    return VoxelGrid(m)
