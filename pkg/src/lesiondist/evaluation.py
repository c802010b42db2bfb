"""Detection scoring: one-to-one matching, FROC curves, FAUC and bootstrap."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import DetectionSet, threshold_detections
from .errors import ConfigError, EmptyCurve, NoAnnotations, NoImages
from .grid import DotSet

HIT_RADIUS = 6.0
FP_LIMIT = 10.0
BOOTSTRAP_SAMPLES = 1000
INTRA_RATER_SENSITIVITY = 0.5566


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    # (detection coord, annotation coord, distance)
    pairs: tuple = ()


def _coords(items) -> np.ndarray:
    if isinstance(items, DetectionSet):
        items = items.coords
    rows = [tuple(c) for c in items]
    if not rows:
        return np.empty((0, 2), dtype=np.float64)
    return np.array(rows, dtype=np.float64)


def match_detections(dets, annots, radius: float = HIT_RADIUS) -> MatchResult:
    """Optimal one-to-one matching of detections to annotations.

    Pairs farther apart than ``radius`` get a cost larger than any feasible
    total, so the assignment first maximizes the number of in-radius pairs
    and then minimizes their summed distance.
    """
    d = _coords(dets)
    a = _coords(annots)
    n, m = len(d), len(a)
    if n == 0 or m == 0:
        return MatchResult(0, n, m)
    dist = np.sqrt(((d[:, None, :] - a[None, :, :]) ** 2).sum(-1))
    ok = dist <= radius
    if not ok.any():
        return MatchResult(0, n, m)
    big = radius * (n + m) + 1
    rows, cols = linear_sum_assignment(np.where(ok, dist, big))
    pairs = tuple(
        (tuple(int(v) for v in d[r]), tuple(int(v) for v in a[c]), float(dist[r, c]))
        for r, c in zip(rows, cols)
        if ok[r, c]
    )
    tp = len(pairs)
    return MatchResult(tp, n - tp, m - tp, pairs)


@dataclass(frozen=True)
class FrocPoint:
    threshold: float
    fp_avg: float
    sensitivity: float


@dataclass
class FrocCurve:
    points: list[FrocPoint]
    fauc: float
    fp_limit: float
    # True when the curve stopped short of fp_limit and was extended flat.
    extended: bool = False
    n_images: int = 0
    n_annotations: int = 0
    sensitivity_mode: str = "pooled"

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p.threshold for p in self.points])

    @property
    def fp_avg(self) -> np.ndarray:
        return np.array([p.fp_avg for p in self.points])

    @property
    def sensitivity(self) -> np.ndarray:
        return np.array([p.sensitivity for p in self.points])

    def point_for(self, threshold: float) -> FrocPoint:
        for p in self.points:
            if p.threshold == threshold:
                return p
        raise KeyError(threshold)


def fauc(fp_avg: Sequence[float], sensitivity: Sequence[float], fp_limit: float = FP_LIMIT):
    """Percent of the maximal area under a FROC curve on [0, fp_limit].

    The curve is piecewise linear through the given points (fp_avg must be
    non-decreasing). Returns ``(fauc, extended)``.
    """
    x = np.asarray(fp_avg, dtype=np.float64)
    y = np.asarray(sensitivity, dtype=np.float64)
    if x.size == 0:
        return 0.0, True
    k = int(np.searchsorted(x, fp_limit, side="right"))
    if k == 0:
        return 0.0, False
    extended = bool(x[-1] < fp_limit)
    if k == x.size:
        xs = np.append(x, fp_limit)
        ys = np.append(y, y[-1])
    else:
        x0, x1, y0, y1 = x[k - 1], x[k], y[k - 1], y[k]
        y_at = y0 + (y1 - y0) * (fp_limit - x0) / (x1 - x0)
        xs = np.append(x[:k], fp_limit)
        ys = np.append(y[:k], y_at)
    terms = (xs[1:] - xs[:-1]) * (ys[:-1] + ys[1:]) / 2.0
    area = math.fsum(terms.tolist())
    return min(100.0, 100.0 * area / fp_limit), extended


@dataclass
class _Table:
    """Per-image TP/FP counts at every global threshold.

    Column 0 is the +inf sentinel (no detections).
    """

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    annots: np.ndarray


def _image_steps(dets: DetectionSet, annots: DotSet, radius: float):
    """TP count for each prefix of detections cut at a distinct score."""
    scores = dets.scores
    coords = dets.coords
    a = _coords(annots)
    m = len(a)
    distinct = np.unique(scores)[::-1]
    cut = np.searchsorted(-scores, -distinct, side="right")
    near = np.zeros(len(coords), dtype=bool)
    if m:
        d = _coords(coords)
        near = (np.sqrt(((d[:, None, :] - a[None, :, :]) ** 2).sum(-1)) <= radius).any(1)
    tps = np.zeros(len(distinct), dtype=np.int64)
    tp, prev = 0, 0
    for j, n in enumerate(cut):
        # adding detections far from every annotation cannot change the maximum
        if tp < m and near[prev:n].any():
            tp = match_detections(coords[:n], annots, radius).tp
        tps[j] = tp
        prev = n
    return distinct, cut, tps


def _build_table(per_image, radius: float) -> _Table:
    steps = [_image_steps(d, a, radius) for d, a in per_image]
    all_scores = [s for s, _, _ in steps if len(s)]
    uniq = np.unique(np.concatenate(all_scores))[::-1] if all_scores else np.empty(0)
    thresholds = np.concatenate([[math.inf], uniq])
    n_img, n_t = len(per_image), len(thresholds)
    tp = np.zeros((n_img, n_t), dtype=np.int64)
    fp = np.zeros((n_img, n_t), dtype=np.int64)
    for i, (distinct, cut, tps) in enumerate(steps):
        if len(distinct) == 0:
            continue
        # number of this image's distinct scores >= each global threshold
        j = np.searchsorted(-distinct, -thresholds, side="right")
        has = j > 0
        tp[i, has] = tps[j[has] - 1]
        fp[i, has] = cut[j[has] - 1] - tps[j[has] - 1]
    annots = np.array([len(a) for _, a in per_image], dtype=np.int64)
    return _Table(thresholds, tp, fp, annots)


def _check_per_image(per_image):
    per_image = list(per_image)
    if not per_image:
        raise NoImages("no images to evaluate")
    return per_image


def froc(
    per_image,
    fp_limit: float = FP_LIMIT,
    radius: float = HIT_RADIUS,
    sensitivity: str = "pooled",
) -> FrocCurve:
    """FROC curve over every observed candidate score.

    ``per_image`` is a sequence of (unthresholded DetectionSet, DotSet).
    Sensitivity is pooled (total TP / total annotations) unless
    ``sensitivity="per_image"``, which averages over images that have
    annotations.
    """
    if sensitivity not in ("pooled", "per_image"):
        raise ConfigError(f"unknown sensitivity mode {sensitivity!r}")
    if fp_limit <= 0:
        raise ConfigError("fp_limit must be positive")
    per_image = _check_per_image(per_image)
    table = _build_table(per_image, radius)
    total = int(table.annots.sum())
    if total == 0:
        raise NoAnnotations("no annotations in any image")
    n = len(per_image)
    fp_avg = table.fp.sum(0) / n
    if sensitivity == "pooled":
        sens = table.tp.sum(0) / total
    else:
        has = table.annots > 0
        sens = (table.tp[has] / table.annots[has, None]).mean(0)
    area, extended = fauc(fp_avg, sens, fp_limit)
    points = [
        FrocPoint(float(t), float(f), float(s))
        for t, f, s in zip(table.thresholds, fp_avg, sens)
    ]
    return FrocCurve(points, area, float(fp_limit), extended, n, total, sensitivity)


def operating_point(curve: FrocCurve, target_sensitivity: float = INTRA_RATER_SENSITIVITY) -> float:
    """Threshold whose sensitivity is closest to the target.

    Ties go to the smaller FP_avg, then the higher threshold. The +inf
    sentinel point is only returned when it is the only point.
    """
    pts = [p for p in curve.points if math.isfinite(p.threshold)] or list(curve.points)
    if not pts:
        raise EmptyCurve("curve has no points")
    best = min(
        pts, key=lambda p: (abs(p.sensitivity - target_sensitivity), p.fp_avg, -p.threshold)
    )
    return best.threshold


def metrics_at(per_image, threshold: float, radius: float = HIT_RADIUS) -> dict:
    """Detection counts and rates after thresholding every image at ``threshold``."""
    per_image = _check_per_image(per_image)
    tp = fp = fn = 0
    per_sens = []
    for dets, annots in per_image:
        r = match_detections(threshold_detections(dets, threshold), annots, radius)
        tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
        if len(annots):
            per_sens.append(r.tp / len(annots))
    total = tp + fn
    return {
        "threshold": float(threshold),
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "fp_avg": fp / len(per_image),
        "sensitivity": tp / total if total else 0.0,
        "sensitivity_per_image": float(np.mean(per_sens)) if per_sens else 0.0,
    }


@dataclass
class BootstrapSummary:
    mean: float
    std: float
    lower: float
    upper: float
    samples: int
    seed: int
    faucs: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "ci_lower": self.lower,
            "ci_upper": self.upper,
            "ci_level": 0.95,
            "samples": self.samples,
            "seed": self.seed,
        }


def _resample_weights(seed: int, index: int, n: int) -> np.ndarray:
    # one independent stream per resample so chunking/threads cannot matter
    rng = np.random.default_rng([seed, index])
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)


def _bootstrap_chunk(table: _Table, indices, seed: int, fp_limit: float) -> list[float]:
    n = table.tp.shape[0]
    w = np.stack([_resample_weights(seed, i, n) for i in indices])
    # integer-valued float64 products are exact, so BLAS blocking is irrelevant
    tp = w @ table.tp.astype(np.float64)
    fp = w @ table.fp.astype(np.float64)
    annots = w @ table.annots.astype(np.float64)
    out = []
    for r in range(len(indices)):
        if annots[r] == 0:
            # a resample without annotations has no sensitivity; count it as 0
            out.append(0.0)
            continue
        out.append(fauc(fp[r] / n, tp[r] / annots[r], fp_limit)[0])
    return out


def bootstrap_fauc(
    per_image,
    samples: int = BOOTSTRAP_SAMPLES,
    seed: int = 0,
    fp_limit: float = FP_LIMIT,
    radius: float = HIT_RADIUS,
    jobs: int = 1,
    chunk: int = 50,
) -> BootstrapSummary:
    """Resample images with replacement and summarize the pooled FAUC.

    Resample ``i`` draws from ``default_rng([seed, i])``; results do not
    depend on ``jobs``.
    """
    if samples < 1:
        raise ConfigError("bootstrap needs at least one sample")
    per_image = _check_per_image(per_image)
    table = _build_table(per_image, radius)
    if table.annots.sum() == 0:
        raise NoAnnotations("no annotations in any image")
    batches = [range(s, min(s + chunk, samples)) for s in range(0, samples, chunk)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda b: _bootstrap_chunk(table, b, seed, fp_limit), batches))
    else:
        parts = [_bootstrap_chunk(table, b, seed, fp_limit) for b in batches]
    faucs = np.array([v for p in parts for v in p])
    if np.all(faucs == faucs[0]):
        mean, std, lower, upper = float(faucs[0]), 0.0, float(faucs[0]), float(faucs[0])
    else:
        lower, upper = np.percentile(faucs, [2.5, 97.5])
        mean = math.fsum(faucs.tolist()) / samples
        std = math.sqrt(math.fsum(((faucs - mean) ** 2).tolist()) / samples)
    return BootstrapSummary(
        mean=mean,
        std=std,
        # heavily skewed samples can put the mean outside the percentile band
        lower=float(min(lower, mean)),
        upper=float(max(upper, mean)),
        samples=samples,
        seed=seed,
        faucs=faucs,
    )
