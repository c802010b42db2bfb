import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesiondist.errors import ConfigError, DataError, NonPositiveDecay, NonPositiveMax, OutOfBounds
from lesiondist.grid import DotSet, VoxelGrid
from lesiondist.maps import ShiftConfig, image_normalize, normalize_map, shift_dots
from lesiondist.synthetic import SynthConfig, generate_case
from lesiondist.transform import distance_transform

from conftest import random_instance


def test_normalize_simple():
    tm = normalize_map(VoxelGrid([[0.0, 2.0, 4.0]]), 2)
    np.testing.assert_array_equal(tm.data, [[1.0, 0.25, 0.0]])
    assert not tm.degenerate


def test_p1_is_affine_inversion(rng):
    d = rng.random((5, 6)) * 7
    d[2, 3] = 0
    tm = normalize_map(VoxelGrid(d), 1)
    dd = VoxelGrid(d).data.astype(np.float64)
    np.testing.assert_allclose(tm.data, 1 - dd / dd.max(), rtol=0, atol=1e-7)
    assert np.argmin(tm.data) == np.argmax(dd)
    assert np.argmax(tm.data) == np.argmin(dd)


def test_center_dot_euclidean_p9():
    dm = distance_transform(VoxelGrid(np.ones((3, 3))), DotSet([(1, 1)]), "euclidean")
    tm = normalize_map(dm, 9)
    # (1 - 1/sqrt 2)**9, evaluated independently
    edge = 1.5862946206156882e-05
    assert tm.data[1, 1] == 1.0
    assert tm.data[0, 0] == 0.0
    for c in [(0, 1), (1, 0), (1, 2), (2, 1)]:
        assert tm.data[c] == pytest.approx(edge, rel=1e-6)
    assert tm.kind.value == "euclidean" and tm.decay == 9


def test_degenerate_map():
    dm = distance_transform(VoxelGrid(np.full((4, 4), 0.3)), DotSet([(1, 1)]), "intensity")
    tm = normalize_map(dm, 6)
    assert tm.degenerate
    assert np.all(tm.data == 1.0)


def test_bad_decay_and_negative_dm():
    with pytest.raises(NonPositiveDecay):
        normalize_map(VoxelGrid([[0.0, 1.0]]), 0)
    with pytest.raises(NonPositiveDecay):
        normalize_map(VoxelGrid([[0.0, 1.0]]), -1)
    with pytest.raises(DataError):
        normalize_map(VoxelGrid([[0.0, -1.0]]), 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 5, 6, 9]))
def test_range_and_order_reversal(seed, p):
    rng = np.random.default_rng(seed)
    img, dots = random_instance(rng, 2, 12)
    dm = distance_transform(img, dots, "geodesic")
    tm = normalize_map(dm, p)
    m, d = tm.data, dm.data
    assert m.min() >= 0 and m.max() <= 1
    for c in dots:
        assert m[c] == 1.0
    assert m.flat[np.argmax(d)] == 0.0
    flat_d, flat_m = d.ravel(), m.ravel()
    order = np.argsort(flat_d, kind="stable")
    sd, sm = flat_d[order], flat_m[order]
    strict = sd[1:] > sd[:-1]
    assert np.all(sm[1:][strict] < sm[:-1][strict])


def test_decay_monotone():
    d = VoxelGrid([[0.0, 0.5, 1.0, 3.0, 4.0]])
    prev = None
    for p in [0.5, 1, 2, 5, 6, 9]:
        m = normalize_map(d, p).data[0, 1:4].astype(np.float64)
        if prev is not None:
            assert np.all(m < prev)
        prev = m


def test_image_normalize():
    g = image_normalize(VoxelGrid([[0, 2], [4, 8]]))
    np.testing.assert_array_equal(g.data, [[0, 0.25], [0.5, 1]])
    assert image_normalize(g) == g
    with pytest.raises(NonPositiveMax):
        image_normalize(VoxelGrid(np.zeros((2, 2))))


def ridge_image():
    img = np.zeros((15, 15))
    for x in range(3, 12):
        img[7, x] = 0.5 + 0.05 * (x - 3) if x <= 9 else 0.8 - 0.1 * (x - 9)
    img[6, 3:12] = img[7, 3:12] * 0.7
    img[8, 3:12] = img[7, 3:12] * 0.7
    return img


def eligible_argmax(img, dot, cfg):
    """Exhaustive scan of the eligible set, flood fill done by hand."""
    y0, x0 = dot
    h = cfg.window // 2
    win = img[max(0, y0 - h) : y0 + h + 1, max(0, x0 - h) : x0 + h + 1]
    level = cfg.threshold * win.max()
    comp = {dot}
    todo = [dot]
    while todo:
        y, x = todo.pop()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                n = (y + dy, x + dx)
                if (0 <= n[0] < img.shape[0] and 0 <= n[1] < img.shape[1]
                        and n not in comp and img[n] >= level):
                    comp.add(n)
                    todo.append(n)
    best = None
    for y in range(img.shape[0]):
        for x in range(img.shape[1]):
            if (y, x) in comp and math.dist((y, x), dot) <= cfg.radius:
                if best is None or img[y, x] > img[best]:
                    best = (y, x)
    return best


def test_shift_onto_ridge_peak():
    img = ridge_image()
    peak = (7, 9)
    assert np.unravel_index(np.argmax(img), img.shape) == peak
    cfg = ShiftConfig()
    for dot in [(7, 7), (6, 8), (8, 10), (7, 11)]:
        res = shift_dots(VoxelGrid(img), DotSet([dot]), cfg)
        assert res.dots.coords == (eligible_argmax(img.astype(np.float32).astype(float), dot, cfg),)
        assert res.dots.coords == (peak,)


def test_shift_fixed_point_and_background():
    img = ridge_image()
    res = shift_dots(VoxelGrid(img), DotSet([(7, 9)]))
    assert res.dots.coords == ((7, 9),) and not res.not_on_component
    res = shift_dots(VoxelGrid(img), DotSet([(0, 0)]))
    assert res.dots.coords == ((0, 0),)
    assert res.not_on_component == [(0, 0)]


def test_shift_never_farther_than_radius_and_idempotent_on_synthetic():
    cfg = SynthConfig(noise_sigma=0.03, seed=5)
    rng = np.random.default_rng(1)
    for i in range(25):
        case = generate_case(cfg, i)
        jitter = []
        for y, x in case.dots:
            dy, dx = rng.integers(-2, 3, size=2)
            jitter.append((int(np.clip(y + dy, 0, 63)), int(np.clip(x + dx, 0, 63))))
        dots = DotSet(dict.fromkeys(jitter))
        once = shift_dots(case.image, dots)
        twice = shift_dots(case.image, once.dots)
        assert twice.dots.coords == once.dots.coords
        kept = [d for d in dots if d not in once.merged]
        for a, b in zip(kept, once.dots):
            assert math.dist(a, b) <= 3.0


def test_shift_not_idempotent_on_monotone_ramp():
    # Documented limitation: a long monotone ramp walks one radius per call.
    img = np.tile(np.linspace(0.1, 1.0, 20), (5, 1))
    once = shift_dots(VoxelGrid(img), DotSet([(2, 6)]))
    assert once.dots.coords == ((2, 9),)
    assert shift_dots(VoxelGrid(img), once.dots).dots.coords == ((2, 12),)


def test_shift_errors():
    with pytest.raises(OutOfBounds):
        shift_dots(VoxelGrid(np.ones((3, 3))), DotSet([(5, 5)]))
    with pytest.raises(DataError):
        shift_dots(VoxelGrid(np.ones((3, 3, 3))), DotSet([(1, 1, 1)]))
    with pytest.raises(ConfigError):
        ShiftConfig(radius=0)
    with pytest.raises(ConfigError):
        ShiftConfig(threshold=1.0)
