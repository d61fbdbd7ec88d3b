import math

import numpy as np
import pytest

from oracles import every_label_connected
from spixbench.algorithms import (
    ALGORITHMS,
    AlgorithmParams,
    fh_segment,
    grid_seeds,
    measure_runtime,
    segment,
    slic_segment,
    watershed_segment,
)
from spixbench.algorithms.slic import slic_raw
from spixbench.algorithms.watershed import gradient_magnitude, priority_flood
from spixbench.core import SyntheticSpec, generate_synthetic_entry, to_color_space
from spixbench.metrics import boundary_recall, compactness


class TestGridSeeds:
    def test_square(self):
        assert grid_seeds(8, 8, 4) == [(2, 2), (6, 2), (2, 6), (6, 6)]

    def test_single(self):
        assert grid_seeds(7, 5, 1) == [(3, 2)]

    def test_aspect_ratio(self):
        assert grid_seeds(9, 3, 3) == [(1, 1), (4, 1), (7, 1)]

    @pytest.mark.parametrize("w,h,k", [(160, 120, 400), (481, 321, 1200), (10, 3, 30), (5, 40, 7), (33, 17, 100)])
    def test_covers_k_and_stays_inside(self, w, h, k):
        seeds = grid_seeds(w, h, k)
        assert len(seeds) >= k
        assert len(set(seeds)) == len(seeds)
        assert all(0 <= x < w and 0 <= y < h for x, y in seeds)

    def test_impossible(self):
        with pytest.raises(ValueError):
            grid_seeds(3, 3, 10)


class TestParams:
    def test_json_round_trip(self):
        p = AlgorithmParams(k=800, compactness=20.0, iterations=5, color_space="rgb", extra={"fh_k": 300.0})
        assert AlgorithmParams.from_json(p.to_json()) == p

    def test_dotted_extra_keys(self):
        p = AlgorithmParams.from_json({"k": 100, "extra.fh_k": 50})
        assert p.extra == {"fh_k": 50}

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            AlgorithmParams.from_json({"kk": 3})

    @pytest.mark.parametrize("kwargs", [dict(k=0), dict(iterations=0), dict(color_space="hsv"), dict(compactness=-1)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AlgorithmParams(**kwargs)


class TestSlic:
    def test_constant_image_gives_grid_blocks(self):
        img = np.full((8, 8, 3), 90, np.uint8)
        for m in (0.5, 10, 100):
            res = slic_segment(img, AlgorithmParams(k=4, compactness=m, iterations=3))
            expected = np.kron(np.array([[0, 1], [2, 3]]), np.ones((4, 4), int))
            assert np.array_equal(res.labels, expected)

    def test_noise_free_synthetic_recall(self):
        e = generate_synthetic_entry(SyntheticSpec(width=64, height=48, num_segments=4, noise_sigma=0, seed=2))
        res = slic_segment(e.image, AlgorithmParams(k=48, compactness=10, iterations=10))
        assert boundary_recall(e.ground_truths[0], res.labels, 1) == 1.0

    def test_objective_never_increases(self, rng):
        img = to_color_space(np.clip(rng.normal(120, 30, size=(32, 32, 3)), 0, 255).astype(np.uint8), "lab")
        trace = []
        slic_raw(img, AlgorithmParams(k=16, compactness=10, iterations=10), trace=trace)
        assert len(trace) == 20
        assert all(b <= a + 1e-9 * abs(a) for a, b in zip(trace, trace[1:]))

    def test_compactness_trend(self, suite):
        cos = [
            np.mean([compactness(slic_segment(e.image, AlgorithmParams(k=400, compactness=m)).labels) for e in suite])
            for m in (1, 10, 40, 160)
        ]
        assert all(b >= a for a, b in zip(cos, cos[1:]))

    def test_labels_connected_for_any_compactness(self, rng):
        img = rng.integers(0, 256, size=(30, 40, 3)).astype(np.uint8)
        for m in (0, 1, 20, 200):
            res = slic_segment(img, AlgorithmParams(k=30, compactness=m, iterations=3))
            assert res.labels.shape == (30, 40)
            assert every_label_connected(res.labels)
            assert res.k_generated == len(np.unique(res.labels))

    def test_k_exceeding_pixels(self):
        with pytest.raises(ValueError):
            slic_segment(np.zeros((3, 3, 3), np.uint8), AlgorithmParams(k=10))


class TestWatershed:
    def test_constant_image_is_marker_voronoi(self):
        img = np.full((12, 15, 3), 50, np.uint8)
        res = watershed_segment(img, AlgorithmParams(k=6, compactness=1.0))
        markers = grid_seeds(15, 12, 6)
        yy, xx = np.indices((12, 15))
        dist = np.stack([np.hypot(xx - x, yy - y) for x, y in markers])
        # region of each output label contains exactly one marker
        owner = {res.labels[y, x]: i for i, (x, y) in enumerate(markers)}
        assigned = np.vectorize(owner.get)(res.labels)
        chosen = np.take_along_axis(dist, assigned[None], axis=0)[0]
        assert np.allclose(chosen, dist.min(axis=0))

    def test_k_generated_equals_markers(self, rng):
        img = rng.integers(0, 256, size=(25, 31, 3)).astype(np.uint8)
        for k in (1, 5, 40):
            for c in (0.0, 2.0):
                res = watershed_segment(img, AlgorithmParams(k=k, compactness=c))
                assert res.k_generated == len(grid_seeds(31, 25, k))
                assert every_label_connected(res.labels)

    def test_split_at_ridge(self):
        # two basins; the steepest step is 200 -> 60 between columns 5 and 6
        row = np.array([10, 20, 30, 40, 90, 200, 60, 30], dtype=float)
        grad = gradient_magnitude(np.stack([row, row])[..., None])
        labels = priority_flood(grad, [(1, 0), (7, 0)], compactness=0.0)
        assert labels[0].tolist() == [0, 0, 0, 0, 0, 0, 1, 1]
        assert np.array_equal(labels[0], labels[1])

    def test_gradient_is_max_neighbour_difference(self):
        img = np.array([[0, 0, 10], [0, 50, 10]], dtype=float)[..., None]
        assert gradient_magnitude(img).tolist() == [[0, 50, 10], [50, 50, 40]]


class TestFH:
    def test_constant_image(self):
        res = fh_segment(np.full((6, 7, 3), 33, np.uint8), AlgorithmParams(extra={"fh_k": 0.1}))
        assert res.k_generated == 1

    def test_two_rows_small_k(self):
        img = np.array([[0, 0], [100, 100]], np.uint8)
        assert fh_segment(img, AlgorithmParams(extra={"fh_k": 1})).k_generated == 2

    def test_two_rows_large_k(self):
        img = np.array([[0, 0], [100, 100]], np.uint8)
        assert fh_segment(img, AlgorithmParams(extra={"fh_k": 500})).k_generated == 1

    def test_min_size(self, rng):
        img = rng.integers(0, 256, size=(20, 20, 3)).astype(np.uint8)
        res = fh_segment(img, AlgorithmParams(extra={"fh_k": 50, "fh_min_size": 10}))
        assert np.bincount(res.labels.ravel()).min() >= 10
        assert every_label_connected(res.labels)

    def test_missing_scale(self):
        with pytest.raises(ValueError):
            fh_segment(np.zeros((3, 3, 3), np.uint8), AlgorithmParams())


class TestDispatch:
    def test_same_as_direct_call(self, rng):
        img = rng.integers(0, 256, size=(24, 24, 3)).astype(np.uint8)
        p = AlgorithmParams(k=16)
        assert np.array_equal(segment("slic", img, p).labels, slic_segment(img, p).labels)

    def test_runtime_positive(self, rng):
        img = rng.integers(0, 256, size=(24, 24, 3)).astype(np.uint8)
        for name in ALGORITHMS:
            res = segment(name, img, AlgorithmParams(k=16, extra={"fh_k": 100}))
            assert res.runtime_ns > 0

    def test_unknown(self):
        with pytest.raises(ValueError):
            segment("foo", np.zeros((4, 4, 3), np.uint8), AlgorithmParams())

    @pytest.mark.parametrize("name", sorted(ALGORITHMS))
    def test_deterministic(self, name, rng):
        img = rng.integers(0, 256, size=(20, 26, 3)).astype(np.uint8)
        p = AlgorithmParams(k=12, extra={"fh_k": 200, "fh_min_size": 5})
        assert np.array_equal(segment(name, img, p).labels, segment(name, img, p).labels)


@pytest.mark.parametrize("name", ["slic", "watershed"])
def test_controllable_k_on_synthetic_suite(name, suite):
    for e in suite[:4]:
        for k in (100, 400, 1200):
            res = segment(name, e.image, AlgorithmParams(k=k, compactness=10 if name == "slic" else 0))
            assert abs(res.k_generated - k) / k <= 0.5


def test_measure_runtime_sleep():
    import time

    _, ns = measure_runtime(time.sleep, 0.05)
    assert 40e6 <= ns <= 60e6
    _, ns = measure_runtime(lambda: None)
    assert ns < 1e6


def test_slic_runtime_on_bsds_sized_image():
    e = generate_synthetic_entry(SyntheticSpec(width=481, height=321, num_segments=20, seed=1))
    slic_segment(e.image, AlgorithmParams(k=400, iterations=1))  # compile warm-up
    res = slic_segment(e.image, AlgorithmParams(k=400, iterations=10))
    assert res.runtime_ns < 1e9
    assert not math.isnan(res.runtime_ns)
