import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import random_label_map
from spixbench.core import DataError
from spixbench.metrics import (
    MetricConfig,
    MetricRecord,
    aggregate,
    asa,
    boundary_mask,
    boundary_recall,
    compactness,
    evaluate_entry,
    explained_variation,
    intra_cluster_variation,
    mean_distance_to_edge,
    recall_radius,
    undersegmentation_bergh,
    undersegmentation_levin,
    undersegmentation_np,
)

pairs = st.tuples(st.integers(2, 10), st.integers(2, 10)).flatmap(
    lambda shape: st.tuples(
        arrays(np.int64, shape, elements=st.integers(0, 4)),
        arrays(np.int64, shape, elements=st.integers(0, 4)),
    )
)


class TestBoundaryMask:
    def test_constant(self):
        assert not boundary_mask(np.zeros((5, 4), int)).any()

    def test_two_rows(self):
        assert boundary_mask(np.array([[1, 1], [2, 2]])).all()

    def test_column_split(self):
        labels = np.array([[0, 0, 1, 1]] * 4)
        mask = boundary_mask(labels)
        assert mask[:, 1].all() and mask[:, 2].all()
        assert not mask[:, 0].any() and not mask[:, 3].any()


class TestRecallRadius:
    @pytest.mark.parametrize("w,h,r", [(481, 321, 1), (100, 100, 0), (2000, 2000, 7)])
    def test_values(self, w, h, r):
        assert recall_radius(w, h) == r

    def test_ceil_rounding(self):
        assert recall_radius(481, 321, MetricConfig(radius_rounding="ceil")) == 2

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            MetricConfig(recall_radius_factor=0)


class TestHandExamples:
    def test_recall(self, half_split):
        gt, sp = half_split
        assert boundary_recall(gt, gt, 0) == 1.0
        assert boundary_recall(gt, sp, 0) == 0.5
        assert boundary_recall(gt, sp, 1) == 1.0

    def test_undersegmentation(self, half_split):
        gt, sp = half_split
        assert undersegmentation_np(gt, sp) == 0.5
        assert undersegmentation_levin(gt, sp) == 0.75
        assert undersegmentation_bergh(gt, sp) == 0.25
        assert asa(gt, sp) == 0.75

    def test_single_superpixel(self, half_split):
        gt, _ = half_split
        sp = np.zeros_like(gt)
        assert undersegmentation_np(gt, sp) == 1.0
        assert undersegmentation_levin(gt, sp) == 1.0
        assert asa(gt, sp) == 0.5

    def test_identity(self, half_split):
        gt, _ = half_split
        assert undersegmentation_np(gt, gt) == 0.0
        assert undersegmentation_levin(gt, gt) == 0.0
        assert undersegmentation_bergh(gt, gt) == 0.0
        assert asa(gt, gt) == 1.0
        assert mean_distance_to_edge(gt, gt) == 0.0

    def test_mde(self, half_split):
        gt, sp = half_split
        assert mean_distance_to_edge(gt, sp) == 0.25

    def test_mde_without_superpixel_boundary(self, half_split):
        gt, _ = half_split
        # 8 gt boundary pixels, each charged the 3x3-pixel diagonal sqrt(18)
        assert mean_distance_to_edge(gt, np.zeros_like(gt)) == pytest.approx(8 * math.sqrt(18) / 16, abs=1e-12)

    def test_mde_without_gt_boundary(self, half_split):
        _, sp = half_split
        assert mean_distance_to_edge(np.zeros_like(sp), sp) == 0.0

    def test_single_segment_ground_truth(self, rng):
        sp = random_label_map(rng, 10, 10)
        gt = np.zeros_like(sp)
        assert boundary_recall(gt, sp, 0) == 1.0
        assert undersegmentation_np(gt, sp) == 0.0
        assert undersegmentation_levin(gt, sp) == 0.0
        assert undersegmentation_bergh(gt, sp) == 0.0


class TestImageMetrics:
    def test_ev_single_pixel_superpixels(self, rng):
        image = rng.integers(0, 256, size=(5, 6, 3)).astype(np.uint8)
        sp = np.arange(30).reshape(5, 6)
        assert explained_variation(image, sp) == pytest.approx(1.0, abs=1e-12)

    def test_ev_one_superpixel(self, rng):
        image = rng.integers(0, 256, size=(5, 6)).astype(np.uint8)
        assert explained_variation(image, np.zeros((5, 6), int)) == pytest.approx(0.0, abs=1e-12)

    def test_ev_two_tone(self):
        image = np.array([[0, 0, 100, 100]] * 4, dtype=np.uint8)
        sp = np.array([[0, 0, 1, 1]] * 4)
        assert explained_variation(image, sp) == 1.0

    def test_ev_constant_image(self):
        assert explained_variation(np.full((3, 3), 7, np.uint8), np.arange(9).reshape(3, 3)) == 1.0

    def test_co_square(self):
        for n in (1, 3, 8):
            assert compactness(np.zeros((n, n), int)) == pytest.approx(math.pi / 4, abs=1e-12)

    def test_co_row_of_pixels(self):
        assert compactness(np.arange(7)[None, :]) == pytest.approx(math.pi / 4, abs=1e-12)

    def test_co_snake_below_block(self):
        snake = np.ones((4, 4), int)
        snake[0, :] = 0
        snake[1, 3] = 0
        snake[2, :] = 0
        snake[3, 0] = 0
        # label 0: a 1-pixel-wide 10-pixel snake; compare with a compact block
        block = np.ones((4, 4), int)
        block[:2, :] = 0
        block[2, :2] = 0
        assert oracles.compactness(snake) < oracles.compactness(block)
        assert compactness(snake) < compactness(block)

    def test_icv(self):
        assert intra_cluster_variation(np.array([[0, 100]], dtype=np.uint8), np.zeros((1, 2), int)) == pytest.approx(
            math.sqrt(2 * 50**2) / 2, abs=1e-12
        )

    def test_icv_zero_cases(self):
        image = np.array([[0, 0, 100, 100]] * 4, dtype=np.uint8)
        assert intra_cluster_variation(np.full((4, 4), 9, np.uint8), np.zeros((4, 4), int)) == 0.0
        assert intra_cluster_variation(image, np.array([[0, 0, 1, 1]] * 4)) == 0.0


@given(pairs)
@settings(max_examples=150, deadline=None)
def test_matches_oracles(pair):
    gt, sp = pair
    image = (gt * 37 + sp * 11) % 256
    for r in (0, 1, 2):
        assert boundary_recall(gt, sp, r) == pytest.approx(oracles.recall(gt, sp, r), abs=1e-12)
    assert undersegmentation_np(gt, sp) == pytest.approx(oracles.ue_np(gt, sp), abs=1e-12)
    assert undersegmentation_levin(gt, sp) == pytest.approx(oracles.ue_levin(gt, sp), abs=1e-12)
    assert undersegmentation_bergh(gt, sp) == pytest.approx(oracles.ue_bergh(gt, sp), abs=1e-12)
    assert asa(gt, sp) == pytest.approx(oracles.asa(gt, sp), abs=1e-12)
    assert explained_variation(image, sp) == pytest.approx(oracles.explained_variation(image, sp), abs=1e-12)
    assert compactness(sp) == pytest.approx(oracles.compactness(sp), abs=1e-12)
    assert intra_cluster_variation(image, sp) == pytest.approx(oracles.icv(image, sp), abs=1e-12)
    assert mean_distance_to_edge(gt, sp) == pytest.approx(oracles.mde(gt, sp), abs=1e-12)


@given(pairs)
@settings(max_examples=100, deadline=None)
def test_asa_bergh_identity(pair):
    gt, sp = pair
    assert abs(asa(gt, sp) + undersegmentation_bergh(gt, sp) - 1.0) <= 1e-12


def test_self_comparison_random(rng):
    for _ in range(100):
        g = random_label_map(rng, 12, 12)
        assert boundary_recall(g, g, 1) == 1.0
        assert undersegmentation_np(g, g) == 0.0


def test_recall_monotone_in_radius(rng):
    for _ in range(30):
        gt, sp = random_label_map(rng, 16, 16), random_label_map(rng, 16, 16)
        values = [boundary_recall(gt, sp, r) for r in range(5)]
        assert values == sorted(values)


def test_refinement_never_hurts(rng):
    for _ in range(30):
        gt, sp = random_label_map(rng, 16, 16), random_label_map(rng, 16, 16, max_labels=3)
        image = rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
        finer = sp * 10 + random_label_map(rng, 16, 16, max_labels=3)
        assert asa(gt, finer) >= asa(gt, sp)
        assert explained_variation(image, finer) >= explained_variation(image, sp) - 1e-12


def test_ev_bounded(rng):
    for _ in range(50):
        image = rng.integers(0, 256, size=(8, 9, 3)).astype(np.uint8)
        ev = explained_variation(image, random_label_map(rng, 8, 9, smooth=False))
        assert 0.0 <= ev <= 1.0


def test_dimension_mismatch():
    a, b = np.zeros((3, 3), int), np.zeros((3, 4), int)
    for fn in (undersegmentation_np, undersegmentation_levin, undersegmentation_bergh, asa, mean_distance_to_edge):
        with pytest.raises(DataError):
            fn(a, b)
    with pytest.raises(DataError):
        boundary_recall(a, b, 1)
    with pytest.raises(DataError):
        explained_variation(np.zeros((3, 3)), b)


class TestEvaluateEntry:
    def test_single_ground_truth_matches_direct_calls(self, rng):
        image = rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
        gt, sp = random_label_map(rng, 16, 16), random_label_map(rng, 16, 16)
        rec = evaluate_entry(image, [gt], sp)
        r = recall_radius(16, 16)
        assert rec.rec == boundary_recall(gt, sp, r)
        assert rec.ue_np == undersegmentation_np(gt, sp)
        assert rec.asa == asa(gt, sp)
        assert rec.ev == explained_variation(image, sp)
        assert rec.k_generated == len(np.unique(sp))

    def test_worst_case_over_ground_truths(self):
        image = np.zeros((4, 4), np.uint8)
        gt_a = np.array([[0, 0, 1, 1]] * 4)
        gt_b = np.array([[0, 1, 1, 1]] * 4)
        sp = np.array([[0, 0, 1, 1]] * 4)
        rec = evaluate_entry(image, [gt_a, gt_b], sp, MetricConfig(recall_radius_factor=1e-6))
        assert rec.rec == min(boundary_recall(g, sp, 0) for g in (gt_a, gt_b))
        assert rec.ue_np == max(undersegmentation_np(g, sp) for g in (gt_a, gt_b))
        assert rec.asa == min(asa(g, sp) for g in (gt_a, gt_b))
        assert rec.mde == max(mean_distance_to_edge(g, sp) for g in (gt_a, gt_b))
        assert rec.rec < 1.0 and rec.ue_np > 0.0

    def test_empty_ground_truth_list(self):
        with pytest.raises(DataError):
            evaluate_entry(np.zeros((4, 4), np.uint8), [], np.zeros((4, 4), int))


def _record(**values):
    base = dict(rec=1, ue_np=0, ue_levin=0, ue_bergh=0, asa=1, ev=1, co=0.5, icv=0, mde=0, k_generated=400)
    base.update(values)
    return MetricRecord(**base)


class TestAggregate:
    def test_single(self):
        s = aggregate([_record(rec=0.7)])
        assert s["rec"].mean == s["rec"].min == s["rec"].max == 0.7
        assert s["rec"].std == 0.0

    def test_two(self):
        s = aggregate([_record(rec=0.8), _record(rec=1.0)])
        assert s["rec"].mean == pytest.approx(0.9, abs=1e-15)
        assert s["rec"].std == pytest.approx(0.1, abs=1e-15)
        assert (s["rec"].min, s["rec"].max) == (0.8, 1.0)

    def test_k_stats(self):
        s = aggregate([_record(k_generated=400), _record(k_generated=400), _record(k_generated=430)])
        assert s.k_std == pytest.approx(math.sqrt(200), abs=1e-12)
        assert s.k_max == 430
        assert s.k_mean == pytest.approx(410)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])
