import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from looserope.errors import DegenerateMask, DimensionMismatch, EmptyInput, InvalidLevelCount, ValidationError
from looserope.saliency import (
    FeatureStack,
    RegionMasks,
    SaliencyMap,
    aggregate_saliency,
    feature_norm_map,
    finalize_saliency,
    quantize_saliency,
    rescale_saliency,
    synth_features,
)
from oracles import bilinear_loop, norm_map_loop


def test_feature_norm_map():
    np.testing.assert_allclose(feature_norm_map(np.full((1, 2, 2), -3.0)), 3.0)
    layer = np.zeros((2, 1, 1))
    layer[:, 0, 0] = (3, 4)
    assert feature_norm_map(layer)[0, 0] == pytest.approx(5.0)
    with pytest.raises(EmptyInput):
        feature_norm_map(np.zeros((0, 2, 2)))


def test_feature_norm_map_matches_loop(rng):
    layer = rng.standard_normal((2, 3, 3))
    np.testing.assert_allclose(feature_norm_map(layer), norm_map_loop(layer), atol=1e-6)


def test_aggregate_constants_and_identity(rng):
    a = np.zeros((4, 3, 3))
    a[0] = 2.0
    b = np.zeros((1, 6, 5))
    b[0] = 4.0
    np.testing.assert_allclose(aggregate_saliency(FeatureStack([a, b]), 5, 5), 3.0, atol=1e-6)
    stack = FeatureStack([rng.standard_normal((3, 4, 6))])
    np.testing.assert_array_equal(aggregate_saliency(stack, 4, 6), feature_norm_map(stack.layers[0]))


def test_aggregate_matches_resize_then_average(rng):
    for _ in range(20):
        layers = [rng.standard_normal((int(rng.integers(1, 4)), *rng.integers(1, 9, size=2)))
                  for _ in range(2)]
        ref = sum(bilinear_loop(norm_map_loop(l), 8, 8) for l in layers) / 2
        np.testing.assert_allclose(aggregate_saliency(FeatureStack(layers), 8, 8), ref, atol=1e-6)


def test_aggregate_permutation_invariant(rng):
    layers = [rng.standard_normal((2, 5, 5)), rng.standard_normal((3, 3, 4)), rng.standard_normal((1, 8, 8))]
    a = aggregate_saliency(FeatureStack(layers), 6, 6)
    b = aggregate_saliency(FeatureStack(layers[::-1]), 6, 6)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_finalize_degenerate_and_midpoint():
    crop = np.zeros((4, 4), bool)
    crop[1:3, 1:3] = True
    s = finalize_saliency(np.full((4, 4), 7.0), RegionMasks(crop), blur_size=1)
    np.testing.assert_array_equal(s.values[crop], 0.5)
    np.testing.assert_array_equal(s.values[~crop], 0.0)
    raw = np.zeros((4, 4))
    raw[1, 1], raw[1, 2], raw[2, 1], raw[2, 2] = 1, 3, 2, 2
    s = finalize_saliency(raw, RegionMasks(crop), blur_size=1)
    assert s.values[2, 1] == 0.5


def test_finalize_holes_zero_and_range(rng):
    crop = np.zeros((8, 8), bool)
    crop[2:6, 2:6] = True
    holes = np.zeros((8, 8), bool)
    holes[0:2, 6:8] = True
    s = finalize_saliency(rng.random((8, 8)) * 100, RegionMasks(crop, holes))
    assert np.all(s.values[holes] == 0.0)
    assert s.values.min() >= 0 and s.values.max() <= 1


def test_finalize_errors(rng):
    with pytest.raises(DegenerateMask):
        finalize_saliency(rng.random((3, 3)), RegionMasks(np.zeros((3, 3), bool)))
    with pytest.raises(DimensionMismatch):
        finalize_saliency(rng.random((3, 4)), RegionMasks(np.ones((3, 3), bool)))
    crop = np.ones((2, 2), bool)
    with pytest.raises(ValidationError):
        RegionMasks(crop, crop)


def test_quantize_examples():
    s = SaliencyMap(np.array([[0.6, 0.875, 0.0, 0.25, 0.5, 0.75, 1.0]]))
    q = quantize_saliency(s, 5).values[0]
    assert q[0] == 0.5 and q[1] == 1.0
    np.testing.assert_array_equal(q[2:], [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(InvalidLevelCount):
        quantize_saliency(s, 1)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 5), elements=st.floats(0, 1)), st.integers(2, 9))
def test_quantize_levels_and_idempotence(v, N):
    q = quantize_saliency(SaliencyMap(v), N)
    assert len(np.unique(q.values)) <= N
    idx = q.values.astype(np.float64) * (N - 1)
    np.testing.assert_allclose(idx, np.round(idx), atol=1e-5)
    np.testing.assert_array_equal(quantize_saliency(q, N).values, q.values)


def test_rescale_examples():
    s = SaliencyMap(np.array([[0.7, 0.5, 0.0]]))
    np.testing.assert_array_equal(rescale_saliency(s, 1.0).values, s.values)
    assert rescale_saliency(s, 2.0).values[0, 0] == 1.0
    assert rescale_saliency(s, 0.83).values[0, 1] == pytest.approx(0.415, abs=1e-7)


def test_rescale_requantizes():
    s = SaliencyMap(np.array([[0.5, 1.0]]), levels=5)
    out = rescale_saliency(s, 0.83)
    assert out.levels == 5
    np.testing.assert_array_equal(out.values, [[0.5, 0.75]])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(0, 1)), st.floats(-3, 3), st.floats(-3, 3))
def test_rescale_monotone_in_lambda(v, a, b):
    lo, hi = sorted((a, b))
    s = SaliencyMap(v)
    assert np.all(rescale_saliency(s, lo).values <= rescale_saliency(s, hi).values)


def test_synth_patterns():
    ramp = synth_features("ramp", 3, 4, 6)
    assert np.all(np.diff(feature_norm_map(ramp.layers[0]), axis=1) > 0)
    a = synth_features("blobs", 11, 8, 8)
    b = synth_features("blobs", 11, 8, 8)
    for x, y in zip(a.layers, b.layers):
        assert x.tobytes() == y.tobytes()
    one = synth_features("blobs", 5, 9, 9, n_blobs=1)
    nm = feature_norm_map(one.layers[0])
    assert np.unravel_index(np.argmax(nm), nm.shape) == one.meta["centers"][0]
    with pytest.raises(ValidationError):
        synth_features("stripes", 0, 4, 4)
