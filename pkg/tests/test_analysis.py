import numpy as np
import pytest
from _helpers import tiny_pcnn_spec

from persiland import InvalidInputError
from persiland.analysis import (
    activity_surrogate,
    branch_weight_summary,
    clip_landscape_means,
    landscape_activity_correlation,
    tag_landscape_ranking,
)
from persiland.data import Clip, Dataset, generate_synthetic
from persiland.network import ConvLayerSpec, Network, NetworkSpec, PersistenceLayerSpec
from persiland.landscape import LandscapeSpec


def pnn(input_channels=1, U=2, T=32, P=5, Q=10):
    spec = NetworkSpec(
        input_channels=input_channels, num_tags=3, branch="pnn", early=[ConvLayerSpec(U, 1, 1)],
        middle=None, persistence=PersistenceLayerSpec(LandscapeSpec(0, 5, P, Q), T),
        late=[ConvLayerSpec(4, 1, 1), ConvLayerSpec(3, 1, 1)],
    )
    return Network.initialize(spec, 0)


def identity_pnn(T=256):
    net = pnn(U=1, T=T)
    net.params["early0.weight"][:] = 1.0
    return net


def test_activity_surrogate():
    x = np.array([[0.0, 1.0, 0.0, 2.0], [0.0, 1.0, 1.0, 1.0]])  # channel sum 0, 2, 1, 3
    assert activity_surrogate(x) == pytest.approx((2 + 0 + 2) / 3)
    assert activity_surrogate(np.ones((2, 1))) == 0.0


def test_clip_means_average_over_grid_segments_filters():
    net = identity_pnn(T=4)
    x = np.array([[0.0, 2.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0]])
    means = clip_landscape_means(net, x)
    _, _, pers, _ = net.forward_mid(x[None])
    np.testing.assert_allclose(means, pers[0].reshape(5, 10, 2).mean(axis=(1, 2)))
    assert means[0] > 0 and not means[1:].any()


def test_correlation_uses_peak_counts_on_synthetic_data():
    ds = generate_synthetic(num_clips=60, noise_std=0.0, rng_seed=0)
    out = landscape_activity_correlation(identity_pnn(), ds)
    assert out["activity_source"] == "peak_count"
    assert len(out["coefficients"]) == 5
    np.testing.assert_array_equal(out["activity"], [c.peak_count for c in ds.clips])
    # lambda_k is non-zero only once a clip holds k bumps, so every piece correlates positively
    assert all(r is not None and r > 0 for r in out["coefficients"])


def test_correlation_invariant_to_affine_activity():
    ds = generate_synthetic(num_clips=40, rng_seed=1)
    net = pnn()
    base = landscape_activity_correlation(net, ds)["coefficients"]
    for c in ds.clips:
        c.peak_count = 3 * c.peak_count + 11
    scaled = landscape_activity_correlation(net, ds)["coefficients"]
    for a, b in zip(base, scaled):
        assert (a is None and b is None) or a == pytest.approx(b, abs=1e-12)


def test_surrogate_used_without_peak_counts():
    ds = generate_synthetic(num_clips=20, rng_seed=2)
    for c in ds.clips:
        c.peak_count = None
    out = landscape_activity_correlation(pnn(), ds)
    assert out["activity_source"] == "mean_positive_difference"
    np.testing.assert_allclose(out["activity"], [activity_surrogate(c.features) for c in ds.clips])


def test_constant_dataset_is_undefined_everywhere():
    clips = [Clip(np.full((1, 64), 1.5), np.array([1, 0, 0]), f"c{i}") for i in range(5)]
    out = landscape_activity_correlation(pnn(), Dataset(clips, ["a", "b", "c"]))
    assert out["coefficients"] == [None] * 5
    assert out["undefined"] == [1, 2, 3, 4, 5]


def test_correlation_needs_two_clips_and_persistence():
    ds = generate_synthetic(num_clips=1, rng_seed=0, split_sizes=(1, 0, 0))
    with pytest.raises(InvalidInputError):
        landscape_activity_correlation(pnn(), ds)
    cnn = Network.initialize(tiny_pcnn_spec("cnn"), 0)
    with pytest.raises(InvalidInputError):
        branch_weight_summary(cnn)


def test_weight_summary_constant_and_zero_weights():
    net = Network.initialize(tiny_pcnn_spec(), 0)
    net.params["late0.weight"][:] = 1.0
    np.testing.assert_array_equal(branch_weight_summary(net), [1.0, 1.0])
    net.params["late0.weight"][:] = 0.0
    np.testing.assert_array_equal(branch_weight_summary(net), [0.0, 0.0])


def test_weight_summary_groups_by_piece():
    net = Network.initialize(tiny_pcnn_spec(), 0)  # U=2, P=2, Q=4, middle=2 channels first
    W = net.params["late0.weight"]
    W[:] = 0.0
    W[:, 2 + 0 * 8 + 0 * 4 : 2 + 0 * 8 + 1 * 4] = -2.0  # filter 0, piece 1
    W[:, 2 + 1 * 8 + 1 * 4 : 2 + 1 * 8 + 2 * 4] = 4.0  # filter 1, piece 2
    W[:, :2] = 100.0  # middle-branch weights are ignored
    np.testing.assert_allclose(branch_weight_summary(net), [1.0, 2.0])


def test_weight_summary_invariant_to_sample_permutation():
    net = Network.initialize(tiny_pcnn_spec(), 3)
    before = branch_weight_summary(net)
    W = net.params["late0.weight"]
    pers = W[:, 2:].reshape(W.shape[0], 2, 2, 4, 1)
    W[:, 2:] = pers[:, :, :, ::-1].reshape(W.shape[0], -1, 1)
    np.testing.assert_allclose(branch_weight_summary(net), before, atol=1e-15)


def test_tag_ranking():
    ds = generate_synthetic(num_clips=50, noise_std=0.0, rng_seed=3)
    means = np.stack([clip_landscape_means(identity_pnn(), c.features) for c in ds.clips])
    ranking = tag_landscape_ranking(means, ds, 5)
    assert [t for t, _ in ranking][0] == "peaks_ge_5"
    values = [v for _, v in ranking]
    assert values == sorted(values, reverse=True)
