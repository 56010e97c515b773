import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import chisquare

from patchgraph import autodiff as ad
from patchgraph.errors import BoundsError, CapacityError, ContractError
from patchgraph.patch_graph import (ProjectionHead, build_adjacency, build_graph_pair,
                                    normalize_adjacency, sample_patches, sample_patches_at)


def fmap(rng, c=5, h=6, w=7):
    return ad.Tensor(rng.normal(size=(c, h, w)))


# --- sampling -----------------------------------------------------------------------

def test_exhaustive_sample_is_a_permutation(rng):
    m = fmap(rng)
    ps = sample_patches(m, 42, 3)
    assert sorted(ps.indices) == list(range(42))
    flat = m.data.reshape(5, -1).T
    np.testing.assert_array_equal(ps.features.data, flat[ps.indices])


def test_fixed_seed_repeats(rng):
    m = fmap(rng)
    np.testing.assert_array_equal(sample_patches(m, 10, 7).indices, sample_patches(m, 10, 7).indices)


def test_capacity_error(rng):
    with pytest.raises(CapacityError):
        sample_patches(fmap(rng), 43, 0)


def test_sample_at_reproduces_sampled_features(rng):
    m = fmap(rng)
    ps = sample_patches(m, 12, 1)
    np.testing.assert_array_equal(sample_patches_at(m, ps.indices).features.data, ps.features.data)


def test_sample_at_top_left(rng):
    m = fmap(rng)
    np.testing.assert_array_equal(sample_patches_at(m, [0]).features.data, m.data[:, 0, 0][None])


def test_sample_at_out_of_range(rng):
    with pytest.raises(BoundsError):
        sample_patches_at(fmap(rng), [42])
    with pytest.raises(BoundsError):
        sample_patches_at(fmap(rng), [-1])


def test_positions_match_grid(rng):
    m = fmap(rng)
    ps = sample_patches(m, 9, 2)
    for (r, c), row in zip(ps.positions(), ps.features.data):
        np.testing.assert_array_equal(row, m.data[:, r, c])


def test_sampling_is_uniform_chi_square():
    m = ad.Tensor(np.zeros((1, 64, 64)))
    counts = np.zeros(64 * 64)
    for seed in range(10_000):
        idx = sample_patches(m, 256, seed).indices
        assert len(np.unique(idx)) == 256
        counts[idx] += 1
    assert chisquare(counts).pvalue > 0.001


# --- adjacency ----------------------------------------------------------------------

def test_identical_rows_fully_connected():
    a = build_adjacency(np.tile([[0.3, -1.0, 2.0]], (4, 1)), 0.1)
    np.testing.assert_array_equal(a, np.ones((4, 4)))


def test_orthogonal_rows_identity():
    np.testing.assert_array_equal(build_adjacency(np.eye(5) * 3, 0.1), np.eye(5))


def test_hand_cosines():
    rows = np.array([[1, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)], [0, 1]])
    np.testing.assert_array_equal(build_adjacency(rows, 0.5), [[1, 1, 0], [1, 1, 1], [0, 1, 1]])


def test_zero_row_isolated_even_for_negative_threshold():
    rows = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    a = build_adjacency(rows, -1.0)
    np.testing.assert_array_equal(a, [[1, 0, 1], [0, 1, 0], [1, 0, 1]])


features = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 6)),
                  elements=st.floats(-10, 10, allow_nan=False, width=64))


@settings(max_examples=100, deadline=None)
@given(features, st.floats(-1, 1))
def test_symmetric_binary_unit_diagonal(x, t):
    a = build_adjacency(x, t)
    assert np.array_equal(a, a.T)
    assert set(np.unique(a)) <= {0.0, 1.0}
    assert np.all(np.diag(a) == 1)


@settings(max_examples=100, deadline=None)
@given(features, st.floats(-1, 1), st.floats(-1, 1))
def test_threshold_monotone(x, t1, t2):
    lo, hi = sorted((t1, t2))
    assert np.all(build_adjacency(x, hi) <= build_adjacency(x, lo))


def test_normalize_identity_and_complete():
    np.testing.assert_array_equal(normalize_adjacency(np.eye(4)), np.eye(4))
    np.testing.assert_allclose(normalize_adjacency(np.ones((5, 5))), np.full((5, 5), 0.2), rtol=1e-15)


def test_normalize_path_entrywise():
    a = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], float)
    deg = [2, 3, 2]
    expected = [[a[i, j] / np.sqrt(deg[i] * deg[j]) for j in range(3)] for i in range(3)]
    np.testing.assert_allclose(normalize_adjacency(a), expected, rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(features, st.floats(-1, 1))
def test_normalized_spectral_radius(x, t):
    n = normalize_adjacency(build_adjacency(x, t))
    assert np.allclose(n, n.T)
    assert np.abs(np.linalg.eigvalsh(n)).max() <= 1 + 1e-12


# --- graph pair ---------------------------------------------------------------------

def make_head(c=5, out=4, seed=0):
    return ProjectionHead(c, out, np.random.default_rng(seed))


def test_pair_same_map_same_nodes(rng):
    m = fmap(rng)
    g_i, g_o = build_graph_pair(m, m, make_head(), 0.1, 16, rng=3)
    np.testing.assert_array_equal(g_i.nodes.data, g_o.nodes.data)


def test_pair_shares_adjacency(rng):
    g_i, g_o = build_graph_pair(fmap(rng), fmap(rng), make_head(), 0.1, 16, rng=3)
    assert g_o.adjacency is g_i.adjacency
    np.testing.assert_array_equal(g_o.patches.indices, g_i.patches.indices)


def test_pair_shape_mismatch(rng):
    with pytest.raises(ContractError):
        build_graph_pair(fmap(rng), fmap(rng, h=5), make_head(), 0.1, 4, rng=0)


def test_perturbing_output_leaves_adjacency(rng):
    src, out = fmap(rng), fmap(rng)
    head = make_head()
    g_i, g_o = build_graph_pair(src, out, head, 0.1, 20, rng=4)
    bumped = ad.Tensor(out.data + rng.normal(size=out.shape))
    g_i2, g_o2 = build_graph_pair(src, bumped, head, 0.1, 20, rng=4)
    np.testing.assert_array_equal(g_i.adjacency, g_i2.adjacency)
    assert not np.allclose(g_o.nodes.data, g_o2.nodes.data)


def test_positional_pairing(rng):
    src, out = fmap(rng), fmap(rng)
    _, g_o = build_graph_pair(src, out, make_head(), 0.1, 10, rng=5)
    for k, (r, c) in enumerate(g_o.patches.positions()):
        np.testing.assert_array_equal(g_o.patches.features.data[k], out.data[:, r, c])


def test_no_gradient_through_adjacency(rng):
    """The loss sees the source only via A: its gradient must be exactly zero."""
    for trial in range(100):
        r = np.random.default_rng(trial)
        src = ad.Tensor(r.normal(size=(4, 5, 5)), requires_grad=True)
        out = ad.Tensor(r.normal(size=(4, 5, 5)), requires_grad=True)
        head = make_head(4, 3, trial)
        _, g_o = build_graph_pair(src, out, head, [0.0, 0.1, 0.4, 0.6][trial % 4], 12, rng=trial)
        ad.sum(ad.matmul(ad.Tensor(g_o.norm_adjacency), g_o.nodes)).backward()
        assert src.grad is None or not np.any(src.grad)
        assert out.grad is not None and np.any(out.grad)
