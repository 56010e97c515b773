"""Inspection of a trained model: pooled attention maps and adjacency spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .gnn import node_features_pair
from .patch_graph import build_adjacency, build_graph_pair, sample_patches
from .pooling import attention_maps
from .spectral import eigendecompose, laplacian


@dataclass
class AttentionMaps:
    layer: int
    indices: np.ndarray
    grid: tuple
    attn_in: np.ndarray      # sigmoid(p . z_i)
    attn_out: np.ndarray     # sigmoid(p . v_i)


def image_attention(model, image, seed=0, indices=None, translated=None):
    """Level-1 pooling attention on the input graph and the translated graph, per tap.

    ``indices`` (one array per tap) fixes the patch positions, e.g. to
    compare maps of different images at the same locations.
    """
    cfg = model.config
    if not cfg.pooling_levels:
        raise ValueError("model has no pooling layer")
    x = ad.Tensor(image)
    gx = model.generator(x) if translated is None else ad.Tensor(translated)
    rng = np.random.default_rng(seed)
    maps = []
    for layer, (src, out, branch) in enumerate(
            zip(model.encoder.taps(x), model.encoder.taps(gx), model.branches)):
        g_i, g_o = build_graph_pair(src, out, branch.head, cfg.threshold, cfg.num_patches, rng,
                                    layer, indices=None if indices is None else indices[layer])
        z, v = node_features_pair(branch.gnn, g_i.norm_adjacency, g_i.nodes, g_o.nodes)
        s_in, s_out = attention_maps(branch.pools[0].pool_vector, z, v,
                                     branch.pools[0].normalize_scores)
        maps.append(AttentionMaps(layer, g_i.patches.indices, g_i.patches.grid,
                                  s_in.data.copy(), s_out.data.copy()))
    return maps


@dataclass
class GraphSpectrum:
    indices: np.ndarray
    grid: tuple
    adjacency: np.ndarray
    laplacian: np.ndarray
    result: object


def image_spectrum(model, image, layer=0, threshold=None, seed=0):
    """Laplacian eigenpairs of the adjacency built at one encoder tap."""
    cfg = model.config
    threshold = cfg.threshold if threshold is None else threshold
    fmap = model.encoder.taps(ad.Tensor(image))[layer]
    patches = sample_patches(fmap, cfg.num_patches, np.random.default_rng(seed), layer)
    projected = model.branches[layer].head(patches.features)
    a = build_adjacency(projected, threshold)
    lap = laplacian(a)
    return GraphSpectrum(patches.indices, patches.grid, a, lap, eigendecompose(lap))


def pearson(a, b):
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    return 0.0 if denom == 0 else float((a * b).sum() / denom)
