"""Top-K graph pooling with sigmoid score gates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .config import pooled_count
from .errors import CapacityError, ContractError, ShapeError
from .gnn import TagConvLayer, propagate
from .patch_graph import normalize_adjacency


class PoolingLayer:
    def __init__(self, dim, out_dim, hops, keep_ratio, rng, normalize_scores=False,
                 name="pool"):
        if not 0.0 < keep_ratio <= 1.0:
            raise ContractError(f"keep_ratio must lie in (0, 1], got {keep_ratio}")
        self.keep_ratio = keep_ratio
        self.normalize_scores = normalize_scores
        self.pool_vector = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(dim), dim),
                                     requires_grad=True, name=f"{name}.p")
        self.pooled_conv = TagConvLayer(dim, out_dim, hops, rng, name=f"{name}.gnn")

    def parameters(self):
        return [self.pool_vector] + self.pooled_conv.parameters()

    def keep_count(self, n):
        k = pooled_count(n, self.keep_ratio)
        if k < 2:
            raise ContractError(f"pooling {n} nodes at ratio {self.keep_ratio} keeps {k} < 2")
        return k


@dataclass
class PooledGraph:
    selected: np.ndarray          # K indices, descending score
    scores: ad.Tensor             # N raw scores
    adjacency: np.ndarray         # K x K induced submatrix
    norm_adjacency: np.ndarray
    gated_input_nodes: ad.Tensor
    gated_output_nodes: ad.Tensor


def score_nodes(p, z, normalize=False):
    """``s_i = p . z_i`` (optionally with ``p`` scaled to unit length)."""
    d = p.shape[0]
    if z.ndim != 2 or z.shape[1] != d:
        raise ShapeError(f"pool vector of length {d} against nodes {z.shape}")
    col = ad.reshape(p, (1, d))
    if normalize:
        col = ad.row_normalize(col)
    return ad.reshape(ad.matmul(z, ad.transpose(col)), (z.shape[0],))


def top_k_select(scores, k):
    """Indices of the ``k`` largest scores; equal scores keep the lower index first."""
    s = scores.data if isinstance(scores, ad.Tensor) else np.asarray(scores, float)
    if k > s.shape[0]:
        raise CapacityError(f"cannot select {k} of {s.shape[0]} nodes")
    return np.argsort(-s, kind="stable")[:k]


def pool_graph_pair(layer, adjacency, z, v, selected=None):
    """Select from ``z``'s scores, gate both branches by the same ``sigmoid(S)``."""
    if z.shape != v.shape:
        raise ShapeError(f"pooled branches differ: {z.shape} vs {v.shape}")
    if adjacency.shape != (z.shape[0], z.shape[0]):
        raise ShapeError(f"adjacency {adjacency.shape} for {z.shape[0]} nodes")
    scores = score_nodes(layer.pool_vector, z, layer.normalize_scores)
    if selected is None:
        selected = top_k_select(scores, layer.keep_count(z.shape[0]))
    gate = ad.take_rows(ad.sigmoid(scores), selected)
    z_in = ad.scale_rows(ad.take_rows(z, selected), gate)
    v_in = ad.scale_rows(ad.take_rows(v, selected), gate)
    sub = adjacency[np.ix_(selected, selected)]
    return PooledGraph(selected, scores, sub, normalize_adjacency(sub), z_in, v_in)


def pooled_features(layer, pooled):
    """Hop propagation on the pooled graph with the layer's own weights."""
    zp = propagate(layer.pooled_conv, pooled.norm_adjacency, pooled.gated_input_nodes)
    vp = propagate(layer.pooled_conv, pooled.norm_adjacency, pooled.gated_output_nodes)
    return zp, vp


def attention_maps(p, z, v, normalize=False):
    """``sigmoid(p . z_i)`` and ``sigmoid(p . v_i)`` for every node."""
    return (ad.sigmoid(score_nodes(p, z, normalize)),
            ad.sigmoid(score_nodes(p, v, normalize)))
