"""Topology-adaptive graph convolution: ``sum_l (A_norm)^l X W_l``."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ContractError, ShapeError


class TagConvLayer:
    """One weight matrix per hop, shared by every graph the layer is applied to."""

    def __init__(self, in_dim, out_dim, hops, rng, name="gnn"):
        self.hops = hops
        std = np.sqrt(1.0 / (in_dim * (hops + 1)))
        self.hop_weights = [
            ad.Tensor(rng.normal(0.0, std, (in_dim, out_dim)), requires_grad=True,
                      name=f"{name}.w{l}")
            for l in range(hops + 1)
        ]

    @classmethod
    def from_weights(cls, weights):
        layer = cls.__new__(cls)
        layer.hop_weights = [w if isinstance(w, ad.Tensor) else ad.Tensor(w, requires_grad=True)
                             for w in weights]
        layer.hops = len(layer.hop_weights) - 1
        return layer

    def parameters(self):
        return list(self.hop_weights)


def propagate(layer, norm_adjacency, nodes):
    """Hop-sum by repeated multiplication ``H_{l+1} = A_norm H_l``; no matrix powers."""
    if len(layer.hop_weights) != layer.hops + 1:
        raise ContractError(
            f"{layer.hops} hops need {layer.hops + 1} weights, have {len(layer.hop_weights)}")
    shapes = {w.shape for w in layer.hop_weights}
    if len(shapes) != 1:
        raise ContractError(f"hop weights disagree in shape: {sorted(shapes)}")
    adj = norm_adjacency if isinstance(norm_adjacency, ad.Tensor) else ad.Tensor(norm_adjacency)
    n = nodes.shape[0]
    if adj.shape != (n, n):
        raise ShapeError(f"adjacency {adj.shape} does not match {n} nodes")
    h = nodes
    out = ad.matmul(h, layer.hop_weights[0])
    for w in layer.hop_weights[1:]:
        h = ad.matmul(adj, h)
        out = ad.add(out, ad.matmul(h, w))
    return out


def node_features_pair(layer, norm_adjacency, f_in, f_out):
    """``Z`` and ``V`` from one layer over one shared normalized adjacency."""
    if f_in.shape != f_out.shape:
        raise ShapeError(f"node sets differ in shape: {f_in.shape} vs {f_out.shape}")
    return propagate(layer, norm_adjacency, f_in), propagate(layer, norm_adjacency, f_out)
