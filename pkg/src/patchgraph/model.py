"""All networks and graph parameters of one translation model."""
from __future__ import annotations

import numpy as np

from .gnn import TagConvLayer
from .networks import Discriminator, Encoder, Generator
from .patch_graph import ProjectionHead
from .pooling import PoolingLayer


class GraphBranch:
    """Head, graph convolution and pooling stack attached to one encoder tap."""

    def __init__(self, in_dim, cfg, rng, layer_id):
        self.layer_id = layer_id
        self.head = ProjectionHead(in_dim, cfg.head_dim, rng, name="h")
        self.gnn = TagConvLayer(cfg.head_dim, cfg.embed_dim, cfg.hops, rng, name="gnn")
        self.pools = [PoolingLayer(cfg.embed_dim, cfg.embed_dim, cfg.hops, cfg.keep_ratio, rng,
                                   cfg.normalize_scores, name=f"pool{level}")
                      for level in range(cfg.pooling_levels)]

    def parameters(self):
        params = self.head.parameters() + self.gnn.parameters()
        for pool in self.pools:
            params += pool.parameters()
        return params

    def named_parameters(self):
        return {f"B{self.layer_id}.{p.name}": p for p in self.parameters()}


def _stream(seed, key):
    return np.random.default_rng([seed, key])


class PatchGraphModel:
    def __init__(self, cfg):
        self.config = cfg
        seed = cfg.model_seed
        self.encoder = Encoder(cfg.image_channels, cfg.encoder_channels, _stream(seed, 0))
        self.generator = Generator(cfg.image_channels, cfg.generator_channels,
                                   cfg.generator_res_blocks, _stream(seed, 1))
        self.discriminator = Discriminator(cfg.image_channels, cfg.discriminator_channels,
                                           _stream(seed, 2))
        self.branches = [GraphBranch(c, cfg, _stream(seed, 10 + i), i)
                         for i, c in enumerate(cfg.encoder_channels)]

    def generator_side_parameters(self):
        params = self.generator.parameters()
        for branch in self.branches:
            params += branch.parameters()
        return params

    def discriminator_parameters(self):
        return self.discriminator.parameters()

    def named_parameters(self):
        named = {}
        named.update(self.encoder.named_parameters())
        named.update(self.generator.named_parameters())
        named.update(self.discriminator.named_parameters())
        for branch in self.branches:
            named.update(branch.named_parameters())
        return named

    def parameter_groups(self):
        """Trainable tensors keyed by role: G, D, h, W_l, W_pl, p."""
        groups = {"G": self.generator.parameters(), "D": self.discriminator.parameters(),
                  "h": [], "W_l": [], "W_pl": [], "p": []}
        for branch in self.branches:
            groups["h"] += branch.head.parameters()
            groups["W_l"] += branch.gnn.parameters()
            for pool in branch.pools:
                groups["p"].append(pool.pool_vector)
                groups["W_pl"] += pool.pooled_conv.parameters()
        return groups

    def state_dict(self):
        return {name: t.data.copy() for name, t in self.named_parameters().items()}

    def load_state_dict(self, state):
        from .checkpoint import check_state

        named = self.named_parameters()
        check_state(named, state)
        for name, t in named.items():
            t.data = np.array(state[name], dtype=np.float64)

    def zero_grad(self):
        for t in self.named_parameters().values():
            t.grad = None
