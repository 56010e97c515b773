"""Contrastive graph objectives, least-squares adversarial terms and the generator total."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractError, ShapeError
from .gnn import node_features_pair
from .patch_graph import build_graph_pair
from .pooling import pool_graph_pair, pooled_features


@dataclass
class LossConfig:
    lambda_g: float = 1.0
    temperature: float = 0.07
    pooling_levels: int = 1
    normalize_embeddings: bool = True
    threshold: float = 0.1
    num_patches: int = 256

    def __post_init__(self):
        if not self.temperature > 0:
            raise ContractError("temperature must be positive")
        if self.pooling_levels < 0:
            raise ContractError("pooling_levels must be non-negative")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.lambda_g, cfg.temperature, cfg.pooling_levels,
                   cfg.normalize_embeddings, cfg.threshold, cfg.num_patches)


def nce_from_logits(logits):
    """Mean of ``logsumexp(row_i) - logits[i, i]``: cross-entropy with diagonal targets."""
    return ad.mean(ad.sub(ad.logsumexp_rows(logits), ad.diagonal(logits)))


def info_nce(z, v, temperature, normalize=True):
    """infoNCE where row ``i`` of ``v`` is the positive for row ``i`` of ``z``."""
    if z.shape != v.shape or z.ndim != 2:
        raise ShapeError(f"info_nce: embeddings {z.shape} and {v.shape} must match")
    if z.shape[0] < 2:
        raise ContractError("info_nce needs at least two rows (one negative)")
    if normalize:
        z, v = ad.row_normalize(z), ad.row_normalize(v)
    logits = ad.scale(ad.matmul(z, ad.transpose(v)), 1.0 / temperature)
    return nce_from_logits(logits)


@dataclass
class GraphLoss:
    total: ad.Tensor
    levels: list          # per pooling level, averaged over encoder layers
    graphs: list = field(default_factory=list, repr=False)


def _layer_loss(branch, layer_id, src, out, cfg, rng, memo):
    key = ("layer", layer_id)
    pinned = memo.get(key) if memo is not None else None
    g_i, g_o = build_graph_pair(
        src, out, branch.head, cfg.threshold, cfg.num_patches, rng, layer_id,
        indices=None if pinned is None else pinned[0],
        adjacency=None if pinned is None else pinned[1])
    if memo is not None and pinned is None:
        memo[key] = (g_i.patches.indices, g_i.adjacency)
    z, v = node_features_pair(branch.gnn, g_i.norm_adjacency, g_i.nodes, g_o.nodes)
    terms = [info_nce(z, v, cfg.temperature, cfg.normalize_embeddings)]
    adjacency = g_i.adjacency
    for level in range(cfg.pooling_levels):
        pkey = ("pool", layer_id, level)
        selected = memo.get(pkey) if memo is not None else None
        pooled = pool_graph_pair(branch.pools[level], adjacency, z, v, selected)
        if memo is not None and selected is None:
            memo[pkey] = pooled.selected
        z, v = pooled_features(branch.pools[level], pooled)
        adjacency = pooled.adjacency
        terms.append(info_nce(z, v, cfg.temperature, cfg.normalize_embeddings))
    return terms, (g_i, g_o)


def graph_loss(src_maps, out_maps, branches, cfg, rng=None, memo=None):
    """Sum over pooling levels of the node infoNCE, averaged over encoder layers.

    ``memo`` (a dict) pins patch positions, adjacency and top-K selections on
    first use so repeated evaluations see the same discrete structure.
    """
    if not (len(src_maps) == len(out_maps) == len(branches)):
        raise ContractError("need one branch per encoder tap")
    per_layer, graphs = [], []
    for layer_id, (src, out, branch) in enumerate(zip(src_maps, out_maps, branches)):
        terms, pair = _layer_loss(branch, layer_id, src, out, cfg, rng, memo)
        per_layer.append(terms)
        graphs.append(pair)
    weight = 1.0 / len(per_layer)
    levels = []
    for level in range(cfg.pooling_levels + 1):
        acc = per_layer[0][level]
        for terms in per_layer[1:]:
            acc = ad.add(acc, terms[level])
        levels.append(ad.scale(acc, weight))
    total = levels[0]
    for term in levels[1:]:
        total = ad.add(total, term)
    return GraphLoss(total, levels, graphs)


def lsgan_d(d_real, d_fake):
    """``mean((D(real) - 1)^2) + mean(D(fake)^2)``."""
    if d_real.shape != d_fake.shape:
        raise ShapeError(f"lsgan_d: {d_real.shape} vs {d_fake.shape}")
    real = ad.add_scalar(d_real, -1.0)
    return ad.add(ad.mean(ad.mul(real, real)), ad.mean(ad.mul(d_fake, d_fake)))


def lsgan_g(d_fake):
    gap = ad.add_scalar(d_fake, -1.0)
    return ad.mean(ad.mul(gap, gap))


@dataclass
class GeneratorLoss:
    total: ad.Tensor
    gan: ad.Tensor
    graph: GraphLoss
    identity: GraphLoss
    fake: ad.Tensor


def total_generator_loss(x, y, model, cfg, rng=None, memo=None, fake=None):
    """Adversarial term on ``G(x)`` plus weighted graph losses for ``(x, G(x))`` and ``(y, G(y))``.

    ``fake`` lets the caller reuse an already traced ``G(x)``.
    """
    if fake is None:
        fake = model.generator(x)
    gan = lsgan_g(model.discriminator(fake))
    graph = graph_loss(model.encoder.taps(x), model.encoder.taps(fake), model.branches,
                       cfg, rng, None if memo is None else memo.setdefault("x", {}))
    identity = graph_loss(model.encoder.taps(y), model.encoder.taps(model.generator(y)),
                          model.branches, cfg, rng,
                          None if memo is None else memo.setdefault("y", {}))
    total = ad.add(gan, ad.scale(ad.add(graph.total, identity.total), cfg.lambda_g))
    return GeneratorLoss(total, gan, graph, identity, fake)


def positional_cosine_gap(src_maps, out_maps):
    """Mean matched-position cosine minus mean mismatched-position cosine, per tap average.

    Probe of patch correspondence between two images' feature maps.
    """
    gaps = []
    for src, out in zip(src_maps, out_maps):
        a = np.asarray(src.data if isinstance(src, ad.Tensor) else src)
        b = np.asarray(out.data if isinstance(out, ad.Tensor) else out)
        c = a.shape[0]
        fa = a.reshape(c, -1).T
        fb = b.reshape(c, -1).T
        na = np.linalg.norm(fa, axis=1)
        nb = np.linalg.norm(fb, axis=1)
        na[na == 0] = 1.0
        nb[nb == 0] = 1.0
        cos = (fa / na[:, None]) @ (fb / nb[:, None]).T
        n = cos.shape[0]
        matched = np.trace(cos) / n
        mismatched = (cos.sum() - np.trace(cos)) / (n * (n - 1))
        gaps.append(matched - mismatched)
    return float(np.mean(gaps))
