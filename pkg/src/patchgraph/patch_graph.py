"""Patch sampling and the input/output graph pair with one shared adjacency."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import BoundsError, CapacityError, ContractError, ShapeError


@dataclass
class PatchSet:
    features: ad.Tensor      # N x c
    indices: np.ndarray      # flat positions into the h x w grid
    grid: tuple
    layer_id: int = 0

    def __len__(self):
        return len(self.indices)

    def positions(self):
        """(row, col) grid coordinates of every sampled patch."""
        h, w = self.grid
        return np.stack(np.divmod(self.indices, w), axis=1)


@dataclass
class PatchGraph:
    adjacency: np.ndarray        # binary, symmetric, unit diagonal
    norm_adjacency: np.ndarray
    nodes: ad.Tensor
    threshold: float
    patches: PatchSet = None


class ProjectionHead:
    """Two affine maps with a rectifier between them (c -> c' -> c')."""

    def __init__(self, in_dim, out_dim, rng, name="head"):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w1 = ad.Tensor(rng.normal(0.0, np.sqrt(2.0 / in_dim), (in_dim, out_dim)),
                            requires_grad=True, name=f"{name}.w1")
        self.b1 = ad.Tensor(np.zeros(out_dim), requires_grad=True, name=f"{name}.b1")
        self.w2 = ad.Tensor(rng.normal(0.0, np.sqrt(1.0 / out_dim), (out_dim, out_dim)),
                            requires_grad=True, name=f"{name}.w2")
        self.b2 = ad.Tensor(np.zeros(out_dim), requires_grad=True, name=f"{name}.b2")

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, x):
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"head expects {self.in_dim} input channels, got {x.shape[1]}")
        return ad.linear(ad.relu(ad.linear(x, self.w1, self.b1)), self.w2, self.b2)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_patches(feature_map, count, rng_seed=None, layer_id=0):
    """Draw ``count`` distinct grid positions uniformly and gather their channel vectors."""
    _, h, w = feature_map.shape
    if count > h * w:
        raise CapacityError(f"cannot sample {count} patches from a {h}x{w} grid")
    indices = _rng(rng_seed).choice(h * w, size=count, replace=False)
    return sample_patches_at(feature_map, indices, layer_id=layer_id)


def sample_patches_at(feature_map, indices, layer_id=0):
    feature_map = ad._as_tensor(feature_map)
    c, h, w = feature_map.shape
    indices = np.asarray(indices, dtype=np.intp)
    if indices.ndim != 1:
        raise ShapeError("patch indices must be a flat list")
    if indices.size and (indices.min() < 0 or indices.max() >= h * w):
        raise BoundsError(f"patch index out of range for a {h}x{w} grid")
    flat = ad.transpose(ad.reshape(feature_map, (c, h * w)))
    return PatchSet(ad.take_rows(flat, indices), indices, (h, w), layer_id)


def cosine_matrix(x):
    """Pairwise cosine similarity; rows of zero norm get cosine 0 off the diagonal."""
    norms = np.sqrt((x * x).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe[:, None]
    cos = unit @ unit.T
    cos[norms == 0, :] = 0.0
    cos[:, norms == 0] = 0.0
    return cos


def build_adjacency(projected, t):
    """Binary ``A_ij = [cos(f_i, f_j) >= t]``; a constant, never on the trace."""
    x = projected.data if isinstance(projected, ad.Tensor) else np.asarray(projected, float)
    live = (x * x).sum(axis=1) > 0
    # zero-norm patches stay isolated even when t <= 0
    upper = np.triu((cosine_matrix(x) >= t) & live[:, None] & live[None, :], k=1)
    a = (upper | upper.T).astype(np.float64)
    np.fill_diagonal(a, 1.0)
    return a


def normalize_adjacency(a):
    """``D^-1/2 A D^-1/2`` for a binary adjacency with self-loops."""
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def build_graph_pair(input_map, output_map, head, threshold, num_patches, rng=None,
                     layer_id=0, indices=None, adjacency=None):
    """Graphs ``g_i`` and ``g_o`` over the same sampled positions.

    Both feature sets go through the same ``head``; the adjacency comes from
    the projected input features only and is handed unchanged to ``g_o``.
    ``indices`` / ``adjacency`` pin the sampling and topology (used when the
    same instance must be evaluated repeatedly, e.g. finite differences).
    """
    if input_map.shape != output_map.shape:
        raise ContractError(
            f"input map {input_map.shape} and output map {output_map.shape} differ")
    if indices is None:
        patches_in = sample_patches(input_map, num_patches, rng, layer_id)
    else:
        patches_in = sample_patches_at(input_map, indices, layer_id)
    patches_out = sample_patches_at(output_map, patches_in.indices, layer_id)
    f_in = head(patches_in.features)
    f_out = head(patches_out.features)
    if adjacency is None:
        adjacency = build_adjacency(f_in, threshold)
    norm = normalize_adjacency(adjacency)
    g_i = PatchGraph(adjacency, norm, f_in, threshold, patches_in)
    g_o = PatchGraph(adjacency, norm, f_out, threshold, patches_out)
    return g_i, g_o
