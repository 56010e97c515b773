"""Patch-graph contrastive learning for unpaired image translation.

Built on a small reverse-mode autodiff engine (:mod:`patchgraph.autodiff`)
over float64 numpy arrays; hot loops live in :mod:`patchgraph.kernels`.
"""
from .autodiff import Tensor
from .config import TrainConfig, load_config, parse_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["Tensor", "TrainConfig", "load_config", "parse_config", "BACKEND", "__version__"]
