"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import toy_config
from .data import SyntheticDomainPair
from .losses import LossConfig, lsgan_d, total_generator_loss
from .model import PatchGraphModel


def numeric_grad(f, t, entries, eps=1e-6):
    """Central differences of scalar ``f()`` w.r.t. flat ``entries`` of ``t.data``."""
    flat = t.data.reshape(-1)
    out = np.empty(len(entries))
    for n, i in enumerate(entries):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        out[n] = (up - down) / (2 * eps)
    return out


def relative_error(analytic, numeric):
    """``|a - n| / max(|a|, |n|)`` in the Euclidean norm; 0 when both vanish."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - n) / scale)


def check_tensor(f, t, entries=None, eps=1e-6):
    """Analytic vs numeric gradient of ``f`` for one tensor; returns relative error.

    ``f`` builds a fresh trace and returns the scalar loss tensor.
    """
    t.grad = None
    f().backward()
    analytic = np.zeros(t.size) if t.grad is None else t.grad.reshape(-1).copy()
    if entries is None:
        entries = np.arange(t.size)
    numeric = numeric_grad(lambda: f().item(), t, entries, eps)
    t.grad = None
    return relative_error(analytic[entries], numeric)


def _losses(model, cfg, x, y, memo):
    loss_cfg = LossConfig.from_config(cfg)
    rng = np.random.default_rng([cfg.model_seed, 99])

    def generator_loss():
        return total_generator_loss(x, y, model, loss_cfg, rng, memo).total

    def discriminator_loss():
        fake = model.generator(x).detach()
        return lsgan_d(model.discriminator(y), model.discriminator(fake))

    return generator_loss, discriminator_loss


def run_gradcheck(cfg, eps=1e-6, samples=6, seed=0):
    """Worst relative gradient error per parameter group on a 16x16 toy instance.

    Patch positions, adjacency and top-K selections are pinned after the
    first evaluation so every perturbed evaluation sees the same topology,
    which is exactly the function whose gradient backprop computes.
    """
    toy = toy_config(cfg)
    model = PatchGraphModel(toy)
    data = SyntheticDomainPair(toy.image_size, toy.data_seed)
    x, y = ad.Tensor(data.x(0)), ad.Tensor(data.y(0))
    memo = {}
    gen_loss, disc_loss = _losses(model, toy, x, y, memo)
    gen_loss()  # fills memo
    pick = np.random.default_rng(seed)
    report = {}
    for group, tensors in model.parameter_groups().items():
        f = disc_loss if group == "D" else gen_loss
        worst = 0.0
        for t in tensors:
            entries = pick.choice(t.size, size=min(samples, t.size), replace=False)
            worst = max(worst, check_tensor(f, t, entries, eps))
            model.zero_grad()
        report[group] = worst
    return report
