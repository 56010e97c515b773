"""Alternating discriminator / generator training on the synthetic domains."""
from __future__ import annotations

import csv
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import checkpoint
from .config import save_config
from .data import SyntheticDomainPair
from .errors import NumericalError
from .losses import LossConfig, lsgan_d, total_generator_loss
from .model import PatchGraphModel

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["step", "loss_gan_g", "loss_gan_d", "loss_gnn_p0", "loss_gnn_p1",
                  "loss_idt", "total"]


class Adam:
    def __init__(self, params, lr=2e-4, betas=(0.5, 0.999), eps=1e-8):
        ids = [id(p) for p in params]
        if len(set(ids)) != len(ids):
            raise ValueError("parameter listed twice")
        self.params = list(params)
        self.lr, (self.beta1, self.beta2), self.eps = lr, betas, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


@contextmanager
def frozen(params):
    """Temporarily take ``params`` off the trace."""
    saved = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, flag in zip(params, saved):
            p.requires_grad = flag


def _check_finite(step, **terms):
    for name, value in terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"non-finite {name} = {value!r} at step {step}")


@dataclass
class TrainResult:
    model: PatchGraphModel
    metrics: list = field(default_factory=list)
    checkpoint_path: Path = None


class Trainer:
    """Owns the model, both optimisers and the data/patch random streams."""

    def __init__(self, cfg):
        self.cfg = cfg.validate()
        self.model = PatchGraphModel(cfg)
        self.loss_cfg = LossConfig.from_config(cfg)
        self.data = SyntheticDomainPair(cfg.image_size, cfg.data_seed)
        self.patch_rng = np.random.default_rng([cfg.model_seed, 99])
        betas = (cfg.beta1, cfg.beta2)
        self.opt_g = Adam(self.model.generator_side_parameters(), cfg.lr, betas)
        self.opt_d = Adam(self.model.discriminator_parameters(), cfg.lr, betas)
        self.step_count = 0

    def _images(self, step):
        b = self.cfg.batch_size
        xs = [ad.Tensor(self.data.x(step * b + j)) for j in range(b)]
        ys = [ad.Tensor(self.data.y(step * b + j)) for j in range(b)]
        return xs, ys

    def discriminator_step(self, xs, fakes, ys):
        model = self.model
        loss = None
        with frozen(self.opt_g.params):
            for fake, y in zip(fakes, ys):
                term = lsgan_d(model.discriminator(y), model.discriminator(fake.detach()))
                loss = term if loss is None else ad.add(loss, term)
            loss = ad.scale(loss, 1.0 / len(ys))
            # backward inside the block: leaves unfrozen later would collect grads
            loss.backward()
        self.opt_d.step()
        self.opt_d.zero_grad()
        return loss.item()

    def generator_step(self, xs, fakes, ys):
        model, b = self.model, len(xs)
        parts = {"gan": 0.0, "p0": 0.0, "p1": 0.0, "idt": 0.0}
        total = None
        with frozen(self.opt_d.params):
            for x, y, fake in zip(xs, ys, fakes):
                out = total_generator_loss(x, y, model, self.loss_cfg, self.patch_rng, fake=fake)
                total = out.total if total is None else ad.add(total, out.total)
                parts["gan"] += out.gan.item() / b
                parts["p0"] += out.graph.levels[0].item() / b
                parts["p1"] += sum(t.item() for t in out.graph.levels[1:]) / b
                parts["idt"] += out.identity.total.item() / b
            total = ad.scale(total, 1.0 / b)
            total.backward()
        self.opt_g.step()
        self.opt_g.zero_grad()
        return total.item(), parts

    def step(self):
        step = self.step_count
        xs, ys = self._images(step)
        fakes = [self.model.generator(x) for x in xs]
        loss_d = self.discriminator_step(xs, fakes, ys)
        _check_finite(step, loss_gan_d=loss_d)
        total, parts = self.generator_step(xs, fakes, ys)
        _check_finite(step, loss_gan_g=parts["gan"], loss_gnn_p0=parts["p0"],
                      loss_gnn_p1=parts["p1"], loss_idt=parts["idt"], total=total)
        self.step_count += 1
        return {"step": step, "loss_gan_g": parts["gan"], "loss_gan_d": loss_d,
                "loss_gnn_p0": parts["p0"], "loss_gnn_p1": parts["p1"],
                "loss_idt": parts["idt"], "total": total}


def _fmt(value):
    return str(value) if isinstance(value, int) else f"{value:.17g}"


def train(cfg, out_dir=None, progress=None):
    """Run ``cfg.steps`` alternating updates; write metrics, config and checkpoint to ``out_dir``."""
    trainer = Trainer(cfg)
    out = Path(out_dir) if out_dir is not None else None
    writer = handle = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.txt")
        handle = open(out / "metrics.csv", "w", newline="")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
    metrics = []
    try:
        for _ in range(cfg.steps):
            row = trainer.step()
            step = row["step"]
            if step % cfg.log_interval == 0:
                metrics.append(row)
                if writer is not None:
                    writer.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
                    handle.flush()
            if progress is not None:
                progress(row)
            if (out is not None and cfg.checkpoint_interval
                    and (step + 1) % cfg.checkpoint_interval == 0):
                checkpoint.save(trainer.model.state_dict(), out / f"checkpoint_{step + 1}.pge")
    finally:
        if handle is not None:
            handle.close()
    path = None
    if out is not None:
        path = out / "checkpoint.pge"
        checkpoint.save(trainer.model.state_dict(), path)
    return TrainResult(trainer.model, metrics, path)


def init_checkpoint(cfg, path):
    """Dump a freshly initialised model, the reference for a zero-step run."""
    checkpoint.save(PatchGraphModel(cfg.validate()).state_dict(), path)


def load_model(cfg, checkpoint_path):
    model = PatchGraphModel(cfg.validate())
    model.load_state_dict(checkpoint.load(checkpoint_path))
    return model


def translate(model, image):
    """``G(image)`` as a plain array."""
    return model.generator(ad.Tensor(image)).data.copy()
