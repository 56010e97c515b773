"""Small convolutional encoder, generator and patch discriminator."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


class Conv:
    """3x3 (or 1x1) same-size convolution with bias."""

    def __init__(self, cin, cout, rng, k=3, gain=np.sqrt(2.0), trainable=True, name="conv"):
        std = gain / np.sqrt(cin * k * k)
        self.k = k
        self.weight = ad.Tensor(rng.normal(0.0, std, (cout, cin, k, k)),
                                requires_grad=trainable, name=f"{name}.weight")
        self.bias = ad.Tensor(np.zeros(cout), requires_grad=trainable, name=f"{name}.bias")

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, x):
        return ad.conv2d(x, self.weight, self.bias, stride=1, pad=self.k // 2)


def _check_divisible(image, factor, who):
    _, h, w = image.shape
    if h % factor or w % factor:
        raise ShapeError(f"{who}: image {h}x{w} is not divisible by {factor}")


def _named(prefix, modules):
    out = {}
    for module in modules:
        for p in module.parameters():
            out[f"{prefix}.{p.name}"] = p
    return out


class Encoder:
    """Frozen feature extractor with taps at strides 2, 4 and 4."""

    def __init__(self, in_channels, channels, rng):
        c1, c2, c3 = channels
        self.channels = tuple(channels)
        self.blocks = [Conv(in_channels, c1, rng, trainable=False, name="conv1"),
                       Conv(c1, c2, rng, trainable=False, name="conv2"),
                       Conv(c2, c3, rng, trainable=False, name="conv3")]

    def parameters(self):
        return [p for b in self.blocks for p in b.parameters()]

    def named_parameters(self):
        return _named("E", self.blocks)

    def taps(self, image):
        _check_divisible(image, 4, "encoder")
        f1 = ad.avg_pool2x(ad.relu(self.blocks[0](image)))
        f2 = ad.avg_pool2x(ad.relu(self.blocks[1](f1)))
        f3 = ad.relu(self.blocks[2](f2))
        return [f1, f2, f3]

    __call__ = taps


class Generator:
    """Encoder-decoder with residual blocks and a global skip.

    The output is ``tanh(net(x) + atanh(x))`` with the last layer started
    small, so an untrained generator sits close to the identity map.
    """

    def __init__(self, channels, width, res_blocks, rng):
        w = width
        self.stem = Conv(channels, w, rng, name="stem")
        self.down1 = Conv(w, 2 * w, rng, name="down1")
        self.down2 = Conv(2 * w, 4 * w, rng, name="down2")
        self.res = [(Conv(4 * w, 4 * w, rng, name=f"res{i}a"),
                     Conv(4 * w, 4 * w, rng, gain=0.5, name=f"res{i}b"))
                    for i in range(res_blocks)]
        self.up1 = Conv(4 * w, 2 * w, rng, name="up1")
        self.up2 = Conv(2 * w, w, rng, name="up2")
        self.head = Conv(w, channels, rng, gain=0.1, name="out")

    def modules(self):
        mods = [self.stem, self.down1, self.down2]
        for a, b in self.res:
            mods += [a, b]
        return mods + [self.up1, self.up2, self.head]

    def parameters(self):
        return [p for m in self.modules() for p in m.parameters()]

    def named_parameters(self):
        return _named("G", self.modules())

    def __call__(self, image):
        _check_divisible(image, 4, "generator")
        h = ad.relu(self.stem(image))
        h = ad.avg_pool2x(ad.relu(self.down1(h)))
        h = ad.avg_pool2x(ad.relu(self.down2(h)))
        for a, b in self.res:
            h = ad.add(h, b(ad.relu(a(h))))
        h = ad.relu(self.up1(ad.upsample2x(h)))
        h = ad.relu(self.up2(ad.upsample2x(h)))
        skip = np.arctanh(np.clip(image.data, -0.999, 0.999))
        return ad.tanh(ad.add(self.head(h), ad.Tensor(skip)))


class Discriminator:
    """Patch discriminator: one score per 4x4 input block."""

    def __init__(self, channels, width, rng):
        self.conv1 = Conv(channels, width, rng, name="conv1")
        self.conv2 = Conv(width, 2 * width, rng, name="conv2")
        self.score = Conv(2 * width, 1, rng, gain=1.0, name="score")

    def modules(self):
        return [self.conv1, self.conv2, self.score]

    def parameters(self):
        return [p for m in self.modules() for p in m.parameters()]

    def named_parameters(self):
        return _named("D", self.modules())

    def __call__(self, image):
        _check_divisible(image, 4, "discriminator")
        h = ad.avg_pool2x(ad.leaky_relu(self.conv1(image)))
        h = ad.avg_pool2x(ad.leaky_relu(self.conv2(h)))
        return self.score(h)


def encode_taps(encoder, image):
    return encoder.taps(image)


def generate(generator, image):
    return generator(image)


def discriminate(discriminator, image):
    return discriminator(image)
