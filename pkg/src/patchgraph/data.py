"""Procedural two-domain image source.

Domain X: striped circles on a warm vertical gradient.
Domain Y: checkered squares on a cool horizontal gradient.
Images are (3, S, S) float64 arrays in [-1, 1]; the same (seed, domain,
index) always yields the same image.
"""
from __future__ import annotations

import numpy as np

_PALETTES = {
    # background top/bottom, shape colours
    "x": (np.array([0.55, 0.35, 0.20]), np.array([0.95, 0.75, 0.45]),
          np.array([[0.85, 0.15, 0.10], [0.95, 0.55, 0.05], [0.60, 0.10, 0.35]])),
    "y": (np.array([0.10, 0.25, 0.55]), np.array([0.35, 0.65, 0.90]),
          np.array([[0.10, 0.70, 0.45], [0.20, 0.45, 0.85], [0.85, 0.90, 0.95]])),
}


class SyntheticDomainPair:
    def __init__(self, image_size=64, seed=0, max_shapes=3):
        self.size = image_size
        self.seed = seed
        self.max_shapes = max_shapes

    def _rng(self, domain, index):
        return np.random.default_rng([self.seed, 0 if domain == "x" else 1, index])

    def sample(self, domain, index):
        if domain not in _PALETTES:
            raise ValueError(f"unknown domain {domain!r}")
        rng = self._rng(domain, index)
        s = self.size
        top, bottom, colours = _PALETTES[domain]
        yy, xx = np.mgrid[0:s, 0:s] / max(s - 1, 1)
        ramp = yy if domain == "x" else xx
        img = top[:, None, None] * (1 - ramp) + bottom[:, None, None] * ramp
        img = img + rng.normal(0.0, 0.02, img.shape)
        for _ in range(rng.integers(1, self.max_shapes + 1)):
            cy, cx = rng.uniform(0.2, 0.8, 2) * s
            radius = rng.uniform(0.12, 0.25) * s
            colour = colours[rng.integers(len(colours))]
            alt = colour * rng.uniform(0.4, 0.7)
            period = rng.uniform(0.15, 0.35) * radius
            if domain == "x":
                inside = (yy * (s - 1) - cy) ** 2 + (xx * (s - 1) - cx) ** 2 <= radius ** 2
                angle = rng.uniform(0, np.pi)
                proj = np.cos(angle) * xx * (s - 1) + np.sin(angle) * yy * (s - 1)
                texture = np.sin(2 * np.pi * proj / period) > 0
            else:
                inside = ((np.abs(yy * (s - 1) - cy) <= radius)
                          & (np.abs(xx * (s - 1) - cx) <= radius))
                texture = ((np.floor(yy * (s - 1) / period) + np.floor(xx * (s - 1) / period))
                           % 2) == 0
            fill = np.where(texture, 1.0, 0.0)
            shade = colour[:, None, None] * fill + alt[:, None, None] * (1 - fill)
            img = np.where(inside[None], shade, img)
        return np.clip(img, 0.0, 1.0) * 2.0 - 1.0

    def x(self, index):
        return self.sample("x", index)

    def y(self, index):
        return self.sample("y", index)

    def mean_colour_gap(self, count=32):
        """Euclidean distance between the domains' mean RGB over ``count`` samples."""
        mx = np.mean([self.x(i).mean(axis=(1, 2)) for i in range(count)], axis=0)
        my = np.mean([self.y(i).mean(axis=(1, 2)) for i in range(count)], axis=0)
        return float(np.linalg.norm(mx - my))
