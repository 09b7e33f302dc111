"""Grayscale PGM heatmaps of planar mass distributions (darker = more mass)."""

from __future__ import annotations

import re

import numpy as np

from .graphs import Comb, Lattice
from .mass import MassDist


def heatmap_array(mu: MassDist, bounds: tuple, scale: str = "linear") -> np.ndarray:
    """uint8 image, row 0 = largest y. ``bounds`` = (xmin, xmax, ymin, ymax), inclusive."""
    g = mu.graph
    if not (isinstance(g, Comb) or (isinstance(g, Lattice) and g.d in (1, 2))):
        raise ValueError("heatmaps need a Z^1, Z^2 or comb distribution")
    xmin, xmax, ymin, ymax = bounds
    W, H = xmax - xmin + 1, ymax - ymin + 1
    if W <= 0 or H <= 0:
        raise ValueError("empty bounds")
    grid = np.zeros((H, W))
    for v, m in mu.masses.items():
        x, y = (v[0], 0) if len(v) == 1 else v
        if xmin <= x <= xmax and ymin <= y <= ymax:
            grid[ymax - y, x - xmin] = float(m)
    if scale == "linear":
        lo, hi = grid.min(), grid.max()
        if hi == lo:
            return np.full((H, W), 128, dtype=np.uint8)
        shade = (grid - lo) / (hi - lo)
        return np.round(255 * (1 - shade)).astype(np.uint8)
    if scale == "log":
        img = np.full((H, W), 255, dtype=np.uint8)
        pos = grid > 0
        if not pos.any():
            return img
        lg = np.log(grid[pos])
        lo, hi = lg.min(), lg.max()
        shade = np.ones_like(lg) if hi == lo else (lg - lo) / (hi - lo)
        img[pos] = np.round(254 * (1 - shade)).astype(np.uint8)
        return img
    raise ValueError(f"unknown scale {scale!r}")


def write_pgm(img: np.ndarray, out_path) -> None:
    h, w = img.shape
    with open(out_path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM")
    w, h, mx = (int(c) for c in m.groups())
    if mx != 255:
        raise ValueError("only maxval 255 is supported")
    return np.frombuffer(data[m.end(): m.end() + w * h], dtype=np.uint8).reshape(h, w)


def render_heatmap(mu: MassDist, bounds: tuple, out_path, scale: str = "linear") -> np.ndarray:
    img = heatmap_array(mu, bounds, scale)
    write_pgm(img, out_path)
    return img
