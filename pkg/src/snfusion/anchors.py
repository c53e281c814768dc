"""SSD-style default boxes with the pedestrian layout: 7 ratios per cell, 7 output layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox

RATIO_NAMES = ("0.1", "0.2", "0.41a", "0.41b", "0.8", "1.6", "3.0")
ASPECT_RATIOS = (0.1, 0.2, 0.41, 0.41, 0.8, 1.6, 3.0)
HEIGHTS_MAIN = (0.05, 0.1, 0.24, 0.38, 0.52, 0.66, 0.80)
HEIGHTS_ALT = (0.1, 0.24, 0.38, 0.52, 0.66, 0.80, 0.94)
N_LAYERS = 7


@dataclass(frozen=True)
class LayerSpec:
    grid_w: int
    grid_h: int
    layer_index: int

    def __post_init__(self):
        if self.grid_w < 1 or self.grid_h < 1:
            raise ValueError("grid dimensions must be >= 1")
        if not 0 <= self.layer_index < N_LAYERS:
            raise ValueError(f"layer_index must be in 0..{N_LAYERS - 1}")


@dataclass(frozen=True)
class AnchorConfig:
    """Aspect ratios (w/h) and per-layer heights relative to the image height.

    The two 0.41 entries share the numeric ratio; the one named ``alt_ratio``
    takes its heights from ``heights_alt`` instead of ``heights_main``.
    """

    ratio_names: tuple = RATIO_NAMES
    aspect_ratios: tuple = ASPECT_RATIOS
    heights_main: tuple = HEIGHTS_MAIN
    heights_alt: tuple = HEIGHTS_ALT
    alt_ratio: str = "0.41b"
    image_w: float = 640.0
    image_h: float = 480.0

    def __post_init__(self):
        for name in ("ratio_names", "aspect_ratios", "heights_main", "heights_alt"):
            if len(getattr(self, name)) != 7:
                raise ValueError(f"{name} must have exactly 7 entries")
        if self.alt_ratio not in self.ratio_names:
            raise ValueError(f"alt_ratio {self.alt_ratio!r} is not one of {self.ratio_names}")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image size must be positive")

    def box_sizes(self, layer_index: int) -> np.ndarray:
        """``(7, 2)`` array of (width, height) in pixels for one layer."""
        sizes = np.empty((len(self.aspect_ratios), 2))
        for k, (name, ratio) in enumerate(zip(self.ratio_names, self.aspect_ratios)):
            table = self.heights_alt if name == self.alt_ratio else self.heights_main
            h = table[layer_index] * self.image_h
            sizes[k] = (ratio * h, h)
        return sizes


def default_box_array(layer: LayerSpec, config: AnchorConfig = AnchorConfig()) -> np.ndarray:
    """``(grid_h * grid_w * 7, 4)`` xywh array, row-major over (row, col, ratio)."""
    sizes = config.box_sizes(layer.layer_index)
    cx = (np.arange(layer.grid_w) + 0.5) / layer.grid_w * config.image_w
    cy = (np.arange(layer.grid_h) + 0.5) / layer.grid_h * config.image_h
    cyy, cxx = np.meshgrid(cy, cx, indexing="ij")
    centers = np.stack([cxx.ravel(), cyy.ravel()], axis=1)
    n_cells, n_ratios = centers.shape[0], sizes.shape[0]
    w = np.tile(sizes[:, 0], n_cells)
    h = np.tile(sizes[:, 1], n_cells)
    cxr = np.repeat(centers[:, 0], n_ratios)
    cyr = np.repeat(centers[:, 1], n_ratios)
    return np.stack([cxr - w / 2, cyr - h / 2, w, h], axis=1)


def generate_default_boxes(layer: LayerSpec, config: AnchorConfig = AnchorConfig()) -> list:
    """Default boxes for every cell of one output layer, unclipped."""
    return [BoundingBox(*row) for row in default_box_array(layer, config).tolist()]
