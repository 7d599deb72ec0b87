"""Synthetic colour + depth scenes with ground-truth instance masks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from skimage.color import rgb2lab

from .affinity_graph import Box, DepthMap

SHAPES = ("disk", "lshape", "rotsquare")


@dataclass(frozen=True)
class SceneSpec:
    height: int = 64
    width: int = 64
    min_instances: int = 1
    max_instances: int = 3
    shapes: tuple[str, ...] = SHAPES
    size_range: tuple[int, int] = (16, 28)  # object extent in pixels
    depth_noise: float = 0.001  # metres, Gaussian sigma
    color_noise: float = 0.5  # sRGB units, Gaussian sigma
    background_depth: float = 20.0
    object_depth_range: tuple[float, float] = (6.0, 12.0)
    max_slope: float = 0.05  # metres per pixel
    invalid_fraction: float = 0.0
    margin: int = 3

    def __post_init__(self):
        lo, hi = self.size_range
        if lo < 2 or hi < lo:
            raise ValueError(f"size_range must satisfy 2 <= lo <= hi, got {self.size_range}")
        if self.height < 8 or self.width < 8:
            raise ValueError("canvas must be at least 8x8")
        if hi + 2 * self.margin > min(self.height, self.width):
            raise ValueError("objects do not fit on the canvas")
        if not 1 <= self.min_instances <= self.max_instances:
            raise ValueError("need 1 <= min_instances <= max_instances")
        unknown = set(self.shapes) - set(SHAPES)
        if not self.shapes or unknown:
            raise ValueError(f"shapes must be a non-empty subset of {SHAPES}")
        if self.depth_noise < 0 or self.color_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if not 0 <= self.invalid_fraction < 1:
            raise ValueError("invalid_fraction must be in [0, 1)")


class Instance(NamedTuple):
    gt_mask: np.ndarray  # bool (H, W)
    box: Box
    shape: str


@dataclass
class Scene:
    color: np.ndarray  # uint8 (H, W, 3) sRGB
    lab: np.ndarray  # float (H, W, 3)
    depth: DepthMap
    instances: list[Instance]
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.color.shape[:2]


class Metrics(NamedTuple):
    iou_gt: float
    fill_ratio: float
    boundary_f: float


def tight_box(mask: np.ndarray) -> Box:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        raise ValueError("cannot box an empty mask")
    return Box(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


def _shape_mask(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Binary shape inside a ``size x size`` patch."""
    c = (size - 1) / 2.0
    rr, cc = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == "disk":
        return (rr - c) ** 2 + (cc - c) ** 2 <= (size / 2.0) ** 2
    if kind == "lshape":
        t = int(rng.integers(max(2, size // 3), max(3, size // 2) + 1))
        m = np.zeros((size, size), dtype=bool)
        m[:, :t] = True
        m[-t:, :] = True
        return np.rot90(m, int(rng.integers(4))).copy()
    if kind == "rotsquare":
        angle = rng.uniform(np.pi / 12, np.pi / 4)
        half = size / (2.0 * (abs(np.cos(angle)) + abs(np.sin(angle))))
        u = np.cos(angle) * (rr - c) + np.sin(angle) * (cc - c)
        v = -np.sin(angle) * (rr - c) + np.cos(angle) * (cc - c)
        return np.maximum(np.abs(u), np.abs(v)) <= half
    raise ValueError(f"unknown shape {kind!r}")


def _distinct_color(rng: np.random.Generator, used: list[np.ndarray], min_dist: float = 60.0) -> np.ndarray:
    for _ in range(1000):
        col = rng.integers(20, 236, size=3).astype(np.float64)
        if all(np.linalg.norm(col - u) >= min_dist for u in used):
            return col
    raise RuntimeError("could not draw a distinct colour")


def generate_scene(seed: int, spec: SceneSpec = SceneSpec()) -> Scene:
    """Deterministic scene for ``seed``: planar objects over a planar background."""
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)

    bg_slope = rng.uniform(-spec.max_slope, spec.max_slope, size=2)
    depth = spec.background_depth + bg_slope[0] * rows + bg_slope[1] * cols
    bg_color = _distinct_color(rng, [])
    color = np.broadcast_to(bg_color, (h, w, 3)).copy()

    n = int(rng.integers(spec.min_instances, spec.max_instances + 1))
    occupied = np.zeros((h, w), dtype=bool)
    used_colors = [bg_color]
    instances: list[Instance] = []
    for _ in range(n):
        kind = str(rng.choice(spec.shapes))
        size = int(rng.integers(spec.size_range[0], spec.size_range[1] + 1))
        patch = _shape_mask(kind, size, rng)
        placed = False
        for _attempt in range(200):
            top = int(rng.integers(spec.margin, h - spec.margin - size + 1))
            left = int(rng.integers(spec.margin, w - spec.margin - size + 1))
            mask = np.zeros((h, w), dtype=bool)
            mask[top : top + size, left : left + size] = patch
            grown = ndimage.binary_dilation(mask, iterations=spec.margin)
            if not (grown & occupied).any():
                placed = True
                break
        if not placed:
            continue
        if not mask.any():
            raise ValueError(f"generated an empty {kind} instance")
        occupied |= mask
        d0 = rng.uniform(*spec.object_depth_range)
        slope = rng.uniform(-spec.max_slope, spec.max_slope, size=2)
        cr, cc = top + size / 2.0, left + size / 2.0
        obj_depth = d0 + slope[0] * (rows - cr) + slope[1] * (cols - cc)
        depth = np.where(mask, obj_depth, depth)
        obj_color = _distinct_color(rng, used_colors)
        used_colors.append(obj_color)
        color[mask] = obj_color
        instances.append(Instance(mask, tight_box(mask), kind))

    if not instances:
        raise ValueError("no instance could be placed; reduce size_range or instance count")
    if spec.depth_noise > 0:
        depth = depth + rng.normal(0.0, spec.depth_noise, size=(h, w))
    if spec.color_noise > 0:
        color = color + rng.normal(0.0, spec.color_noise, size=(h, w, 3))
    valid = np.ones((h, w), dtype=bool)
    if spec.invalid_fraction > 0:
        valid &= rng.random((h, w)) >= spec.invalid_fraction
    color8 = np.clip(np.rint(color), 0, 255).astype(np.uint8)
    return Scene(
        color=color8,
        lab=srgb_to_lab(color8),
        depth=DepthMap.from_array(depth, valid),
        instances=instances,
        meta={"seed": int(seed), "height": h, "width": w},
    )


def srgb_to_lab(color: np.ndarray) -> np.ndarray:
    """CIELAB (D65) of an 8-bit sRGB image."""
    return rgb2lab(np.asarray(color, dtype=np.uint8))


def binarize(mask: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return np.asarray(mask) >= threshold


def _boundary(mask: np.ndarray) -> np.ndarray:
    return mask & ~ndimage.binary_erosion(mask, border_value=0)


def boundary_f_measure(pred: np.ndarray, gt: np.ndarray, tolerance: float = 2.0) -> float:
    """F-measure of boundary pixels matched within ``tolerance`` pixels."""
    bp, bg = _boundary(pred), _boundary(gt)
    if not bp.any() and not bg.any():
        return 1.0
    if not bp.any() or not bg.any():
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~bg)
    dist_to_pred = ndimage.distance_transform_edt(~bp)
    precision = float(np.mean(dist_to_gt[bp] <= tolerance))
    recall = float(np.mean(dist_to_pred[bg] <= tolerance))
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate(pred: np.ndarray, instance: Instance) -> Metrics:
    """IoU against the mask, in-box fill ratio and 2-px boundary F-measure."""
    pred = np.asarray(pred, dtype=bool)
    gt = instance.gt_mask
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and mask {gt.shape} differ in shape")
    union = np.count_nonzero(pred | gt)
    iou = np.count_nonzero(pred & gt) / union if union else 1.0
    box = instance.box.indicator(*gt.shape)
    fill = np.count_nonzero(pred & box) / instance.box.area
    return Metrics(float(iou), float(fill), boundary_f_measure(pred, gt))
