"""Max-projection Dice loss against box projections, with its subgradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity_graph import Box


@dataclass(frozen=True)
class BoxProjections:
    lx_gt: np.ndarray  # (W,) column indicator
    ly_gt: np.ndarray  # (H,) row indicator

    def __post_init__(self):
        for v in (self.lx_gt, self.ly_gt):
            if not np.all((v == 0) | (v == 1)):
                raise ValueError("box projections must be 0/1 vectors")

    @classmethod
    def from_box(cls, box: Box, height: int, width: int) -> "BoxProjections":
        return cls.from_mask(box.indicator(height, width))

    @classmethod
    def from_mask(cls, indicator: np.ndarray) -> "BoxProjections":
        ind = np.asarray(indicator, dtype=np.float64)
        return cls(ind.max(axis=0), ind.max(axis=1))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.ly_gt), len(self.lx_gt)


def project(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column maxima (length W) and row maxima (length H)."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError("mask must be a non-empty 2-D array")
    return mask.max(axis=0), mask.max(axis=1)


def dice(l: np.ndarray, l_gt: np.ndarray) -> float:
    """``1 - l.l_gt / (|l|^2 + |l_gt|^2)`` (no factor 2, so a perfect match gives 0.5)."""
    l = np.asarray(l, dtype=np.float64)
    l_gt = np.asarray(l_gt, dtype=np.float64)
    if l.shape != l_gt.shape:
        raise ValueError(f"length mismatch: {l.shape} vs {l_gt.shape}")
    denom = float(l @ l + l_gt @ l_gt)
    if denom == 0.0:
        raise ValueError("dice is undefined when both vectors are zero")
    return 1.0 - float(l @ l_gt) / denom


def dice_gradient(l: np.ndarray, l_gt: np.ndarray, eps: float = 0.0) -> np.ndarray:
    denom = float(l @ l + l_gt @ l_gt)
    if denom == 0.0:
        if eps <= 0.0:
            raise ValueError("dice is undefined when both vectors are zero")
        denom = eps
    return (2.0 * float(l @ l_gt) * l - denom * l_gt) / denom**2


def projection_loss(mask: np.ndarray, boxes: BoxProjections) -> float:
    lx, ly = project(mask)
    return dice(lx, boxes.lx_gt) + dice(ly, boxes.ly_gt)


def projection_gradient_terms(
    mask: np.ndarray, boxes: BoxProjections, eps: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis gradients ``(from the column term, from the row term)``.

    Each projection entry passes its gradient to the first arg-max of its
    column/row. The column term is <= 0 on in-box columns and >= 0 elsewhere;
    likewise the row term on rows.
    """
    mask = np.asarray(mask, dtype=np.float64)
    h, w = mask.shape
    lx, ly = project(mask)
    gx = np.zeros_like(mask)
    gy = np.zeros_like(mask)
    gx[mask.argmax(axis=0), np.arange(w)] = dice_gradient(lx, boxes.lx_gt, eps)
    gy[np.arange(h), mask.argmax(axis=1)] = dice_gradient(ly, boxes.ly_gt, eps)
    return gx, gy


def projection_loss_gradient(mask: np.ndarray, boxes: BoxProjections, eps: float = 0.0) -> np.ndarray:
    """Gradient w.r.t. the probability mask; at most ``H + W`` non-zeros."""
    gx, gy = projection_gradient_terms(mask, boxes, eps)
    return gx + gy
