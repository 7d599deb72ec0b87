"""Dilated pixel-pair edges, depth-gradient and colour affinities.

An edge starts at pixel ``p``, passes through ``p1 = p + dilation * v`` and
ends at ``p2 = p + 2 * dilation * v`` for one of the ``k*k - 1`` unit offsets
``v`` of a ``k x k`` kernel. Pixel indices are flat row-major indices into an
``H x W`` image.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

COLOR_THETA = 2.0
DEFAULT_TAU_D = 0.01
DEFAULT_TAU_C = 0.3


@dataclass(frozen=True)
class NeighborhoodSpec:
    k: int = 3
    dilation: int = 2

    def __post_init__(self):
        if self.k < 3 or self.k % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 3, got {self.k}")
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")

    @property
    def n_directions(self) -> int:
        return self.k * self.k - 1

    def offsets(self) -> list[tuple[int, int]]:
        """Unit ``(drow, dcol)`` offsets in row-major order, centre excluded."""
        r = self.k // 2
        return [(dr, dc) for dr in range(-r, r + 1) for dc in range(-r, r + 1) if (dr, dc) != (0, 0)]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with inclusive pixel bounds."""

    top: int
    left: int
    bottom: int
    right: int

    def __post_init__(self):
        if self.bottom < self.top or self.right < self.left:
            raise ValueError(f"empty box {self}")

    @property
    def area(self) -> int:
        return (self.bottom - self.top + 1) * (self.right - self.left + 1)

    def contains(self, row, col):
        return (row >= self.top) & (row <= self.bottom) & (col >= self.left) & (col <= self.right)

    def indicator(self, height: int, width: int) -> np.ndarray:
        out = np.zeros((height, width), dtype=bool)
        out[self.top : self.bottom + 1, self.left : self.right + 1] = True
        return out

    def to_list(self) -> list[int]:
        return [self.top, self.left, self.bottom, self.right]

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "Box":
        top, left, bottom, right = (int(v) for v in values)
        return cls(top, left, bottom, right)


@dataclass(frozen=True)
class DepthMap:
    """Depth in metres with an explicit validity mask (invalid values are 0)."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.valid.shape:
            raise ValueError("depth values and validity mask differ in shape")

    @classmethod
    def from_array(cls, values: np.ndarray, valid: np.ndarray | None = None) -> "DepthMap":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(values)
        valid = np.asarray(valid, dtype=bool) & np.isfinite(values)
        return cls(np.where(valid, values, 0.0), valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


class Edge(NamedTuple):
    p: tuple[int, int]
    p1: tuple[int, int]
    p2: tuple[int, int]
    direction: int


@dataclass
class EdgeSet:
    """Edges as parallel flat-index arrays plus per-edge verdicts."""

    height: int
    width: int
    spec: NeighborhoodSpec
    p: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    direction: np.ndarray
    qualifying: np.ndarray = field(default=None)
    in_box: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.p)
        if self.qualifying is None:
            self.qualifying = np.zeros(n, dtype=bool)
        if self.in_box is None:
            self.in_box = np.zeros(n, dtype=bool)

    def __len__(self) -> int:
        return len(self.p)

    @property
    def active(self) -> np.ndarray:
        """Edges that enter the affinity loss."""
        return self.qualifying & self.in_box

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))

    def active_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.active
        return np.ascontiguousarray(self.p[m]), np.ascontiguousarray(self.p2[m])

    def edge(self, i: int) -> Edge:
        w = self.width
        return Edge(
            divmod(int(self.p[i]), w),
            divmod(int(self.p1[i]), w),
            divmod(int(self.p2[i]), w),
            int(self.direction[i]),
        )

    def __iter__(self) -> Iterable[Edge]:
        return (self.edge(i) for i in range(len(self)))

    def with_flags(self, qualifying: np.ndarray, in_box: np.ndarray) -> "EdgeSet":
        return replace(self, qualifying=np.asarray(qualifying, bool), in_box=np.asarray(in_box, bool))


def enumerate_edges(height: int, width: int, spec: NeighborhoodSpec = NeighborhoodSpec()) -> EdgeSet:
    """All edges whose three pixels fall inside the image.

    Ordered by start pixel (row-major), then by direction.
    """
    if height < 1 or width < 1:
        raise ValueError(f"image must be at least 1x1, got {height}x{width}")
    offsets = np.array(spec.offsets(), dtype=np.int64) * spec.dilation
    rows, cols = np.divmod(np.arange(height * width, dtype=np.int64), width)
    # (pixels, directions)
    r2 = rows[:, None] + 2 * offsets[None, :, 0]
    c2 = cols[:, None] + 2 * offsets[None, :, 1]
    ok = (r2 >= 0) & (r2 < height) & (c2 >= 0) & (c2 < width)
    pix, dirs = np.nonzero(ok)
    r0, c0 = rows[pix], cols[pix]
    dr, dc = offsets[dirs, 0], offsets[dirs, 1]
    return EdgeSet(
        height=height,
        width=width,
        spec=spec,
        p=r0 * width + c0,
        p1=(r0 + dr) * width + (c0 + dc),
        p2=(r0 + 2 * dr) * width + (c0 + 2 * dc),
        direction=dirs.astype(np.int64),
    )


def depth_grad_diff(depth: DepthMap, edge: Edge) -> float | None:
    """``|d_p + d_p2 - 2 d_p1|``, or ``None`` when any of the depths is invalid."""
    pts = (edge.p, edge.p1, edge.p2)
    if not all(depth.valid[r, c] for r, c in pts):
        return None
    d0, d1, d2 = (float(depth.values[r, c]) for r, c in pts)
    return abs(d0 + d2 - 2.0 * d1)


def depth_grad_diffs(depth: DepthMap, edges: EdgeSet) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`depth_grad_diff`: ``(diff, valid)``; diff is 0 where invalid."""
    d = depth.values.ravel()
    v = depth.valid.ravel()
    valid = v[edges.p] & v[edges.p1] & v[edges.p2]
    diff = np.abs(d[edges.p] + d[edges.p2] - 2.0 * d[edges.p1])
    return np.where(valid, diff, 0.0), valid


def color_similarity(lab: np.ndarray, edge: Edge, theta: float = COLOR_THETA) -> float:
    a = np.asarray(lab[edge.p], dtype=np.float64)
    b = np.asarray(lab[edge.p2], dtype=np.float64)
    return float(np.exp(-np.linalg.norm(a - b) / theta))


def color_similarities(lab: np.ndarray, edges: EdgeSet, theta: float = COLOR_THETA) -> np.ndarray:
    flat = np.asarray(lab, dtype=np.float64).reshape(-1, lab.shape[-1])
    dist = np.sqrt(np.sum((flat[edges.p] - flat[edges.p2]) ** 2, axis=1))
    return np.exp(-dist / theta)


def _in_any_box(flat_idx: np.ndarray, width: int, boxes: Sequence[Box]) -> np.ndarray:
    rows, cols = np.divmod(flat_idx, width)
    out = np.zeros(len(flat_idx), dtype=bool)
    for box in boxes:
        out |= box.contains(rows, cols)
    return out


def endpoint_in_box(edges: EdgeSet, boxes: Sequence[Box]) -> np.ndarray:
    return _in_any_box(edges.p, edges.width, boxes) | _in_any_box(edges.p2, edges.width, boxes)


def qualify_depth_edges(
    edges: EdgeSet, depth: DepthMap, tau_d: float = DEFAULT_TAU_D, boxes: Sequence[Box] = ()
) -> EdgeSet:
    if not tau_d > 0:
        raise ValueError(f"tau_d must be > 0, got {tau_d}")
    if depth.shape != (edges.height, edges.width):
        raise ValueError("depth map shape does not match the edge set")
    diff, valid = depth_grad_diffs(depth, edges)
    qualifying = valid & (diff <= tau_d)
    in_box = valid & endpoint_in_box(edges, boxes)
    return edges.with_flags(qualifying, in_box)


def qualify_color_edges(
    edges: EdgeSet, lab: np.ndarray, tau_c: float = DEFAULT_TAU_C, boxes: Sequence[Box] = ()
) -> EdgeSet:
    if not 0 < tau_c < 1:
        raise ValueError(f"tau_c must be in (0, 1), got {tau_c}")
    if lab.shape[:2] != (edges.height, edges.width):
        raise ValueError("colour image shape does not match the edge set")
    qualifying = color_similarities(lab, edges) >= tau_c
    return edges.with_flags(qualifying, endpoint_in_box(edges, boxes))


def affinity_maps(edges: EdgeSet) -> np.ndarray:
    """``(k*k - 1, H, W)`` uint8 maps; 1 marks a qualifying edge leaving that pixel."""
    maps = np.zeros((edges.spec.n_directions, edges.height * edges.width), dtype=np.uint8)
    m = edges.qualifying
    maps[edges.direction[m], edges.p[m]] = 1
    return maps.reshape(edges.spec.n_directions, edges.height, edges.width)
