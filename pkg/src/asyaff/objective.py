"""Projection loss plus warmed-up colour and depth affinity losses."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, NamedTuple

import numpy as np
from scipy.special import expit

from . import kernels
from .affinity_graph import (
    DEFAULT_TAU_C,
    DEFAULT_TAU_D,
    Box,
    DepthMap,
    EdgeSet,
    NeighborhoodSpec,
    enumerate_edges,
    qualify_color_edges,
    qualify_depth_edges,
)
from .loss_core import AsymmetryConfig
from .projection import BoxProjections, projection_loss, projection_loss_gradient

DICE_EPS = 1e-6


@dataclass(frozen=True)
class AffinityParams:
    delta: float
    gamma: float
    tau: float
    weight: float

    def __post_init__(self):
        AsymmetryConfig(self.delta, self.gamma)
        if self.weight < 0:
            raise ValueError(f"affinity weight must be >= 0, got {self.weight}")
        if not self.tau > 0:
            raise ValueError(f"affinity threshold must be > 0, got {self.tau}")


@dataclass(frozen=True)
class ObjectiveConfig:
    color: AffinityParams = field(default_factory=lambda: AffinityParams(2.5, 1.5, DEFAULT_TAU_C, 1.0))
    depth: AffinityParams = field(default_factory=lambda: AffinityParams(3.5, 2.5, DEFAULT_TAU_D, 0.1))
    warmup_steps: int = 200
    enable_color: bool = True
    enable_depth: bool = True
    symmetric_mode_color: bool = False
    symmetric_mode_depth: bool = False

    def __post_init__(self):
        if self.warmup_steps < 0:
            raise ValueError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if not 0 < self.color.tau < 1:
            raise ValueError(f"colour threshold must be in (0, 1), got {self.color.tau}")

    def color_asymmetry(self) -> AsymmetryConfig:
        if self.symmetric_mode_color:
            return AsymmetryConfig(0.0, 0.0)
        return AsymmetryConfig(self.color.delta, self.color.gamma)

    def depth_asymmetry(self) -> AsymmetryConfig:
        if self.symmetric_mode_depth:
            return AsymmetryConfig(0.0, 0.0)
        return AsymmetryConfig(self.depth.delta, self.depth.gamma)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ObjectiveConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown objective config fields: {sorted(unknown)}")
        kw = dict(data)
        for key in ("color", "depth"):
            if key in kw and not isinstance(kw[key], AffinityParams):
                base = getattr(cls(), key)
                kw[key] = replace(base, **kw[key])
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ObjectiveConfig":
        return cls.from_dict(json.loads(text))


def _preset(**kw) -> ObjectiveConfig:
    base = ObjectiveConfig()
    color = replace(base.color, **kw.pop("color", {}))
    depth = replace(base.depth, **kw.pop("depth", {}))
    return replace(base, color=color, depth=depth, **kw)


PRESETS: dict[str, ObjectiveConfig] = {
    "default": ObjectiveConfig(),
    "enhanced": _preset(color={"weight": 5.0}, depth={"weight": 0.5}),
    "projection-only": _preset(enable_color=False, enable_depth=False),
    "symmetric-depth": _preset(enable_color=False, symmetric_mode_depth=True),
    "asymmetric-depth": _preset(enable_color=False),
    "symmetric-depth-5x": _preset(enable_color=False, symmetric_mode_depth=True, depth={"weight": 0.5}),
    "asymmetric-depth-5x": _preset(enable_color=False, depth={"weight": 0.5}),
    "symmetric-color": _preset(enable_depth=False, symmetric_mode_color=True),
    "asymmetric-color": _preset(enable_depth=False),
    "symmetric-color-5x": _preset(enable_depth=False, symmetric_mode_color=True, color={"weight": 5.0}),
    "asymmetric-color-5x": _preset(enable_depth=False, color={"weight": 5.0}),
}


def warmup_weight(base_lambda: float, step: int, warmup_steps: int) -> float:
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if warmup_steps == 0:
        return base_lambda
    return base_lambda * min(1.0, step / warmup_steps)


@dataclass
class InstanceProblem:
    """Image-only inputs of one instance's objective, precomputed once."""

    height: int
    width: int
    box: Box
    projections: BoxProjections
    depth_edges: EdgeSet | None = None
    color_edges: EdgeSet | None = None

    @classmethod
    def build(
        cls,
        box: Box,
        height: int,
        width: int,
        depth: DepthMap | None = None,
        lab: np.ndarray | None = None,
        cfg: ObjectiveConfig = ObjectiveConfig(),
        spec: NeighborhoodSpec = NeighborhoodSpec(),
    ) -> "InstanceProblem":
        edges = enumerate_edges(height, width, spec)
        depth_edges = color_edges = None
        if depth is not None:
            depth_edges = qualify_depth_edges(edges, depth, cfg.depth.tau, [box])
        if lab is not None:
            color_edges = qualify_color_edges(edges, lab, cfg.color.tau, [box])
        return cls(height, width, box, BoxProjections.from_box(box, height, width), depth_edges, color_edges)


class LossTerms(NamedTuple):
    total: float
    proj: float
    color: float
    depth: float
    weight_color: float
    weight_depth: float


def affinity_loss(logits: np.ndarray, edges: EdgeSet, params: AffinityParams | AsymmetryConfig) -> float:
    """Mean edge loss over the qualifying in-box edges; 0 if there are none."""
    a, b = edges.active_pairs()
    if len(a) == 0:
        return 0.0
    flat = np.ascontiguousarray(logits, dtype=np.float64).ravel()
    return kernels.affinity_loss(flat, a, b, float(params.delta), float(params.gamma)) / len(a)


def affinity_loss_and_gradient(
    logits: np.ndarray, edges: EdgeSet, params: AffinityParams | AsymmetryConfig
) -> tuple[float, np.ndarray]:
    flat = np.ascontiguousarray(logits, dtype=np.float64).ravel()
    grad = np.zeros_like(flat)
    a, b = edges.active_pairs()
    if len(a) == 0:
        return 0.0, grad.reshape(np.shape(logits))
    total = kernels.affinity_loss_grad(flat, a, b, float(params.delta), float(params.gamma), grad)
    n = len(a)
    return total / n, (grad / n).reshape(np.shape(logits))


def total_loss_and_gradient(
    logits: np.ndarray, problem: InstanceProblem, cfg: ObjectiveConfig, step: int
) -> tuple[LossTerms, np.ndarray]:
    """Scalar objective and its gradient w.r.t. the logit grid."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (problem.height, problem.width):
        raise ValueError(f"logit grid {logits.shape} does not match problem {(problem.height, problem.width)}")
    mask = expit(logits)
    proj = projection_loss(mask, problem.projections)
    grad = projection_loss_gradient(mask, problem.projections, DICE_EPS) * (mask * (1.0 - mask))
    total = proj

    wc = wd = 0.0
    lc = ld = 0.0
    if cfg.enable_color and problem.color_edges is not None:
        wc = warmup_weight(cfg.color.weight, step, cfg.warmup_steps)
        lc, gc = affinity_loss_and_gradient(logits, problem.color_edges, cfg.color_asymmetry())
        total += wc * lc
        grad += wc * gc
    if cfg.enable_depth and problem.depth_edges is not None:
        wd = warmup_weight(cfg.depth.weight, step, cfg.warmup_steps)
        ld, gd = affinity_loss_and_gradient(logits, problem.depth_edges, cfg.depth_asymmetry())
        total += wd * ld
        grad += wd * gd
    return LossTerms(total, proj, lc, ld, wc, wd), grad


def total_loss(logits: np.ndarray, problem: InstanceProblem, cfg: ObjectiveConfig, step: int) -> float:
    return total_loss_and_gradient(logits, problem, cfg, step)[0].total
