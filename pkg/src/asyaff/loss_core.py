"""Closed-form pairwise affinity loss and its analytic derivatives.

All functions accept scalars or numpy arrays of logits. The loss of a single
edge with endpoint logits ``(y_a, y_b)`` is::

    P    = s(y_a - delta) * s(y_b - delta) + s(delta - y_a) * s(delta - y_b)
    loss = exp(gamma * (P - 0.5)) * -log(max(P, P_FLOOR))

``delta = gamma = 0`` gives the plain symmetric pairwise loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

P_FLOOR = 1e-12
GAMMA_LIMIT = math.e


@dataclass(frozen=True)
class EdgeLogits:
    y_a: float
    y_b: float

    def __post_init__(self):
        if not (math.isfinite(self.y_a) and math.isfinite(self.y_b)):
            raise ValueError(f"edge logits must be finite, got ({self.y_a}, {self.y_b})")


@dataclass(frozen=True)
class AsymmetryConfig:
    """Offset ``delta`` and modulation ``gamma`` of the asymmetric loss.

    ``gamma`` must lie in ``[0, e)``; larger values introduce spurious
    stationary points. Pass ``allow_unstable=True`` to build a config for
    landscape diagnostics only.
    """

    delta: float = 0.0
    gamma: float = 0.0
    allow_unstable: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.gamma)):
            raise ValueError("delta and gamma must be finite")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.gamma >= GAMMA_LIMIT and not self.allow_unstable:
            raise ValueError(f"gamma must be < e ({GAMMA_LIMIT:.6f}), got {self.gamma}")

    @property
    def symmetric(self) -> bool:
        return self.delta == 0.0 and self.gamma == 0.0


@dataclass(frozen=True)
class GammaAnalysis:
    gamma: float
    argmin_p: float
    min_value: float
    has_extra_stationary_points: bool


def _sigmoid_pair(y, delta):
    z = np.asarray(y, dtype=np.float64) - delta
    return expit(z), expit(-z)


def edge_probability_arrays(y_a, y_b, delta: float = 0.0):
    """Vectorised probability that both endpoints share a label."""
    sa, qa = _sigmoid_pair(y_a, delta)
    sb, qb = _sigmoid_pair(y_b, delta)
    return sa * sb + qa * qb


def edge_loss_arrays(y_a, y_b, delta: float = 0.0, gamma: float = 0.0):
    p = edge_probability_arrays(y_a, y_b, delta)
    return np.exp(gamma * (p - 0.5)) * -np.log(np.maximum(p, P_FLOOR))


def edge_loss_gradient_arrays(y_a, y_b, delta: float = 0.0, gamma: float = 0.0):
    """Return ``(loss, d/dy_a, d/dy_b)`` for arrays of edges."""
    sa, qa = _sigmoid_pair(y_a, delta)
    sb, qb = _sigmoid_pair(y_b, delta)
    p = sa * sb + qa * qb
    pc = np.maximum(p, P_FLOOR)
    mod = np.exp(gamma * (p - 0.5))
    nlog = -np.log(pc)
    loss = mod * nlog
    # d loss / dP; the -log term is flat below the floor
    dp = gamma * mod * nlog - np.where(p > P_FLOOR, mod / pc, 0.0)
    # dP/dy_a = (s_b - q_b) * s_a * q_a
    ga = dp * (sb - qb) * sa * qa
    gb = dp * (sa - qa) * sb * qb
    return loss, ga, gb


def edge_probability(edge: EdgeLogits, delta: float = 0.0) -> float:
    return float(edge_probability_arrays(edge.y_a, edge.y_b, delta))


def edge_loss(edge: EdgeLogits, cfg: AsymmetryConfig) -> float:
    return float(edge_loss_arrays(edge.y_a, edge.y_b, cfg.delta, cfg.gamma))


def edge_loss_gradient(edge: EdgeLogits, cfg: AsymmetryConfig) -> tuple[float, float]:
    _, ga, gb = edge_loss_gradient_arrays(edge.y_a, edge.y_b, cfg.delta, cfg.gamma)
    return float(ga), float(gb)


def f_of_p(p, gamma: float):
    """``1/p + gamma*log(p)``: the sign of -dL/dP up to a positive factor."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("f_of_p is defined for p > 0 only")
    out = 1.0 / p + gamma * np.log(p)
    return float(out) if out.ndim == 0 else out


def gamma_closed_form_min(gamma: float) -> tuple[float, float]:
    """Exact ``(argmin, min)`` of ``f_of_p`` over ``(0, 1]``."""
    if gamma <= 1.0:
        return 1.0, 1.0
    return 1.0 / gamma, gamma * (1.0 - math.log(gamma))


def analyze_gamma(gamma: float, step: float = 1e-5) -> GammaAnalysis:
    """Scan ``f_of_p`` on a dense grid over ``(0, 1]``.

    The grid minimum is refined with a bounded scalar search so the reported
    minimum matches the closed form far below the grid resolution.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not 0 < step <= 1e-4:
        raise ValueError("scan step must be in (0, 1e-4]")
    n = int(math.ceil(1.0 / step))
    grid = np.linspace(1.0 / n, 1.0, n)
    values = f_of_p(grid, gamma)
    i = int(np.argmin(values))
    p_best, v_best = float(grid[i]), float(values[i])
    if 0 < i < n - 1:
        res = minimize_scalar(
            lambda x: f_of_p(x, gamma),
            bounds=(grid[i - 1], grid[i + 1]),
            method="bounded",
            options={"xatol": 1e-14},
        )
        if res.fun <= v_best:
            p_best, v_best = float(res.x), float(res.fun)
    return GammaAnalysis(
        gamma=gamma,
        argmin_p=p_best,
        min_value=v_best,
        has_extra_stationary_points=bool(v_best <= 0.0),
    )


def reduce_edge_losses(losses: Sequence[float] | np.ndarray) -> float:
    """Mean of the per-edge losses, 0 for an empty set."""
    arr = np.asarray(losses, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return math.fsum(arr.tolist()) / arr.size
