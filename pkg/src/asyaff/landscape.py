"""Pairwise loss surfaces over endpoint probabilities and their minima."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logit

from .loss_core import AsymmetryConfig, edge_loss_arrays

P_CLIP = 1e-4


@dataclass(frozen=True)
class LandscapeSample:
    axis: np.ndarray  # probabilities, shared by both axes
    values: np.ndarray  # values[i, j] = loss at (axis[i], axis[j])
    config: AsymmetryConfig

    @property
    def resolution(self) -> int:
        return len(self.axis)


def probability_axis(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """``(probabilities, logits)`` on ``[P_CLIP, 1 - P_CLIP]``.

    The grid is mirror-exact (``x[n-1-i] == 1 - x[i]`` and opposite logits)
    and nested: the ``n``-point grid is every other node of the
    ``2n - 1``-point grid.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    n = resolution
    span = 1.0 - 2 * P_CLIP
    x = np.empty(n)
    y = np.empty(n)
    for i in range((n + 1) // 2):
        x[i] = P_CLIP + span * (i / (n - 1))
        x[n - 1 - i] = 1.0 - x[i]
    y[: (n + 1) // 2] = logit(x[: (n + 1) // 2])
    y[n - 1 - np.arange((n + 1) // 2)] = -y[: (n + 1) // 2]
    if n % 2:
        x[n // 2], y[n // 2] = 0.5, 0.0
    return x, y


def sample_surface(cfg: AsymmetryConfig, resolution: int = 201) -> LandscapeSample:
    if resolution < 16:
        raise ValueError("resolution must be >= 16")
    x, y = probability_axis(resolution)
    values = edge_loss_arrays(y[:, None], y[None, :], cfg.delta, cfg.gamma)
    return LandscapeSample(x, values, cfg)


def diagonal_cross_section(sample: LandscapeSample) -> np.ndarray:
    """Loss along ``sigma(y_a) == sigma(y_b)``."""
    v = sample.values
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("diagonal needs a square sample")
    return np.diagonal(v).copy()


def shifted_antidiagonal(cfg: AsymmetryConfig, resolution: int = 2001) -> tuple[np.ndarray, np.ndarray]:
    """Loss along ``sigma(y_a - delta) + sigma(y_b - delta) == 1``.

    This line passes through the stationary point ``(delta, delta)`` and spans
    every edge probability in ``(0, 0.5]``, where the spurious stationary
    levels of a too-large ``gamma`` lie. Returns ``(t, loss)`` with
    ``t = sigma(y_a - delta)``.
    """
    t, z = probability_axis(resolution)
    return t, edge_loss_arrays(cfg.delta + z, cfg.delta - z, cfg.delta, cfg.gamma)


def count_local_minima(curve: np.ndarray) -> int:
    """Strict interior local minima; a flat run counts once."""
    c = np.asarray(curve, dtype=np.float64)
    if c.ndim != 1 or len(c) < 3:
        raise ValueError("curve must be 1-D with at least 3 points")
    keep = np.concatenate(([True], c[1:] != c[:-1]))
    r = c[keep]
    if len(r) < 3:
        return 0
    mid = r[1:-1]
    return int(np.count_nonzero((mid < r[:-2]) & (mid < r[2:])))


def count_local_maxima(curve: np.ndarray) -> int:
    return count_local_minima(-np.asarray(curve, dtype=np.float64))


def interior_extrema(curve: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of strict interior minima and maxima (first index of a flat run)."""
    c = np.asarray(curve, dtype=np.float64)
    starts = np.flatnonzero(np.concatenate(([True], c[1:] != c[:-1])))
    r = c[starts]
    mid = np.arange(1, len(r) - 1)
    minima = starts[mid[(r[mid] < r[mid - 1]) & (r[mid] < r[mid + 1])]]
    maxima = starts[mid[(r[mid] > r[mid - 1]) & (r[mid] > r[mid + 1])]]
    return minima, maxima


def surface_rows(sample: LandscapeSample):
    """``(x, y, loss)`` triples in row-major order."""
    n = sample.resolution
    for i in range(n):
        for j in range(n):
            yield float(sample.axis[i]), float(sample.axis[j]), float(sample.values[i, j])
