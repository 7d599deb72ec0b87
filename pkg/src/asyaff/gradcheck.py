"""Central finite-difference checks of every analytic gradient."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affinity_graph import Box, DepthMap, NeighborhoodSpec
from .loss_core import GAMMA_LIMIT, edge_loss_arrays, edge_loss_gradient_arrays, edge_probability_arrays
from .objective import AffinityParams, InstanceProblem, ObjectiveConfig, total_loss, total_loss_and_gradient
from .projection import BoxProjections, projection_loss, projection_loss_gradient

FD_STEP = 1e-6
EDGE_TOL = 1e-6
PROJECTION_TOL = 1e-6
COMPOSITE_TOL = 1e-5
TIE_GAP = 1e-4


@dataclass
class CheckResult:
    name: str
    tolerance: float
    errors: list[float] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.errors)

    @property
    def worst(self) -> float:
        return max(self.errors, default=0.0)

    @property
    def passed(self) -> bool:
        return self.count > 0 and self.worst < self.tolerance

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.count} instances, worst rel. error {self.worst:.3e} (tol {self.tolerance:g})"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / max(|a|, |n|)`` in the 2-norm; 0 when both vanish."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - n) / scale)


def central_difference(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        fp = f(x)
        x[idx] = orig - h
        fm = f(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


def check_edge_loss(n: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("edge_loss gradient", EDGE_TOL)
    while res.count < n:
        delta = rng.uniform(0, 4)
        gamma = rng.uniform(0, GAMMA_LIMIT - 1e-3)
        ya, yb = delta + rng.uniform(-6, 6, size=2)
        if edge_probability_arrays(ya, yb, delta) <= 1e-6:
            continue
        _, ga, gb = edge_loss_gradient_arrays(ya, yb, delta, gamma)
        fd = central_difference(lambda v: float(edge_loss_arrays(v[0], v[1], delta, gamma)), np.array([ya, yb]))
        res.errors.append(relative_error(np.array([ga, gb]), fd))
    return res


def _tie_free(values: np.ndarray, gap: float) -> bool:
    """True when every row and column maximum beats the runner-up by ``gap``."""
    for arr in (values, values.T):
        top2 = np.sort(arr, axis=1)[:, -2:]
        if np.any(top2[:, 1] - top2[:, 0] < gap):
            return False
    return True


def random_box(rng: np.random.Generator, h: int, w: int) -> Box:
    r = np.sort(rng.integers(0, h, size=2))
    c = np.sort(rng.integers(0, w, size=2))
    return Box(int(r[0]), int(c[0]), int(r[1]), int(c[1]))


def check_projection(n: int = 1000, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("projection_loss gradient", PROJECTION_TOL)
    while res.count < n:
        h, w = rng.integers(3, 11, size=2)
        mask = rng.uniform(0.01, 0.99, size=(h, w))
        if not _tie_free(mask, TIE_GAP):
            continue
        proj = BoxProjections.from_box(random_box(rng, h, w), h, w)
        g = projection_loss_gradient(mask, proj)
        fd = central_difference(lambda m: projection_loss(m, proj), mask)
        res.errors.append(relative_error(g, fd))
    return res


def random_problem(rng: np.random.Generator, h: int, w: int) -> tuple[InstanceProblem, ObjectiveConfig]:
    """Small planar-patch depth and two-tone colours so that edges qualify."""
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    depth = 10 + 0.02 * rows - 0.01 * cols
    split = rng.integers(1, w)
    depth[:, split:] = 5 + 0.03 * rows[:, split:]
    valid = rng.random((h, w)) > 0.05
    lab = np.zeros((h, w, 3))
    lab[..., 0] = np.where(cols < split, 40.0, 70.0) + rng.normal(0, 0.3, (h, w))
    lab[..., 1] = rng.normal(0, 0.3, (h, w))
    cfg = ObjectiveConfig(
        color=AffinityParams(rng.uniform(0, 4), rng.uniform(0, 2.7), 0.3, rng.uniform(0.1, 5)),
        depth=AffinityParams(rng.uniform(0, 4), rng.uniform(0, 2.7), 0.01, rng.uniform(0.1, 5)),
    )
    return InstanceProblem.build(
        random_box(rng, h, w), h, w, DepthMap.from_array(depth, valid), lab, cfg, NeighborhoodSpec(3, 1)
    ), cfg


def check_composite(n: int = 1000, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("total_loss gradient", COMPOSITE_TOL)
    while res.count < n:
        h, w = rng.integers(5, 9, size=2)
        problem, cfg = random_problem(rng, h, w)
        logits = rng.normal(0, 2, size=(h, w))
        mask = 1 / (1 + np.exp(-logits))
        if not _tie_free(mask, TIE_GAP):
            continue
        step = int(rng.integers(0, 2 * cfg.warmup_steps + 1))
        _, g = total_loss_and_gradient(logits, problem, cfg, step)
        fd = central_difference(lambda y: total_loss(y, problem, cfg, step), logits)
        res.errors.append(relative_error(g, fd))
    return res


def run_all(n: int = 1000, seed: int = 0) -> list[CheckResult]:
    return [
        check_edge_loss(n, seed),
        check_projection(n, seed + 1),
        check_composite(n, seed + 2),
    ]
