"""Plain gradient descent on per-instance logit grids."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .affinity_graph import NeighborhoodSpec
from .objective import InstanceProblem, ObjectiveConfig, total_loss_and_gradient
from .scene import Scene, binarize, evaluate

THRESHOLD = 0.5


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    steps: int = 500
    step_size: float = 50.0
    init_noise: float = 1e-3
    seed: int = 0
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    record_every: int = 50
    snapshot: bool = False

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.init_noise < 0:
            raise ValueError("init_noise must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kw = dict(data)
        if "objective" in kw and isinstance(kw["objective"], dict):
            kw["objective"] = ObjectiveConfig.from_dict(kw["objective"])
        return cls(**kw)


class TraceRow(NamedTuple):
    step: int
    loss: float
    proj: float
    color: float
    depth: float
    iou: float
    fill_ratio: float
    boundary_f: float
    threshold: float
    mask: np.ndarray | None = None


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError("trace steps must increase")
        self.rows.append(row)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def __len__(self) -> int:
        return len(self.rows)


def init_logits(shape: tuple[int, int], init_noise: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-init_noise, init_noise, size=shape) if init_noise > 0 else np.zeros(shape)


def build_problem(scene: Scene, index: int, objective: ObjectiveConfig,
                  spec: NeighborhoodSpec = NeighborhoodSpec()) -> InstanceProblem:
    inst = scene.instances[index]
    h, w = scene.shape
    return InstanceProblem.build(
        inst.box,
        h,
        w,
        depth=scene.depth if objective.enable_depth else None,
        lab=scene.lab if objective.enable_color else None,
        cfg=objective,
        spec=spec,
    )


def optimize_instance(
    scene: Scene, index: int, cfg: RunConfig, problem: InstanceProblem | None = None
) -> tuple[np.ndarray, RunTrace]:
    """Run ``cfg.steps`` of ``y <- y - step_size * grad``.

    The trace holds a row every ``record_every`` steps plus the final step.
    """
    if problem is None:
        problem = build_problem(scene, index, cfg.objective)
    inst = scene.instances[index]
    logits = init_logits(scene.shape, cfg.init_noise, cfg.seed)
    trace = RunTrace()

    def record(step: int, terms) -> None:
        mask = expit(logits)
        m = evaluate(binarize(mask, THRESHOLD), inst)
        trace.append(
            TraceRow(step, terms.total, terms.proj, terms.color, terms.depth, *m, THRESHOLD,
                     mask.copy() if cfg.snapshot else None)
        )

    for step in range(cfg.steps):
        terms, grad = total_loss_and_gradient(logits, problem, cfg.objective, step)
        if not math.isfinite(terms.total) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite objective at step {step}")
        if step % cfg.record_every == 0:
            record(step, terms)
        logits = logits - cfg.step_size * grad
    terms, _ = total_loss_and_gradient(logits, problem, cfg.objective, cfg.steps)
    if not math.isfinite(terms.total):
        raise DivergenceError(f"non-finite objective at step {cfg.steps}")
    record(cfg.steps, terms)
    return logits, trace


class SweepCell(NamedTuple):
    delta: float
    gamma: float
    mean_iou: float
    mean_fill_ratio: float
    n_runs: int


def modality_objective(base: ObjectiveConfig, modality: str, delta: float, gamma: float) -> ObjectiveConfig:
    """``base`` restricted to one affinity; ``delta = gamma = 0`` is the symmetric loss."""
    if modality not in ("depth", "color"):
        raise ValueError(f"modality must be 'depth' or 'color', got {modality!r}")
    params = getattr(base, modality)
    params = type(params)(delta, gamma, params.tau, params.weight)
    return ObjectiveConfig(
        color=params if modality == "color" else base.color,
        depth=params if modality == "depth" else base.depth,
        warmup_steps=base.warmup_steps,
        enable_color=modality == "color",
        enable_depth=modality == "depth",
    )


def sweep(
    deltas: Sequence[float],
    gammas: Sequence[float],
    modality: str,
    scenes: Sequence[Scene],
    run: RunConfig = RunConfig(),
) -> list[SweepCell]:
    """Mean final IoU / fill ratio over ``scenes`` (instance 0) per (delta, gamma).

    Run ``i`` uses init seed ``run.seed + i``.
    """
    cells = []
    for delta in deltas:
        for gamma in gammas:
            obj = modality_objective(run.objective, modality, float(delta), float(gamma))
            ious, fills = [], []
            for i, scene in enumerate(scenes):
                cfg = replace(run, objective=obj, seed=run.seed + i)
                _, trace = optimize_instance(scene, 0, cfg)
                ious.append(trace.final.iou)
                fills.append(trace.final.fill_ratio)
            cells.append(SweepCell(float(delta), float(gamma), math.fsum(ious) / len(ious),
                                   math.fsum(fills) / len(fills), len(ious)))
    return cells
