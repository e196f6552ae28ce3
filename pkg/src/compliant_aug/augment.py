"""Compliant motion augmentation: per-frame IK under event wrenches,
feasibility gating and magnitude-scaling rejection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .events import (
    EventSchedule,
    InteractionEvent,
    SamplerConfig,
    build_schedule,
    collision_profile,
    event_peak_force,
    hand_reference_positions,
    wrench_profile,
)
from .ik import (
    CompliantTargets,
    IKParams,
    IKSolution,
    SolverDivergedError,
    StiffnessCommand,
    build_task_set,
    compliant_targets,
    solve_ik,
)
from .kinematics import com_from, fk_arrays
from .model import Configuration, KinematicModel, MotionClip
from .spatial import SingularityError, Wrench, rot_log

DEFAULT_CMD = StiffnessCommand(200.0, 1.0)


@dataclass(frozen=True)
class FeasibilityLimits:
    max_link_error: float = 0.05  # m, hand vs compliant target
    max_foot_error: float = 0.05  # m, stance foot vs reference
    max_foot_rotation: float = 0.1  # rad, stance foot vs reference
    max_com_error: float = 0.15  # m, CoM xy vs CoP-aware target
    scale_factor: float = 0.8
    min_force: float = 1.0  # N
    max_scalings: int = 64

    def __post_init__(self):
        for name in ("max_link_error", "max_foot_error", "max_foot_rotation", "max_com_error", "min_force"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.scale_factor < 1:
            raise ValueError("scale_factor must lie in (0, 1)")


@dataclass(frozen=True)
class Violation:
    criterion: str
    value: float
    limit: float
    entity: str = ""

    def __str__(self) -> str:
        who = f" [{self.entity}]" if self.entity else ""
        return f"{self.criterion}{who} {self.value:.3f} > {self.limit:g}"


@dataclass(frozen=True)
class AugmentedFrame:
    index: int
    time: float
    q_ref: Configuration
    q_aug: Configuration
    wrench: Wrench = field(default_factory=Wrench.zero)
    link: str | None = None
    cmd: StiffnessCommand = DEFAULT_CMD
    event: int = -1
    status: str = "reference"  # reference | event | rejected
    residuals: dict = field(default_factory=dict)
    link_pos_ref: np.ndarray | None = None
    link_pos_aug: np.ndarray | None = None


@dataclass
class EventOutcome:
    event: int
    status: str  # accepted | accepted-after-scaling | rejected
    scalings: int
    scale: float
    original_peak: float
    final_peak: float
    reasons: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"accepted-after-scaling({self.scalings})" if self.status == "accepted-after-scaling" else self.status


@dataclass
class SimulationResult:
    frames: list[AugmentedFrame]
    failure_frame: int | None = None
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure_frame is None


def feasibility_check(
    model: KinematicModel,
    solution: IKSolution,
    targets: CompliantTargets,
    q_ref: Configuration,
    stance_feet,
    limits: FeasibilityLimits = FeasibilityLimits(),
    fk_ref=None,
) -> list[Violation]:
    """Empty list when the solved frame passes every criterion."""
    fk = fk_arrays(model, solution.q)
    fk_ref = fk_ref or fk_arrays(model, q_ref)
    out = []
    hand_err = float(np.linalg.norm(fk.positions[model.link_index[targets.link]] - targets.p_des))
    if hand_err > limits.max_link_error:
        out.append(Violation("link tracking", hand_err, limits.max_link_error, targets.link))
    for foot in stance_feet:
        i = model.link_index[foot]
        d = float(np.linalg.norm(fk.positions[i] - fk_ref.positions[i]))
        if d > limits.max_foot_error:
            out.append(Violation("stance foot", d, limits.max_foot_error, foot))
        ang = float(np.linalg.norm(rot_log(fk_ref.rotations[i].T @ fk.rotations[i])))
        if ang > limits.max_foot_rotation:
            out.append(Violation("stance foot rotation", ang, limits.max_foot_rotation, foot))
    com_err = float(np.linalg.norm(com_from(model, fk)[:2] - targets.com_target_xy))
    if com_err > limits.max_com_error:
        out.append(Violation("CoM", com_err, limits.max_com_error))
    return out


def simulate_event(
    model: KinematicModel,
    clip: MotionClip,
    event: InteractionEvent,
    params: IKParams = IKParams(),
    limits: FeasibilityLimits = FeasibilityLimits(),
    event_id: int = 0,
    hand_positions=None,
) -> SimulationResult:
    """Solve every frame of ``event`` in time order; stop at the first infeasible frame."""
    pos = hand_reference_positions(clip, model) if hand_positions is None else hand_positions
    h = model.hands.index(event.link)
    li = model.link_index[event.link]
    frames: list[AugmentedFrame] = []
    window = event.frames(clip)
    q_prev = clip.frames[window.start] if len(window) else None
    for k in window:
        q_ref = clip.frames[k]
        stance = clip.in_contact(k)
        if event.kind == "ramp":
            wrench = wrench_profile(event, k * clip.dt)
        else:
            wrench = collision_profile(event, pos[k, h])[0]
        fk_ref = fk_arrays(model, q_ref)
        targets = compliant_targets(model, q_ref, wrench, event.link, event.cmd, stance, fk_ref)
        tasks = build_task_set(model, q_ref, stance, targets, fk_ref)
        try:
            sol = solve_ik(model, q_prev, tasks, params)
        except (SolverDivergedError, SingularityError) as e:
            return SimulationResult(frames, k, [f"solver: {e}"])
        violations = feasibility_check(model, sol, targets, q_ref, stance, limits, fk_ref)
        if violations:
            return SimulationResult(frames, k, violations)
        frames.append(
            AugmentedFrame(
                index=k,
                time=k * clip.dt,
                q_ref=q_ref,
                q_aug=sol.q,
                wrench=wrench,
                link=event.link,
                cmd=event.cmd,
                event=event_id,
                status="event",
                residuals=sol.residuals,
                link_pos_ref=fk_ref.positions[li].copy(),
                link_pos_aug=fk_arrays(model, sol.q).positions[li].copy(),
            )
        )
        q_prev = sol.q
    return SimulationResult(frames)


def rejection_loop(
    event: InteractionEvent,
    simulate: Callable[[InteractionEvent], SimulationResult],
    peak_of: Callable[[InteractionEvent], float],
    limits: FeasibilityLimits = FeasibilityLimits(),
    event_id: int = 0,
) -> tuple[EventOutcome, SimulationResult | None]:
    """Retry ``event`` at geometrically shrinking magnitude until it is feasible
    or its peak force drops below ``limits.min_force``."""
    original = peak_of(event)
    current, k, reasons = event, 0, []
    while True:
        result = simulate(current)
        if result.ok:
            status = "accepted" if k == 0 else "accepted-after-scaling"
            return EventOutcome(event_id, status, k, limits.scale_factor**k, original, peak_of(current), reasons), result
        reasons.append(f"frame {result.failure_frame}: " + "; ".join(str(v) for v in result.violations))
        current = event.scaled(limits.scale_factor ** (k + 1))
        k += 1
        peak = peak_of(current)
        if peak < limits.min_force or k >= limits.max_scalings:
            return EventOutcome(event_id, "rejected", k, limits.scale_factor**k, original, peak, reasons), None


def scalings_to_reject(peak: float, limits: FeasibilityLimits = FeasibilityLimits()) -> int:
    """Number of scalings after which an always-failing event of ``peak`` N is rejected."""
    if peak < limits.min_force:
        return 1
    return max(1, math.ceil(math.log(limits.min_force / peak) / math.log(limits.scale_factor) + 1e-12))


@dataclass
class AugmentResult:
    frames: list[AugmentedFrame]
    outcomes: list[EventOutcome]
    schedule: EventSchedule


def _nominal_commands(clip: MotionClip, schedule: EventSchedule) -> list[StiffnessCommand]:
    """Command carried by frames outside events: the latest event's (first event's before it)."""
    if not len(schedule):
        return [DEFAULT_CMD] * len(clip)
    cmds, events = [], list(schedule)
    j = 0
    for k in range(len(clip)):
        while j + 1 < len(events) and events[j + 1].start <= k * clip.dt + 1e-9:
            j += 1
        cmds.append(events[j].cmd)
    return cmds


def augment_clip(
    model: KinematicModel,
    clip: MotionClip,
    schedule: EventSchedule,
    params: IKParams = IKParams(),
    limits: FeasibilityLimits = FeasibilityLimits(),
    progress: Callable[[int, EventOutcome], None] | None = None,
) -> AugmentResult:
    pos = hand_reference_positions(clip, model)
    cmds = _nominal_commands(clip, schedule)
    frames = [
        AugmentedFrame(index=k, time=k * clip.dt, q_ref=q, q_aug=q, cmd=cmds[k]) for k, q in enumerate(clip.frames)
    ]
    outcomes = []
    for i, ev in enumerate(schedule):
        outcome, result = rejection_loop(
            ev,
            lambda e, i=i: simulate_event(model, clip, e, params, limits, i, pos),
            lambda e: event_peak_force(e, clip, model, pos),
            limits,
            i,
        )
        outcomes.append(outcome)
        if result is None:
            for k in ev.frames(clip):
                frames[k] = AugmentedFrame(
                    index=k, time=k * clip.dt, q_ref=clip.frames[k], q_aug=clip.frames[k],
                    cmd=ev.cmd, event=i, status="rejected",
                )
        else:
            for fr in result.frames:
                frames[fr.index] = fr
        if progress is not None:
            progress(i, outcome)
    return AugmentResult(frames, outcomes, schedule)


def generate(
    model: KinematicModel,
    clip: MotionClip,
    sampler: SamplerConfig = SamplerConfig(),
    params: IKParams = IKParams(),
    limits: FeasibilityLimits = FeasibilityLimits(),
    progress: Callable[[int, EventOutcome], None] | None = None,
) -> AugmentResult:
    """Sample a schedule from ``sampler.seed`` and augment the clip with it."""
    schedule = build_schedule(clip, model, sampler, np.random.default_rng(sampler.seed))
    return augment_clip(model, clip, schedule, params, limits, progress)
