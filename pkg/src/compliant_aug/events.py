"""Interaction event sampling: ramped wrenches and simulated collisions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .forcefield import EnvironmentStiffness, collision_wrench
from .ik import StiffnessCommand
from .kinematics import fk_arrays
from .model import KinematicModel, MotionClip
from .spatial import Wrench


@dataclass(frozen=True)
class SamplerConfig:
    k_t_range: tuple[float, float] = (40.0, 1000.0)
    k_r_range: tuple[float, float] = (0.1, 10.0)
    k_env_linear_range: tuple[float, float] = (10.0, 1000.0)
    k_env_angular_range: tuple[float, float] = (0.1, 10.0)
    max_force: float = 140.0
    max_torque: float = 10.0
    max_displacement: float = 0.7
    max_angular_displacement: float = 2.0
    rest_range: tuple[float, float] = (0.5, 1.5)
    hold_range: tuple[float, float] = (0.5, 1.0)
    speed_range: tuple[float, float] = (0.1, 1.0)
    # collision onset: per-frame probability dt * (gain * hand speed + base rate)
    onset_velocity_gain: float = 2.0  # s/m (per unit hand speed)
    onset_base_rate: float = 0.1  # 1/s
    collision_fraction: float = 0.5
    collision_duration_range: tuple[float, float] = (0.5, 1.5)
    seed: int = 0

    def __post_init__(self):
        for name in ("k_t_range", "k_r_range", "k_env_linear_range", "k_env_angular_range",
                     "rest_range", "hold_range", "speed_range", "collision_duration_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name}: need 0 < lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name in ("max_force", "max_torque", "max_displacement", "max_angular_displacement"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.onset_velocity_gain < 0 or self.onset_base_rate < 0:
            raise ValueError("onset rates must be non-negative")
        if not 0.0 <= self.collision_fraction <= 1.0:
            raise ValueError("collision_fraction must be in [0, 1]")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class InteractionEvent:
    kind: str  # "ramp" | "collision"
    link: str
    start: float
    cmd: StiffnessCommand
    k_env: EnvironmentStiffness
    # ramp
    peak: Wrench | None = None
    ramp_up: float = 0.0
    hold: float = 0.0
    ramp_down: float = 0.0
    # collision
    anchor: np.ndarray | None = None
    normal: np.ndarray | None = None
    onset_frame: int = -1
    duration: float = 0.0
    scale: float = 1.0

    @property
    def span(self) -> float:
        if self.kind == "ramp":
            return self.ramp_up + self.hold + self.ramp_down
        return self.duration

    @property
    def end(self) -> float:
        return self.start + self.span

    def scaled(self, factor: float) -> "InteractionEvent":
        """Shrink the event: peak wrench for ramps, duration for collisions."""
        if self.kind == "ramp":
            return replace(self, peak=self.peak.scaled(factor), scale=self.scale * factor)
        return replace(self, duration=self.duration * factor, scale=self.scale * factor)

    def frames(self, clip: MotionClip) -> range:
        """Clip frames whose timestamps fall inside the event window."""
        eps = 1e-9
        first = int(np.ceil(self.start / clip.dt - eps))
        last = int(np.floor(self.end / clip.dt + eps))
        return range(max(first, 0), min(last, len(clip) - 1) + 1)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "link": self.link,
            "start": self.start,
            "k_t": self.cmd.k_t,
            "k_r": self.cmd.k_r,
            "k_env_linear": self.k_env.linear,
            "k_env_angular": self.k_env.angular,
            "scale": self.scale,
        }
        if self.kind == "ramp":
            d.update(peak_force=self.peak.force.tolist(), peak_torque=self.peak.torque.tolist(),
                     ramp_up=self.ramp_up, hold=self.hold, ramp_down=self.ramp_down)
        else:
            d.update(anchor=self.anchor.tolist(), normal=self.normal.tolist(),
                     onset_frame=self.onset_frame, duration=self.duration)
        return d


@dataclass(frozen=True)
class EventSchedule:
    events: tuple[InteractionEvent, ...] = ()
    rests: tuple[float, ...] = ()

    def __post_init__(self):
        for a, b in zip(self.events, self.events[1:]):
            if b.start < a.end:
                raise ValueError(f"overlapping events at t={b.start:.3f}")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def to_dict(self) -> dict:
        return {"events": [e.to_dict() for e in self.events], "rests": list(self.rests)}


# --------------------------------------------------------------------------
# primitives


def sample_log_uniform(lo: float, hi: float, rng: np.random.Generator, size=None):
    if not (0 < lo <= hi):
        raise ValueError(f"log-uniform range needs 0 < lo <= hi, got {(lo, hi)}")
    if lo == hi:
        return lo if size is None else np.full(size, float(lo))
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def displacement_range(k_t: float, cfg: SamplerConfig) -> tuple[float, float]:
    """Translational displacement range allowed by the force and displacement limits."""
    return 0.0, min(cfg.max_displacement, cfg.max_force / k_t)


def angular_range(k_r: float, cfg: SamplerConfig) -> tuple[float, float]:
    return 0.0, min(cfg.max_angular_displacement, cfg.max_torque / k_r)


def ramp_duration(displacement: float, speed: float, dt: float = 0.0) -> float:
    return max(displacement / speed, dt)


def _sample_stiffness(cfg: SamplerConfig, rng):
    cmd = StiffnessCommand(float(sample_log_uniform(*cfg.k_t_range, rng)), float(sample_log_uniform(*cfg.k_r_range, rng)))
    env = EnvironmentStiffness(
        float(sample_log_uniform(*cfg.k_env_linear_range, rng)),
        float(sample_log_uniform(*cfg.k_env_angular_range, rng)),
    )
    return cmd, env


def sample_ramp_event(clip: MotionClip, model: KinematicModel, t_start: float, cfg: SamplerConfig, rng) -> InteractionEvent:
    if not 0 <= t_start <= clip.duration:
        raise ValueError(f"start time {t_start} outside the clip")
    link = model.hands[int(rng.integers(len(model.hands)))]
    cmd, env = _sample_stiffness(cfg, rng)
    d = rng.uniform(*displacement_range(cmd.k_t, cfg))
    theta = rng.uniform(*angular_range(cmd.k_r, cfg))
    force = cmd.k_t * d * unit_vector(rng)
    torque = cmd.k_r * theta * unit_vector(rng)
    speed = rng.uniform(*cfg.speed_range)
    ramp = ramp_duration(d, speed, clip.dt)
    hold = rng.uniform(*cfg.hold_range)
    return InteractionEvent("ramp", link, float(t_start), cmd, env, Wrench(force, torque), ramp, hold, ramp)


def wrench_profile(event: InteractionEvent, t: float) -> Wrench:
    """Ramp-hold-ramp envelope of the peak wrench."""
    if event.kind != "ramp":
        raise ValueError("wrench_profile applies to ramp events")
    tau = t - event.start
    if tau <= 0 or tau >= event.span:
        return Wrench.zero()
    if tau < event.ramp_up:
        s = tau / event.ramp_up
    elif tau <= event.ramp_up + event.hold:
        s = 1.0
    else:
        s = (event.span - tau) / event.ramp_down
    return event.peak.scaled(s)


def hand_reference_positions(clip: MotionClip, model: KinematicModel) -> np.ndarray:
    """(frames, hands, 3) world positions of every hand link along the clip."""
    idx = [model.link_index[h] for h in model.hands]
    return np.array([fk_arrays(model, q).positions[idx] for q in clip.frames])


def _velocities(positions: np.ndarray, dt: float) -> np.ndarray:
    n = len(positions)
    lo = np.maximum(np.arange(n) - 1, 0)
    hi = np.minimum(np.arange(n) + 1, n - 1)
    return (positions[hi] - positions[lo]) / ((hi - lo) * dt)[:, None, None]


def onset_probabilities(clip: MotionClip, model: KinematicModel, cfg: SamplerConfig, hand_positions=None) -> np.ndarray:
    """Per-frame, per-hand collision onset probability ``min(1, dt (a |v| + b))``."""
    pos = hand_reference_positions(clip, model) if hand_positions is None else hand_positions
    speed = np.linalg.norm(_velocities(pos, clip.dt), axis=-1)
    return np.minimum(1.0, clip.dt * (cfg.onset_velocity_gain * speed + cfg.onset_base_rate))


def sample_collision_onsets(clip, model, cfg, rng, schedule: EventSchedule | None = None, probabilities=None) -> list[tuple[int, str]]:
    p = onset_probabilities(clip, model, cfg) if probabilities is None else probabilities
    hits = rng.random(p.shape) < p
    if schedule is not None:
        for ev in schedule:
            r = ev.frames(clip)
            hits[r.start : r.stop] = False
    frames, hands = np.nonzero(hits)
    return [(int(k), model.hands[h]) for k, h in zip(frames, hands)]


def sample_collision_event(clip, model, frame: int, link: str, cfg: SamplerConfig, rng, hand_positions=None) -> InteractionEvent:
    """Collision anchored where the reference hand is at ``frame``, facing its motion."""
    pos = hand_reference_positions(clip, model) if hand_positions is None else hand_positions
    h = model.hands.index(link)
    cmd, env = _sample_stiffness(cfg, rng)
    v = _velocities(pos, clip.dt)[frame, h]
    speed = np.linalg.norm(v)
    normal = v / speed if speed > 1e-9 else unit_vector(rng)
    duration = rng.uniform(*cfg.collision_duration_range)
    return InteractionEvent(
        "collision", link, frame * clip.dt, cmd, env,
        anchor=pos[frame, h].copy(), normal=normal, onset_frame=frame, duration=duration,
    )


def collision_profile(event: InteractionEvent, hand_ref_position) -> tuple[Wrench, float]:
    """Contact wrench and penetration depth for a reference hand position."""
    w, eq = collision_wrench(hand_ref_position, event.anchor, event.normal, event.cmd.k_t, event.k_env.linear)
    return w, eq.robot_displacement + eq.env_displacement


def event_peak_force(event: InteractionEvent, clip: MotionClip, model: KinematicModel, hand_positions=None) -> float:
    """Largest force magnitude the event would demand over its window."""
    if event.kind == "ramp":
        return float(np.linalg.norm(event.peak.force))
    pos = hand_reference_positions(clip, model) if hand_positions is None else hand_positions
    h = model.hands.index(event.link)
    peak = 0.0
    for k in event.frames(clip):
        w, _ = collision_profile(event, pos[k, h])
        peak = max(peak, float(np.linalg.norm(w.force)))
    return peak


def build_schedule(clip: MotionClip, model: KinematicModel, cfg: SamplerConfig, rng, hand_positions=None) -> EventSchedule:
    """Alternate random rests and events until the clip runs out."""
    pos = hand_reference_positions(clip, model) if hand_positions is None else hand_positions
    probs = onset_probabilities(clip, model, cfg, pos)
    events, rests = [], []
    t = 0.0
    while True:
        rest = rng.uniform(*cfg.rest_range)
        t += rest
        if t >= clip.duration:
            break
        if rng.random() < cfg.collision_fraction:
            first = int(np.ceil(t / clip.dt - 1e-9))
            hits = rng.random(probs[first:].shape) < probs[first:]
            found = np.argwhere(hits)
            if len(found) == 0:
                break
            k, h = int(found[0, 0]) + first, int(found[0, 1])
            ev = sample_collision_event(clip, model, k, model.hands[h], cfg, rng, pos)
        else:
            ev = sample_ramp_event(clip, model, t, cfg, rng)
        if ev.end > clip.duration:
            break
        events.append(ev)
        rests.append(rest)
        t = ev.end
    return EventSchedule(tuple(events), tuple(rests))
