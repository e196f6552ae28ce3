"""Pure-function RL episode artifacts: observation assembly, reward terms,
and reference-state initialization / termination on augmented references.

Observation vector, in order:

``proprioception`` (2n + 6) x history
    joint positions relative to default (n), joint velocities (n), base
    angular velocity in the base frame (3), gravity direction in the base frame (3).
``reference`` (n + 10 + n_feet) x (past + 1 + future)
    reference joint positions (n), root height (1), gravity direction in the
    reference base frame (3), reference base linear (3) and angular (3)
    velocity in the reference base frame, foot contact flags (n_feet).
    Points are ordered past (oldest first), current, then ``future`` points
    at ``horizon * j / future`` seconds ahead, clamped to the last frame.
``log_stiffness`` 2 x history
    ln k_t, ln k_r.
``actions`` n x history

History blocks are ordered oldest first. Histories shorter than the
configured depth are left-padded by repeating the oldest entry.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ik import StiffnessCommand, compliant_targets
from .kinematics import fk_arrays
from .model import Configuration, KinematicModel, MotionClip
from .spatial import Wrench, rot_log, rot_log_batch

GRAVITY_DIR = np.array([0.0, 0.0, -1.0])


# --------------------------------------------------------------------------
# observations


@dataclass(frozen=True)
class ObservationBlock:
    name: str
    width: int
    depth: int
    fields: tuple[tuple[str, int], ...] = ()

    @property
    def size(self) -> int:
        return self.width * self.depth


@dataclass(frozen=True)
class ObservationLayout:
    blocks: tuple[ObservationBlock, ...]

    @property
    def total_width(self) -> int:
        return sum(b.size for b in self.blocks)

    def offsets(self) -> dict[str, tuple[int, int]]:
        out, start = {}, 0
        for b in self.blocks:
            out[b.name] = (start, start + b.size)
            start += b.size
        return out

    def to_schema(self) -> dict:
        """Machine-readable description for binding an external trainer."""
        offs = self.offsets()
        return {
            "total_width": self.total_width,
            "history_order": "oldest_first",
            "blocks": [
                {
                    "name": b.name,
                    "offset": offs[b.name][0],
                    "width": b.width,
                    "depth": b.depth,
                    "fields": [{"name": n, "width": w} for n, w in b.fields],
                }
                for b in self.blocks
            ],
        }


@dataclass(frozen=True)
class ObservationConfig:
    history: int = 3
    reference_past: int = 3
    reference_future: int = 20
    horizon: float = 1.0  # s

    def __post_init__(self):
        if self.history < 1 or self.reference_past < 0 or self.reference_future < 0:
            raise ValueError("history depth must be >= 1 and horizon counts >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")


def observation_layout(n_joints: int, n_feet: int, cfg: ObservationConfig = ObservationConfig()) -> ObservationLayout:
    n = n_joints
    proprio = (("joint_pos_rel_default", n), ("joint_vel", n), ("base_ang_vel", 3), ("projected_gravity", 3))
    reference = (("ref_joint_pos", n), ("root_height", 1), ("gravity", 3), ("base_lin_vel", 3),
                 ("base_ang_vel", 3), ("foot_contacts", n_feet))
    return ObservationLayout((
        ObservationBlock("proprioception", 2 * n + 6, cfg.history, proprio),
        ObservationBlock("reference", n + 10 + n_feet, cfg.reference_past + 1 + cfg.reference_future, reference),
        ObservationBlock("log_stiffness", 2, cfg.history, (("log_k_t", 1), ("log_k_r", 1))),
        ObservationBlock("actions", n, cfg.history, (("action", n),)),
    ))


@dataclass(frozen=True)
class RobotState:
    """Proprioceptive state at one control step."""

    q: Configuration
    joint_velocity: np.ndarray
    base_angular_velocity: np.ndarray  # base frame

    @classmethod
    def from_configurations(cls, q: Configuration, q_prev: Configuration, dt: float) -> "RobotState":
        R, R_prev = q.base.rotation, q_prev.base.rotation
        omega_world = rot_log(R @ R_prev.T) / dt
        return cls(q, (q.joints - q_prev.joints) / dt, R.T @ omega_world)


def _pad(history, depth: int, name: str) -> list:
    history = list(history)
    if not history:
        raise ValueError(f"{name} history must hold at least one entry")
    history = history[-depth:]
    return [history[0]] * (depth - len(history)) + history


def reference_indices(clip: MotionClip, index: int, cfg: ObservationConfig = ObservationConfig()) -> list[int]:
    last = len(clip) - 1
    past = [max(index - j, 0) for j in range(cfg.reference_past, 0, -1)]
    future = [min(index + int(round(cfg.horizon * j / cfg.reference_future / clip.dt)), last)
              for j in range(1, cfg.reference_future + 1)]
    return past + [index] + future


def _reference_features(clip: MotionClip, k: int) -> np.ndarray:
    n = len(clip)
    lo, hi = max(k - 1, 0), min(k + 1, n - 1)
    q, a, b = clip.frames[k], clip.frames[lo], clip.frames[hi]
    R = q.base.rotation
    span = (hi - lo) * clip.dt
    lin = (b.base.translation - a.base.translation) / span
    ang = rot_log(b.base.rotation @ a.base.rotation.T) / span
    return np.concatenate([
        q.joints,
        [q.base.translation[2]],
        R.T @ GRAVITY_DIR,
        R.T @ lin,
        R.T @ ang,
        clip.contacts[k].astype(float),
    ])


def assemble_observation(
    model: KinematicModel,
    clip: MotionClip,
    index: int,
    states,
    commands,
    actions,
    cfg: ObservationConfig = ObservationConfig(),
) -> tuple[np.ndarray, ObservationLayout]:
    """Flat observation vector for clip frame ``index``.

    ``clip`` must be the original reference clip; the policy never sees the
    augmented target. ``states``, ``commands`` and ``actions`` are histories
    with the most recent entry last.
    """
    if not 0 <= index < len(clip):
        raise IndexError(f"frame index {index} outside [0, {len(clip) - 1}]")
    layout = observation_layout(model.n_joints, len(clip.feet), cfg)
    parts = []
    for s in _pad(states, cfg.history, "state"):
        R = s.q.base.rotation
        parts += [s.q.joints - model.default_q, s.joint_velocity, s.base_angular_velocity, R.T @ GRAVITY_DIR]
    parts += [_reference_features(clip, k) for k in reference_indices(clip, index, cfg)]
    for c in _pad(commands, cfg.history, "command"):
        parts.append([math.log(c.k_t), math.log(c.k_r)])
    for a in _pad(actions, cfg.history, "action"):
        a = np.asarray(a, dtype=float)
        if a.shape != (model.n_joints,):
            raise ValueError(f"action width {a.shape} does not match {model.n_joints} joints")
        parts.append(a)
    obs = np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])
    assert obs.size == layout.total_width
    return obs, layout


# --------------------------------------------------------------------------
# rewards


@dataclass(frozen=True)
class RewardConfig:
    # compliance
    w_link_position: float = 3.0
    w_link_orientation: float = 3.0
    w_force: float = 2.0
    w_torque: float = 2.0
    # tracking of the augmented reference
    w_keypoint_position: float = 2.0
    w_keypoint_orientation: float = 2.0
    w_base_orientation: float = 0.5
    w_base_lin_vel: float = 0.5
    w_base_ang_vel: float = 0.5
    # stability and regularization
    alive: float = 1.5
    w_joint_limits: float = -10.0
    w_foot_sliding: float = -0.005
    w_joint_velocity: float = -2.8e-4
    w_action_rate: float = -0.01
    w_stance_joint_motion: float = -0.4
    # kernel widths
    sigma_position: float = 0.25  # m
    sigma_orientation: float = 0.5  # rad
    sigma_force: float = 25.0  # N
    sigma_torque: float = 2.5  # N m
    sigma_lin_vel: float = 0.5  # m/s
    sigma_ang_vel: float = 1.0  # rad/s
    dt: float = 0.02  # s

    def __post_init__(self):
        for name, v in asdict(self).items():
            if name.startswith("sigma") or name == "dt":
                if not v > 0:
                    raise ValueError(f"{name} must be positive")
        for name in ("w_joint_limits", "w_foot_sliding", "w_joint_velocity", "w_action_rate", "w_stance_joint_motion"):
            if getattr(self, name) > 0:
                raise ValueError(f"{name} is a penalty weight and must be <= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RewardBreakdown:
    terms: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))


def _kernel(weight: float, sq_err: float, sigma: float) -> float:
    return weight * math.exp(-sq_err / (sigma * sigma))


def compute_rewards(
    model: KinematicModel,
    q: Configuration,
    q_prev: Configuration,
    action,
    action_prev,
    frame,
    applied: Wrench,
    frame_prev=None,
    stance_feet=(),
    cfg: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """Weighted reward terms for one control step.

    ``frame`` is the dataset frame being tracked; keypoint and base terms
    compare against its ``q_aug``. The compliance pose terms compare the
    forced link against the spring-law target of the frame wrench and are at
    full weight when no link is forced. ``frame_prev`` supplies the augmented
    base velocity (zero when omitted).
    """
    dt = cfg.dt
    fk = fk_arrays(model, q)
    fk_aug = fk_arrays(model, frame.q_aug)
    terms = {}

    # compliance
    if frame.link is not None:
        tgt = compliant_targets(model, frame.q_ref, frame.wrench, frame.link, frame.cmd)
        i = model.link_index[frame.link]
        pos_err = float(np.sum((fk.positions[i] - tgt.p_des) ** 2))
        rot_err = float(np.sum(rot_log(tgt.R_des.T @ fk.rotations[i]) ** 2))
    else:
        pos_err = rot_err = 0.0
    terms["link_position"] = _kernel(cfg.w_link_position, pos_err, cfg.sigma_position)
    terms["link_orientation"] = _kernel(cfg.w_link_orientation, rot_err, cfg.sigma_orientation)
    terms["force"] = _kernel(cfg.w_force, float(np.sum((applied.force - frame.wrench.force) ** 2)), cfg.sigma_force)
    terms["torque"] = _kernel(cfg.w_torque, float(np.sum((applied.torque - frame.wrench.torque) ** 2)), cfg.sigma_torque)

    # tracking of q_aug
    kp = [model.link_index[k] for k in model.keypoints]
    if kp:
        kp_pos = float(np.mean(np.sum((fk.positions[kp] - fk_aug.positions[kp]) ** 2, axis=1)))
        rel = np.transpose(fk_aug.rotations[kp], (0, 2, 1)) @ fk.rotations[kp]
        kp_rot = float(np.mean(np.sum(rot_log_batch(rel) ** 2, axis=1)))
    else:
        kp_pos = kp_rot = 0.0
    terms["keypoint_position"] = _kernel(cfg.w_keypoint_position, kp_pos, cfg.sigma_position)
    terms["keypoint_orientation"] = _kernel(cfg.w_keypoint_orientation, kp_rot, cfg.sigma_orientation)
    base_rot = float(np.sum(rot_log(frame.q_aug.base.rotation.T @ q.base.rotation) ** 2))
    terms["base_orientation"] = _kernel(cfg.w_base_orientation, base_rot, cfg.sigma_orientation)
    aug_prev = frame.q_aug if frame_prev is None else frame_prev.q_aug
    lin = (q.base.translation - q_prev.base.translation) / dt
    lin_aug = (frame.q_aug.base.translation - aug_prev.base.translation) / dt
    ang = rot_log(q.base.rotation @ q_prev.base.rotation.T) / dt
    ang_aug = rot_log(frame.q_aug.base.rotation @ aug_prev.base.rotation.T) / dt
    terms["base_lin_vel"] = _kernel(cfg.w_base_lin_vel, float(np.sum((lin - lin_aug) ** 2)), cfg.sigma_lin_vel)
    terms["base_ang_vel"] = _kernel(cfg.w_base_ang_vel, float(np.sum((ang - ang_aug) ** 2)), cfg.sigma_ang_vel)

    # stability and regularization
    terms["alive"] = cfg.alive
    excess = np.maximum(model.lower - q.joints, 0.0) + np.maximum(q.joints - model.upper, 0.0)
    terms["joint_limits"] = cfg.w_joint_limits * float(np.sum(excess**2))
    qd = (q.joints - q_prev.joints) / dt
    fk_prev = fk_arrays(model, q_prev) if stance_feet else None
    sliding = motion = 0.0
    for foot in stance_feet:
        i = model.link_index[foot]
        v = (fk.positions[i] - fk_prev.positions[i])[:2] / dt
        sliding += float(v @ v)
        motion += float(np.sum(qd[model.leg_joints(foot)] ** 2))
    terms["foot_sliding"] = cfg.w_foot_sliding * sliding
    terms["joint_velocity"] = cfg.w_joint_velocity * float(qd @ qd)
    da = np.asarray(action, dtype=float) - np.asarray(action_prev, dtype=float)
    terms["action_rate"] = cfg.w_action_rate * float(da @ da)
    terms["stance_joint_motion"] = cfg.w_stance_joint_motion * motion
    return RewardBreakdown(terms)


# --------------------------------------------------------------------------
# reference state initialization and termination


@dataclass(frozen=True)
class RsiCandidate:
    index: int
    q: Configuration
    wrench: Wrench
    link: str | None
    cmd: StiffnessCommand


@dataclass
class EpisodeAnchors:
    model: KinematicModel
    candidates: list[RsiCandidate]
    references: dict[int, Configuration]
    threshold: float

    def keypoint_deviation(self, q: Configuration, index: int) -> float:
        kp = [self.model.link_index[k] for k in self.model.keypoints]
        if not kp:
            return 0.0
        a = fk_arrays(self.model, q).positions[kp]
        b = fk_arrays(self.model, self.references[index]).positions[kp]
        return float(np.max(np.linalg.norm(a - b, axis=1)))

    def should_terminate(self, q: Configuration, index: int) -> bool:
        """True when some keypoint strays beyond the threshold from ``q_aug``."""
        return self.keypoint_deviation(q, index) > self.threshold

    def sample(self, rng: np.random.Generator) -> RsiCandidate:
        return self.candidates[int(rng.integers(len(self.candidates)))]


def episode_anchors(model: KinematicModel, frames, threshold: float = 0.5) -> EpisodeAnchors:
    """RSI candidates are all frames not belonging to a rejected event; each
    carries ``q_aug`` as initial posture and the frame wrench as the concurrent load."""
    if not threshold > 0:
        raise ValueError("termination threshold must be positive")
    frames = list(frames)
    cands = [RsiCandidate(fr.index, fr.q_aug, fr.wrench, fr.link, fr.cmd) for fr in frames if fr.status != "rejected"]
    return EpisodeAnchors(model, cands, {fr.index: fr.q_aug for fr in frames}, threshold)
