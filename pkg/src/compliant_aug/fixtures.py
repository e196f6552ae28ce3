"""Programmatic test robots and clips.

``humanoid()`` is a 29-DoF, 35 kg biped loosely proportioned like a small
humanoid; ``planar_arm()`` and ``chain()`` are minimal models for oracle
checks. The canonical JSON copies under ``tests/data`` are written from
these by ``scripts/make_fixtures.py``.
"""

from __future__ import annotations

import numpy as np

from .model import Configuration, Joint, KinematicModel, Link, MotionClip
from .spatial import RigidTransform, rot_exp

X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)


def _j(name, parent, child, xyz=(0.0, 0.0, 0.0), axis=Z, limits=(-np.pi, np.pi), kind="revolute"):
    return Joint(name, kind, parent, child, RigidTransform.from_translation(xyz), axis, limits)


def humanoid() -> KinematicModel:
    links = [
        Link("pelvis", 4.5, (0.0, 0.0, 0.0)),
        Link("waist_yaw_link", 0.3),
        Link("waist_roll_link", 0.3),
        Link("torso", 8.0, (0.0, 0.0, 0.2)),
        Link("head", 1.5, (0.0, 0.0, 0.08)),
    ]
    joints = [
        _j("waist_yaw", "pelvis", "waist_yaw_link", (0, 0, 0.1), Z, (-2.6, 2.6)),
        _j("waist_roll", "waist_yaw_link", "waist_roll_link", axis=X, limits=(-0.5, 0.5)),
        _j("waist_pitch", "waist_roll_link", "torso", axis=Y, limits=(-0.5, 0.5)),
        _j("neck", "torso", "head", (0, 0, 0.45), kind="fixed"),
    ]
    for side, s in (("left", 1.0), ("right", -1.0)):
        links += [
            Link(f"{side}_hip_yaw_link", 0.5),
            Link(f"{side}_hip_roll_link", 0.5),
            Link(f"{side}_thigh", 3.0, (0.0, 0.0, -0.18)),
            Link(f"{side}_shin", 2.0, (0.0, 0.0, -0.17)),
            Link(f"{side}_ankle_link", 0.2),
            Link(f"{side}_foot", 0.8, (0.03, 0.0, -0.03)),
            Link(f"{side}_shoulder_pitch_link", 0.3),
            Link(f"{side}_shoulder_roll_link", 0.3),
            Link(f"{side}_upper_arm", 1.2, (0.0, 0.0, -0.12)),
            Link(f"{side}_forearm", 0.8, (0.0, 0.0, -0.1)),
            Link(f"{side}_wrist_roll_link", 0.1),
            Link(f"{side}_wrist_pitch_link", 0.1),
            Link(f"{side}_hand", 0.4, (0.0, 0.0, -0.04)),
        ]
        roll = (-0.5, 0.5)
        sh_roll = (-1.6, 2.2) if s > 0 else (-2.2, 1.6)
        joints += [
            _j(f"{side}_hip_yaw", "pelvis", f"{side}_hip_yaw_link", (0, s * 0.1, -0.05), Z, (-2.7, 2.7)),
            _j(f"{side}_hip_roll", f"{side}_hip_yaw_link", f"{side}_hip_roll_link", axis=X, limits=roll),
            _j(f"{side}_hip_pitch", f"{side}_hip_roll_link", f"{side}_thigh", axis=Y, limits=(-2.5, 2.5)),
            _j(f"{side}_knee", f"{side}_thigh", f"{side}_shin", (0, 0, -0.35), Y, (0.0, 2.8)),
            _j(f"{side}_ankle_pitch", f"{side}_shin", f"{side}_ankle_link", (0, 0, -0.35), Y, (-0.9, 0.5)),
            _j(f"{side}_ankle_roll", f"{side}_ankle_link", f"{side}_foot", axis=X, limits=(-0.26, 0.26)),
            _j(f"{side}_shoulder_pitch", "torso", f"{side}_shoulder_pitch_link", (0, s * 0.18, 0.38), Y, (-3.0, 2.6)),
            _j(f"{side}_shoulder_roll", f"{side}_shoulder_pitch_link", f"{side}_shoulder_roll_link", axis=X, limits=sh_roll),
            _j(f"{side}_shoulder_yaw", f"{side}_shoulder_roll_link", f"{side}_upper_arm", axis=Z, limits=(-2.6, 2.6)),
            _j(f"{side}_elbow", f"{side}_upper_arm", f"{side}_forearm", (0, 0, -0.25), Y, (-2.1, 1.0)),
            _j(f"{side}_wrist_roll", f"{side}_forearm", f"{side}_wrist_roll_link", (0, 0, -0.22), Z, (-2.6, 2.6)),
            _j(f"{side}_wrist_pitch", f"{side}_wrist_roll_link", f"{side}_wrist_pitch_link", axis=Y, limits=(-1.6, 1.6)),
            _j(f"{side}_wrist_yaw", f"{side}_wrist_pitch_link", f"{side}_hand", axis=X, limits=(-1.6, 1.6)),
        ]
    return KinematicModel(
        name="fixture_humanoid",
        base_link="pelvis",
        links=tuple(links),
        joints=tuple(joints),
        hands=("left_hand", "right_hand"),
        feet=("left_foot", "right_foot"),
        keypoints=("torso", "left_forearm", "right_forearm", "left_shin", "right_shin"),
    )


# Standing posture: bent knees keep the legs away from the straight-knee singularity.
STAND_HEIGHT = 0.05 + 0.05 + 2 * 0.35 * np.cos(0.3)


def standing_joints(model: KinematicModel) -> np.ndarray:
    q = np.zeros(model.n_joints)
    ix = model.coord_index
    for side, s in (("left", 1.0), ("right", -1.0)):
        q[ix[f"{side}_hip_pitch"]] = -0.3
        q[ix[f"{side}_knee"]] = 0.6
        q[ix[f"{side}_ankle_pitch"]] = -0.3
        q[ix[f"{side}_shoulder_pitch"]] = 0.2
        q[ix[f"{side}_shoulder_roll"]] = s * 0.2
        q[ix[f"{side}_elbow"]] = -0.9
    return q


def standing_pose(model: KinematicModel) -> Configuration:
    return Configuration(RigidTransform.from_translation((0.0, 0.0, STAND_HEIGHT)), standing_joints(model))


def standing_clip(model: KinematicModel, duration: float = 10.0, dt: float = 0.02) -> MotionClip:
    n = int(round(duration / dt)) + 1
    q = standing_pose(model)
    return MotionClip(dt, (q,) * n, model.feet, np.ones((n, len(model.feet)), dtype=bool))


def swing_clip(model: KinematicModel, duration: float = 10.0, dt: float = 0.02, amplitude: float = 0.4, period: float = 2.0) -> MotionClip:
    """Standing with both arms swinging in anti-phase and a gentle waist twist."""
    n = int(round(duration / dt)) + 1
    base = standing_joints(model)
    ix = model.coord_index
    frames = []
    for k in range(n):
        t = k * dt
        ph = 2 * np.pi * t / period
        q = base.copy()
        q[ix["left_shoulder_pitch"]] += amplitude * np.sin(ph)
        q[ix["right_shoulder_pitch"]] -= amplitude * np.sin(ph)
        q[ix["waist_yaw"]] = 0.15 * np.sin(ph)
        frames.append(Configuration(RigidTransform.from_translation((0.0, 0.0, STAND_HEIGHT)), q))
    return MotionClip(dt, tuple(frames), model.feet, np.ones((n, len(model.feet)), dtype=bool))


def gliding_clip(model: KinematicModel, velocity=(0.3, 0.0, 0.0), duration: float = 3.0, dt: float = 0.02) -> MotionClip:
    """Frozen standing posture translated at constant velocity, no foot contact."""
    n = int(round(duration / dt)) + 1
    q = standing_joints(model)
    v = np.asarray(velocity, dtype=float)
    frames = [
        Configuration(RigidTransform.from_translation(np.array([0.0, 0.0, STAND_HEIGHT]) + v * k * dt), q)
        for k in range(n)
    ]
    return MotionClip(dt, tuple(frames), model.feet, np.zeros((n, len(model.feet)), dtype=bool))


def planar_arm(l1: float = 1.0, l2: float = 1.0) -> KinematicModel:
    """Two revolute joints about z, links along x; ``tip`` sits at the end."""
    return KinematicModel(
        name="planar_arm",
        base_link="base",
        links=(Link("base", 1.0), Link("link1", 1.0, (l1 / 2, 0, 0)), Link("link2", 1.0, (l2 / 2, 0, 0)), Link("tip", 0.0)),
        joints=(
            _j("q1", "base", "link1", (0, 0, 0), Z),
            _j("q2", "link1", "link2", (l1, 0, 0), Z),
            _j("tip_fixed", "link2", "tip", (l2, 0, 0), kind="fixed"),
        ),
        hands=("tip",),
    )


def one_link_arm(length: float = 1.0) -> KinematicModel:
    return KinematicModel(
        name="one_link_arm",
        base_link="base",
        links=(Link("base", 0.0), Link("link1", 1.0, (length / 2, 0, 0)), Link("end", 0.0)),
        joints=(_j("q1", "base", "link1", (0, 0, 0), Z), _j("end_fixed", "link1", "end", (length, 0, 0), kind="fixed")),
        hands=("end",),
        keypoints=("end",),
    )


def chain(n: int, rng: np.random.Generator, prismatic_every: int = 0) -> KinematicModel:
    """Random serial chain with random axes, offsets and link CoMs."""
    links = [Link("l0", float(rng.uniform(0.5, 2.0)), tuple(rng.uniform(-0.1, 0.1, 3)))]
    joints = []
    for k in range(1, n + 1):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        kind = "prismatic" if prismatic_every and k % prismatic_every == 0 else "revolute"
        origin = RigidTransform(rot_exp(rng.uniform(-1, 1, 3)), rng.uniform(-0.4, 0.4, 3))
        links.append(Link(f"l{k}", float(rng.uniform(0.5, 2.0)), tuple(rng.uniform(-0.1, 0.1, 3))))
        joints.append(Joint(f"j{k}", kind, f"l{k - 1}", f"l{k}", origin, tuple(axis), (-np.pi, np.pi)))
    return KinematicModel(name=f"chain{n}", base_link="l0", links=tuple(links), joints=tuple(joints), hands=(f"l{n}",))


def random_configuration(model: KinematicModel, rng: np.random.Generator) -> Configuration:
    lo = np.maximum(model.lower, -np.pi)
    hi = np.minimum(model.upper, np.pi)
    q = rng.uniform(lo, hi)
    return Configuration(RigidTransform(rot_exp(rng.uniform(-1, 1, 3)), rng.uniform(-1, 1, 3)), q)
