"""Virtual spring interaction law and the series-spring collision equilibrium."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import RigidTransform, Wrench, rot_log


@dataclass(frozen=True)
class EnvironmentStiffness:
    linear: float  # N/m
    angular: float  # N m / rad

    def __post_init__(self):
        if not (self.linear > 0 and self.angular > 0):
            raise ValueError("environment stiffness must be positive")


def forcefield_wrench(link: RigidTransform, setpoint: RigidTransform, k_env: EnvironmentStiffness) -> Wrench:
    """Wrench pulling ``link`` toward ``setpoint``; torque in world frame."""
    force = k_env.linear * (setpoint.translation - link.translation)
    torque = k_env.angular * (link.rotation @ rot_log(link.rotation.T @ setpoint.rotation))
    return Wrench(force, torque)


@dataclass(frozen=True)
class SpringEquilibrium:
    force: float
    robot_displacement: float
    env_displacement: float


def series_spring_equilibrium(penetration: float, k_cmd: float, k_env: float) -> SpringEquilibrium:
    """Quasi-static split of a penetration between the robot and environment springs."""
    if penetration < 0:
        raise ValueError("penetration must be >= 0")
    if not (k_cmd > 0 and k_env > 0):
        raise ValueError("stiffnesses must be positive")
    force = penetration * k_cmd * k_env / (k_cmd + k_env)
    # the softer spring takes at least half the penetration, so subtracting it
    # from the penetration is exact and the two parts sum back bit-for-bit
    if k_cmd <= k_env:
        d_robot = min(force / k_cmd, penetration)
        return SpringEquilibrium(force, d_robot, penetration - d_robot)
    d_env = min(force / k_env, penetration)
    return SpringEquilibrium(force, penetration - d_env, d_env)


def collision_wrench(ref_point, anchor, normal, cmd_k_t: float, env_k: float) -> tuple[Wrench, SpringEquilibrium]:
    """Contact wrench for a reference point that has moved past ``anchor`` along ``normal``.

    The returned force pushes back against ``normal``; torque is zero.
    """
    normal = np.asarray(normal, dtype=float)
    depth = max(0.0, float((np.asarray(ref_point, dtype=float) - anchor) @ normal))
    eq = series_spring_equilibrium(depth, cmd_k_t, env_k)
    return Wrench(-eq.force * normal, np.zeros(3)), eq
