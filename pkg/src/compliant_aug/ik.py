"""Spring-law task targets, the weighted task set, and a damped least-squares solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import FKResult, com_from, com_jacobian_from, fk_arrays, frame_jacobians_from
from .model import Configuration, KinematicModel
from .spatial import RigidTransform, Wrench, rot_exp, rot_log, rot_log_batch

GRAVITY = 9.81

# Task weights of the compliance hierarchy.
W_INTERACTION = 5.0
W_FOOT = 2.5
W_COM = 0.1
W_KEYPOINT = 0.01
W_POSTURE = 1e-4

K_T_RANGE = (40.0, 1000.0)
K_R_RANGE = (0.1, 10.0)


class SolverDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class StiffnessCommand:
    k_t: float  # N/m
    k_r: float  # N m / rad

    def __post_init__(self):
        if not (self.k_t > 0 and self.k_r > 0):
            raise ValueError(f"stiffness must be positive, got k_t={self.k_t}, k_r={self.k_r}")

    @property
    def in_training_range(self) -> bool:
        return K_T_RANGE[0] <= self.k_t <= K_T_RANGE[1] and K_R_RANGE[0] <= self.k_r <= K_R_RANGE[1]


@dataclass(frozen=True)
class IKParams:
    damping: float = 1e-4
    max_iterations: int = 100
    tolerance: float = 1e-6
    step_cap: float = 0.2
    max_halvings: int = 8
    fixed_base: bool = False

    def __post_init__(self):
        if self.damping < 0 or self.max_iterations <= 0 or self.tolerance <= 0 or self.step_cap <= 0:
            raise ValueError("IK parameters must be positive (damping may be zero)")
        if self.tolerance >= self.step_cap:
            raise ValueError("tolerance must be smaller than the step cap")


@dataclass(frozen=True)
class IKTask:
    """One weighted term ``weight * ||e||^2``.

    ``kind`` is ``"link_pose"`` (target: RigidTransform, needs ``link``),
    ``"link_position"`` (target: 3-vector), ``"com_xy"`` (target: 2-vector)
    or ``"posture"`` (target: Configuration).
    """

    name: str
    kind: str
    target: object
    weight: float
    link: str | None = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"task {self.name!r}: weight must be > 0")
        if self.kind not in ("link_pose", "link_position", "com_xy", "posture"):
            raise ValueError(f"task {self.name!r}: unknown kind {self.kind!r}")


@dataclass
class IKSolution:
    q: Configuration
    residuals: dict[str, float]
    iterations: int
    converged: bool
    costs: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class CompliantTargets:
    link: str
    p_ref: np.ndarray
    R_ref: np.ndarray
    p_des: np.ndarray
    R_des: np.ndarray
    com_ref_xy: np.ndarray
    com_target_xy: np.ndarray
    cop: np.ndarray
    moment: np.ndarray


def reference_cop(fk: FKResult, model: KinematicModel, stance_feet, com: np.ndarray) -> np.ndarray:
    """Midpoint of stance-foot origins; ground projection of the CoM when airborne."""
    if stance_feet:
        return np.mean([fk.positions[model.link_index[f]] for f in stance_feet], axis=0)
    return np.array([com[0], com[1], 0.0])


def com_shift(moment, mass: float, g: float = GRAVITY) -> np.ndarray:
    """CoM xy offset that balances an external moment about the CoP."""
    m = np.asarray(moment, dtype=float)
    return np.array([-m[1], m[0]]) / (mass * g)


def compliant_targets(
    model: KinematicModel,
    q_ref: Configuration,
    wrench: Wrench,
    link: str,
    cmd: StiffnessCommand,
    stance_feet=(),
    fk_ref: FKResult | None = None,
) -> CompliantTargets:
    if link not in model.hands:
        raise ValueError(f"link {link!r} is not a hand link of the model")
    if not (cmd.k_t > 0 and cmd.k_r > 0):
        raise ValueError("stiffness must be positive")
    fk = fk_ref or fk_arrays(model, q_ref)
    i = model.link_index[link]
    p_ref, R_ref = fk.positions[i], fk.rotations[i]
    p_des = p_ref + wrench.force / cmd.k_t
    R_des = R_ref @ rot_exp(wrench.torque / cmd.k_r)
    com = com_from(model, fk)
    cop = reference_cop(fk, model, stance_feet, com)
    moment = np.cross(p_ref - cop, wrench.force) + wrench.torque
    return CompliantTargets(
        link=link,
        p_ref=p_ref.copy(),
        R_ref=R_ref.copy(),
        p_des=p_des,
        R_des=R_des,
        com_ref_xy=com[:2].copy(),
        com_target_xy=com[:2] + com_shift(moment, model.total_mass),
        cop=cop,
        moment=moment,
    )


def build_task_set(
    model: KinematicModel,
    q_ref: Configuration,
    stance_feet,
    targets: CompliantTargets,
    fk_ref: FKResult | None = None,
) -> list[IKTask]:
    fk = fk_ref or fk_arrays(model, q_ref)

    def ref_pose(name):
        i = model.link_index[name]
        return RigidTransform(fk.rotations[i], fk.positions[i])

    tasks = [
        IKTask(f"interaction:{targets.link}", "link_pose", RigidTransform(targets.R_des, targets.p_des), W_INTERACTION, targets.link)
    ]
    for foot in model.feet:
        if foot in stance_feet:
            tasks.append(IKTask(f"foot:{foot}", "link_pose", ref_pose(foot), W_FOOT, foot))
    tasks.append(IKTask("com", "com_xy", targets.com_target_xy.copy(), W_COM))
    for kp in model.keypoints:
        tasks.append(IKTask(f"keypoint:{kp}", "link_pose", ref_pose(kp), W_KEYPOINT, kp))
    tasks.append(IKTask("posture", "posture", q_ref, W_POSTURE))
    return tasks


# --------------------------------------------------------------------------
# solver


class _TaskStack:
    """Tasks packed into arrays so one FK pass evaluates every error row."""

    def __init__(self, model: KinematicModel, tasks):
        self.model = model
        self.tasks = list(tasks)
        self.pose = [(k, t) for k, t in enumerate(self.tasks) if t.kind == "link_pose"]
        self.pose_idx = np.array([model.link_index[t.link] for _, t in self.pose], dtype=int)
        self.pose_R = np.array([t.target.rotation for _, t in self.pose]).reshape(-1, 3, 3)
        self.pose_p = np.array([t.target.translation for _, t in self.pose]).reshape(-1, 3)
        self.point = [(k, t) for k, t in enumerate(self.tasks) if t.kind == "link_position"]
        self.point_idx = np.array([model.link_index[t.link] for _, t in self.point], dtype=int)
        self.point_p = np.array([np.asarray(t.target, dtype=float) for _, t in self.point]).reshape(-1, 3)
        self.com = [(k, t) for k, t in enumerate(self.tasks) if t.kind == "com_xy"]
        self.posture = [(k, t) for k, t in enumerate(self.tasks) if t.kind == "posture"]
        # row layout follows task order
        sizes = {"link_pose": 6, "link_position": 3, "com_xy": 2, "posture": model.n_dof}
        self.offsets = np.cumsum([0] + [sizes[t.kind] for t in self.tasks])
        self.row_weight = np.concatenate(
            [np.full(sizes[t.kind], np.sqrt(t.weight)) for t in self.tasks]
        ) if self.tasks else np.zeros(0)

    def evaluate(self, q: Configuration, jacobians: bool = True):
        """Unweighted stacked error and (optionally) Jacobian."""
        model, off = self.model, self.offsets
        fk = fk_arrays(model, q)
        e = np.empty(off[-1])
        J = np.zeros((off[-1], model.n_dof)) if jacobians else None
        if self.pose:
            rot = rot_log_batch(self.pose_R @ fk.rotations[self.pose_idx].transpose(0, 2, 1))
            pos = self.pose_p - fk.positions[self.pose_idx]
            Js = frame_jacobians_from(model, fk, self.pose_idx) if jacobians else None
            for n, (k, _) in enumerate(self.pose):
                e[off[k] : off[k] + 3] = rot[n]
                e[off[k] + 3 : off[k] + 6] = pos[n]
                if jacobians:
                    J[off[k] : off[k] + 6] = Js[n]
        if self.point:
            pos = self.point_p - fk.positions[self.point_idx]
            Js = frame_jacobians_from(model, fk, self.point_idx) if jacobians else None
            for n, (k, _) in enumerate(self.point):
                e[off[k] : off[k] + 3] = pos[n]
                if jacobians:
                    J[off[k] : off[k] + 3] = Js[n, 3:6]
        if self.com:
            c = com_from(model, fk)[:2]
            Jc = com_jacobian_from(model, fk)[:2] if jacobians else None
            for k, t in self.com:
                e[off[k] : off[k] + 2] = np.asarray(t.target, dtype=float) - c
                if jacobians:
                    J[off[k] : off[k] + 2] = Jc
        for k, t in self.posture:
            ref: Configuration = t.target
            e[off[k] : off[k] + 3] = ref.base.translation - q.base.translation
            e[off[k] + 3 : off[k] + 6] = rot_log(ref.base.rotation @ q.base.rotation.T)
            e[off[k] + 6 : off[k + 1]] = ref.joints - q.joints
            if jacobians:
                J[off[k] : off[k + 1]] = np.eye(model.n_dof)
        return e, J

    def cost(self, e: np.ndarray) -> float:
        we = self.row_weight * e
        return float(we @ we)

    def residuals(self, e: np.ndarray) -> dict[str, float]:
        off = self.offsets
        return {t.name: float(np.linalg.norm(e[off[k] : off[k + 1]])) for k, t in enumerate(self.tasks)}


def task_errors(model: KinematicModel, q: Configuration, tasks, jacobians: bool = True):
    """Per-task (error, Jacobian) pairs; errors are target minus current."""
    stack = _TaskStack(model, tasks)
    e, J = stack.evaluate(q, jacobians)
    off = stack.offsets
    return [(e[off[k] : off[k + 1]], None if J is None else J[off[k] : off[k + 1]]) for k in range(len(stack.tasks))]


def weighted_cost(tasks, errors) -> float:
    return float(sum(t.weight * float(e @ e) for t, (e, _) in zip(tasks, errors)))


def _clamp(model: KinematicModel, q: Configuration) -> Configuration:
    clamped = np.clip(q.joints, model.lower, model.upper)
    if np.array_equal(clamped, q.joints):
        return q
    return Configuration(q.base, clamped)


def solve_ik(model: KinematicModel, q_init: Configuration, tasks, params: IKParams = IKParams()) -> IKSolution:
    """Iterative damped least squares on the weight-scaled task stack.

    Each step solves ``(J^T W J + damping I) dq = J^T W e``, caps the largest
    component at ``step_cap``, clamps to joint limits and is halved (up to
    ``max_halvings`` times) until the weighted cost does not increase.
    """
    stack = _TaskStack(model, tasks)
    w = stack.row_weight
    q = _clamp(model, q_init)
    e, J = stack.evaluate(q)
    cost = stack.cost(e)
    costs = [cost]
    converged = False
    it = 0
    cols = slice(6, None) if params.fixed_base else slice(None)
    for it in range(1, params.max_iterations + 1):
        A = w[:, None] * J[:, cols]
        b = w * e
        H = A.T @ A
        H[np.diag_indices_from(H)] += params.damping
        dq = np.linalg.solve(H, A.T @ b)
        if not np.all(np.isfinite(dq)):
            raise SolverDivergedError(f"non-finite step at iteration {it}")
        if params.fixed_base:
            dq = np.concatenate([np.zeros(6), dq])
        peak = float(np.max(np.abs(dq)))
        if peak > params.step_cap:
            dq *= params.step_cap / peak
        accepted = False
        for _ in range(params.max_halvings + 1):
            q_new = _clamp(model, q.integrate(dq))
            e_new, _ = stack.evaluate(q_new, jacobians=False)
            new_cost = stack.cost(e_new)
            if not np.isfinite(new_cost):
                raise SolverDivergedError(f"non-finite cost at iteration {it}")
            if new_cost <= cost:
                accepted = True
                break
            dq = dq * 0.5
        if not accepted:
            converged = bool(np.linalg.norm(dq) < params.tolerance)
            break
        step = np.linalg.norm(np.concatenate([q_new.base.translation - q.base.translation, dq[3:6], q_new.joints - q.joints]))
        q, cost, e = q_new, new_cost, e_new
        costs.append(cost)
        if step < params.tolerance:
            converged = True
            break
        e, J = stack.evaluate(q)
    residuals = stack.residuals(e)
    return IKSolution(q=q, residuals=residuals, iterations=it, converged=converged, costs=costs)
