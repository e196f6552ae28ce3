"""Forward kinematics, world-frame Jacobians and center of mass.

Generalized coordinates are ordered ``[base linear (3), base angular (3),
joints (n)]``. Base angular coordinates are world-frame rotation increments
(``R <- exp(dw) R``), matching :meth:`Configuration.integrate`. Jacobian rows
are ``[angular (3), linear (3)]``, expressed in the world frame about the
link origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Configuration, KinematicModel, ModelError
from .spatial import RigidTransform, skew


@dataclass(frozen=True)
class FKResult:
    rotations: np.ndarray  # (links, 3, 3)
    positions: np.ndarray  # (links, 3)
    axes: np.ndarray  # (joints, 3) world joint axes
    anchors: np.ndarray  # (joints, 3) world joint frame origins
    base_position: np.ndarray


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product; avoids np.cross overhead on small arrays."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


class _Tree:
    """Joint data packed into arrays in parent-before-child order."""

    def __init__(self, model: KinematicModel):
        order = model.topo_joints
        joints = [model.joints[k] for k in order]
        self.parent = [model.link_index[j.parent] for j in joints]
        self.child = [model.link_index[j.child] for j in joints]
        self.origin = np.array([j.origin.as_matrix() for j in joints]).reshape(-1, 4, 4)
        self.axis = np.array([j.axis for j in joints], dtype=float).reshape(-1, 3)
        self.coord = np.array([model.coord_index.get(j.name, -1) if j.type != "fixed" else -1 for j in joints], dtype=int)
        self.revolute = np.array([j.type == "revolute" for j in joints], dtype=bool)
        self.prismatic = np.array([j.type == "prismatic" for j in joints], dtype=bool)
        self.actuated = self.coord >= 0
        # child link index per coordinate, used to read back axes/anchors
        self.coord_child = np.zeros(model.n_joints, dtype=int)
        self.coord_axis = np.zeros((model.n_joints, 3))
        for c, a, k in zip(self.coord, self.axis, self.child):
            if c >= 0:
                self.coord_child[c] = k
                self.coord_axis[c] = a
        self.coord_prismatic = ~model.revolute_mask
        self.base = model.link_index[model.base_link]
        self.n_links = len(model.links)
        # joints grouped by tree depth so each level is one batched matmul
        depth = {self.base: 0}
        levels: dict[int, list[int]] = {}
        for k, (p, c) in enumerate(zip(self.parent, self.child)):
            depth[c] = depth[p] + 1
            levels.setdefault(depth[c], []).append(k)
        self.levels = [
            (np.array(ks), np.array([self.parent[k] for k in ks]), np.array([self.child[k] for k in ks]))
            for _, ks in sorted(levels.items())
        ]


def _tree(model: KinematicModel) -> _Tree:
    t = model.__dict__.get("_fk_tree")
    if t is None:
        t = _Tree(model)
        # frozen dataclass: cache through the instance dict like cached_property does
        model.__dict__["_fk_tree"] = t
    return t


def fk_arrays(model: KinematicModel, q: Configuration) -> FKResult:
    if q.joints.shape != (model.n_joints,):
        raise ModelError(f"configuration width {q.joints.size} does not match model joint count {model.n_joints}")
    tree = _tree(model)
    nj = len(tree.parent)
    theta = np.zeros(nj)
    theta[tree.actuated] = q.joints[tree.coord[tree.actuated]]
    # batched joint motion transforms
    motion = np.broadcast_to(np.eye(4), (nj, 4, 4)).copy()
    a = tree.axis
    c, s = np.cos(theta), np.sin(theta)
    K = np.zeros((nj, 3, 3))
    K[:, 0, 1], K[:, 0, 2], K[:, 1, 2] = -a[:, 2], a[:, 1], -a[:, 0]
    K[:, 1, 0], K[:, 2, 0], K[:, 2, 1] = a[:, 2], -a[:, 1], a[:, 0]
    rot = np.eye(3) + s[:, None, None] * K + (1 - c)[:, None, None] * (K @ K)
    motion[tree.revolute, :3, :3] = rot[tree.revolute]
    motion[tree.prismatic, :3, 3] = a[tree.prismatic] * theta[tree.prismatic, None]
    local = tree.origin @ motion
    T = np.empty((tree.n_links, 4, 4))
    T[tree.base] = np.eye(4)
    T[tree.base, :3, :3] = q.base.rotation
    T[tree.base, :3, 3] = q.base.translation
    for ks, parents, children in tree.levels:
        T[children] = T[parents] @ local[ks]
    Rs = T[:, :3, :3]
    ps = T[:, :3, 3]
    cc = tree.coord_child
    axes = np.einsum("nij,nj->ni", Rs[cc], tree.coord_axis)
    anchors = ps[cc].copy()
    if tree.coord_prismatic.any():
        pr = tree.coord_prismatic
        anchors[pr] -= axes[pr] * q.joints[pr, None]
    return FKResult(Rs, ps, axes, anchors, q.base.translation.copy())


def forward_kinematics(model: KinematicModel, q: Configuration) -> dict[str, RigidTransform]:
    fk = fk_arrays(model, q)
    return {l.name: RigidTransform(fk.rotations[i], fk.positions[i]) for i, l in enumerate(model.links)}


def link_position(model: KinematicModel, q: Configuration, link: str) -> np.ndarray:
    i = model.check_link(link)
    return fk_arrays(model, q).positions[i]


def point_jacobian(model: KinematicModel, fk: FKResult, link_idx: int, point: np.ndarray) -> np.ndarray:
    """3 x n linear Jacobian of a world point rigidly attached to ``link_idx``."""
    J = np.zeros((3, model.n_dof))
    J[:, 0:3] = np.eye(3)
    J[:, 3:6] = -skew(point - fk.base_position)
    mask = model.ancestor_mask[link_idx]
    rev = mask & model.revolute_mask
    pri = mask & ~model.revolute_mask
    if rev.any():
        J[:, 6:][:, rev] = _cross(fk.axes[rev], point - fk.anchors[rev]).T
    if pri.any():
        J[:, 6:][:, pri] = fk.axes[pri].T
    return J


def frame_jacobian_from(model: KinematicModel, fk: FKResult, link_idx: int) -> np.ndarray:
    J = np.zeros((6, model.n_dof))
    J[0:3, 3:6] = np.eye(3)
    rev = model.ancestor_mask[link_idx] & model.revolute_mask
    J[0:3, 6:][:, rev] = fk.axes[rev].T
    J[3:6] = point_jacobian(model, fk, link_idx, fk.positions[link_idx])
    return J


def frame_jacobians_from(model: KinematicModel, fk: FKResult, link_indices) -> np.ndarray:
    """Batched :func:`frame_jacobian_from`: (k, 6, n_dof)."""
    idx = np.asarray(link_indices, dtype=int)
    k = len(idx)
    J = np.zeros((k, 6, model.n_dof))
    eye = np.eye(3)
    J[:, 0:3, 3:6] = eye
    J[:, 3:6, 0:3] = eye
    r = fk.positions[idx] - fk.base_position
    J[:, 3, 4], J[:, 3, 5] = r[:, 2], -r[:, 1]
    J[:, 4, 3], J[:, 4, 5] = -r[:, 2], r[:, 0]
    J[:, 5, 3], J[:, 5, 4] = r[:, 1], -r[:, 0]
    mask = model.ancestor_mask[idx]
    rev = (mask & model.revolute_mask)[..., None]
    pri = (mask & ~model.revolute_mask)[..., None]
    axes = fk.axes[None]
    J[:, 0:3, 6:] = (axes * rev).transpose(0, 2, 1)
    lever = fk.positions[idx][:, None, :] - fk.anchors[None]
    J[:, 3:6, 6:] = (_cross(axes, lever) * rev + axes * pri).transpose(0, 2, 1)
    return J


def frame_jacobian(model: KinematicModel, q: Configuration, link: str) -> np.ndarray:
    """6 x (6 + n) world Jacobian of ``link``'s origin; rows [angular, linear]."""
    i = model.check_link(link)
    return frame_jacobian_from(model, fk_arrays(model, q), i)


def _link_coms(model: KinematicModel, fk: FKResult) -> np.ndarray:
    return fk.positions + np.einsum("lij,lj->li", fk.rotations, model.local_coms)


def com_from(model: KinematicModel, fk: FKResult) -> np.ndarray:
    return model.masses @ _link_coms(model, fk) / model.total_mass


def com_jacobian_from(model: KinematicModel, fk: FKResult) -> np.ndarray:
    # mass-weighted sum of per-link CoM point Jacobians, vectorized per joint
    coms = _link_coms(model, fk)
    M = model.total_mass
    weighted = model.ancestor_mask.T * model.masses  # (joints, links)
    moved_mass = weighted.sum(axis=1)
    moved_moment = weighted @ coms
    J = np.zeros((3, model.n_dof))
    J[:, 0:3] = np.eye(3)
    J[:, 3:6] = -skew(model.masses @ coms / M - fk.base_position)
    rev = model.revolute_mask
    J[:, 6:][:, rev] = _cross(fk.axes[rev], moved_moment[rev] - moved_mass[rev, None] * fk.anchors[rev]).T / M
    J[:, 6:][:, ~rev] = (fk.axes[~rev] * moved_mass[~rev, None]).T / M
    return J


def center_of_mass(model: KinematicModel, q: Configuration) -> np.ndarray:
    return com_from(model, fk_arrays(model, q))


def com_jacobian(model: KinematicModel, q: Configuration) -> np.ndarray:
    return com_jacobian_from(model, fk_arrays(model, q))
