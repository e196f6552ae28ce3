"""Kinematic robot description, configurations and reference motion clips.

File formats (JSON, ``format_version`` 1):

Model::

    {"format_version": 1, "name": str, "base_link": str,
     "links":  [{"name", "mass", "com": [x, y, z]}, ...],
     "joints": [{"name", "type": "revolute"|"prismatic"|"fixed", "parent", "child",
                 "origin": {"translation": [x, y, z], "rotation": 3x3 rows},
                 # "quaternion": [w, x, y, z] is accepted in place of "rotation"
                 "axis": [x, y, z], "limits": [lo, hi]}, ...],
     "hands": [...], "feet": [...], "keypoints": [...],
     "default_positions": {joint: value}}            # optional

Clip::

    {"format_version": 1, "dt": float, "joints": [names], "feet": [names],
     "rows": [[px, py, pz, qw, qx, qy, qz, joint values..., contact flags...], ...]}

The floating base is implicit; its pose lives in :class:`Configuration`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .spatial import RigidTransform, quat_to_rot, rot_exp, rot_to_quat

FORMAT_VERSION = 1
JOINT_TYPES = ("revolute", "prismatic", "fixed")


class ModelError(ValueError):
    """Invalid model or clip content; the message names the offending entity."""


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    com: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", tuple(float(x) for x in self.com))


@dataclass(frozen=True)
class Joint:
    name: str
    type: str
    parent: str
    child: str
    origin: RigidTransform
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    limits: tuple[float, float] = (-np.inf, np.inf)

    def __post_init__(self):
        object.__setattr__(self, "axis", tuple(float(x) for x in self.axis))
        object.__setattr__(self, "limits", tuple(float(x) for x in self.limits))


@dataclass(frozen=True)
class KinematicModel:
    name: str
    base_link: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    hands: tuple[str, ...] = ()
    feet: tuple[str, ...] = ()
    keypoints: tuple[str, ...] = ()
    default_positions: tuple[float, ...] | None = None

    def __post_init__(self):
        _validate_model(self)

    # -- topology (cached; the model is immutable) -------------------------

    @cached_property
    def link_index(self) -> dict[str, int]:
        return {l.name: i for i, l in enumerate(self.links)}

    @cached_property
    def actuated(self) -> tuple[Joint, ...]:
        """Non-fixed joints in file order; defines the joint coordinate order."""
        return tuple(j for j in self.joints if j.type != "fixed")

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.actuated]

    @property
    def n_joints(self) -> int:
        return len(self.actuated)

    @property
    def n_dof(self) -> int:
        return 6 + self.n_joints

    @cached_property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.actuated], dtype=float)

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.actuated], dtype=float)

    @cached_property
    def default_q(self) -> np.ndarray:
        if self.default_positions is None:
            return np.zeros(self.n_joints)
        return np.array(self.default_positions, dtype=float)

    @cached_property
    def topo_joints(self) -> tuple[int, ...]:
        """Joint indices (into ``joints``) ordered parent-before-child."""
        by_parent: dict[str, list[int]] = {}
        for k, j in enumerate(self.joints):
            by_parent.setdefault(j.parent, []).append(k)
        order, stack = [], [self.base_link]
        while stack:
            link = stack.pop(0)
            for k in by_parent.get(link, []):
                order.append(k)
                stack.append(self.joints[k].child)
        return tuple(order)

    @cached_property
    def coord_index(self) -> dict[str, int]:
        """Joint name -> column in the joint-position vector."""
        return {j.name: i for i, j in enumerate(self.actuated)}

    @cached_property
    def ancestor_mask(self) -> np.ndarray:
        """Boolean (links x actuated joints): joint moves the link."""
        parent_joint = {j.child: j for j in self.joints}
        mask = np.zeros((len(self.links), self.n_joints), dtype=bool)
        for li, link in enumerate(self.links):
            name = link.name
            while name in parent_joint:
                j = parent_joint[name]
                if j.type != "fixed":
                    mask[li, self.coord_index[j.name]] = True
                name = j.parent
        return mask

    @cached_property
    def revolute_mask(self) -> np.ndarray:
        return np.array([j.type == "revolute" for j in self.actuated], dtype=bool)

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([l.mass for l in self.links], dtype=float)

    @cached_property
    def local_coms(self) -> np.ndarray:
        return np.array([l.com for l in self.links], dtype=float)

    def leg_joints(self, foot: str) -> np.ndarray:
        """Coordinate indices of joints on the chain from base to ``foot``."""
        return np.flatnonzero(self.ancestor_mask[self.link_index[foot]])

    def check_link(self, name: str) -> int:
        try:
            return self.link_index[name]
        except KeyError:
            raise ModelError(f"unknown link {name!r}") from None


def _validate_model(m: KinematicModel) -> None:
    names = [l.name for l in m.links]
    if len(set(names)) != len(names):
        raise ModelError("duplicate link names")
    jnames = [j.name for j in m.joints]
    if len(set(jnames)) != len(jnames):
        raise ModelError("duplicate joint names")
    known = set(names)
    if m.base_link not in known:
        raise ModelError(f"base link {m.base_link!r} is not a declared link")
    for l in m.links:
        if not (np.isfinite(l.mass) and l.mass >= 0):
            raise ModelError(f"link {l.name!r}: mass must be finite and >= 0")
    parent_of: dict[str, Joint] = {}
    for j in m.joints:
        if j.type not in JOINT_TYPES:
            raise ModelError(f"joint {j.name!r}: unknown type {j.type!r}")
        for end in (j.parent, j.child):
            if end not in known:
                raise ModelError(f"joint {j.name!r}: unknown link {end!r}")
        if j.child == m.base_link:
            raise ModelError(f"joint {j.name!r}: cycle, child is the base link {j.child!r}")
        if j.child in parent_of:
            raise ModelError(
                f"joint {j.name!r}: cycle, link {j.child!r} already has parent joint "
                f"{parent_of[j.child].name!r}"
            )
        parent_of[j.child] = j
        axis = np.asarray(j.axis, dtype=float)
        if j.type != "fixed" and abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ModelError(f"joint {j.name!r}: axis {list(axis)} is not unit norm")
        lo, hi = j.limits
        if lo > hi:
            raise ModelError(f"joint {j.name!r}: lower limit {lo} > upper limit {hi}")
    for l in m.links:
        seen, name = set(), l.name
        while name in parent_of:
            if name in seen:
                raise ModelError(f"joint {parent_of[name].name!r}: cycle through link {name!r}")
            seen.add(name)
            name = parent_of[name].parent
        if name != m.base_link:
            raise ModelError(f"link {l.name!r} is not connected to the base link")
    for group in ("hands", "feet", "keypoints"):
        for name in getattr(m, group):
            if name not in known:
                raise ModelError(f"{group}: unknown link {name!r}")
    if sum(l.mass for l in m.links) <= 0:
        raise ModelError("total mass must be positive")
    if m.default_positions is not None:
        n = sum(1 for j in m.joints if j.type != "fixed")
        if len(m.default_positions) != n:
            raise ModelError("default_positions does not cover every actuated joint")


# --------------------------------------------------------------------------
# Configurations and clips


@dataclass(frozen=True)
class Configuration:
    base: RigidTransform
    joints: np.ndarray

    def __post_init__(self):
        q = np.array(self.joints, dtype=float).reshape(-1)
        q.setflags(write=False)
        object.__setattr__(self, "joints", q)

    @classmethod
    def from_arrays(cls, base_pos, base_rot, joints) -> "Configuration":
        return cls(RigidTransform(base_rot, base_pos), joints)

    def integrate(self, dq: np.ndarray) -> "Configuration":
        """Apply a generalized step [base lin (3), base ang (3, world), joints]."""
        R = rot_exp(dq[3:6]) @ self.base.rotation
        if not dq[3:6].any():
            R = self.base.rotation
        return Configuration(RigidTransform.trusted(R, self.base.translation + dq[0:3]), self.joints + dq[6:])

    def within_limits(self, model: KinematicModel, tol: float = 1e-9) -> bool:
        return bool(np.all(self.joints >= model.lower - tol) and np.all(self.joints <= model.upper + tol))

    def to_row(self) -> list[float]:
        return [*self.base.translation.tolist(), *rot_to_quat(self.base.rotation).tolist(), *self.joints.tolist()]

    @classmethod
    def from_row(cls, row) -> "Configuration":
        """Inverse of :meth:`to_row`: [px, py, pz, qw, qx, qy, qz, joints...]."""
        row = np.asarray(row, dtype=float)
        return cls(RigidTransform(quat_to_rot(row[3:7]), row[0:3]), row[7:])


@dataclass(frozen=True)
class MotionClip:
    dt: float
    frames: tuple[Configuration, ...]
    feet: tuple[str, ...]
    contacts: np.ndarray  # (frames, feet) bool
    limit_violations: tuple[tuple[int, str, float], ...] = field(default=())

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ModelError(f"clip dt must be > 0, got {self.dt}")
        if len(self.frames) < 2:
            raise ModelError("clip needs at least 2 frames")
        c = np.array(self.contacts, dtype=bool).reshape(len(self.frames), len(self.feet))
        c.setflags(write=False)
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "contacts", c)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return (len(self.frames) - 1) * self.dt

    def time(self, k: int) -> float:
        return k * self.dt

    def frame_at(self, t: float) -> int:
        """Nearest frame index to time ``t`` (clamped)."""
        return int(np.clip(round(t / self.dt), 0, len(self.frames) - 1))

    def in_contact(self, k: int) -> list[str]:
        return [f for f, c in zip(self.feet, self.contacts[k]) if c]


# --------------------------------------------------------------------------
# I/O


def _model_from_dict(d: dict) -> KinematicModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format_version {d.get('format_version')!r}")
    links = tuple(Link(l["name"], float(l["mass"]), tuple(float(x) for x in l.get("com", (0, 0, 0)))) for l in d["links"])
    joints = []
    for j in d["joints"]:
        o = j.get("origin", {})
        try:
            if "rotation" in o:
                R = np.array(o["rotation"], dtype=float)
            else:
                R = quat_to_rot(o.get("quaternion", (1.0, 0.0, 0.0, 0.0)))
            origin = RigidTransform(R, o.get("translation", (0.0, 0.0, 0.0)))
        except ValueError as e:
            raise ModelError(f"joint {j.get('name')!r}: bad origin: {e}") from None
        lim = j.get("limits", (-np.inf, np.inf))
        joints.append(
            Joint(
                name=j["name"],
                type=j.get("type", "revolute"),
                parent=j["parent"],
                child=j["child"],
                origin=origin,
                axis=tuple(float(x) for x in j.get("axis", (0.0, 0.0, 1.0))),
                limits=(float(lim[0]), float(lim[1])),
            )
        )
    defaults = d.get("default_positions")
    if defaults is not None:
        names = [j.name for j in joints if j.type != "fixed"]
        unknown = set(defaults) - set(names)
        if unknown:
            raise ModelError(f"default_positions: unknown joint {sorted(unknown)[0]!r}")
        defaults = tuple(float(defaults.get(n, 0.0)) for n in names)
    return KinematicModel(
        name=d.get("name", "robot"),
        base_link=d["base_link"],
        links=links,
        joints=tuple(joints),
        hands=tuple(d.get("hands", ())),
        feet=tuple(d.get("feet", ())),
        keypoints=tuple(d.get("keypoints", ())),
        default_positions=defaults,
    )


def model_to_dict(m: KinematicModel) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "name": m.name,
        "base_link": m.base_link,
        "links": [{"name": l.name, "mass": l.mass, "com": list(l.com)} for l in m.links],
        "joints": [
            {
                "name": j.name,
                "type": j.type,
                "parent": j.parent,
                "child": j.child,
                "origin": {
                    "translation": j.origin.translation.tolist(),
                    "rotation": j.origin.rotation.tolist(),
                },
                "axis": list(j.axis),
                "limits": list(j.limits),
            }
            for j in m.joints
        ],
        "hands": list(m.hands),
        "feet": list(m.feet),
        "keypoints": list(m.keypoints),
    }
    if m.default_positions is not None:
        d["default_positions"] = dict(zip(m.joint_names, m.default_positions))
    return d


def dumps_model(m: KinematicModel) -> str:
    return json.dumps(model_to_dict(m), indent=2) + "\n"


def load_model(path) -> KinematicModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: parse error: {e}") from None
    try:
        return _model_from_dict(d)
    except KeyError as e:
        raise ModelError(f"{path}: missing field {e}") from None


def save_model(model: KinematicModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def clip_from_rows(model: KinematicModel, dt: float, rows, feet=None, joint_names=None) -> MotionClip:
    """Build and validate a clip from raw rows (see module docstring)."""
    feet = tuple(model.feet if feet is None else feet)
    for f in feet:
        if f not in model.link_index:
            raise ModelError(f"clip foot {f!r} is not a model link")
    n = model.n_joints
    if joint_names is None:
        perm = np.arange(n)
    else:
        if sorted(joint_names) != sorted(model.joint_names) or len(joint_names) != n:
            raise ModelError(
                f"clip joint list does not match model: expected {n} joints {model.joint_names}"
            )
        perm = np.array([list(joint_names).index(name) for name in model.joint_names])
    width = 7 + n + len(feet)
    frames, contacts, violations = [], [], []
    for k, row in enumerate(rows):
        row = np.asarray(row, dtype=float)
        if row.shape != (width,):
            raise ModelError(f"frame {k}: width mismatch, expected {width} values, got {row.size}")
        if not np.all(np.isfinite(row)):
            raise ModelError(f"frame {k}: non-finite value")
        try:
            R = quat_to_rot(row[3:7])
        except ValueError as e:
            raise ModelError(f"frame {k}: {e}") from None
        q = row[7 : 7 + n][perm]
        for i in np.flatnonzero((q < model.lower - 1e-9) | (q > model.upper + 1e-9)):
            violations.append((k, model.joint_names[i], float(q[i])))
        frames.append(Configuration(RigidTransform(R, row[0:3]), q))
        contacts.append(row[7 + n :] > 0.5)
    return MotionClip(float(dt), tuple(frames), feet, np.array(contacts).reshape(len(frames), len(feet)), tuple(violations))


def load_clip(path, model: KinematicModel) -> MotionClip:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: parse error: {e}") from None
    if d.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"{path}: unsupported clip format_version {d.get('format_version')!r}")
    return clip_from_rows(model, d["dt"], d["rows"], d.get("feet"), d.get("joints"))


def clip_to_dict(clip: MotionClip, model: KinematicModel) -> dict:
    rows = [fr.to_row() + [int(c) for c in clip.contacts[k]] for k, fr in enumerate(clip.frames)]
    return {
        "format_version": FORMAT_VERSION,
        "dt": clip.dt,
        "joints": model.joint_names,
        "feet": list(clip.feet),
        "rows": rows,
    }


def save_clip(clip: MotionClip, model: KinematicModel, path) -> None:
    d = clip_to_dict(clip, model)
    # one row per line keeps clip files diffable
    body = ",\n    ".join(json.dumps(r) for r in d.pop("rows"))
    head = json.dumps(d)[:-1]
    Path(path).write_text(f'{head}, "rows": [\n    {body}\n]}}\n')


def clip_link_velocity(clip: MotionClip, model: KinematicModel, link: str, k: int) -> np.ndarray:
    """World velocity of a link origin by central differences (one-sided at the ends)."""
    from .kinematics import link_position

    model.check_link(link)
    n = len(clip)
    if not 0 <= k < n:
        raise IndexError(f"frame index {k} outside [0, {n - 1}]")
    lo, hi = max(k - 1, 0), min(k + 1, n - 1)
    p_lo = link_position(model, clip.frames[lo], link)
    p_hi = link_position(model, clip.frames[hi], link)
    return (p_hi - p_lo) / ((hi - lo) * clip.dt)
