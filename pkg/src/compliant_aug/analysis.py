"""Stiffness bounds from sensing noise, effective stiffness of a dataset,
and trajectory tracking errors."""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import fk_arrays
from .model import KinematicModel


class InfeasibleBudgetError(ValueError):
    """The noise budget leaves no stiffness that meets both accuracy targets."""


@dataclass(frozen=True)
class NoiseBudget:
    force_noise: float  # N
    position_noise: float  # m
    force_accuracy: float  # N
    position_accuracy: float  # m

    def __post_init__(self):
        for name in ("force_noise", "position_noise", "force_accuracy", "position_accuracy"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class StiffnessBounds:
    k_min: float  # N/m
    k_max: float  # N/m


def stiffness_bounds(budget: NoiseBudget) -> StiffnessBounds:
    """Band of stiffness commands that both the impedance and admittance
    strategies can realize under the given sensing noise.

    Below ``k_min`` the force noise alone displaces the link by more than the
    position accuracy; above ``k_max`` the position noise alone produces more
    force error than the force accuracy.
    """
    k_min = budget.force_noise / budget.position_accuracy
    k_max = budget.force_accuracy / budget.position_noise
    if k_min >= k_max:
        raise InfeasibleBudgetError(f"infeasible budget: k_min={k_min:g} N/m >= k_max={k_max:g} N/m")
    return StiffnessBounds(k_min, k_max)


# --------------------------------------------------------------------------
# effective stiffness


@dataclass(frozen=True)
class StiffnessCurvePoint:
    commanded: float  # N/m, median commanded stiffness of the bin
    effective: float  # N/m, median force / displacement ratio
    count: int
    bin_lo: float = 0.0
    bin_hi: float = math.inf


def plateau_samples(frames, plateau_tol: float = 0.01, min_displacement: float = 1e-3) -> list[tuple[float, float, float]]:
    """(commanded k_t, |F|, |displacement|) for every plateau frame.

    A plateau frame carries a force within ``plateau_tol`` (relative) of the
    largest force of its event. Frames whose forced link moved less than
    ``min_displacement`` are skipped since the ratio is ill-conditioned there.
    """
    peaks: dict[int, float] = defaultdict(float)
    for fr in frames:
        if fr.status == "event":
            peaks[fr.event] = max(peaks[fr.event], float(np.linalg.norm(fr.wrench.force)))
    out = []
    for fr in frames:
        if fr.status != "event" or fr.link_pos_ref is None or peaks[fr.event] <= 0:
            continue
        f = float(np.linalg.norm(fr.wrench.force))
        if f < (1.0 - plateau_tol) * peaks[fr.event]:
            continue
        d = float(np.linalg.norm(np.asarray(fr.link_pos_aug) - np.asarray(fr.link_pos_ref)))
        if d < min_displacement:
            continue
        out.append((float(fr.cmd.k_t), f, d))
    return out


def _bin_of(k: float, edges) -> int:
    i = int(np.searchsorted(edges, k, side="right")) - 1
    # the top edge is inclusive
    if i == len(edges) - 1 and k == edges[-1]:
        i -= 1
    return i


def effective_stiffness(frames, bins, plateau_tol: float = 0.01, min_displacement: float = 1e-3) -> list[StiffnessCurvePoint]:
    """Median force/displacement ratio per commanded-stiffness bin.

    ``bins`` are increasing bin edges in N/m. Empty bins are omitted with a
    warning.
    """
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bins must be at least two strictly increasing edges")
    groups: dict[int, list[tuple[float, float]]] = defaultdict(list)
    for k, f, d in plateau_samples(frames, plateau_tol, min_displacement):
        i = _bin_of(k, edges)
        if 0 <= i < len(edges) - 1:
            groups[i].append((k, f / d))
    points = []
    for i in range(len(edges) - 1):
        if not groups[i]:
            warnings.warn(f"stiffness bin [{edges[i]:g}, {edges[i + 1]:g}) has no plateau frames; omitted", stacklevel=2)
            continue
        ks, ratios = np.array(groups[i]).T
        points.append(StiffnessCurvePoint(float(np.median(ks)), float(np.median(ratios)), len(ks), float(edges[i]), float(edges[i + 1])))
    return points


def stiffness_envelope(frames, bins, residual: float = 0.05, plateau_tol: float = 0.01, min_displacement: float = 1e-3):
    """Per bin, the (lo, hi) range the median ratio must fall in when every
    plateau frame's hand sits within ``residual`` of its spring-law target.

    A frame with force f and command k has displacement in [f/k - r, f/k + r],
    so its ratio lies in [f/(f/k + r), f/(f/k - r)] (unbounded above when
    f/k <= r). Medians are monotone in each sample, so the bin median lies
    between the medians of the per-frame bounds.
    """
    edges = np.asarray(bins, dtype=float)
    groups: dict[int, list[tuple[float, float]]] = defaultdict(list)
    for k, f, d in plateau_samples(frames, plateau_tol, min_displacement):
        i = _bin_of(k, edges)
        if not 0 <= i < len(edges) - 1:
            continue
        nominal = f / k
        lo = f / (nominal + residual)
        hi = f / (nominal - residual) if nominal > residual else math.inf
        groups[i].append((lo, hi))
    return {i: (float(np.median([g[0] for g in v])), float(np.median([g[1] for g in v]))) for i, v in groups.items()}


def write_curve_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "commanded_k", "effective_k", "count"])
        for p in points:
            w.writerow([f"{p.bin_lo:g}", f"{p.bin_hi:g}", f"{p.commanded:.6g}", f"{p.effective:.6g}", p.count])


# --------------------------------------------------------------------------
# tracking errors


@dataclass(frozen=True)
class TrackingMetrics:
    joint_error_deg: float
    joint_error_sem: float
    keypoint_error_cm: float
    keypoint_error_sem: float

    def to_row(self) -> dict:
        return {
            "joint_error_deg": self.joint_error_deg,
            "joint_error_sem": self.joint_error_sem,
            "keypoint_error_cm": self.keypoint_error_cm,
            "keypoint_error_sem": self.keypoint_error_sem,
        }


def _sem(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def tracking_metrics(model: KinematicModel, traj_a, traj_b) -> TrackingMetrics:
    """Mean absolute joint error (deg, actuated joints only) and mean keypoint
    position error (cm), each with the standard error over frames."""
    traj_a, traj_b = list(traj_a), list(traj_b)
    if len(traj_a) != len(traj_b):
        raise ValueError(f"trajectory length mismatch: {len(traj_a)} vs {len(traj_b)}")
    if not traj_a:
        raise ValueError("trajectories are empty")
    kp = [model.link_index[k] for k in model.keypoints]
    joint_err, key_err = [], []
    for k, (a, b) in enumerate(zip(traj_a, traj_b)):
        if a.joints.shape != b.joints.shape or a.joints.shape != (model.n_joints,):
            raise ValueError(f"frame {k}: joint width mismatch")
        joint_err.append(np.degrees(np.mean(np.abs(a.joints - b.joints))) if model.n_joints else 0.0)
        if kp:
            pa = fk_arrays(model, a).positions[kp]
            pb = fk_arrays(model, b).positions[kp]
            key_err.append(100.0 * np.mean(np.linalg.norm(pa - pb, axis=1)))
        else:
            key_err.append(0.0)
    joint_err, key_err = np.array(joint_err), np.array(key_err)
    return TrackingMetrics(float(joint_err.mean()), _sem(joint_err), float(key_err.mean()), _sem(key_err))


def write_metrics_csv(metrics: TrackingMetrics, path) -> None:
    row = metrics.to_row()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(row))
        w.writerow([f"{v:.6f}" for v in row.values()])


def read_curve_csv(path) -> list[dict]:
    with open(Path(path), newline="") as fh:
        return list(csv.DictReader(fh))
