from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from compliant_aug import fixtures as fx
from compliant_aug.augment import (
    FeasibilityLimits,
    SimulationResult,
    Violation,
    augment_clip,
    feasibility_check,
    generate,
    rejection_loop,
    scalings_to_reject,
    simulate_event,
)
from compliant_aug.events import EventSchedule, InteractionEvent, SamplerConfig
from compliant_aug.forcefield import EnvironmentStiffness, forcefield_wrench
from compliant_aug.ik import StiffnessCommand, compliant_targets
from compliant_aug.kinematics import fk_arrays, forward_kinematics
from compliant_aug.model import Configuration
from compliant_aug.spatial import RigidTransform, Wrench, rot_log

ENV = EnvironmentStiffness(100.0, 1.0)
FEET = ("left_foot", "right_foot")


def ramp(force, k_t, link="left_hand", start=0.2, up=0.2, hold=0.6, down=0.2, torque=(0, 0, 0), k_r=2.0):
    return InteractionEvent("ramp", link, start, StiffnessCommand(k_t, k_r), ENV, Wrench(force, torque), up, hold, down)


def shifted(q, dx):
    return Configuration(RigidTransform(q.base.rotation, q.base.translation + dx), q.joints)


@pytest.fixture(scope="module")
def base_targets(humanoid, standing):
    q = standing.frames[0]
    return q, compliant_targets(humanoid, q, Wrench.zero(), "left_hand", StiffnessCommand(100, 1), FEET)


def test_limits_validation():
    with pytest.raises(ValueError):
        FeasibilityLimits(scale_factor=1.0)
    with pytest.raises(ValueError):
        FeasibilityLimits(max_link_error=0.0)


def test_violation_formatting():
    assert str(Violation("link tracking", 0.06, 0.05)) == "link tracking 0.060 > 0.05"
    assert str(Violation("CoM", 0.151, 0.15)) == "CoM 0.151 > 0.15"
    assert str(Violation("link tracking", 0.06, 0.05, "left_hand")) == "link tracking [left_hand] 0.060 > 0.05"


def test_zero_wrench_frame_passes(humanoid, base_targets):
    q, t = base_targets
    assert feasibility_check(humanoid, SimpleNamespace(q=q), t, q, FEET) == []


@pytest.mark.parametrize("err,fails", [(0.049, False), (0.051, True)])
def test_hand_threshold(humanoid, base_targets, err, fails):
    q, t = base_targets
    t = replace(t, p_des=t.p_ref + [0, 0, err])
    v = feasibility_check(humanoid, SimpleNamespace(q=q), t, q, FEET)
    assert [x.criterion for x in v] == (["link tracking"] if fails else [])


def test_hand_violation_message(humanoid, base_targets):
    q, t = base_targets
    v = feasibility_check(humanoid, SimpleNamespace(q=q), replace(t, p_des=t.p_ref + [0.06, 0, 0]), q, FEET)
    assert [str(x) for x in v] == ["link tracking [left_hand] 0.060 > 0.05"]


@pytest.mark.parametrize("err,fails", [(0.049, False), (0.051, True)])
def test_foot_threshold(humanoid, base_targets, err, fails):
    q, t = base_targets
    moved = shifted(q, [0, err, 0])
    # move the hand and CoM targets along with the body so only the feet are judged
    t = replace(t, p_des=t.p_des + [0, err, 0], com_target_xy=t.com_target_xy + [0, err])
    v = feasibility_check(humanoid, SimpleNamespace(q=moved), t, q, FEET)
    assert sorted(x.entity for x in v if x.criterion == "stance foot") == (sorted(FEET) if fails else [])
    assert all(x.criterion == "stance foot" for x in v)


def test_foot_rotation_threshold(humanoid, base_targets):
    q, t = base_targets
    ix = humanoid.coord_index
    j = q.joints.copy()
    j[ix["left_ankle_roll"]] += 0.12
    v = feasibility_check(humanoid, SimpleNamespace(q=Configuration(q.base, j)), t, q, ("left_foot",))
    rot = [x for x in v if x.criterion == "stance foot rotation"]
    assert rot and rot[0].entity == "left_foot" and rot[0].value == pytest.approx(0.12, abs=1e-9)


@pytest.mark.parametrize("err,fails", [(0.149, False), (0.151, True)])
def test_com_threshold(humanoid, base_targets, err, fails):
    q, t = base_targets
    v = feasibility_check(humanoid, SimpleNamespace(q=q), replace(t, com_target_xy=t.com_target_xy + [err, 0]), q, FEET)
    assert [str(x) for x in v] == ([f"CoM {err:.3f} > 0.15"] if fails else [])


def fake_event(peak):
    return ramp([peak, 0, 0], 400.0)


def test_rejection_loop_accepts_after_scaling():
    calls = []

    def sim(ev):
        calls.append(ev.scale)
        return SimulationResult([], None if len(calls) == 4 else 5, [Violation("CoM", 0.2, 0.15)])

    outcome, result = rejection_loop(fake_event(10.0), sim, lambda e: float(np.linalg.norm(e.peak.force)))
    assert outcome.label == "accepted-after-scaling(3)"
    assert outcome.scale == pytest.approx(0.512)
    assert outcome.final_peak == pytest.approx(5.12)
    np.testing.assert_allclose(calls, [1, 0.8, 0.64, 0.512])
    assert len(outcome.reasons) == 3 and "CoM 0.200 > 0.15" in outcome.reasons[0]
    assert result is not None


def test_rejection_loop_rejects_small_event():
    outcome, result = rejection_loop(fake_event(2.0), lambda e: SimulationResult([], 0, ["x"]), lambda e: float(np.linalg.norm(e.peak.force)))
    assert outcome.status == "rejected" and result is None
    assert outcome.scalings == 4 == scalings_to_reject(2.0)
    assert outcome.final_peak == pytest.approx(2 * 0.8**4) and outcome.final_peak < 1.0


@pytest.mark.parametrize("peak", [1.0, 1.25, 2.0, 10.0, 140.0])
def test_scalings_to_reject_is_geometric_threshold(peak):
    k = scalings_to_reject(peak)
    assert peak * 0.8**k < 1.0 <= peak * 0.8 ** (k - 1)


def test_zero_magnitude_event_is_identity(humanoid):
    clip = fx.swing_clip(humanoid, 4.0)
    ev = ramp([0, 0, 0], 200.0, start=0.0, up=1.0, hold=2.0, down=1.0)
    res = simulate_event(humanoid, clip, ev)
    assert res.ok and len(res.frames) == len(clip)
    for fr in res.frames:
        assert np.max(np.abs(fr.q_aug.joints - fr.q_ref.joints)) < 1e-6


def test_lateral_push_displaces_hand_by_spring_law(humanoid, standing):
    ev = ramp([0, 20.0, 0], 400.0)
    res = simulate_event(humanoid, standing, ev)
    assert res.ok
    plateau = [fr for fr in res.frames if np.linalg.norm(fr.wrench.force) == pytest.approx(20.0)]
    assert plateau
    for fr in plateau:
        d = fr.link_pos_aug - fr.link_pos_ref
        assert abs(d[1] - 0.05) <= 0.005
        assert np.linalg.norm(d[[0, 2]]) <= 0.005


def test_overlarge_push_fails(humanoid, standing):
    res = simulate_event(humanoid, standing, ramp([200.0, 0, 0], 100.0))
    assert not res.ok
    assert any("link tracking" in str(v) for v in res.violations)


def test_collision_is_quasi_static(humanoid, standing):
    q = standing.frames[0]
    p_ref = forward_kinematics(humanoid, q)["right_hand"].translation
    n = np.array([1.0, 0.0, 0.0])
    ev = InteractionEvent(
        "collision", "right_hand", 0.2, StiffnessCommand(200.0, 2.0), EnvironmentStiffness(300.0, 1.0),
        anchor=p_ref - 0.15 * n, normal=n, onset_frame=10, duration=0.5,
    )
    res = simulate_event(humanoid, standing, ev)
    assert res.ok and res.frames
    anchor = RigidTransform(np.eye(3), ev.anchor)
    for fr in res.frames:
        field = forcefield_wrench(RigidTransform(np.eye(3), fr.link_pos_aug), anchor, ev.k_env).force
        assert np.linalg.norm(fr.wrench.force) == pytest.approx(0.15 * 120.0)
        assert np.linalg.norm(field - fr.wrench.force) <= 0.1 * np.linalg.norm(fr.wrench.force)


def test_empty_schedule_reproduces_reference(humanoid):
    clip = fx.swing_clip(humanoid, 2.0)
    res = augment_clip(humanoid, clip, EventSchedule())
    assert res.outcomes == []
    for fr, q in zip(res.frames, clip.frames):
        assert fr.status == "reference" and fr.q_aug is q
        assert np.all(fr.wrench.force == 0) and np.all(fr.wrench.torque == 0)


def test_rejected_event_emits_reference_frames(humanoid, standing):
    ev = ramp([1.5, 0, 0], 400.0)
    limits = FeasibilityLimits(max_link_error=1e-9)
    res = augment_clip(humanoid, standing, EventSchedule((ev,)), limits=limits)
    assert res.outcomes[0].status == "rejected"
    for k in ev.frames(standing):
        fr = res.frames[k]
        assert fr.status == "rejected" and fr.q_aug is standing.frames[k]


@pytest.fixture(scope="module")
def generated(humanoid):
    clip = fx.swing_clip(humanoid, 10.0)
    return clip, generate(humanoid, clip, SamplerConfig(seed=2))


def test_generated_dataset_invariants(humanoid, generated):
    clip, res = generated
    assert len(res.frames) == len(clip)
    assert any(fr.status == "event" for fr in res.frames)
    for fr in res.frames:
        assert np.all(fr.q_aug.joints >= humanoid.lower) and np.all(fr.q_aug.joints <= humanoid.upper)
        if fr.status != "event":
            assert np.all(fr.wrench.force == 0)
            continue
        if np.linalg.norm(fr.wrench.force) > 0:
            d = fr.link_pos_aug - fr.link_pos_ref
            assert np.linalg.norm(d - fr.wrench.force / fr.cmd.k_t) <= 0.05 + 1e-12
        fa, fr_ = fk_arrays(humanoid, fr.q_aug), fk_arrays(humanoid, fr.q_ref)
        for foot in clip.in_contact(fr.index):
            i = humanoid.link_index[foot]
            assert np.linalg.norm(fa.positions[i] - fr_.positions[i]) <= 0.05
            assert np.linalg.norm(rot_log(fr_.rotations[i].T @ fa.rotations[i])) <= 0.1


def test_outcome_scales_are_geometric(generated):
    _, res = generated
    for oc in res.outcomes:
        assert oc.scale == pytest.approx(0.8**oc.scalings)
        if oc.status == "rejected":
            assert oc.final_peak < 1.0 or oc.scalings == 64


def test_generation_is_deterministic(humanoid, generated):
    clip, a = generated
    b = generate(humanoid, clip, SamplerConfig(seed=2))
    assert a.schedule.to_dict() == b.schedule.to_dict()
    for x, y in zip(a.frames, b.frames):
        np.testing.assert_array_equal(x.q_aug.to_row(), y.q_aug.to_row())
        np.testing.assert_array_equal(x.wrench.force, y.wrench.force)
