from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compliant_aug import fixtures as fx
from compliant_aug.events import (
    EventSchedule,
    InteractionEvent,
    SamplerConfig,
    angular_range,
    build_schedule,
    hand_reference_positions,
    displacement_range,
    onset_probabilities,
    ramp_duration,
    sample_collision_event,
    sample_collision_onsets,
    sample_log_uniform,
    sample_ramp_event,
    unit_vector,
    wrench_profile,
)
from compliant_aug.forcefield import EnvironmentStiffness
from compliant_aug.ik import StiffnessCommand
from compliant_aug.spatial import Wrench

CFG = SamplerConfig()


@pytest.fixture(scope="module")
def standing60(humanoid):
    return fx.standing_clip(humanoid, 60.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(k_t_range=(100.0, 40.0))
    with pytest.raises(ValueError):
        SamplerConfig(rest_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        SamplerConfig(max_force=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(collision_fraction=1.5)


def test_log_uniform_degenerate_and_errors(rng):
    assert sample_log_uniform(40, 40, rng) == 40
    assert np.all(sample_log_uniform(40, 40, rng, 5) == 40)
    with pytest.raises(ValueError):
        sample_log_uniform(0, 10, rng)
    with pytest.raises(ValueError):
        sample_log_uniform(10, 5, rng)


def test_log_uniform_endpoints():
    class Edge:
        def __init__(self, u):
            self.u = u

        def uniform(self, lo, hi, size=None):
            return lo if self.u == 0 else hi

    assert np.isclose(sample_log_uniform(40, 1000, Edge(0)), 40)
    assert np.isclose(sample_log_uniform(40, 1000, Edge(1)), 1000)


def test_log_uniform_statistics(rng):
    k = sample_log_uniform(40.0, 1000.0, rng, 100_000)
    assert 195 <= np.median(k) <= 210
    centre = (np.log(40) + np.log(1000)) / 2
    assert abs(np.mean(np.log(k)) - centre) <= 0.01 * centre
    assert k.min() >= 40 and k.max() <= 1000


def test_displacement_ranges():
    assert displacement_range(1000.0, CFG) == (0.0, pytest.approx(0.14))
    assert displacement_range(40.0, CFG) == (0.0, 0.7)
    assert angular_range(10.0, CFG) == (0.0, pytest.approx(1.0))
    assert angular_range(0.1, CFG) == (0.0, 2.0)
    assert ramp_duration(0.3, 0.5) == pytest.approx(0.6)
    assert ramp_duration(0.0, 0.5, dt=0.02) == 0.02


def test_ramp_events_respect_hard_limits(humanoid, standing60):
    rng = np.random.default_rng(7)
    for _ in range(100_000 // 20):
        for _ in range(20):
            ev = sample_ramp_event(standing60, humanoid, 1.0, CFG, rng)
            f, tau = ev.peak.force, ev.peak.torque
            fn = np.linalg.norm(f)
            assert fn <= 140 + 1e-9 and fn / ev.cmd.k_t <= 0.7 + 1e-12
            assert np.linalg.norm(tau) <= 10 + 1e-9 and np.linalg.norm(tau) / ev.cmd.k_r <= 2.0 + 1e-12
            assert ev.ramp_up == ev.ramp_down > 0 and 0.5 <= ev.hold <= 1.0
            assert ev.link in humanoid.hands
    # the full 1e5 isotropy sample is drawn from the direction primitive directly
    v = np.array([unit_vector(rng) for _ in range(100_000)])
    octant = (v[:, 0] > 0) * 4 + (v[:, 1] > 0) * 2 + (v[:, 2] > 0)
    frac = np.bincount(octant, minlength=8) / len(v)
    assert np.all(np.abs(frac - 0.125) <= 0.01)


def test_ramp_event_start_outside_clip(humanoid, standing):
    with pytest.raises(ValueError):
        sample_ramp_event(standing, humanoid, standing.duration + 1.0, CFG, np.random.default_rng(0))


def test_ramp_hands_chosen_uniformly(humanoid, standing):
    rng = np.random.default_rng(3)
    links = [sample_ramp_event(standing, humanoid, 0.5, CFG, rng).link for _ in range(4000)]
    assert abs(links.count(humanoid.hands[0]) / len(links) - 0.5) < 0.03


def make_ramp(peak=Wrench([10, 0, 0], [0, 0, 2]), up=0.4, hold=0.6, down=0.4, start=1.0):
    return InteractionEvent("ramp", "left_hand", start, StiffnessCommand(100, 1), EnvironmentStiffness(100, 1), peak, up, hold, down)


def test_wrench_profile_examples():
    ev = make_ramp()
    assert np.all(wrench_profile(ev, ev.start).force == 0)
    mid = wrench_profile(ev, ev.start + ev.ramp_up + ev.hold / 2)
    np.testing.assert_array_equal(mid.force, ev.peak.force)
    np.testing.assert_array_equal(mid.torque, ev.peak.torque)
    half = wrench_profile(ev, ev.start + ev.ramp_up / 2)
    np.testing.assert_allclose(half.force, ev.peak.force / 2)
    np.testing.assert_allclose(half.torque, ev.peak.torque / 2)
    assert np.all(wrench_profile(ev, ev.end + 0.1).force == 0)
    assert np.all(wrench_profile(ev, ev.start - 0.1).force == 0)


@given(st.floats(0.0, 3.0))
def test_wrench_profile_bounded_and_shared(t):
    ev = make_ramp()
    w = wrench_profile(ev, t)
    s = np.linalg.norm(w.force) / 10.0
    assert 0 <= s <= 1 + 1e-12
    np.testing.assert_allclose(w.torque, ev.peak.torque * s, atol=1e-12)


def test_wrench_profile_rejects_collisions():
    ev = InteractionEvent("collision", "left_hand", 0.0, StiffnessCommand(100, 1), EnvironmentStiffness(100, 1),
                          anchor=np.zeros(3), normal=np.array([1.0, 0, 0]), duration=1.0)
    with pytest.raises(ValueError):
        wrench_profile(ev, 0.5)


def test_frozen_clip_without_base_rate_has_no_onsets(humanoid, standing):
    cfg = SamplerConfig(onset_base_rate=0.0)
    p = onset_probabilities(standing, humanoid, cfg)
    assert np.all(p == 0)
    for seed in range(5):
        assert sample_collision_onsets(standing, humanoid, cfg, np.random.default_rng(seed), probabilities=p) == []


def test_onset_rate_proportional_to_speed(humanoid):
    dt, n = 0.02, 1_000_000
    clip = SimpleNamespace(dt=dt)
    t = np.arange(50)[:, None] * dt
    pos = np.zeros((50, 2, 3))
    pos[:, 0, 0] = 1.5 * t[:, 0]
    pos[:, 1, 0] = 0.5 * t[:, 0]
    cfg = SamplerConfig(onset_base_rate=0.0)
    p = onset_probabilities(clip, humanoid, cfg, pos)
    np.testing.assert_allclose(p[:, 0], dt * 2.0 * 1.5)
    np.testing.assert_allclose(p[:, 1], dt * 2.0 * 0.5)
    hits = sample_collision_onsets(clip, humanoid, cfg, np.random.default_rng(11), probabilities=np.tile(p[:1], (n, 1)))
    counts = [sum(1 for _, h in hits if h == hand) for hand in humanoid.hands]
    assert abs(counts[0] / counts[1] / 3.0 - 1.0) < 0.05


def test_stationary_onsets_match_binomial_mean(humanoid, standing60):
    cfg = SamplerConfig(onset_base_rate=0.1)
    p = onset_probabilities(standing60, humanoid, cfg)
    rng = np.random.default_rng(5)
    trials = 1000
    total = sum(len(sample_collision_onsets(standing60, humanoid, cfg, rng, probabilities=p)) for _ in range(trials))
    per_hand = total / trials / len(humanoid.hands)
    expected = 0.1 * standing60.dt * len(standing60)  # beta * T
    assert abs(per_hand / expected - 1.0) < 0.05


def test_onsets_thinned_by_schedule(humanoid, standing):
    cfg = SamplerConfig(onset_base_rate=20.0)
    ev = make_ramp(start=0.5, up=0.2, hold=0.5, down=0.2)
    hits = sample_collision_onsets(standing, humanoid, cfg, np.random.default_rng(0), EventSchedule((ev,)))
    window = set(ev.frames(standing))
    assert hits and not any(k in window for k, _ in hits)


def test_collision_event_faces_motion(humanoid):
    clip = fx.swing_clip(humanoid, 2.0)
    ev = sample_collision_event(clip, humanoid, 25, "left_hand", CFG, np.random.default_rng(0))
    assert ev.kind == "collision" and ev.onset_frame == 25
    assert ev.start == pytest.approx(25 * clip.dt)
    assert abs(np.linalg.norm(ev.normal) - 1) < 1e-12
    assert 0.5 <= ev.duration <= 1.5


def test_short_clip_gives_empty_schedule(humanoid):
    clip = fx.standing_clip(humanoid, 0.3)
    assert len(build_schedule(clip, humanoid, CFG, np.random.default_rng(0))) == 0


def test_schedule_determinism(humanoid):
    clip = fx.swing_clip(humanoid, 10.0)
    a = build_schedule(clip, humanoid, CFG, np.random.default_rng(4))
    b = build_schedule(clip, humanoid, CFG, np.random.default_rng(4))
    c = build_schedule(clip, humanoid, CFG, np.random.default_rng(5))
    assert a.to_dict() == b.to_dict()
    assert [e.start for e in a] != [e.start for e in c]


@settings(max_examples=20)
@given(st.integers(0, 2**31 - 1))
def test_schedule_invariants(seed):
    m = fx.humanoid()
    clip = fx.swing_clip(m, 8.0)
    s = build_schedule(clip, m, CFG, np.random.default_rng(seed))
    prev_end = 0.0
    for ev, rest in zip(s.events, s.rests):
        assert 0.5 <= rest <= 1.5
        assert ev.start - prev_end >= rest - 1e-9
        assert ev.end <= clip.duration + 1e-9
        prev_end = ev.end


def test_overlapping_schedule_rejected():
    a = make_ramp(start=0.0)
    b = make_ramp(start=1.0)
    with pytest.raises(ValueError):
        EventSchedule((a, b))


def test_event_count_matches_renewal_mean(humanoid, standing60):
    cfg = SamplerConfig(collision_fraction=0.0)
    rng = np.random.default_rng(99)
    # independent Monte Carlo estimate of the mean ramp span
    spans = []
    for _ in range(20_000):
        k = np.exp(rng.uniform(np.log(40), np.log(1000)))
        d = rng.uniform(0, min(0.7, 140 / k))
        spans.append(2 * max(d / rng.uniform(0.1, 1.0), standing60.dt) + rng.uniform(0.5, 1.0))
    expected = standing60.duration / (np.mean(spans) + 1.0)
    pos = hand_reference_positions(standing60, humanoid)
    counts = [len(build_schedule(standing60, humanoid, cfg, np.random.default_rng(s), pos)) for s in range(100)]
    assert abs(np.mean(counts) / expected - 1.0) <= 0.30
