"""Trial metrics against brute-force oracles and hand-computed cases."""

import numpy as np
import pytest

from hapticnudge import metrics
from hapticnudge.metrics import CursorTrajectory


def traj_at_100hz(positions):
    positions = np.asarray(positions, dtype=float)
    times = np.arange(positions.shape[0]) * 0.01
    return CursorTrajectory(times=times, positions=positions)


def oracle_trial_end(times, positions, movement_start, eps=0.0025, samples=15, cap=2.0):
    """Naive double-loop reference for detect_trial_end."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    n = len(times)
    d = [float(np.linalg.norm(positions[i + 1] - positions[i])) for i in range(n - 1)]
    stable = None
    for i in range(samples - 1, n):
        if all(d[j] < eps for j in range(i - samples + 1, i)):
            stable = i
            break
    cap_idx = None
    cap_time = movement_start + cap
    if times[-1] >= cap_time:
        cap_idx = int(np.argmin(np.abs(times - cap_time)))
    ends = [x for x in (stable, cap_idx) if x is not None]
    if not ends:
        return n - 1, True, False
    end = min(ends)
    return end, False, end == stable


def oracle_segment_deviation(points, p0, p1):
    """Per-point distance to segment p0-p1 via the three-case formula."""
    seg = p1 - p0
    L2 = float(seg @ seg)
    out = []
    for p in points:
        t = float((p - p0) @ seg) / L2
        if t < 0.0:
            c = p0
        elif t > 1.0:
            c = p1
        else:
            c = p0 + t * seg
        out.append(float(np.linalg.norm(p - c)))
    return np.array(out)


class TestDetectTrialEnd:
    def test_stationary_recording_ends_at_sample_15(self):
        traj = traj_at_100hz(np.tile([1.0, 1.0], (300, 1)))
        end = metrics.detect_trial_end(traj, movement_start=0.0)
        assert (end.index, end.truncated, end.stable) == (14, False, True)

    def test_constant_motion_hits_two_second_cap(self):
        # 0.01 units/sample at 100 Hz never stabilizes; cap at t=2.0 is sample 200
        pos = np.stack([np.arange(300) * 0.01, np.zeros(300)], axis=1)
        end = metrics.detect_trial_end(traj_at_100hz(pos), movement_start=0.0)
        assert (end.index, end.truncated, end.stable) == (200, False, False)

    def test_cap_picks_nearest_sample(self):
        # movement start 0.003 -> cap time 2.003; sample 200 (t=2.00) is nearer
        # than sample 201 (t=2.01)
        pos = np.stack([np.arange(300) * 0.01, np.zeros(300)], axis=1)
        end = metrics.detect_trial_end(traj_at_100hz(pos), movement_start=0.003)
        assert end.index == 200

    def test_ramp_then_hold(self):
        moving = np.stack([np.arange(50) * 0.01, np.zeros(50)], axis=1)
        frozen = np.tile(moving[-1], (100, 1))
        pos = np.concatenate([moving, frozen])
        traj = traj_at_100hz(pos)
        end = metrics.detect_trial_end(traj, movement_start=0.0)
        expect = oracle_trial_end(traj.times, pos, 0.0)
        assert (end.index, end.truncated, end.stable) == expect
        assert end.index == 63  # first window of 14 calm displacements ends here

    def test_short_recording_truncates(self):
        pos = np.stack([np.arange(10) * 0.01, np.zeros(10)], axis=1)
        end = metrics.detect_trial_end(traj_at_100hz(pos), movement_start=0.0)
        assert (end.index, end.truncated) == (9, True)

    def test_random_signals_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(2, 260))
            steps = rng.normal(scale=0.004, size=(n, 2))
            calm_from = int(rng.integers(0, n + 1))
            steps[calm_from:] *= 0.1
            pos = np.cumsum(steps, axis=0)
            traj = traj_at_100hz(pos)
            ms = float(rng.uniform(0.0, 0.5))
            end = metrics.detect_trial_end(traj, movement_start=ms)
            expect = oracle_trial_end(traj.times, pos, ms)
            assert (end.index, end.truncated, end.stable) == expect


class TestMovementStart:
    def test_stationary_has_no_start(self):
        traj = traj_at_100hz(np.tile([2.5, 2.5], (30, 1)))
        assert metrics.movement_start_index(traj) is None

    def test_step_motion_start(self):
        pos = np.tile([2.5, 2.5], (30, 1))
        pos[10:, 0] += 0.05  # one 0.05 jump at sample 10, then still
        traj = traj_at_100hz(pos)
        assert metrics.movement_start_index(traj) == 10


class TestCapture:
    def test_stable_inside_square_is_captured(self):
        pos = np.tile([0.6, 4.4], (40, 1))
        traj = traj_at_100hz(pos)
        end = metrics.detect_trial_end(traj, movement_start=0.0)
        assert metrics.is_captured(traj, end, (0.5, 4.5))

    def test_stable_outside_square_is_not_captured(self):
        pos = np.tile([1.2, 4.4], (40, 1))
        traj = traj_at_100hz(pos)
        end = metrics.detect_trial_end(traj, movement_start=0.0)
        assert not metrics.is_captured(traj, end, (0.5, 4.5))

    def test_cap_ended_trial_is_not_captured(self):
        pos = np.stack([np.arange(300) * 0.01, np.zeros(300)], axis=1)
        traj = traj_at_100hz(pos)
        end = metrics.detect_trial_end(traj, movement_start=0.0)
        assert not end.stable
        assert not metrics.is_captured(traj, end, tuple(pos[end.index]))


class TestReachingError:
    def test_endpoint_on_target_is_zero(self):
        pos = np.array([[0.0, 0.0], [1.0, 1.0], [4.5, 4.5]])
        traj = traj_at_100hz(pos)
        assert metrics.compute_re(traj, (4.5, 4.5), 2) == 0.0

    def test_hand_computed_distance(self):
        pos = np.array([[0.0, 0.0], [1.0, 1.0], [3.5, 0.5]])
        traj = traj_at_100hz(pos)
        # endpoint (3.5, 0.5), target (0.5, 4.5): hypot(3, -4) = 5
        assert abs(metrics.compute_re(traj, (0.5, 4.5), 2) - 5.0) < 1e-12

    def test_random_cases_match_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            pos = rng.uniform(0, 5, size=(20, 2))
            traj = traj_at_100hz(pos)
            k = int(rng.integers(0, 20))
            tgt = rng.uniform(0, 5, size=2)
            dx, dy = pos[k] - tgt
            assert abs(metrics.compute_re(traj, tgt, k) - np.hypot(dx, dy)) < 1e-12

    def test_same_endpoint_invariant_to_resampling(self):
        pos = np.array([[0.0, 0.0], [0.3, 0.1], [1.0, 2.0]])
        t1 = CursorTrajectory(times=np.array([0.0, 0.01, 0.02]), positions=pos)
        t2 = CursorTrajectory(times=np.array([0.0, 0.5, 3.0]), positions=pos)
        tgt = (2.0, 2.0)
        assert metrics.compute_re(t1, tgt, 2) == metrics.compute_re(t2, tgt, 2)

    def test_end_index_bounds(self):
        traj = traj_at_100hz(np.zeros((5, 2)) + [[1, 1]])
        with pytest.raises(IndexError):
            metrics.compute_re(traj, (0, 0), 5)


class TestSmoothness:
    def test_straight_path_scores_zero(self):
        s = np.linspace(0, 1, 40)
        pos = np.stack([3.0 * s, 4.0 * s], axis=1)
        traj = traj_at_100hz(pos)
        assert metrics.compute_sot(traj, 39) < 1e-12

    def test_semicircle_scores_half(self):
        L = 2.0
        theta = np.linspace(0.0, np.pi, 181)  # includes pi/2 exactly
        pos = np.stack([L / 2 - L / 2 * np.cos(theta), L / 2 * np.sin(theta)], axis=1)
        traj = traj_at_100hz(pos)
        assert abs(metrics.compute_sot(traj, 180) - 0.5) < 1e-12

    def test_overshoot_clamps_to_segment_ends(self):
        # detour behind the start: nearest point on the chord is the start itself
        pos = np.array([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        traj = traj_at_100hz(pos)
        assert abs(metrics.compute_sot(traj, 3) - 0.5) < 1e-12

    def test_random_paths_match_three_case_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(3, 60))
            pos = rng.uniform(-2, 7, size=(n, 2))
            if np.linalg.norm(pos[-1] - pos[0]) < 1e-6:
                pos[-1] += 1.0
            traj = traj_at_100hz(pos)
            got = metrics.compute_sot(traj, n - 1)
            dev = oracle_segment_deviation(pos, pos[0], pos[-1])
            expect = dev.max() / np.linalg.norm(pos[-1] - pos[0])
            assert abs(got - expect) < 1e-12

    def test_invariant_under_rotation_and_scale(self):
        rng = np.random.default_rng(12)
        pos = rng.uniform(0, 5, size=(30, 2))
        pos[-1] = pos[0] + [2.0, 1.0]
        base = metrics.compute_sot(traj_at_100hz(pos), 29)
        for _ in range(10):
            a = rng.uniform(0, 2 * np.pi)
            s = rng.uniform(0.1, 8.0)
            rot = s * np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            moved = pos @ rot.T + rng.uniform(-3, 3, size=2)
            assert abs(metrics.compute_sot(traj_at_100hz(moved), 29) - base) < 1e-9

    def test_coincident_endpoints_rejected(self):
        pos = np.array([[1.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
        with pytest.raises(metrics.UndefinedSmoothnessError):
            metrics.compute_sot(traj_at_100hz(pos), 2)


def variance_design(scales, n_joints=20, reps=6):
    """Poses with exactly diagonal covariance; eigenvalues scale with scales**2."""
    rows = []
    for _ in range(reps):
        for i, a in enumerate(scales):
            row = np.zeros(n_joints)
            row[i] = a
            rows.append(row)
            rows.append(-row)
    return np.array(rows)


class TestVarianceAccounting:
    def test_rank_two_data_vaf2_is_one(self):
        poses = variance_design([2.0, 1.0])
        assert abs(metrics.compute_vaf(poses, 2) - 1.0) < 1e-12
        assert abs(metrics.compute_vaf(poses, 20) - 1.0) < 1e-12

    def test_four_three_two_one_spectrum(self):
        # eigenvalues proportional to (4, 3, 2, 1): VAF(2) = 7/10
        poses = variance_design([2.0, np.sqrt(3.0), np.sqrt(2.0), 1.0])
        assert abs(metrics.compute_vaf(poses, 2) - 0.7) < 1e-9
        # cumulative ratios 0.4, 0.7, 0.9, 1.0: 0.9 does not strictly exceed
        # the 0.9 threshold, so 4 components are needed
        assert metrics.pcs_for_variance(poses, 0.90) == 4

    def test_rank_two_needs_two_components(self):
        poses = variance_design([1.0, 1.0])
        assert metrics.pcs_for_variance(poses, 0.90) == 2

    def test_isotropic_needs_nineteen(self):
        poses = variance_design([1.0] * 20)
        # equal eigenvalues: smallest k with k/20 > 0.9 is 19
        assert metrics.pcs_for_variance(poses, 0.90) == 19

    def test_threshold_validation(self):
        poses = variance_design([2.0, 1.0])
        assert metrics.pcs_for_variance(poses, 0.0) == 1
        with pytest.raises(ValueError):
            metrics.pcs_for_variance(poses, 1.0)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            metrics.compute_vaf(np.ones((30, 20)), 1)


class TestTrialsToThreshold:
    def test_constant_below_returns_window(self):
        assert metrics.trials_to_threshold(np.full(50, 0.1), 1.0, window=10) == 10

    def test_never_reached_returns_none(self):
        assert metrics.trials_to_threshold(np.full(50, 5.0), 1.0, window=10) is None

    def test_linear_descent_hand_case(self):
        series = 20.0 - np.arange(30)
        # trailing 3-mean at 1-based trial t is 22 - t; first <= 15 at t = 7
        assert metrics.trials_to_threshold(series, 15.0, window=3) == 7

    def test_shorter_than_window_returns_none(self):
        assert metrics.trials_to_threshold([1.0, 2.0], 0.5, window=10) is None

    def test_boundary_semantics(self):
        flat = np.full(20, 3.0)
        assert metrics.trials_to_threshold(flat, 3.0, window=5) == 5
        assert metrics.trailing_mean_first_hit(flat, 3.0, 5, strict=True) is None

    def test_random_series_match_loop_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(1, 80))
            series = rng.uniform(0, 4, size=n)
            w = int(rng.integers(1, 15))
            thr = float(rng.uniform(0.5, 3.5))
            got = metrics.trials_to_threshold(series, thr, window=w)
            expect = None
            for end in range(w - 1, n):
                if np.mean(series[end - w + 1:end + 1]) <= thr:
                    expect = end + 1
                    break
            assert got == expect


class TestTrajectoryValidation:
    def test_rejects_bad_shapes_and_times(self):
        with pytest.raises(ValueError):
            CursorTrajectory(times=np.array([0.0]), positions=np.array([[0.0, 0.0]]))
        with pytest.raises(ValueError):
            CursorTrajectory(times=np.array([0.0, 0.0]), positions=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            CursorTrajectory(times=np.array([0.0, 0.01]), positions=np.zeros((2, 3)))
        with pytest.raises(ValueError):
            CursorTrajectory(times=np.array([0.0, np.nan]), positions=np.zeros((2, 2)))
