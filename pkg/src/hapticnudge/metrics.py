"""Trial metrics: end detection, reaching error, smoothness, variance accounting.

Conventions: positions in workspace units on the 5x5 grid, times in seconds,
sampling nominally 100 Hz but nothing below assumes a fixed rate except where
a parameter is documented in samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# a trial ends when the cursor moves less than this per sample...
STABILITY_EPS = 0.0025
# ...over this many consecutive samples (i.e. 14 consecutive displacements)
STABILITY_SAMPLES = 15
# or this long after movement start, whichever comes first
CAP_SECONDS = 2.0
# movement starts when per-sample speed first exceeds this
MOVEMENT_SPEED_EPS = 0.005

SOT_MIN_CHORD = 1e-9
# absolute guard so exact-boundary variance ratios never flip on float noise
VAF_BOUNDARY_EPS = 1e-9


class UndefinedSmoothnessError(ValueError):
    """Raised when the smoothness ratio is undefined (coincident endpoints)."""


@dataclass(frozen=True)
class CursorTrajectory:
    """Time-stamped cursor path: times (T,) strictly increasing, positions (T, 2)."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if t.ndim != 1 or p.ndim != 2 or p.shape != (t.shape[0], 2):
            raise ValueError(f"inconsistent trajectory shapes {t.shape} / {p.shape}")
        if t.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("trajectory contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    def __len__(self):
        return self.times.shape[0]

    def displacements(self) -> np.ndarray:
        """Per-step displacement magnitudes, shape (T-1,)."""
        return np.linalg.norm(np.diff(self.positions, axis=0), axis=1)


@dataclass(frozen=True)
class TrialEnd:
    index: int        # sample index at which the trial ends
    truncated: bool   # recording ran out before any end condition fired
    stable: bool      # ended by the stability rule (vs. time cap / truncation)


def movement_start_index(traj: CursorTrajectory, speed_eps: float = MOVEMENT_SPEED_EPS):
    """First sample index whose incoming displacement exceeds speed_eps, or None."""
    moving = traj.displacements() > speed_eps
    idx = np.flatnonzero(moving)
    return int(idx[0] + 1) if idx.size else None


def detect_trial_end(
    traj: CursorTrajectory,
    movement_start: float,
    *,
    stability_eps: float = STABILITY_EPS,
    stability_samples: int = STABILITY_SAMPLES,
    cap_seconds: float = CAP_SECONDS,
) -> TrialEnd:
    """Find where a trial ends.

    The trial ends at the earlier of:
      - stability: the last sample of the first run of `stability_samples`
        consecutive samples whose successive displacements are all below
        `stability_eps` (a stationary recording ends at index
        stability_samples - 1);
      - time cap: the sample whose timestamp is nearest to
        movement_start + cap_seconds.
    If neither fires within the recording, the trial is truncated at the
    final sample.

    movement_start is a time (seconds) on the trajectory clock.
    """
    n = len(traj)
    n_disp = stability_samples - 1
    d = traj.displacements()

    stable_idx = None
    calm = d < stability_eps
    if calm.shape[0] >= n_disp:
        # run-length scan: window of n_disp consecutive calm displacements
        csum = np.concatenate([[0], np.cumsum(calm)])
        window_ok = csum[n_disp:] - csum[:-n_disp] == n_disp
        hits = np.flatnonzero(window_ok)
        if hits.size:
            stable_idx = int(hits[0] + n_disp)

    cap_idx = None
    cap_time = movement_start + cap_seconds
    if traj.times[-1] >= cap_time:
        cap_idx = int(np.argmin(np.abs(traj.times - cap_time)))

    candidates = [i for i in (stable_idx, cap_idx) if i is not None]
    if not candidates:
        return TrialEnd(index=n - 1, truncated=True, stable=False)
    end = min(candidates)
    return TrialEnd(index=end, truncated=False, stable=(end == stable_idx))


def window_in_square(positions, target_pos, half_side: float = 0.5) -> bool:
    """True when every position lies within the unit square centered on target_pos."""
    p = np.asarray(positions, dtype=float)
    t = np.asarray(target_pos, dtype=float)
    return bool(np.all(np.abs(p - t) <= half_side + 1e-12))


def is_captured(traj: CursorTrajectory, end: TrialEnd, target_pos,
                stability_samples: int = STABILITY_SAMPLES) -> bool:
    """A target counts as captured when the trial ended by stability and the
    whole stable window sits inside the target's grid square."""
    if not end.stable:
        return False
    start = end.index - (stability_samples - 1)
    if start < 0:
        return False
    return window_in_square(traj.positions[start:end.index + 1], target_pos)


def compute_re(traj: CursorTrajectory, target_pos, end_index: int) -> float:
    """Reaching error: distance from the trial-end cursor position to the target."""
    if not 0 <= end_index < len(traj):
        raise IndexError(f"end index {end_index} outside trajectory of {len(traj)}")
    diff = traj.positions[end_index] - np.asarray(target_pos, dtype=float)
    return float(np.linalg.norm(diff))


def compute_sot(traj: CursorTrajectory, end_index: int) -> float:
    """Smoothness of trajectory: peak deviation from the straight start-to-end
    chord, as a fraction of chord length.

    Deviation of each sample is its distance to the chord *segment* (projections
    are clamped to the segment). A straight path scores 0; a semicircular
    detour scores 0.5. Raises UndefinedSmoothnessError when start and end
    coincide (chord shorter than 1e-9).
    """
    if not 0 <= end_index < len(traj):
        raise IndexError(f"end index {end_index} outside trajectory of {len(traj)}")
    pts = traj.positions[: end_index + 1]
    p0, p1 = pts[0], pts[-1]
    chord = p1 - p0
    length = float(np.linalg.norm(chord))
    if length < SOT_MIN_CHORD:
        raise UndefinedSmoothnessError(f"chord length {length:.3e} below {SOT_MIN_CHORD}")
    rel = pts - p0
    t = np.clip(rel @ chord / (length * length), 0.0, 1.0)
    closest = np.outer(t, chord)
    dev = np.linalg.norm(rel - closest, axis=1)
    return float(dev.max() / length)


def _pose_eigenvalues(poses) -> np.ndarray:
    poses = np.asarray(poses, dtype=float)
    if poses.ndim != 2:
        raise ValueError(f"poses must be 2-D, got shape {poses.shape}")
    if poses.shape[0] < poses.shape[1] + 1:
        raise ValueError(
            f"need more poses than joints ({poses.shape[1] + 1}+), got {poses.shape[0]}"
        )
    centered = poses - poses.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    return svals**2


def compute_vaf(poses, k: int) -> float:
    """Variance accounted for by the top k principal components of the poses."""
    ev = _pose_eigenvalues(poses)
    if not 1 <= k <= ev.shape[0]:
        raise ValueError(f"k must be in 1..{ev.shape[0]}, got {k}")
    total = float(ev.sum())
    if total <= 0.0:
        raise ValueError("pose data has zero variance")
    return float(ev[:k].sum() / total)


def pcs_for_variance(poses, threshold: float = 0.90) -> int:
    """Smallest number of principal components whose VAF strictly exceeds threshold.

    Strict: a VAF exactly equal to the threshold does not count as exceeding it,
    and an absolute 1e-9 guard keeps float noise from flipping such boundary
    cases.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    ev = _pose_eigenvalues(poses)
    total = float(ev.sum())
    if total <= 0.0:
        raise ValueError("pose data has zero variance")
    cumulative = np.cumsum(ev) / total
    for k, vaf in enumerate(cumulative, start=1):
        if vaf > threshold + VAF_BOUNDARY_EPS:
            return k
    return ev.shape[0]


def trailing_mean_first_hit(series, threshold: float, window: int, *, strict: bool):
    """1-based index of the first trial whose trailing `window`-mean clears threshold.

    strict=False uses <= (metric thresholds), strict=True uses < (mastery).
    Returns None when no full window qualifies.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ValueError("series must be a non-empty 1-D sequence")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if x.shape[0] < window:
        return None
    # sum first, divide once: keeps exact-boundary cases (all-equal windows) exact
    means = np.lib.stride_tricks.sliding_window_view(x, window).sum(axis=1) / window
    hit = means < threshold if strict else means <= threshold
    idx = np.flatnonzero(hit)
    if not idx.size:
        return None
    return int(idx[0] + window)


def trials_to_threshold(series, threshold: float, window: int = 10):
    """Trials until the trailing moving average of a metric reaches (<=) threshold.

    Returns the 1-based count of trials consumed (a series constantly below
    threshold returns `window`), or None when the average never reaches it.
    """
    return trailing_mean_first_hit(series, threshold, window, strict=False)
