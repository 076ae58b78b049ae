"""Body-machine interface: posture-to-cursor mapping and task geometry.

A 20-joint hand posture (5 fingers x 4 joint angles, radians) drives a 2-D
cursor through a linear map built from calibration data. The map projects
the mean-centered posture onto principal components 1 and 3 of the recorded
calibration postures, scales each axis so one workspace unit equals one
standard deviation of the calibration data along that component, and places
the calibration mean posture at the center of a 5x5 unit window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_JOINTS = 20
N_FINGERS = 5
JOINTS_PER_FINGER = 4

WINDOW_SIZE = 5.0
WINDOW_CENTER = (2.5, 2.5)

# principal components kept by the map (0-based): the 1st and the 3rd
MAP_COMPONENTS = (0, 2)

MIN_CALIBRATION_POSES = 21

# Task targets on the 5x5 grid, keyed by their conventional ids. Each target
# occupies the unit grid square centered on its position.
TARGET_POSITIONS = {
    1: (0.5, 4.5),
    2: (2.5, 2.5),
    3: (2.5, 0.5),
    4: (4.5, 4.5),
}

# Unordered target pairs in their conventional numbering.
TARGET_PAIRS = {
    0: (2, 3),
    1: (1, 2),
    2: (1, 3),
    3: (1, 4),
    4: (2, 4),
    5: (3, 4),
}


class CalibrationError(ValueError):
    """Raised when calibration data cannot support a 2-D map."""


class InvalidPairError(ValueError):
    """Raised when a movement direction is requested between identical points."""


def as_pose(values) -> np.ndarray:
    """Validate and return a posture as a float array of 20 joint angles."""
    pose = np.asarray(values, dtype=float)
    if pose.shape != (N_JOINTS,):
        raise ValueError(f"pose must have {N_JOINTS} joint angles, got shape {pose.shape}")
    if not np.all(np.isfinite(pose)):
        raise ValueError("pose contains non-finite joint angles")
    return pose


def target_position(target_id: int) -> np.ndarray:
    if target_id not in TARGET_POSITIONS:
        raise KeyError(f"unknown target id {target_id}")
    return np.array(TARGET_POSITIONS[target_id], dtype=float)


def slope_from_positions(prev, cur) -> float:
    """Directed movement slope angle, radians in (-pi, pi], from prev to cur.

    Raises InvalidPairError when the two positions coincide.
    """
    prev = np.asarray(prev, dtype=float)
    cur = np.asarray(cur, dtype=float)
    d = cur - prev
    if float(np.hypot(d[0], d[1])) < 1e-12:
        raise InvalidPairError(f"positions coincide: {tuple(prev)}")
    return float(np.arctan2(d[1], d[0]))


def slope_angle(prev_target: int, cur_target: int) -> float:
    """Directed slope angle of the movement from one target to another."""
    if prev_target == cur_target:
        raise InvalidPairError(f"identical targets: {prev_target}")
    return slope_from_positions(target_position(prev_target), target_position(cur_target))


def pair_slopes() -> np.ndarray:
    """The 6 directed slopes of the conventional target pairs (first -> second)."""
    return np.array([slope_angle(a, b) for a, b in TARGET_PAIRS.values()])


@dataclass(frozen=True)
class BomiMap:
    """Linear posture-to-cursor map.

    weights: (2, 20) map rows; mutually orthogonal, each scaled so calibration
        projections have standard deviation 1.0 along that row.
    center: (20,) mean calibration posture; maps to the window center.
    component_sd: (2,) raw projection SDs absorbed into the rows (provenance).
    """

    weights: np.ndarray
    center: np.ndarray
    component_sd: np.ndarray
    window: float = WINDOW_SIZE

    def __post_init__(self):
        if self.weights.shape != (2, N_JOINTS):
            raise ValueError(f"weights must be (2, {N_JOINTS}), got {self.weights.shape}")
        if self.center.shape != (N_JOINTS,):
            raise ValueError(f"center must be ({N_JOINTS},), got {self.center.shape}")

    def _project(self, vec: np.ndarray) -> np.ndarray:
        # Exactly rounded row sums: cursor coordinates land in session logs
        # and must not depend on the BLAS build's accumulation order, so any
        # client applying the same map reproduces them bit for bit.
        return np.array([math.fsum(row * vec) for row in self.weights])

    def cursor_position(self, pose) -> np.ndarray:
        """Map a posture to a cursor position in window coordinates."""
        pose = as_pose(pose)
        return self._project(pose - self.center) + np.asarray(WINDOW_CENTER)

    def cursor_velocity(self, joint_velocity) -> np.ndarray:
        """Map a joint-space velocity to a cursor velocity (linear, no offset)."""
        u = np.asarray(joint_velocity, dtype=float)
        if u.shape != (N_JOINTS,):
            raise ValueError(f"joint velocity must be ({N_JOINTS},), got {u.shape}")
        return self._project(u)

    def optimal_posture(self, target) -> np.ndarray:
        """Minimum-deviation posture whose cursor lands on the target.

        `target` is a target id or an (x, y) position. Among all postures that
        reach the point, returns the one closest to the calibration center
        (pseudo-inverse solution).
        """
        if np.isscalar(target):
            pos = target_position(int(target))
        else:
            pos = np.asarray(target, dtype=float)
        offset = pos - np.asarray(WINDOW_CENTER)
        return np.linalg.pinv(self.weights) @ offset + self.center


def calibrate(poses) -> BomiMap:
    """Build a BomiMap from free-exploration calibration postures.

    poses: (n, 20) array-like, n >= 21, joint angles in radians.

    Principal components are taken from the SVD of the mean-centered data;
    components 1 and 3 become the map rows after a deterministic sign fix
    (largest-magnitude coefficient positive) and per-axis scaling to unit
    standard deviation. Raises CalibrationError when the data has fewer than
    3 nonzero singular values (posture variation too flat for the 3rd
    component to be meaningful).
    """
    poses = np.asarray(poses, dtype=float)
    if poses.ndim != 2 or poses.shape[1] != N_JOINTS:
        raise ValueError(f"poses must be (n, {N_JOINTS}), got {poses.shape}")
    if poses.shape[0] < MIN_CALIBRATION_POSES:
        raise CalibrationError(
            f"need at least {MIN_CALIBRATION_POSES} calibration poses, got {poses.shape[0]}"
        )
    if not np.all(np.isfinite(poses)):
        raise ValueError("calibration poses contain non-finite values")

    center = poses.mean(axis=0)
    centered = poses - center
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    tol = svals.max(initial=0.0) * max(centered.shape) * np.finfo(float).eps
    rank = int(np.sum(svals > tol))
    if rank < 3:
        raise CalibrationError(f"calibration data has rank {rank}; need at least 3")

    components = vt[list(MAP_COMPONENTS)].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    projections = centered @ components.T
    component_sd = projections.std(axis=0)
    weights = components / component_sd[:, None]
    return BomiMap(weights=weights, center=center, component_sd=component_sd)
