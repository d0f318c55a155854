"""Trajectory metrics, cost/reward scoring, and confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyTrajectory, TooFewSamples, TooShort
from .simulate import Trajectory

# Guard for the smoothness inverse on perfectly straight trajectories.
SMOOTHNESS_EPS_DEG = 1e-6

TARGET_ROTATION_DEG = 180.0


@dataclass(frozen=True)
class MetricThresholds:
    optimal_deg: float = 3.0
    acceptable_deg: float = 10.0


@dataclass(frozen=True)
class CostWeights:
    """Weights for heading error (1/deg), collision, and mean jerk (s^3/m)."""

    alpha1: float = 1.0
    alpha2: float = 100.0
    alpha3: float = 0.1

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0 or self.alpha3 < 0:
            raise ValueError("cost weights must be >= 0")


@dataclass(frozen=True)
class TrialMetrics:
    angle_error: float            # deg, >= 0
    signed_heading_error: float   # deg, + overshoot / - undershoot
    collision: bool
    mean_jerk: float              # m/s^3
    max_jerk: float               # m/s^3
    mean_yaw_rate: float          # deg/s
    steering_smoothness: float    # 1/deg
    execution_time: float         # s of simulated time
    success: bool

    def to_dict(self) -> dict:
        return {
            "angle_error": self.angle_error,
            "signed_heading_error": self.signed_heading_error,
            "collision": self.collision,
            "mean_jerk": self.mean_jerk,
            "max_jerk": self.max_jerk,
            "mean_yaw_rate": self.mean_yaw_rate,
            "steering_smoothness": self.steering_smoothness,
            "execution_time": self.execution_time,
            "success": self.success,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrialMetrics":
        return cls(**{k: doc[k] for k in (
            "angle_error", "signed_heading_error", "collision", "mean_jerk",
            "max_jerk", "mean_yaw_rate", "steering_smoothness",
            "execution_time", "success")})


def angle_error(traj: Trajectory) -> tuple[float, float]:
    """(signed, absolute) deviation of the achieved rotation from 180 deg.

    The sign marks overshoot (+) vs undershoot (-); the turn direction does
    not matter, a -192 deg right-hand turn overshoots by +12.
    """
    if not traj.samples:
        raise EmptyTrajectory("trajectory has no samples")
    rotation = math.degrees(traj.samples[-1].state.heading
                            - traj.samples[0].state.heading)
    signed = abs(rotation) - TARGET_ROTATION_DEG
    return signed, abs(signed)


def jerk_metrics(traj: Trajectory) -> tuple[float, float]:
    """(mean, max) magnitude of the body-frame jerk along the trajectory.

    Acceleration is recovered by central-differencing the logged body-frame
    velocities, which already embeds the yaw coupling terms; jerk is the
    forward difference of the acceleration magnitude.
    """
    n = len(traj.samples)
    if n < 3:
        raise TooShort(f"jerk needs >= 3 samples, got {n}")
    dt = traj.dt
    accel_mags = []
    for k in range(1, n - 1):
        before = traj.samples[k - 1].state
        after = traj.samples[k + 1].state
        ax = (after.v_long - before.v_long) / (2.0 * dt)
        ay = (after.v_lat - before.v_lat) / (2.0 * dt)
        accel_mags.append(math.hypot(ax, ay))
    if len(accel_mags) < 2:
        return 0.0, 0.0
    jerks = [abs(accel_mags[k + 1] - accel_mags[k]) / dt
             for k in range(len(accel_mags) - 1)]
    return sum(jerks) / len(jerks), max(jerks)


def smoothness_and_yaw(traj: Trajectory) -> tuple[float, float]:
    """(steering smoothness, mean |yaw rate| in deg/s).

    Smoothness is the inverse of the mean per-step |heading change| in
    degrees, with a tiny guard so straight lines stay finite.
    """
    n = len(traj.samples)
    if n < 2:
        raise TooShort(f"smoothness needs >= 2 samples, got {n}")
    total_change = 0.0
    for k in range(n - 1):
        total_change += abs(math.degrees(traj.samples[k + 1].state.heading
                                         - traj.samples[k].state.heading))
    mean_change = total_change / (n - 1)
    smoothness = 1.0 / (mean_change + SMOOTHNESS_EPS_DEG)
    mean_yaw = sum(abs(math.degrees(s.state.yaw_rate))
                   for s in traj.samples) / n
    return smoothness, mean_yaw


def cost(metrics: TrialMetrics, weights: CostWeights) -> float:
    """Weighted penalty: heading error + collision + mean jerk."""
    return (weights.alpha1 * metrics.angle_error
            + weights.alpha2 * (1.0 if metrics.collision else 0.0)
            + weights.alpha3 * metrics.mean_jerk)


def reward(metrics: TrialMetrics, weights: CostWeights) -> float:
    """Dual of :func:`cost`; cost + reward == 180*alpha1 + alpha2."""
    return (weights.alpha1 * (TARGET_ROTATION_DEG - metrics.angle_error)
            + weights.alpha2 * (0.0 if metrics.collision else 1.0)
            - weights.alpha3 * metrics.mean_jerk)


def confidence_interval(samples: list[float]) -> float:
    """95% half-width 1.96 * sigma / sqrt(n), population sigma (1/n)."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need >= 2 samples, got {n}")
    mean = sum(samples) / n
    var = sum((x - mean) ** 2 for x in samples) / n
    return 1.96 * math.sqrt(var) / math.sqrt(n)


def compute_metrics(traj: Trajectory,
                    thresholds: MetricThresholds | None = None) -> TrialMetrics:
    """Derive the full metric record for one rollout."""
    thresholds = thresholds or MetricThresholds()
    signed, absolute = angle_error(traj)
    if len(traj.samples) >= 3:
        mean_jerk, max_jerk = jerk_metrics(traj)
    else:
        mean_jerk = max_jerk = 0.0
    if len(traj.samples) >= 2:
        smoothness, mean_yaw = smoothness_and_yaw(traj)
    else:
        smoothness, mean_yaw = 1.0 / SMOOTHNESS_EPS_DEG, 0.0
    success = absolute <= thresholds.acceptable_deg and not traj.collision
    return TrialMetrics(
        angle_error=absolute,
        signed_heading_error=signed,
        collision=traj.collision,
        mean_jerk=mean_jerk,
        max_jerk=max_jerk,
        mean_yaw_rate=mean_yaw,
        steering_smoothness=smoothness,
        execution_time=traj.duration,
        success=success,
    )
