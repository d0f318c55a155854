"""Static planar worlds and footprint collision tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import VehicleParams, VehicleState


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle, world frame, meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("obstacle rectangle is degenerate")


@dataclass(frozen=True)
class WorldModel:
    name: str = "open"
    obstacles: tuple[Obstacle, ...] = ()


def open_world() -> WorldModel:
    return WorldModel(name="open")


def corridor_world(half_width: float = 6.0, length: float = 400.0,
                   wall_thickness: float = 2.0) -> WorldModel:
    """Two wall strips parallel to the x axis at +/- half_width."""
    half = length / 2.0
    return WorldModel(
        name="corridor",
        obstacles=(
            Obstacle(-half, half, half_width, half_width + wall_thickness),
            Obstacle(-half, half, -half_width - wall_thickness, -half_width),
        ),
    )


def load_world(name: str) -> WorldModel:
    if name == "open":
        return open_world()
    if name == "corridor":
        return corridor_world()
    raise KeyError(f"unknown world preset: {name!r}")


def _overlaps(cx: float, cy: float, cos_h: float, sin_h: float,
              half_len: float, half_wid: float, box: Obstacle) -> bool:
    # Separating-axis test between the oriented footprint and one AABB.
    # Candidate axes: world x/y and the footprint's long/lateral axes.
    bx = (box.x_min + box.x_max) / 2.0
    by = (box.y_min + box.y_max) / 2.0
    hx = (box.x_max - box.x_min) / 2.0
    hy = (box.y_max - box.y_min) / 2.0
    dx = cx - bx
    dy = cy - by

    # world x axis
    if abs(dx) > half_len * abs(cos_h) + half_wid * abs(sin_h) + hx:
        return False
    # world y axis
    if abs(dy) > half_len * abs(sin_h) + half_wid * abs(cos_h) + hy:
        return False
    # footprint long axis (cos_h, sin_h)
    if (abs(dx * cos_h + dy * sin_h)
            > half_len + hx * abs(cos_h) + hy * abs(sin_h)):
        return False
    # footprint lateral axis (-sin_h, cos_h)
    if (abs(-dx * sin_h + dy * cos_h)
            > half_wid + hx * abs(sin_h) + hy * abs(cos_h)):
        return False
    return True


def collision_check(state: VehicleState, params: VehicleParams,
                    world: WorldModel) -> bool:
    """True iff the vehicle footprint overlaps any obstacle.

    The footprint is a body_length x body_width rectangle centered on the
    pose. Touching counts as overlap.
    """
    if not world.obstacles:
        return False
    cos_h = math.cos(state.heading)
    sin_h = math.sin(state.heading)
    half_len = params.body_length / 2.0
    half_wid = params.body_width / 2.0
    for box in world.obstacles:
        if _overlaps(state.x_pos, state.y_pos, cos_h, sin_h,
                     half_len, half_wid, box):
            return True
    return False
