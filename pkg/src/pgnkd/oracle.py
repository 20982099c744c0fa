"""Training-time shortest-path oracle over the obstacle grid."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .workspace import (
    FIXED_ANGLES,
    RESOLUTION,
    STEP_LENGTH,
    GridWorkspace,
    Pose,
    _direction,
    safe_fixed_mask,
)

_AXIS = [(1, 0), (-1, 0), (0, 1), (0, -1)]
_DIAG = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


class UnreachableError(ValueError):
    """A pose has no finite path cost to the goal."""


@dataclass(frozen=True, eq=False)
class CostField:
    cost: np.ndarray  # (height, width), inf on obstacles and unreachable cells
    goal: Pose

    def at(self, x: float, y: float) -> float:
        ix, iy = math.floor(x / RESOLUTION), math.floor(y / RESOLUTION)
        h, w = self.cost.shape
        if not (0 <= ix < w and 0 <= iy < h):
            return math.inf
        return float(self.cost[iy, ix])

    def pose_cost(self, p: Pose) -> float:
        return self.at(p.x, p.y)


def dijkstra(free: np.ndarray, source: tuple[int, int], connectivity: int = 8) -> np.ndarray:
    """Geodesic cost in meters from ``source = (ix, iy)`` to every cell of a boolean free grid."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    moves = [(dx, dy, RESOLUTION) for dx, dy in _AXIS]
    if connectivity == 8:
        moves += [(dx, dy, RESOLUTION * math.sqrt(2.0)) for dx, dy in _DIAG]
    h, w = free.shape
    cost = np.full((h, w), math.inf)
    sx, sy = source
    cost[sy, sx] = 0.0
    heap = [(0.0, sx, sy)]
    while heap:
        c, x, y = heapq.heappop(heap)
        if c > cost[y, x]:
            continue
        for dx, dy, wgt in moves:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and free[ny, nx]:
                nc = c + wgt
                if nc < cost[ny, nx]:
                    cost[ny, nx] = nc
                    heapq.heappush(heap, (nc, nx, ny))
    return cost


def build_cost_field(w: GridWorkspace, goal: Pose, connectivity: int = 8) -> CostField:
    if not w.is_free(goal.x, goal.y):
        raise ValueError(f"goal {goal} is not on a free cell")
    cost = dijkstra(~w.occupancy, w.cell_of(goal.x, goal.y), connectivity)
    cost.setflags(write=False)
    return CostField(cost, goal)


def episode_reward(cf: CostField, start: Pose, end: Pose) -> float:
    """Progress toward the goal: ``cost(start) - cost(end)`` in meters."""
    c0, c1 = cf.pose_cost(start), cf.pose_cost(end)
    if math.isinf(c0) or math.isinf(c1):
        raise UnreachableError(f"infinite path cost at {start if math.isinf(c0) else end}")
    return c0 - c1


def _tie_order(angle: int) -> tuple[int, int]:
    return abs(angle), 0 if angle > 0 else 1


def best_action(w: GridWorkspace, cf: CostField, p: Pose) -> int:
    """Safe fixed action whose landing cell has the lowest path cost.

    Ties go to the smallest turn, positive before negative. Never the random turn.
    """
    if math.isinf(cf.pose_cost(p)):
        raise UnreachableError(f"pose {p} cannot reach the goal")
    mask = safe_fixed_mask(w, p)
    best = None
    for k, angle in enumerate(FIXED_ANGLES):
        if not mask[k]:
            continue
        dx, dy = _direction((p.heading + angle) % 360.0)
        c = cf.at(p.x + STEP_LENGTH * dx, p.y + STEP_LENGTH * dy)
        key = (c, _tie_order(angle))
        if best is None or key < best[0]:
            best = (key, k + 1)
    if best is None:
        raise UnreachableError(f"no safe action at {p}")
    return best[1]
