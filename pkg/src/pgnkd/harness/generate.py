"""Procedural rooms-and-doorways workspaces with per-room hue palettes."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..sensing import HUE_BIN_WIDTH, N_HUE_BINS
from ..workspace import RESOLUTION, GridWorkspace

HUE_NOISE = 8
WALL_CELLS = 1
PARTITION_CELLS = 2


class InfeasibleSpecError(ValueError):
    """The requested layout cannot be generated."""


@dataclass(frozen=True)
class RoomSpec:
    width_m: float = 10.0
    height_m: float = 5.0
    n_rooms: int = 3
    door_width_m: float = 1.2
    n_pillars: int = 1
    pillar_m: float = 0.6


def _cells(m: float) -> int:
    return int(round(m / RESOLUTION))


def _noisy(bins: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Hue at each bin's center with uniform integer noise of +/-8."""
    noise = rng.integers(-HUE_NOISE, HUE_NOISE + 1, size=bins.shape)
    return np.clip(bins * HUE_BIN_WIDTH + HUE_BIN_WIDTH // 2 + noise, 0, 255)


def connected_components(free: np.ndarray) -> int:
    """Count 4-connected components of a boolean grid (flood fill)."""
    seen = np.zeros_like(free, dtype=bool)
    h, w = free.shape
    count = 0
    for y0, x0 in zip(*np.nonzero(free)):
        if seen[y0, x0]:
            continue
        count += 1
        seen[y0, x0] = True
        queue = deque([(y0, x0)])
        while queue:
            y, x = queue.popleft()
            for ny, nx in ((y + 1, x), (y - 1, x), (y, x + 1), (y, x - 1)):
                if 0 <= ny < h and 0 <= nx < w and free[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    queue.append((ny, nx))
    return count


def generate_workspace(spec: RoomSpec, seed: int, name: str = "") -> GridWorkspace:
    """Rooms side by side along x, joined by doorways.

    Floor stripes get narrower toward +x, so the half of any local map
    facing -x holds fewer hue bins; entropy canonicalization then picks
    nearly the same world orientation everywhere.
    """
    if spec.width_m < 3.0 or spec.height_m < 3.0:
        raise InfeasibleSpecError("workspace must be at least 3 m x 3 m")
    if spec.n_rooms < 2:
        raise InfeasibleSpecError("need at least two rooms")
    if spec.door_width_m < 0.5:
        raise InfeasibleSpecError("doorways must be at least 0.5 m wide")
    W, H = _cells(spec.width_m), _cells(spec.height_m)
    door = _cells(spec.door_width_m)
    inner_h = H - 2 * WALL_CELLS
    room_w = (W - 2 * WALL_CELLS - (spec.n_rooms - 1) * PARTITION_CELLS) // spec.n_rooms
    if room_w < _cells(1.5) or door > inner_h - 2:
        raise InfeasibleSpecError("rooms too small for the requested count or doorway")
    rng = np.random.default_rng(seed)

    occ = np.zeros((H, W), dtype=bool)
    occ[:WALL_CELLS, :] = occ[-WALL_CELLS:, :] = True
    occ[:, :WALL_CELLS] = occ[:, -WALL_CELLS:] = True
    room_of = np.full(W, -1)
    x = WALL_CELLS
    for r in range(spec.n_rooms):
        width = room_w if r < spec.n_rooms - 1 else W - WALL_CELLS - x
        room_of[x:x + width] = r
        x += width
        if r < spec.n_rooms - 1:
            occ[:, x:x + PARTITION_CELLS] = True
            y0 = int(rng.integers(WALL_CELLS + 1, H - WALL_CELLS - door))
            occ[y0:y0 + door, x:x + PARTITION_CELLS] = False
            x += PARTITION_CELLS

    side = _cells(spec.pillar_m)
    margin = _cells(1.0)
    for _ in range(spec.n_pillars):
        # keep pillars a meter clear of walls and doorways
        for _attempt in range(50):
            px = int(rng.integers(WALL_CELLS + margin, W - WALL_CELLS - margin - side))
            py = int(rng.integers(WALL_CELLS + margin, H - WALL_CELLS - margin - side))
            lo_x, hi_x = max(px - margin, 0), min(px + side + margin, W)
            lo_y, hi_y = max(py - margin, 0), min(py + side + margin, H)
            if not occ[lo_y:hi_y, lo_x:hi_x].any():
                occ[py:py + side, px:px + side] = True
                break

    # floor: vertical stripes that narrow toward +x, shifted per room
    xs = (np.arange(W) + 0.5) * RESOLUTION
    stripe = np.floor(0.4 * xs + 0.2 * xs ** 2).astype(np.int64)
    palette_offset = 3 * np.clip(room_of, 0, None)
    floor_bins = np.broadcast_to((stripe + palette_offset) % N_HUE_BINS, (H, W))

    # walls: bins encode which wall and where along it, so FPV hits are position-coded
    ys = (np.arange(H) + 0.5) * RESOLUTION
    along_x = np.floor(xs / 0.5).astype(np.int64)
    along_y = np.floor(ys / 0.5).astype(np.int64)[:, None]
    wall_bins = (2 + along_y + palette_offset[None, :]) % N_HUE_BINS
    wall_bins[-WALL_CELLS:, :] = along_x % N_HUE_BINS
    wall_bins[:WALL_CELLS, :] = (8 + along_x) % N_HUE_BINS
    wall_bins[:, :WALL_CELLS] = (4 + along_y) % N_HUE_BINS
    wall_bins[:, -WALL_CELLS:] = (12 + along_y) % N_HUE_BINS

    hue = np.where(occ, _noisy(wall_bins, rng), _noisy(floor_bins, rng))
    if connected_components(~occ) != 1:
        raise InfeasibleSpecError("free space is not connected")
    return GridWorkspace(occ, hue, name=name)
