"""Synthetic observations: a forward ray fan (FPV) and a sectorized BEV disk (LMD)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .workspace import RESOLUTION, GridWorkspace, Pose

N_RAYS = 32
FPV_FOV = 90.0
FPV_RANGE = 5.0
RAY_STEP = 0.05

BEV_RADIUS = 2.5
N_SECTORS = 12
SECTOR_WIDTH = 30.0
N_HUE_BINS = 16
HUE_BIN_WIDTH = 256 // N_HUE_BINS
RASTER_SIZE = 51

_RAY_OFFSETS = -FPV_FOV / 2 + np.arange(N_RAYS) * (FPV_FOV / (N_RAYS - 1))
_RAY_DEPTHS = np.arange(1, int(round(FPV_RANGE / RAY_STEP)) + 1) * RAY_STEP


@dataclass(frozen=True)
class FpvDescriptor:
    depth: np.ndarray  # (32,) meters in [0, 5]
    hue: np.ndarray  # (32,) int

    def features(self) -> np.ndarray:
        """Depths scaled to [0, 1] followed by a one-hot hue bin per ray."""
        onehot = np.zeros((N_RAYS, N_HUE_BINS))
        onehot[np.arange(N_RAYS), self.hue // HUE_BIN_WIDTH] = 1.0
        return np.concatenate([self.depth / FPV_RANGE, onehot.ravel()])


@dataclass(frozen=True, eq=False)
class LocalMapDescriptor:
    """Per-sector hue histograms (free cells) and obstacle fractions.

    Sector ``k`` spans sensor-frame polar angles ``[30k, 30k + 30)``.
    """

    hist: np.ndarray  # (12, 16) int counts
    occupancy: np.ndarray  # (12,) fractions
    radius: float = BEV_RADIUS

    def __post_init__(self):
        hist = np.asarray(self.hist, dtype=np.int64)
        occ = np.asarray(self.occupancy, dtype=float)
        if hist.shape != (N_SECTORS, N_HUE_BINS) or occ.shape != (N_SECTORS,):
            raise ValueError("descriptor must have 12 sectors of 16 hue bins")
        if (occ < 0).any() or (occ > 1).any():
            raise ValueError("occupancy fractions must lie in [0, 1]")
        object.__setattr__(self, "hist", hist)
        object.__setattr__(self, "occupancy", occ)

    def __eq__(self, other):
        if not isinstance(other, LocalMapDescriptor):
            return NotImplemented
        return np.array_equal(self.hist, other.hist) and np.array_equal(self.occupancy, other.occupancy)

    __hash__ = None

    @property
    def total_hue_count(self) -> int:
        return int(self.hist.sum())

    def shifted(self, k: int) -> "LocalMapDescriptor":
        return cyclic_shift(self, k)

    def features(self) -> np.ndarray:
        """204 values: hue histograms normalized by the disk's free-cell count, then occupancies."""
        total = max(self.total_hue_count, 1)
        return np.concatenate([self.hist.ravel() / total, self.occupancy])


def cyclic_shift(d: LocalMapDescriptor, k: int) -> LocalMapDescriptor:
    """Descriptor the same observer would produce after turning by ``k * 30`` degrees."""
    return LocalMapDescriptor(np.roll(d.hist, -k, axis=0), np.roll(d.occupancy, -k), d.radius)


def _bearing(dx, dy):
    """World bearing in degrees [0, 360): 0 along +y, counterclockwise positive."""
    return np.mod(np.degrees(np.arctan2(-dx, dy)), 360.0)


def sense_fpv(w: GridWorkspace, p: Pose) -> FpvDescriptor:
    bearings = np.radians(p.heading + _RAY_OFFSETS)
    dx, dy = -np.sin(bearings), np.cos(bearings)
    xs = p.x + np.outer(dx, _RAY_DEPTHS)
    ys = p.y + np.outer(dy, _RAY_DEPTHS)
    ix = np.floor(xs / RESOLUTION).astype(np.int64)
    iy = np.floor(ys / RESOLUTION).astype(np.int64)
    inside = (ix >= 0) & (iy >= 0) & (ix < w.width_cells) & (iy < w.height_cells)
    hit = np.zeros(xs.shape, dtype=bool)
    hit[inside] = w.occupancy[iy[inside], ix[inside]]
    # leaving the map ends the ray as a miss
    stop = hit | ~inside
    first = np.argmax(stop, axis=1)
    rows = np.arange(N_RAYS)
    got = hit[rows, first]  # False when the first stop is an exit (or nothing stops the ray)
    depth = np.where(got, _RAY_DEPTHS[first], FPV_RANGE)
    hue = np.where(got, w.hue[np.where(got, iy[rows, first], 0), np.where(got, ix[rows, first], 0)], 0).astype(np.int64)
    return FpvDescriptor(depth, hue)


def _heading_parts(heading: float) -> tuple[float, int]:
    """Split a heading into ``(remainder in [0, 30), whole sectors)``.

    Done in integer micro-degrees so headings 30 deg apart share the exact
    same remainder, which makes sector rotation an exact permutation.
    """
    micro = int(round(heading * 1_000_000))
    step = int(SECTOR_WIDTH * 1_000_000)
    q, r = divmod(micro, step)
    return r / 1_000_000, q


def disk_cells(w: GridWorkspace, p: Pose):
    """Cells whose centers lie within the BEV radius.

    Returns ``(bearing, occupied, hue)`` arrays; cells beyond the map edge
    count as obstacles.
    """
    reach = int(math.ceil(BEV_RADIUS / RESOLUTION)) + 1
    cx, cy = w.cell_of(p.x, p.y)
    ix = np.arange(cx - reach, cx + reach + 1)
    iy = np.arange(cy - reach, cy + reach + 1)
    IX, IY = np.meshgrid(ix, iy)
    dx = (IX + 0.5) * RESOLUTION - p.x
    dy = (IY + 0.5) * RESOLUTION - p.y
    within = dx * dx + dy * dy <= BEV_RADIUS * BEV_RADIUS
    IX, IY, dx, dy = IX[within], IY[within], dx[within], dy[within]
    inside = (IX >= 0) & (IY >= 0) & (IX < w.width_cells) & (IY < w.height_cells)
    occupied = np.ones(IX.shape, dtype=bool)
    hue = np.zeros(IX.shape, dtype=np.int64)
    occupied[inside] = w.occupancy[IY[inside], IX[inside]]
    hue[inside] = w.hue[IY[inside], IX[inside]]
    return _bearing(dx, dy), occupied, hue


def sense_bev(w: GridWorkspace, p: Pose) -> LocalMapDescriptor:
    bearing, occupied, hue = disk_cells(w, p)
    rem, whole = _heading_parts(p.heading)
    base = np.floor(np.mod(bearing - rem, 360.0) / SECTOR_WIDTH).astype(np.int64) % N_SECTORS
    sector = (base - whole) % N_SECTORS
    free = ~occupied
    hist = np.zeros((N_SECTORS, N_HUE_BINS), dtype=np.int64)
    np.add.at(hist, (sector[free], hue[free] // HUE_BIN_WIDTH), 1)
    cells = np.bincount(sector, minlength=N_SECTORS)
    blocked = np.bincount(sector[occupied], minlength=N_SECTORS)
    occ = np.divide(blocked, cells, out=np.zeros(N_SECTORS), where=cells > 0)
    return LocalMapDescriptor(hist, occ)


def bev_raster(w: GridWorkspace, p: Pose) -> list[str]:
    """51x51 sensor-frame raster, heading up; ``#`` obstacle, hue hex digit for free, blank outside the disk."""
    half = RASTER_SIZE // 2
    rad = math.radians(p.heading)
    fwd = (-math.sin(rad), math.cos(rad))
    right = (math.cos(rad), math.sin(rad))
    rows = []
    for r in range(RASTER_SIZE):
        u = (half - r) * RESOLUTION  # forward offset
        chars = []
        for c in range(RASTER_SIZE):
            v = (c - half) * RESOLUTION  # rightward offset
            if u * u + v * v > BEV_RADIUS * BEV_RADIUS:
                chars.append(" ")
                continue
            x = p.x + u * fwd[0] + v * right[0]
            y = p.y + u * fwd[1] + v * right[1]
            if not w.is_free(x, y):
                chars.append("#")
            else:
                ix, iy = w.cell_of(x, y)
                chars.append(format(int(w.hue[iy, ix]) // HUE_BIN_WIDTH, "x"))
        rows.append("".join(chars))
    return rows
