"""Grid world model, agent kinematics, the 13-action set and the bumper filter.

Axis convention: heading 0 deg points along +y and angles grow counterclockwise,
so a unit step at heading ``h`` moves by ``(-sin h, cos h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RESOLUTION = 0.1
STEP_LENGTH = 0.5
GOAL_RADIUS = 0.25
SAMPLE_SPACING = 0.05
N_ACTIONS = 13
RANDOM_TURN_ATTEMPTS = 100

TURN_RANDOM = 0
# index 0 is the random turn, then fixed angles in ascending signed order
FIXED_ANGLES = (-150, -120, -90, -60, -30, 0, 30, 60, 90, 120, 150, 180)
ACTION_ANGLES: tuple[int | None, ...] = (None,) + FIXED_ANGLES
FIXED_INDICES = tuple(range(1, N_ACTIONS))

_SWEEP = np.linspace(0.0, STEP_LENGTH, int(round(STEP_LENGTH / SAMPLE_SPACING)) + 1)


class WorkspaceFormatError(ValueError):
    """Malformed or inconsistent workspace file."""


class MotionBlocked(Exception):
    """The swept 0.5 m segment touches an obstacle or leaves the map."""


@dataclass(frozen=True)
class Action:
    kind: str
    angle: int | None = None

    @property
    def index(self) -> int:
        if self.kind == "turn_random":
            return TURN_RANDOM
        return FIXED_ANGLES.index(self.angle) + 1

    @classmethod
    def from_index(cls, index: int) -> "Action":
        if not 0 <= index < N_ACTIONS:
            raise ValueError(f"action index out of range: {index}")
        if index == TURN_RANDOM:
            return cls("turn_random")
        return cls("turn_fixed", ACTION_ANGLES[index])


ACTIONS = tuple(Action.from_index(i) for i in range(N_ACTIONS))


def angle_to_index(angle: float) -> int:
    """Index of the fixed action turning by ``angle`` (taken modulo 360)."""
    a = int(round(angle)) % 360
    if a > 180:
        a -= 360
    if a == -180:
        a = 180
    return FIXED_ANGLES.index(a) + 1


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0


@dataclass(frozen=True)
class EpisodeStep:
    pose_before: Pose
    action_index: int
    realized_angle: float
    pose_after: Pose


class GridWorkspace:
    """Immutable occupancy + hue grid at 0.1 m per cell.

    Arrays are indexed ``[iy, ix]`` with ``iy = 0`` the row nearest ``y = 0``.
    """

    def __init__(self, occupancy, hue, resolution: float = RESOLUTION, name: str = ""):
        occupancy = np.array(occupancy, dtype=bool)
        hue = np.array(hue, dtype=np.int64)
        if resolution != RESOLUTION:
            raise WorkspaceFormatError(f"resolution must be {RESOLUTION}, got {resolution}")
        if occupancy.ndim != 2 or occupancy.shape != hue.shape:
            raise WorkspaceFormatError("occupancy and hue must be equal-shaped 2-D grids")
        if hue.size and (hue.min() < 0 or hue.max() > 255):
            raise WorkspaceFormatError("hue values must lie in [0, 255]")
        if occupancy.all():
            raise WorkspaceFormatError("workspace has no free cell")
        occupancy.setflags(write=False)
        hue.setflags(write=False)
        self.occupancy = occupancy
        self.hue = hue
        self.resolution = RESOLUTION
        self.name = name

    @property
    def height_cells(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width_cells(self) -> int:
        return self.occupancy.shape[1]

    @property
    def width_m(self) -> float:
        return self.width_cells * RESOLUTION

    @property
    def height_m(self) -> float:
        return self.height_cells * RESOLUTION

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """``(ix, iy)`` of the cell containing a point (may be out of range)."""
        return math.floor(x / RESOLUTION), math.floor(y / RESOLUTION)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * RESOLUTION, (iy + 0.5) * RESOLUTION

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width_m and 0.0 <= y < self.height_m

    def is_free(self, x: float, y: float) -> bool:
        if not self.in_bounds(x, y):
            return False
        ix, iy = self.cell_of(x, y)
        return not self.occupancy[iy, ix]

    def free_mask(self, xs, ys) -> np.ndarray:
        """Vectorized ``is_free`` over arrays of points."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        ix = np.floor(xs / RESOLUTION).astype(np.int64)
        iy = np.floor(ys / RESOLUTION).astype(np.int64)
        inside = (ix >= 0) & (iy >= 0) & (ix < self.width_cells) & (iy < self.height_cells)
        out = np.zeros(xs.shape, dtype=bool)
        out[inside] = ~self.occupancy[iy[inside], ix[inside]]
        return out

    def free_cells(self) -> np.ndarray:
        """``(n, 2)`` array of free ``(ix, iy)`` pairs in row-major order."""
        iy, ix = np.nonzero(~self.occupancy)
        return np.stack([ix, iy], axis=1)

    def __eq__(self, other):
        if not isinstance(other, GridWorkspace):
            return NotImplemented
        return np.array_equal(self.occupancy, other.occupancy) and np.array_equal(self.hue, other.hue)

    def __repr__(self):
        return f"GridWorkspace({self.width_cells}x{self.height_cells}, name={self.name!r})"


def check_pose(w: GridWorkspace, p: Pose) -> None:
    if not w.is_free(p.x, p.y):
        raise ValueError(f"pose {p} is not on a free cell")


def _direction(heading_deg: float) -> tuple[float, float]:
    rad = math.radians(heading_deg)
    return -math.sin(rad), math.cos(rad)


def _sweep_points(x: float, y: float, dx, dy):
    """Sample points covering every grid cell the 0.5 m segment passes through.

    The fixed 0.05 m samples are joined by each grid-line crossing and the
    midpoint between consecutive crossings, so corners clipped between two
    regular samples are still caught.
    """
    dx = np.atleast_1d(np.asarray(dx, dtype=float))[:, None]
    dy = np.atleast_1d(np.asarray(dy, dtype=float))[:, None]
    lines = np.arange(-6, 8, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = ((np.floor(x / RESOLUTION) + lines) * RESOLUTION - x) / dx
        ty = ((np.floor(y / RESOLUTION) + lines) * RESOLUTION - y) / dy
    t = np.concatenate([np.broadcast_to(_SWEEP, (dx.shape[0], _SWEEP.size)), tx, ty], axis=1)
    t = np.where((t >= 0.0) & (t <= STEP_LENGTH), t, 0.0)
    t.sort(axis=1)
    t = np.concatenate([t, 0.5 * (t[:, 1:] + t[:, :-1])], axis=1)
    return x + t * dx, y + t * dy


def segment_free(w: GridWorkspace, p: Pose, heading_deg: float) -> bool:
    """True when no point of the 0.5 m sweep along ``heading_deg`` is blocked."""
    dx, dy = _direction(heading_deg)
    return bool(w.free_mask(*_sweep_points(p.x, p.y, dx, dy)).all())


def apply_action(w: GridWorkspace, p: Pose, action: Action | int, rng: np.random.Generator):
    """Turn then move 0.5 m forward.

    Returns ``(new_pose, realized_angle)``. Raises :class:`MotionBlocked` when
    the sweep is not collision free; the motion is never clipped.
    """
    if isinstance(action, (int, np.integer)):
        action = Action.from_index(int(action))
    if action.kind == "turn_random":
        angle = int(rng.integers(-179, 181))
    else:
        angle = action.angle
    heading = (p.heading + angle) % 360.0
    if not segment_free(w, p, heading):
        raise MotionBlocked(f"{action} from {p}")
    dx, dy = _direction(heading)
    return Pose(p.x + STEP_LENGTH * dx, p.y + STEP_LENGTH * dy, heading), angle


def safe_fixed_mask(w: GridWorkspace, p: Pose) -> np.ndarray:
    """Boolean mask over the 12 fixed angles (in ``FIXED_ANGLES`` order)."""
    headings = np.radians((p.heading + np.asarray(FIXED_ANGLES, dtype=float)) % 360.0)
    xs, ys = _sweep_points(p.x, p.y, -np.sin(headings), np.cos(headings))
    return w.free_mask(xs, ys).all(axis=1)


def safe_actions(w: GridWorkspace, p: Pose) -> frozenset[int]:
    """Bumper filter: indices of actions whose full motion is collision free.

    The random turn is kept only if some fixed angle is safe, since
    :func:`resolve_random_turn` then always finds a safe heading.
    """
    mask = safe_fixed_mask(w, p)
    safe = {int(i) + 1 for i in np.flatnonzero(mask)}
    if safe:
        safe.add(TURN_RANDOM)
    return frozenset(safe)


def resolve_random_turn(w: GridWorkspace, p: Pose, rng: np.random.Generator) -> int:
    """Draw a safe random turn angle, falling back to a safe fixed angle."""
    for _ in range(RANDOM_TURN_ATTEMPTS):
        angle = int(rng.integers(-179, 181))
        if segment_free(w, p, (p.heading + angle) % 360.0):
            return angle
    mask = safe_fixed_mask(w, p)
    choices = np.flatnonzero(mask)
    if choices.size == 0:
        raise MotionBlocked(f"no safe heading from {p}")
    return FIXED_ANGLES[int(choices[rng.integers(choices.size)])]


def execute(w: GridWorkspace, p: Pose, action_index: int, rng: np.random.Generator) -> EpisodeStep:
    """Run one bumper-approved action, resolving the random turn safely."""
    if action_index == TURN_RANDOM:
        angle = resolve_random_turn(w, p, rng)
        pose, _ = apply_action(w, p, Action("turn_fixed", angle), rng)
    else:
        pose, angle = apply_action(w, p, action_index, rng)
    return EpisodeStep(p, int(action_index), angle, pose)


def goal_reached(p: Pose, goal: Pose) -> bool:
    return math.hypot(p.x - goal.x, p.y - goal.y) <= GOAL_RADIUS


def distance(p: Pose, q: Pose) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def random_free_pose(w: GridWorkspace, rng: np.random.Generator) -> Pose:
    """Cell-center pose on a uniformly drawn free cell, integer heading."""
    cells = w.free_cells()
    ix, iy = cells[rng.integers(len(cells))]
    x, y = w.cell_center(int(ix), int(iy))
    return Pose(x, y, float(rng.integers(0, 360)))


# -- .wsp text format ------------------------------------------------------

_PALETTE_CHARS = [chr(c) for c in range(33, 127)] + [chr(c) for c in range(0x100, 0x100 + 600)]


def dumps(w: GridWorkspace) -> str:
    combos = sorted({(bool(o), int(h)) for o, h in zip(w.occupancy.ravel(), w.hue.ravel())})
    if len(combos) > len(_PALETTE_CHARS):
        raise WorkspaceFormatError("too many distinct (occupancy, hue) pairs")
    chars = {combo: _PALETTE_CHARS[i] for i, combo in enumerate(combos)}
    lines = [f"width {w.width_cells}", f"height {w.height_cells}", f"resolution {RESOLUTION}"]
    for combo, ch in chars.items():
        lines.append(f"cell {ch} {int(combo[0])} {combo[1]}")
    lines.append("map:")
    for iy in range(w.height_cells - 1, -1, -1):
        lines.append("".join(chars[(bool(o), int(h))] for o, h in zip(w.occupancy[iy], w.hue[iy])))
    return "\n".join(lines) + "\n"


def loads(text: str, name: str = "") -> GridWorkspace:
    header: dict[str, str] = {}
    palette: dict[str, tuple[bool, int]] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if line == "map:":
            break
        parts = line.split()
        if parts[0] == "cell":
            if len(parts) != 4 or len(parts[1]) != 1 or parts[2] not in ("0", "1"):
                raise WorkspaceFormatError(f"bad palette line: {line!r}")
            hue = int(parts[3])
            if not 0 <= hue <= 255:
                raise WorkspaceFormatError(f"hue out of range: {line!r}")
            palette[parts[1]] = (parts[2] == "1", hue)
        elif parts[0] in ("width", "height", "resolution") and len(parts) == 2:
            header[parts[0]] = parts[1]
        else:
            raise WorkspaceFormatError(f"unknown header line: {line!r}")
    else:
        raise WorkspaceFormatError("missing 'map:' section")
    try:
        width, height = int(header["width"]), int(header["height"])
        resolution = float(header["resolution"])
    except (KeyError, ValueError) as exc:
        raise WorkspaceFormatError(f"incomplete header: {exc}") from None
    if resolution != RESOLUTION:
        raise WorkspaceFormatError(f"resolution must be {RESOLUTION}, got {resolution}")
    rows = [ln.rstrip("\r\n") for ln in lines[i:] if ln.strip()]
    if len(rows) != height:
        raise WorkspaceFormatError(f"expected {height} map rows, found {len(rows)}")
    occ = np.zeros((height, width), dtype=bool)
    hue = np.zeros((height, width), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise WorkspaceFormatError(f"row {r} has {len(row)} cells, expected {width}")
        iy = height - 1 - r
        for ix, ch in enumerate(row):
            if ch not in palette:
                raise WorkspaceFormatError(f"unknown cell character {ch!r} in row {r}")
            occ[iy, ix], hue[iy, ix] = palette[ch]
    return GridWorkspace(occ, hue, resolution, name=name)


def load(path) -> GridWorkspace:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), name=path.stem)


def save(w: GridWorkspace, path) -> None:
    Path(path).write_text(dumps(w), encoding="utf-8")
