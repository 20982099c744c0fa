import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import open_map
from pgnkd.harness.config import resolve_workspace
from pgnkd.sensing import (
    BEV_RADIUS,
    LocalMapDescriptor,
    bev_raster,
    cyclic_shift,
    sense_bev,
    sense_fpv,
)
from pgnkd.workspace import GridWorkspace, Pose, random_free_pose


def _disk_count(cx, cy, occ_fn, w, h, radius=BEV_RADIUS, res=0.1):
    """Brute-force count of (cells, obstacle cells) with centers inside the disk."""
    total = blocked = 0
    for iy in range(-40, h + 40):
        for ix in range(-40, w + 40):
            x, y = (ix + 0.5) * res, (iy + 0.5) * res
            if (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius:
                total += 1
                blocked += occ_fn(ix, iy)
    return total, blocked


def test_fpv_open_map_sees_nothing():
    w = open_map(120, 120)
    d = sense_fpv(w, Pose(6.0, 6.0, 10.0))
    assert d.depth.shape == (32,) and d.hue.shape == (32,)
    assert np.all(d.depth == 5.0) and np.all(d.hue == 0)


def test_fpv_perpendicular_wall():
    occ = np.zeros((60, 60), dtype=bool)
    hue = np.zeros((60, 60), dtype=int)
    occ[30, :] = True  # wall face at y = 3.0
    hue[30, :] = 200
    w = GridWorkspace(occ, hue)
    d = sense_fpv(w, Pose(3.0, 2.0, 0.0))
    for r in (15, 16):
        # one 0.05 m step of slack; 1.05 - 1.0 exceeds 0.05 by float rounding only
        assert abs(d.depth[r] - 1.0) <= 0.05 + 1e-12
        assert d.hue[r] == 200
    # facing away: the wall is behind and nothing else is in range
    back = sense_fpv(w, Pose(3.0, 2.0, 180.0))
    assert np.all(back.depth == 5.0)


def test_fpv_ray_leaving_map_is_a_miss():
    w = open_map(20, 20, hue=99)
    d = sense_fpv(w, Pose(1.0, 1.0, 0.0))
    assert np.all(d.depth == 5.0) and np.all(d.hue == 0)


def test_bev_uniform_hue_single_bin():
    w = open_map(100, 100, hue=40)
    d = sense_bev(w, Pose(5.0, 5.0, 0.0))
    assert np.all(d.hist[:, [b for b in range(16) if b != 2]] == 0)
    assert np.all(d.hist[:, 2] > 0)
    assert np.all(d.occupancy == 0)
    total, _ = _disk_count(5.0, 5.0, lambda ix, iy: 0, 100, 100)
    assert d.total_hue_count == total


def test_bev_heading_30_is_one_sector_shift():
    w = resolve_workspace("office")
    p = Pose(2.35, 1.65, 0.0)
    assert sense_bev(w, Pose(p.x, p.y, 30.0)) == cyclic_shift(sense_bev(w, p), 1)


def test_bev_enclosed_robot_sees_obstacles():
    occ = np.ones((60, 60), dtype=bool)
    occ[30, 30] = False
    w = GridWorkspace(occ, np.zeros((60, 60), dtype=int))
    d = sense_bev(w, Pose(3.05, 3.05, 0.0))
    total, blocked = _disk_count(3.05, 3.05, lambda ix, iy: not (ix == 30 and iy == 30), 60, 60)
    assert d.total_hue_count == total - blocked == 1
    assert np.all(d.occupancy >= 0.95)


def test_bev_counts_match_brute_force_disk():
    w = resolve_workspace("gallery")
    p = Pose(1.55, 3.25, 77.0)
    d = sense_bev(w, p)
    total, blocked = _disk_count(p.x, p.y, lambda ix, iy: not (0 <= ix < 100 and 0 <= iy < 50) or w.occupancy[iy, ix],
                                 100, 50)
    assert d.total_hue_count == total - blocked


def test_descriptor_validation():
    with pytest.raises(ValueError):
        LocalMapDescriptor(np.zeros((11, 16)), np.zeros(11))
    with pytest.raises(ValueError):
        LocalMapDescriptor(np.zeros((12, 16)), np.full(12, 1.5))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-24, 24))
def test_heading_equivariance_exact(seed, k):
    w = resolve_workspace("studio")
    p = random_free_pose(w, np.random.default_rng(seed))
    h = p.heading + (seed % 1000) / 1000.0
    base = sense_bev(w, Pose(p.x, p.y, h))
    turned = sense_bev(w, Pose(p.x, p.y, (h + 30 * k) % 360))
    assert turned == cyclic_shift(base, k)
    assert turned.total_hue_count == base.total_hue_count


def test_sector_assignment_matches_bearing_formula():
    w = open_map(100, 100)
    occ = np.zeros((100, 100), dtype=bool)
    occ[60, 50] = True  # one obstacle cell, center (5.05, 6.05)
    w = GridWorkspace(occ, np.zeros((100, 100), dtype=int))
    for heading in (0.0, 13.0, 200.5):
        d = sense_bev(w, Pose(5.0, 5.0, heading))
        bearing = math.degrees(math.atan2(-(5.05 - 5.0), 6.05 - 5.0)) % 360
        sector = int(((bearing - heading) % 360) // 30)
        assert np.flatnonzero(d.occupancy).tolist() == [sector]


def test_bev_raster_shape_and_symbols():
    w = resolve_workspace("office")
    rows = bev_raster(w, Pose(1.05, 1.05, 0.0))
    assert len(rows) == 51 and all(len(r) == 51 for r in rows)
    assert rows[0][0] == " " and rows[25][25] in "0123456789abcdef"
    assert "#" in "".join(rows)
