import datetime as dt

import numpy as np
import pytest

from aodcal.errors import InputError
from aodcal.partition import assign_blocks
from aodcal.types import RegionId, SiteId, windows_for_year

KM_PER_DEG_LAT = 111.19  # approximate, for test geometry only


def _grid(region: RegionId, lon0: float, lat0: float, n=4):
    cells = []
    for i in range(n):
        cells.append((SiteId(f"{region.value}_c{i}", lon0 + 0.3 * i, lat0),
                      region))
    return cells


def test_block_count_and_core_membership():
    windows = windows_for_year(2011)
    monitors = [SiteId("m1", -84.0, 39.5), SiteId("m2", -85.0, 33.0)]
    region_map = {"m1": RegionId.OhioValley, "m2": RegionId.Southeast}
    cells = _grid(RegionId.OhioValley, -84.5, 39.5) + _grid(RegionId.Southeast, -85.0, 33.0)
    blocks = assign_blocks(monitors, cells, region_map, windows)
    assert len(blocks) == 27
    jan15 = dt.date(2011, 1, 15)
    ov1 = next(b for b in blocks
               if b.region is RegionId.OhioValley and b.window.contains(jan15))
    assert ov1.window.index == 1
    assert "m1" in ov1.core_monitors
    assert "m1" not in ov1.buffer_monitors


def test_buffer_membership_within_100km():
    windows = windows_for_year(2011)
    # Southeast monitor ~50 km south of an OhioValley cell
    ov_cell_lat = 39.0
    mon_lat = ov_cell_lat - 50.0 / KM_PER_DEG_LAT
    monitors = [SiteId("near", -84.0, mon_lat), SiteId("ov", -84.0, 39.4)]
    region_map = {"near": RegionId.Southeast, "ov": RegionId.OhioValley}
    cells = [(SiteId("c1", -84.0, ov_cell_lat), RegionId.OhioValley),
             (SiteId("c2", -84.0, mon_lat - 0.05), RegionId.Southeast)]
    blocks = assign_blocks(monitors, cells, region_map, windows)
    for b in blocks:
        if b.region is RegionId.OhioValley:
            assert "near" in b.buffer_monitors
            assert "near" not in b.core_monitors


def test_no_buffer_beyond_100km():
    windows = windows_for_year(2011)
    far_lat = 39.0 - 250.0 / KM_PER_DEG_LAT
    monitors = [SiteId("far", -84.0, far_lat), SiteId("ov", -84.0, 39.2)]
    region_map = {"far": RegionId.Southeast, "ov": RegionId.OhioValley}
    cells = [(SiteId("c1", -84.0, 39.0), RegionId.OhioValley),
             (SiteId("c2", -84.0, far_lat), RegionId.Southeast)]
    blocks = assign_blocks(monitors, cells, region_map, windows)
    for b in blocks:
        if b.region is RegionId.OhioValley:
            assert "far" not in b.buffer_monitors


def test_partition_totality():
    # every monitor is core in exactly one region across all 27 blocks
    rng = np.random.default_rng(5)
    windows = windows_for_year(2011)
    regions = list(RegionId)
    monitors = []
    region_map = {}
    for i in range(40):
        m = SiteId(f"m{i}", float(rng.uniform(-120, -70)), float(rng.uniform(30, 45)))
        monitors.append(m)
        region_map[m.id] = regions[i % 9]
    cells = []
    for j, r in enumerate(regions):
        cells.append((SiteId(f"c{j}", -120 + 5 * j, 38.0), r))
    blocks = assign_blocks(monitors, cells, region_map, windows)
    for window in windows:
        per_window = [b for b in blocks if b.window == window]
        for m in monitors:
            owners = [b for b in per_window if m.id in b.core_monitors]
            assert len(owners) == 1
            assert owners[0].region is region_map[m.id]


def test_missing_region_map_entry_lists_ids():
    windows = windows_for_year(2011)
    monitors = [SiteId("known", -84.0, 39.0), SiteId("mystery", -85.0, 38.0)]
    with pytest.raises(InputError, match="mystery"):
        assign_blocks(monitors, [], {"known": RegionId.OhioValley}, windows)


def test_bad_buffer_km():
    with pytest.raises(InputError):
        assign_blocks([], [], {}, windows_for_year(2011), buffer_km=0.0)
