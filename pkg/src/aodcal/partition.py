"""Partition of monitors and grid cells into region x window fitting blocks.

Region membership is an input column (no shapefiles). A site joins a foreign
region's buffer when it lies within ``buffer_km`` of any of that region's
grid-cell centroids; buffer membership is directional and not symmetric.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .geo import pairwise_distances_km
from .types import BlockSpec, RegionId, SiteId, TemporalWindow

DEFAULT_BUFFER_KM = 100.0


def assign_blocks(
    monitors: list[SiteId],
    cells: list[tuple[SiteId, RegionId]],
    region_map: dict[str, RegionId],
    windows: tuple[TemporalWindow, ...],
    buffer_km: float = DEFAULT_BUFFER_KM,
) -> list[BlockSpec]:
    """Build one BlockSpec per (region, window) pair, all 9 x len(windows).

    ``region_map`` gives each monitor its primary region. Core membership
    follows the primary region; buffer membership requires distance to the
    foreign region's cells <= buffer_km.
    """
    if buffer_km <= 0:
        raise InputError(f"buffer_km must be > 0, got {buffer_km}")
    missing = sorted(m.id for m in monitors if m.id not in region_map)
    if missing:
        raise InputError("monitors missing from region map: " + ", ".join(missing))

    mon_lon = np.array([m.lon for m in monitors])
    mon_lat = np.array([m.lat for m in monitors])
    mon_region = [region_map[m.id] for m in monitors]

    cell_lon = np.array([c.lon for c, _ in cells])
    cell_lat = np.array([c.lat for c, _ in cells])
    cell_region = [r for _, r in cells]

    blocks = []
    for region in RegionId:
        core_mon = frozenset(
            m.id for m, r in zip(monitors, mon_region) if r is region)
        core_cell_idx = [i for i, r in enumerate(cell_region) if r is region]
        core_cells = frozenset(cells[i][0].id for i in core_cell_idx)

        buffer_mon: frozenset[str] = frozenset()
        buffer_cells: frozenset[str] = frozenset()
        if core_cell_idx:
            rl = cell_lon[core_cell_idx]
            rt = cell_lat[core_cell_idx]
            if len(monitors):
                dmon = pairwise_distances_km(mon_lon, mon_lat, rl, rt).min(axis=1)
                buffer_mon = frozenset(
                    m.id for m, r, d in zip(monitors, mon_region, dmon)
                    if r is not region and d <= buffer_km)
            if len(cells):
                dcell = pairwise_distances_km(cell_lon, cell_lat, rl, rt).min(axis=1)
                buffer_cells = frozenset(
                    c.id for (c, r), d in zip(cells, dcell)
                    if r is not region and d <= buffer_km)

        for window in windows:
            blocks.append(BlockSpec(
                region=region,
                window=window,
                core_monitors=core_mon,
                buffer_monitors=buffer_mon,
                core_cells=core_cells,
                buffer_cells=buffer_cells,
            ))
    return blocks
