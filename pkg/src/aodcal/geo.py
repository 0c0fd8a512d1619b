"""Great-circle distances on the lon/lat sphere.

All distances in the package are haversine kilometres with a fixed Earth
radius of 6371.0 km; no projections anywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .types import SiteId

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: SiteId, b: SiteId) -> float:
    """Great-circle distance between two sites in km."""
    return float(pairwise_distances_km(
        np.array([a.lon]), np.array([a.lat]),
        np.array([b.lon]), np.array([b.lat]))[0, 0])


def pairwise_distances_km(lon1, lat1, lon2, lat2) -> np.ndarray:
    """Distance matrix (len(lon1) x len(lon2)) between two site lists."""
    lon1 = np.asarray(lon1, dtype=float)
    lat1 = np.asarray(lat1, dtype=float)
    lon2 = np.asarray(lon2, dtype=float)
    lat2 = np.asarray(lat2, dtype=float)
    for arr, name in ((lon1, "lon"), (lat1, "lat"), (lon2, "lon"), (lat2, "lat")):
        if not np.isfinite(arr).all():
            raise InputError(f"non-finite {name} coordinate")
    rlat1 = np.radians(lat1)[:, None]
    rlat2 = np.radians(lat2)[None, :]
    dlat = rlat2 - rlat1
    dlon = np.radians(lon2)[None, :] - np.radians(lon1)[:, None]
    h = np.sin(dlat / 2.0) ** 2 + np.cos(rlat1) * np.cos(rlat2) * np.sin(dlon / 2.0) ** 2
    # clip guards roundoff at antipodes; zero distance stays exactly zero
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def distance_matrix_km(lons, lats) -> np.ndarray:
    """Symmetric distance matrix for one site list, exact zeros on the diagonal."""
    d = pairwise_distances_km(lons, lats, lons, lats)
    np.fill_diagonal(d, 0.0)
    return d
