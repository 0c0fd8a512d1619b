"""Core domain types: sites, records, climate regions, temporal windows, blocks.

Covariate ordering is fixed package-wide: the model's covariate vector has
the nine CSV columns first, then the AOD x standardized-temperature
interaction formed during preprocessing.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InputError

# Raw covariate columns as they appear in the monitor/grid CSVs, in order.
BASE_COVARIATES = (
    "fire",
    "forest",
    "emission",
    "rh",
    "tmp",
    "vgrd",
    "ugrd",
    "hpbl",
    "road",
)
# Model covariate vector: the nine base columns plus the interaction term.
COVARIATES = BASE_COVARIATES + ("aod_tmp",)
N_COVARIATES = len(COVARIATES)
# Columns that are log-transformed before standardization.
LOG_COVARIATES = ("fire", "emission", "road")
TMP_INDEX = BASE_COVARIATES.index("tmp")


class RegionId(Enum):
    """The nine NOAA climate regions used to partition the CONUS."""

    West = "West"
    Northwest = "Northwest"
    Southwest = "Southwest"
    NorthernRockies = "NorthernRockies"
    UpperMidwest = "UpperMidwest"
    South = "South"
    Southeast = "Southeast"
    OhioValley = "OhioValley"
    Northeast = "Northeast"

    @classmethod
    def parse(cls, text: str) -> "RegionId":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(r.value for r in cls)
            raise InputError(f"unknown region {text!r}; expected one of: {valid}")


@dataclass(frozen=True)
class SiteId:
    """A point location: opaque identifier plus lon/lat in degrees."""

    id: str
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise InputError(f"site {self.id!r}: non-finite coordinates")
        if not -180.0 <= self.lon <= 180.0:
            raise InputError(f"site {self.id!r}: lon {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise InputError(f"site {self.id!r}: lat {self.lat} outside [-90, 90]")


@dataclass(frozen=True)
class TemporalWindow:
    """One of the three 4-month spans that partition the study year."""

    index: int  # 1, 2 or 3
    start: dt.date
    end: dt.date  # inclusive

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def contains(self, day: dt.date) -> bool:
        return self.start <= day <= self.end

    def day_offset(self, day: dt.date) -> int:
        if not self.contains(day):
            raise InputError(f"day {day} outside window {self.index} "
                             f"({self.start}..{self.end})")
        return (day - self.start).days

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(self.n_days)]


def windows_for_year(year: int) -> tuple[TemporalWindow, TemporalWindow, TemporalWindow]:
    """The Jan-Apr / May-Aug / Sep-Dec windows for one study year."""
    return (
        TemporalWindow(1, dt.date(year, 1, 1), dt.date(year, 4, 30)),
        TemporalWindow(2, dt.date(year, 5, 1), dt.date(year, 8, 31)),
        TemporalWindow(3, dt.date(year, 9, 1), dt.date(year, 12, 31)),
    )


def window_for_day(day: dt.date, windows=None) -> TemporalWindow:
    windows = windows or windows_for_year(day.year)
    for w in windows:
        if w.contains(day):
            return w
    raise InputError(f"day {day} not covered by any temporal window")


@dataclass(frozen=True)
class MonitorRecord:
    """One monitor-day observation.

    ``z`` holds the length-10 covariate vector (see COVARIATES); NaN entries
    mark missing values. The interaction slot ``z[9]`` stays NaN until
    preprocessing forms it from AOD and standardized temperature.
    """

    site: SiteId
    day: dt.date
    pm25: float
    aod: float  # NaN = missing
    z: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.pm25) and self.pm25 >= 0.0):
            raise InputError(
                f"site {self.site.id!r} day {self.day}: pm25 {self.pm25} "
                "must be finite and >= 0")
        if math.isfinite(self.aod) and self.aod < 0.0:
            raise InputError(f"site {self.site.id!r} day {self.day}: aod < 0")
        if self.z.shape != (N_COVARIATES,):
            raise InputError(f"covariate vector must have length {N_COVARIATES}")

    @property
    def complete(self) -> bool:
        """True when AOD and every covariate needed by the model are present."""
        return bool(math.isfinite(self.aod) and np.isfinite(self.z).all())


@dataclass(frozen=True)
class GridCellDay:
    """A prediction target: one grid-cell centroid on one day."""

    cell: SiteId
    day: dt.date
    aod: float
    z: np.ndarray
    region: RegionId

    def __post_init__(self):
        if self.z.shape != (N_COVARIATES,):
            raise InputError(f"covariate vector must have length {N_COVARIATES}")


@dataclass(frozen=True)
class BlockSpec:
    """One (climate region, temporal window) fitting unit.

    Core monitors have the region as their primary label; buffer monitors
    belong to another region but sit within the buffer distance of this
    region's grid cells. Core/buffer cell sets partition prediction targets
    the same way.
    """

    region: RegionId
    window: TemporalWindow
    core_monitors: frozenset[str] = field(default_factory=frozenset)
    buffer_monitors: frozenset[str] = field(default_factory=frozenset)
    core_cells: frozenset[str] = field(default_factory=frozenset)
    buffer_cells: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.core_monitors & self.buffer_monitors:
            raise InputError(f"block {self.name}: core and buffer monitor sets overlap")
        if self.core_cells & self.buffer_cells:
            raise InputError(f"block {self.name}: core and buffer cell sets overlap")

    @property
    def name(self) -> str:
        return f"{self.region.value}_w{self.window.index}"

    @property
    def monitors(self) -> frozenset[str]:
        return self.core_monitors | self.buffer_monitors

    @property
    def cells(self) -> frozenset[str]:
        return self.core_cells | self.buffer_cells


# Canonical ordering of all 27 blocks; stable across runs and schedules.
def block_order_index(region: RegionId, window_index: int) -> int:
    regions = list(RegionId)
    return regions.index(region) * 3 + (window_index - 1)
