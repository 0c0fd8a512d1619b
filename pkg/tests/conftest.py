import datetime as dt

import numpy as np
import pytest

from aodcal.mcmc import BlockData, ChainConfig, PriorConfig
from aodcal.types import SiteId, TemporalWindow


def make_window(n_days: int, start=dt.date(2011, 1, 1)) -> TemporalWindow:
    return TemporalWindow(1, start, start + dt.timedelta(days=n_days - 1))


def site(i: int, lon: float, lat: float) -> SiteId:
    return SiteId(id=f"s{i}", lon=lon, lat=lat)


def small_block_data(n_sites=4, n_days=6, p=2, seed=7, spread_deg=1.0) -> BlockData:
    """A tiny fully-observed design with zero response (fill y before use)."""
    rng = np.random.default_rng(seed)
    lons = -95.0 + spread_deg * rng.random(n_sites)
    lats = 37.0 + spread_deg * rng.random(n_sites)
    site_idx, day_idx = [], []
    for s in range(n_sites):
        for t in range(n_days):
            site_idx.append(s)
            day_idx.append(t)
    n = len(site_idx)
    return BlockData(
        y=np.zeros(n),
        aod=rng.lognormal(np.log(0.2), 0.5, n),
        z=rng.standard_normal((n, p)),
        site_idx=np.array(site_idx),
        day_idx=np.array(day_idx),
        lons=lons, lats=lats,
        site_ids=[f"s{i}" for i in range(n_sites)],
        n_days=n_days,
        window=make_window(n_days),
    )


@pytest.fixture
def fast_chain_config() -> ChainConfig:
    return ChainConfig(n_iter=60, n_burnin=20, thin=2, master_seed=3,
                       phi_grid_km=(100.0, 300.0), taper_range_km=600.0)


@pytest.fixture
def proper_priors() -> PriorConfig:
    """Informative proper priors with finite fourth moments (moment tests)."""
    return PriorConfig(fixed_effect_var=1.0, coreg_var=1.0,
                       sigma2_shape=6.0, sigma2_rate=10.0,
                       tau_shape=3.0, tau_rate=2.0)
