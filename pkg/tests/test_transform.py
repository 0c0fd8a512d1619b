import datetime as dt
import math

import numpy as np
import pytest

from aodcal.errors import InputError
from aodcal.transform import TransformSpec, apply_transform, apply_transform_cells, fit_transform
from aodcal.types import BASE_COVARIATES, GridCellDay, MonitorRecord, RegionId, SiteId

RH = BASE_COVARIATES.index("rh")
ROAD = BASE_COVARIATES.index("road")
TMP = BASE_COVARIATES.index("tmp")


def _records(columns: dict[int, list[float]], n=3, aod=None):
    """n records with controlled covariate columns; others get spread values."""
    recs = []
    for i in range(n):
        z = np.full(10, np.nan)
        for j in range(9):
            z[j] = float(i + 1) * (j + 2)  # strictly positive, varying
        for j, vals in columns.items():
            z[j] = vals[i]
        recs.append(MonitorRecord(
            site=SiteId(f"s{i}", -90.0 + i, 35.0), day=dt.date(2011, 1, 1 + i),
            pm25=10.0, aod=(aod[i] if aod else 0.5), z=z))
    return recs


def test_plain_zscore_population_convention():
    recs = _records({RH: [2.0, 4.0, 6.0]})
    spec = fit_transform(recs)
    out = apply_transform(spec, recs)
    got = [r.z[RH] for r in out]
    assert got == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)
    assert got[0] == pytest.approx(-math.sqrt(1.5), abs=1e-9)


def test_log_column_zscore():
    # log10 spacing becomes linear after the log step
    recs = _records({ROAD: [1.0, 10.0, 100.0]})
    spec = fit_transform(recs)
    assert spec.offsets[ROAD] == 0.0  # strictly positive: no guard needed
    out = apply_transform(spec, recs)
    got = [r.z[ROAD] for r in out]
    assert got == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)


def test_log_guard_offset_for_zeros():
    recs = _records({ROAD: [0.0, 9.0, 99.0]})
    spec = fit_transform(recs)
    assert spec.offsets[ROAD] == 1.0
    out = apply_transform(spec, recs)
    got = [r.z[ROAD] for r in out]
    assert got == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)


def test_standardized_moments_zero_one():
    rng = np.random.default_rng(4)
    recs = []
    for i in range(50):
        z = np.append(np.abs(rng.lognormal(0, 0.5, 9)) + 0.1, np.nan)
        recs.append(MonitorRecord(site=SiteId(f"s{i}", -90.0, 35.0),
                                  day=dt.date(2011, 2, 1), pm25=5.0,
                                  aod=float(rng.random()), z=z))
    spec = fit_transform(recs)
    out = apply_transform(spec, recs)
    cols = np.array([r.z[:9] for r in out])
    assert np.abs(cols.mean(axis=0)).max() < 1e-9
    assert np.abs(cols.std(axis=0, ddof=0) - 1.0).max() < 1e-9


def test_interaction_formed_from_standardized_tmp():
    recs = _records({TMP: [10.0, 20.0, 30.0]}, aod=[0.2, 0.4, 0.8])
    spec = fit_transform(recs)
    out = apply_transform(spec, recs)
    for r in out:
        assert r.z[9] == pytest.approx(r.aod * r.z[TMP], abs=1e-12)
    # pm25 and aod pass through
    assert [r.aod for r in out] == [0.2, 0.4, 0.8]
    assert all(r.pm25 == 10.0 for r in out)


def test_reapplication_forbidden():
    recs = _records({RH: [2.0, 4.0, 6.0]})
    spec = fit_transform(recs)
    once = apply_transform(spec, recs)
    with pytest.raises(InputError, match="standardized already"):
        apply_transform(spec, once)


def test_zero_variance_column_named():
    recs = _records({RH: [5.0, 5.0, 5.0]})
    with pytest.raises(InputError, match="rh"):
        fit_transform(recs)


def test_grid_pathway_identical_to_monitor_pathway():
    recs = _records({RH: [2.0, 4.0, 6.0], ROAD: [1.0, 10.0, 100.0]})
    spec = fit_transform(recs)
    out_mon = apply_transform(spec, recs)
    cells = [GridCellDay(cell=r.site, day=r.day, aod=r.aod, z=r.z.copy(),
                         region=RegionId.West) for r in recs]
    out_cell = apply_transform_cells(spec, cells)
    for m, c in zip(out_mon, out_cell):
        np.testing.assert_allclose(m.z, c.z, rtol=0, atol=0)


def test_missing_values_stay_missing():
    recs = _records({RH: [2.0, 4.0, 6.0]})
    z = recs[1].z.copy()
    z[RH] = math.nan
    broken = [recs[0],
              MonitorRecord(site=recs[1].site, day=recs[1].day, pm25=recs[1].pm25,
                            aod=math.nan, z=z),
              recs[2]]
    spec = fit_transform(broken)
    out = apply_transform(spec, broken)
    assert math.isnan(out[1].z[RH])
    assert math.isnan(out[1].z[9])  # interaction needs aod
    assert not out[1].complete


def test_spec_round_trip_text():
    recs = _records({RH: [2.0, 4.0, 6.0]})
    spec = fit_transform(recs)
    again = TransformSpec.from_text(spec.to_text())
    assert again == spec
