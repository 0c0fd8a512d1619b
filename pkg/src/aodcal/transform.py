"""Covariate preprocessing: optional log step, z-scoring, interaction term.

Fire, emission and road are log-transformed first; every base covariate is
then z-scored. PM2.5 and AOD pass through untouched. The AOD x temperature
interaction is formed from AOD and the *standardized* temperature, after
standardization. A fitted TransformSpec is a frozen, replayable artifact:
the same parameters are applied to monitors, grid cells and CV folds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .types import (
    BASE_COVARIATES,
    GridCellDay,
    LOG_COVARIATES,
    MonitorRecord,
    TMP_INDEX,
)


@dataclass(frozen=True)
class TransformSpec:
    """Per-covariate transform parameters for the nine base columns.

    ``offsets[j]`` is the additive guard used before the log (0 when the
    training column was strictly positive, 1 otherwise); it is only nonzero
    for log columns. ``ddof`` records the SD denominator convention
    (0 = population, 1 = sample) so either choice replays exactly.
    """

    log_first: tuple[bool, ...]
    offsets: tuple[float, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]
    ddof: int = 0
    n_fit: int = 0

    def to_text(self) -> str:
        lines = [f"ddof={self.ddof}", f"n_fit={self.n_fit}"]
        for j, name in enumerate(BASE_COVARIATES):
            lines.append(
                f"{name}=log:{int(self.log_first[j])},offset:{self.offsets[j]!r},"
                f"mean:{self.means[j]!r},sd:{self.sds[j]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TransformSpec":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            kv[key] = value
        try:
            ddof = int(kv.pop("ddof"))
            n_fit = int(kv.pop("n_fit"))
            log_first, offsets, means, sds = [], [], [], []
            for name in BASE_COVARIATES:
                parts = dict(p.split(":") for p in kv[name].split(","))
                log_first.append(bool(int(parts["log"])))
                offsets.append(float(parts["offset"]))
                means.append(float(parts["mean"]))
                sds.append(float(parts["sd"]))
        except (KeyError, ValueError) as exc:
            raise InputError(f"malformed transform spec: {exc}")
        return cls(tuple(log_first), tuple(offsets), tuple(means), tuple(sds),
                   ddof=ddof, n_fit=n_fit)


def fit_transform(records: list[MonitorRecord], ddof: int = 0) -> TransformSpec:
    """Estimate transform parameters from training records.

    Moments are computed per column over the non-missing values after the
    log step. A zero-variance column is an error since z-scoring it is
    undefined.
    """
    _guard_not_standardized(records)
    if not records:
        raise InputError("cannot fit a transform on zero records")
    raw = np.array([r.z[: len(BASE_COVARIATES)] for r in records], dtype=float)

    log_first, offsets, means, sds = [], [], [], []
    for j, name in enumerate(BASE_COVARIATES):
        col = raw[:, j]
        col = col[np.isfinite(col)]
        if col.size == 0:
            raise InputError(f"covariate {name!r} has no observed values")
        take_log = name in LOG_COVARIATES
        offset = 0.0
        if take_log:
            offset = 1.0 if col.min() <= 0.0 else 0.0
            shifted = col + offset
            if shifted.min() <= 0.0:
                raise InputError(
                    f"covariate {name!r} has values <= {-offset} that the "
                    "log guard cannot handle")
            col = np.log(shifted)
        mean = float(col.mean())
        sd = float(col.std(ddof=ddof)) if col.size > ddof else 0.0
        if sd <= 0.0:
            raise InputError(f"covariate {name!r} has zero variance in the training data")
        log_first.append(take_log)
        offsets.append(offset)
        means.append(mean)
        sds.append(sd)
    return TransformSpec(tuple(log_first), tuple(offsets), tuple(means),
                         tuple(sds), ddof=ddof, n_fit=len(records))


def _transform_base(spec: TransformSpec, z: np.ndarray) -> np.ndarray:
    """Standardize the nine base covariates of one raw vector."""
    out = np.full(len(BASE_COVARIATES), np.nan)
    for j in range(len(BASE_COVARIATES)):
        v = z[j]
        if not math.isfinite(v):
            continue
        if spec.log_first[j]:
            shifted = v + spec.offsets[j]
            if shifted <= 0.0:
                continue  # inconsistent with training data; treat as missing
            v = math.log(shifted)
        out[j] = (v - spec.means[j]) / spec.sds[j]
    return out


def _standardized_vector(spec: TransformSpec, z: np.ndarray, aod: float) -> np.ndarray:
    base = _transform_base(spec, z)
    full = np.append(base, np.nan)
    if math.isfinite(aod) and math.isfinite(base[TMP_INDEX]):
        full[-1] = aod * base[TMP_INDEX]
    return full


def _guard_not_standardized(items) -> None:
    # Raw inputs never carry the interaction column, so a finite entry in the
    # interaction slot means the transform already ran.
    for item in items:
        if math.isfinite(item.z[-1]):
            raise InputError(
                "records appear to be standardized already; "
                "re-applying a transform is forbidden")


def apply_transform(spec: TransformSpec,
                    records: list[MonitorRecord]) -> list[MonitorRecord]:
    """Standardize monitor records; forms the interaction, keeps pm25/aod raw."""
    _guard_not_standardized(records)
    return [replace(r, z=_standardized_vector(spec, r.z, r.aod)) for r in records]


def apply_transform_cells(spec: TransformSpec,
                          cells: list[GridCellDay]) -> list[GridCellDay]:
    """Standardize grid cell-days with the identical parameters as monitors."""
    _guard_not_standardized(cells)
    return [replace(c, z=_standardized_vector(spec, c.z, c.aod)) for c in cells]
