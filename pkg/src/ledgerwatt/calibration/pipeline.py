"""End-to-end calibration: raw field data -> source estimates -> parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..errors import NoDataError
from ..filecoin import FilecoinParams, RackObservation, SealingObservation, sealing_constant, storage_constant
from .sources import (
    EvpMonthlyRecord,
    ManualOutliers,
    SourceEstimate,
    apply_weights,
    combine_sources,
    flag_outliers,
)
from .stats import PairedObservations, RegressionFit, ols_fit, ols_fit_two


def _spread_estimate(label, quantity, kind, values) -> SourceEstimate:
    values = list(values)
    return SourceEstimate(
        label=label,
        quantity=quantity,
        kind=kind,
        value=math.fsum(values) / len(values),
        weight=float(len(values)),
        range_low=min(values),
        range_high=max(values),
    )


def survey_estimates(
    sealing: Sequence[tuple[str, SealingObservation]],
    racks: Sequence[tuple[str, RackObservation]],
    exclude_sealing: Sequence[str] = (),
    exclude_storage: Sequence[str] = (),
    with_intercept: bool = True,
) -> tuple[list[SourceEstimate], dict[str, RegressionFit]]:
    """Per-respondent constants averaged into one survey estimate per quantity.

    Rows listed in ``exclude_*`` are treated as outliers. The OLS fits are
    returned as validity checks on the linear relation; they do not feed the
    point estimates.
    """
    out: list[SourceEstimate] = []
    fits: dict[str, RegressionFit] = {}
    seal = [(rid, o) for rid, o in sealing if rid not in set(exclude_sealing)]
    rack = [(rid, o) for rid, o in racks if rid not in set(exclude_storage)]
    if seal:
        out.append(_spread_estimate("survey:A", "A", "survey", (sealing_constant(o) for _, o in seal)))
        if len(seal) >= 3:
            fits["survey:sealing"] = ols_fit(
                PairedObservations(
                    tuple(o.c_28days for _, o in seal),
                    tuple(o.p_seal for _, o in seal),
                    "B", "kWh/day", "survey-sealing",
                ),
                with_intercept=with_intercept,
            )
    if rack:
        out.append(_spread_estimate("survey:B", "B", "survey", (storage_constant(o) for _, o in rack)))
        if len(rack) >= 3:
            fits["survey:storage"] = ols_fit(
                PairedObservations(
                    tuple(o.c_rack for _, o in rack),
                    tuple(o.p_storage for _, o in rack),
                    "B", "kW", "survey-storage",
                ),
                with_intercept=with_intercept,
            )
    return out, fits


def evp_estimates(records: Sequence[EvpMonthlyRecord], label: str = "evp") -> tuple[list[SourceEstimate], RegressionFit]:
    fit = ols_fit_two(records)
    n = float(len(records))
    ests = []
    for q, name in (("A", "a_wh_per_byte"), ("B", "b_w_per_byte")):
        if fit[name] > 0:
            ests.append(SourceEstimate(f"{label}:{q}", q, fit[name], weight=n, kind="evp"))
    return ests, fit


def interview_estimates(rows: Sequence[dict]) -> list[SourceEstimate]:
    """Rows with ``source_id`` and any of ``a_wh_per_byte``, ``b_w_per_byte``, ``pue``."""
    out = []
    for row in rows:
        for q, key in (("A", "a_wh_per_byte"), ("B", "b_w_per_byte"), ("PUE", "pue")):
            v = row.get(key)
            if v is not None:
                out.append(SourceEstimate(f"{row['source_id']}:{q}", q, float(v), 1.0, "interview"))
    return out


def online_pue_estimate(values: Sequence[float], label: str = "online:PUE") -> SourceEstimate:
    if not values:
        raise NoDataError("no published data-centre PUE values")
    return _spread_estimate(label, "PUE", "online", values)


@dataclass
class CalibrationResult:
    params: FilecoinParams
    estimates: list[SourceEstimate]
    fits: dict[str, RegressionFit] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "parameters": self.params.to_dict(),
            "estimates": [e.to_dict() for e in self.estimates],
            "fits": {k: v.to_dict() for k, v in sorted(self.fits.items())},
            "outliers": [e.label for e in self.estimates if e.outlier],
            "notes": list(self.notes),
        }


def calibrate(
    estimates: Sequence[SourceEstimate],
    weights=None,
    flagged: Sequence[str] = (),
    fits: dict[str, RegressionFit] | None = None,
    name: str = "calibrated",
    version: str = "",
) -> CalibrationResult:
    screened = flag_outliers(estimates, ManualOutliers(tuple(flagged)))
    if weights:
        screened = apply_weights(screened, weights)
    params = combine_sources(screened, name=name, version=version)
    return CalibrationResult(params=params, estimates=screened, fits=dict(fits or {}))
