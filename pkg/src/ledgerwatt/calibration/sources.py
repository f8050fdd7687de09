"""Per-source parameter estimates and their combination into model bounds.

Each :class:`SourceEstimate` is one value of A, B or PUE from one source
(an interview, the energy-validation records, the survey, published data
centre PUEs). Bounds are the smallest and largest non-outlier values over
all sources, where a source may carry a spread (``range_low`` /
``range_high``) wider than its point value, as the survey does. The
central estimate is the weighted mean of the point values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import ConfigError, NoDataError, UnknownEntryError, ValidationError
from ..filecoin import FilecoinParams
from ..units import BoundedEstimate

QUANTITIES = ("A", "B", "PUE")
SOURCE_KINDS = ("interview", "evp", "survey", "online")
_UNITS = {"A": "Wh/B", "B": "W/B", "PUE": "1"}


@dataclass(frozen=True)
class EvpMonthlyRecord:
    month: date  # first day of the calendar month
    sealed: float  # bytes sealed during the month
    stored: float  # average bytes held during the month
    kwh: float

    def __post_init__(self):
        for name in ("sealed", "stored", "kwh"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{self.month:%Y-%m}: {name} must be finite and >= 0, got {v!r}")
        if self.month.day != 1:
            object.__setattr__(self, "month", self.month.replace(day=1))


@dataclass(frozen=True)
class SourceEstimate:
    label: str
    quantity: str
    value: float
    weight: float = 1.0
    kind: str = "interview"
    outlier: bool = False
    range_low: float | None = None
    range_high: float | None = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValidationError(f"{self.label}: quantity must be one of {QUANTITIES}, got {self.quantity!r}")
        if self.kind not in SOURCE_KINDS:
            raise ValidationError(f"{self.label}: unknown source kind {self.kind!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValidationError(f"{self.label}: value must be > 0, got {self.value!r}")
        if not self.weight > 0:
            raise ValidationError(f"{self.label}: weight must be > 0, got {self.weight!r}")
        lo = self.value if self.range_low is None else self.range_low
        hi = self.value if self.range_high is None else self.range_high
        if not lo <= self.value <= hi:
            raise ValidationError(f"{self.label}: range [{lo}, {hi}] does not contain {self.value}")
        object.__setattr__(self, "range_low", float(lo))
        object.__setattr__(self, "range_high", float(hi))

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "quantity": self.quantity,
            "kind": self.kind,
            "value": self.value,
            "weight": self.weight,
            "outlier": self.outlier,
        }
        if (self.range_low, self.range_high) != (self.value, self.value):
            d["range"] = [self.range_low, self.range_high]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SourceEstimate":
        rng = d.get("range") or (None, None)
        try:
            return cls(
                label=d["label"],
                quantity=d["quantity"],
                value=float(d["value"]),
                weight=float(d.get("weight", 1.0)),
                kind=d.get("kind", "interview"),
                outlier=bool(d.get("outlier", False)),
                range_low=rng[0],
                range_high=rng[1],
            )
        except KeyError as exc:
            raise ConfigError(f"source estimate is missing {exc.args[0]!r}: {dict(d)}") from None


@dataclass(frozen=True)
class ManualOutliers:
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class IqrFence:
    k: float = 1.5


def flag_outliers(estimates: Sequence[SourceEstimate], policy=ManualOutliers()) -> list[SourceEstimate]:
    """Return a copy of ``estimates`` with outlier flags set by ``policy``.

    Nothing is removed; downstream steps skip flagged entries. The IQR fence
    is applied per quantity, using linearly interpolated quartiles.
    """
    estimates = list(estimates)
    if not estimates:
        raise NoDataError("no estimates to screen")
    if isinstance(policy, ManualOutliers):
        known = {e.label for e in estimates}
        unknown = [lab for lab in policy.labels if lab not in known]
        if unknown:
            raise UnknownEntryError(f"outlier list names unknown entries: {', '.join(unknown)}")
        wanted = set(policy.labels)
        return [replace(e, outlier=e.outlier or e.label in wanted) for e in estimates]
    if isinstance(policy, IqrFence):
        out = list(estimates)
        for q in QUANTITIES:
            idx = [i for i, e in enumerate(estimates) if e.quantity == q]
            if not idx:
                continue
            vals = np.array([estimates[i].value for i in idx])
            q1, q3 = np.percentile(vals, [25, 75])
            lo, hi = q1 - policy.k * (q3 - q1), q3 + policy.k * (q3 - q1)
            for i, v in zip(idx, vals):
                if v < lo or v > hi:
                    out[i] = replace(out[i], outlier=True)
        return out
    raise TypeError(f"unsupported outlier policy {policy!r}")


def weighted_mean(estimates: Iterable[SourceEstimate]) -> float:
    kept = [e for e in estimates if not e.outlier]
    if not kept:
        raise NoDataError("every estimate is flagged as an outlier")
    total = math.fsum(e.weight for e in kept)
    return math.fsum(e.weight * e.value for e in kept) / total


def apply_weights(estimates: Iterable[SourceEstimate], weights: Mapping[str, float]) -> list[SourceEstimate]:
    """Override weights by entry label; unnamed entries keep their own weight."""
    estimates = list(estimates)
    known = {e.label for e in estimates}
    unknown = sorted(set(weights) - known)
    if unknown:
        raise UnknownEntryError(f"weights config names unknown entries: {', '.join(unknown)}")
    return [replace(e, weight=float(weights[e.label])) if e.label in weights else e for e in estimates]


def combine_quantity(estimates: Iterable[SourceEstimate], quantity: str) -> BoundedEstimate:
    kept = [e for e in estimates if e.quantity == quantity and not e.outlier]
    if not kept:
        raise NoDataError(f"no non-outlier estimate for {quantity}")
    lo = min(e.range_low for e in kept)
    hi = max(e.range_high for e in kept)
    mean = weighted_mean(kept)
    # fsum rounding can push a mean of identical values one ulp outside
    mean = min(max(mean, lo), hi)
    return BoundedEstimate(lo, mean, hi, _UNITS[quantity])


def combine_sources(
    estimates: Iterable[SourceEstimate],
    weights: Mapping[str, float] | None = None,
    *,
    name: str = "calibrated",
    version: str = "",
) -> FilecoinParams:
    estimates = list(estimates)
    if weights:
        estimates = apply_weights(estimates, weights)
    a, b, pue = (combine_quantity(estimates, q) for q in QUANTITIES)
    return FilecoinParams(a=a, b=b, pue=pue, name=name, version=version)


# -- config documents ----------------------------------------------------------

@dataclass(frozen=True)
class WeightsConfig:
    weights: Mapping[str, float] = field(default_factory=dict)
    version: str = ""


def read_sources(path: str | Path) -> list[SourceEstimate]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc.get("estimates")
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: expected an 'estimates' list")
    out = [SourceEstimate.from_dict(d) for d in entries]
    labels = [e.label for e in out]
    dupes = sorted({x for x in labels if labels.count(x) > 1})
    if dupes:
        raise ConfigError(f"{path}: duplicate labels {', '.join(dupes)}")
    return out


def read_weights(path: str | Path) -> WeightsConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    w = doc.get("weights", {})
    bad = {k: v for k, v in w.items() if not isinstance(v, (int, float)) or v <= 0}
    if bad:
        raise ConfigError(f"{path}: weights must be positive numbers: {bad}")
    return WeightsConfig(weights=dict(w), version=str(doc.get("version", "")))


def read_outlier_flags(path: str | Path) -> dict:
    """Outlier flag file: ``flagged`` estimate labels plus survey row ids."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    rows = doc.get("survey_rows", {})
    return {
        "flagged": tuple(doc.get("flagged", ())),
        "sealing": tuple(str(r) for r in rows.get("sealing", ())),
        "storage": tuple(str(r) for r in rows.get("storage", ())),
    }
