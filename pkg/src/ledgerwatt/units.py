"""Physical quantities, unit conversion, bounded estimates and time series.

Only the handful of dimensions the two network models need are covered:
power, energy, data size, data rate and the dimensionless PUE ratio.
Internally everything is stored in base units (W, Wh, bytes, bytes/hour).
"""

from __future__ import annotations

import calendar
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Generic, Iterable, Sequence, TypeVar

from .errors import InsufficientDataError, MonotonicityError, UnitError, ValidationError

__all__ = [
    "PowerWatts",
    "EnergyWattHours",
    "ByteCount",
    "BytesPerHour",
    "PueFactor",
    "BoundedEstimate",
    "TimeSeries",
    "convert",
    "dimension_of",
    "hours_in_month",
    "integrate_power",
    "bounded_map",
]

_KIB = 2**10
_DAY = 24.0

# unit -> (dimension, factor to base unit)
UNITS: dict[str, tuple[str, float]] = {
    # power, base W
    "W": ("power", 1.0),
    "kW": ("power", 1e3),
    "MW": ("power", 1e6),
    "GW": ("power", 1e9),
    # energy, base Wh
    "Wh": ("energy", 1.0),
    "kWh": ("energy", 1e3),
    "MWh": ("energy", 1e6),
    "GWh": ("energy", 1e9),
    "J": ("energy", 1.0 / 3600.0),
    # data, base bytes
    "B": ("data", 1.0),
    "kB": ("data", 1e3),
    "MB": ("data", 1e6),
    "GB": ("data", 1e9),
    "TB": ("data", 1e12),
    "PB": ("data", 1e15),
    "EB": ("data", 1e18),
    "KiB": ("data", float(_KIB)),
    "MiB": ("data", float(_KIB**2)),
    "GiB": ("data", float(_KIB**3)),
    "TiB": ("data", float(_KIB**4)),
    "PiB": ("data", float(_KIB**5)),
    "EiB": ("data", float(_KIB**6)),
    # data rate, base bytes/hour
    "B/h": ("rate", 1.0),
    "B/s": ("rate", 3600.0),
    "B/day": ("rate", 1.0 / _DAY),
    "GiB/day": ("rate", _KIB**3 / _DAY),
    "TiB/day": ("rate", _KIB**4 / _DAY),
    "PiB/day": ("rate", _KIB**5 / _DAY),
    "TiB/h": ("rate", float(_KIB**4)),
    "PiB/h": ("rate", float(_KIB**5)),
    # dimensionless
    "1": ("dimensionless", 1.0),
}


def dimension_of(unit: str) -> str:
    try:
        return UNITS[unit][0]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between two units of the same dimension.

    >>> convert(10, "kWh", "Wh")
    10000.0
    >>> convert(2, "PiB", "B")
    2251799813685248.0
    """
    dim_from, f_from = UNITS.get(from_unit, (None, None))
    dim_to, f_to = UNITS.get(to_unit, (None, None))
    if dim_from is None:
        raise UnitError(f"unknown unit {from_unit!r}")
    if dim_to is None:
        raise UnitError(f"unknown unit {to_unit!r}")
    if dim_from != dim_to:
        raise UnitError(f"cannot convert {dim_from} ({from_unit}) to {dim_to} ({to_unit})")
    if f_from == f_to:
        return float(value)
    return value * f_from / f_to


def hours_in_month(year: int, month: int) -> int:
    """Hour count of a calendar month (672, 696, 720 or 744)."""
    return calendar.monthrange(year, month)[1] * 24


class _NonNegative(float):
    unit = ""

    def __new__(cls, value=0.0):
        v = float.__new__(cls, value)
        if not math.isfinite(v) or v < 0:
            raise ValidationError(f"{cls.__name__} must be finite and >= 0, got {value!r}")
        return v

    def __repr__(self):
        return f"{type(self).__name__}({float(self)!r})"


class PowerWatts(_NonNegative):
    unit = "W"


class EnergyWattHours(_NonNegative):
    unit = "Wh"


class ByteCount(_NonNegative):
    unit = "B"


class BytesPerHour(_NonNegative):
    unit = "B/h"


class PueFactor(float):
    """Power usage effectiveness; at least 1 by definition."""

    unit = "1"

    def __new__(cls, value=1.0):
        v = float.__new__(cls, value)
        if not math.isfinite(v) or v < 1.0:
            raise ValidationError(f"PUE must be finite and >= 1.0, got {value!r}")
        return v

    def __repr__(self):
        return f"PueFactor({float(self)!r})"


@dataclass(frozen=True)
class BoundedEstimate:
    """A (lower, estimate, upper) triple of one quantity in one unit."""

    lower: float
    estimate: float
    upper: float
    unit: str = "W"

    def __post_init__(self):
        for name in ("lower", "estimate", "upper"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"{name} is not finite: {v!r}")
        if not (self.lower <= self.estimate <= self.upper):
            raise ValidationError(
                f"bounds out of order: {self.lower!r} <= {self.estimate!r} <= {self.upper!r} fails"
            )

    @classmethod
    def exact(cls, value: float, unit: str = "W") -> "BoundedEstimate":
        return cls(value, value, value, unit)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lower, self.estimate, self.upper)

    def to(self, unit: str) -> "BoundedEstimate":
        lo, est, up = (convert(v, self.unit, unit) for v in self.as_tuple())
        return BoundedEstimate(lo, est, up, unit)

    def scale(self, k: float) -> "BoundedEstimate":
        if k < 0:
            raise ValueError("scale factor must be non-negative")
        return BoundedEstimate(self.lower * k, self.estimate * k, self.upper * k, self.unit)


def bounded_map(
    f: Callable[..., float], *inputs: BoundedEstimate, unit: str = "W"
) -> BoundedEstimate:
    """Apply a monotone nondecreasing ``f`` tier by tier.

    The lowers are combined into the output lower, estimates into the
    estimate, uppers into the upper. ``f`` must be nondecreasing in each
    argument; an unordered result raises :class:`MonotonicityError`.
    """
    if not inputs:
        raise ValueError("bounded_map needs at least one input")
    lo = f(*(b.lower for b in inputs))
    est = f(*(b.estimate for b in inputs))
    up = f(*(b.upper for b in inputs))
    if not (lo <= est <= up):
        raise MonotonicityError(
            f"combining function is not monotone on these inputs: {lo!r}, {est!r}, {up!r}"
        )
    return BoundedEstimate(float(lo), float(est), float(up), unit)


T = TypeVar("T")


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        raise ValidationError(f"timestamp {ts.isoformat()} is naive; use UTC-aware datetimes")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class TimeSeries(Generic[T]):
    """Immutable series of (UTC timestamp, sample), strictly increasing in time."""

    points: tuple[tuple[datetime, T], ...]

    def __init__(self, points: Iterable[tuple[datetime, T]] = ()):
        pts = tuple((_as_utc(t), s) for t, s in points)
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValidationError(
                    f"timestamps must be strictly increasing: {t0.isoformat()} then {t1.isoformat()}"
                )
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def timestamps(self) -> list[datetime]:
        return [t for t, _ in self.points]

    @property
    def samples(self) -> list[T]:
        return [s for _, s in self.points]

    def map(self, f: Callable[[T], object]) -> "TimeSeries":
        return TimeSeries((t, f(s)) for t, s in self.points)


def _trapezoid(hours: Sequence[float], values: Sequence[float]) -> float:
    total = 0.0
    for i in range(1, len(hours)):
        total += 0.5 * (values[i - 1] + values[i]) * (hours[i] - hours[i - 1])
    return total


def integrate_power(series: TimeSeries) -> EnergyWattHours:
    """Trapezoidal integral of a power series (W) over elapsed hours."""
    if len(series) < 2:
        raise InsufficientDataError(f"need at least 2 samples to integrate, got {len(series)}")
    t0 = series.points[0][0]
    hours = [(t - t0).total_seconds() / 3600.0 for t in series.timestamps]
    watts = [float(s) for s in series.samples]
    if any(w < 0 for w in watts):
        raise ValidationError("power samples must be non-negative")
    return EnergyWattHours(_trapezoid(hours, watts))
