"""Filecoin power model: sealing plus storage, scaled by PUE.

Network power is ``(a * sealing_rate + b * raw_capacity) * pue`` where
``a`` is in Wh/byte and the sealing rate in bytes/hour (so the product is
already watts), and ``b`` is in W/byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, InsufficientDataError, InvalidObservationError, ValidationError
from .units import (
    BoundedEstimate,
    ByteCount,
    BytesPerHour,
    EnergyWattHours,
    PowerWatts,
    PueFactor,
    TimeSeries,
    bounded_map,
    integrate_power,
)

SEALING_WINDOW_DAYS = 28
DEFAULT_PRESET = "table5-2023"


@dataclass(frozen=True)
class FilecoinParams:
    a: BoundedEstimate  # Wh/byte
    b: BoundedEstimate  # W/byte
    pue: BoundedEstimate
    name: str = "custom"
    version: str = ""

    def __post_init__(self):
        for label, be in (("a", self.a), ("b", self.b), ("pue", self.pue)):
            if be.lower <= 0:
                raise ValidationError(f"{label} must be strictly positive, lower bound is {be.lower!r}")
        if self.pue.lower < 1.0:
            raise ValidationError(f"PUE lower bound {self.pue.lower!r} is below 1.0")

    def to_dict(self) -> dict:
        def tier(be: BoundedEstimate) -> dict:
            return {"lower": be.lower, "estimate": be.estimate, "upper": be.upper}

        return {
            "name": self.name,
            "version": self.version,
            "a_wh_per_byte": tier(self.a),
            "b_w_per_byte": tier(self.b),
            "pue": tier(self.pue),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FilecoinParams":
        try:
            a, b, pue = doc["a_wh_per_byte"], doc["b_w_per_byte"], doc["pue"]
        except KeyError as exc:
            raise ConfigError(f"parameter document is missing {exc.args[0]!r}") from None
        for key, tier in (("a_wh_per_byte", a), ("b_w_per_byte", b), ("pue", pue)):
            if tier is None or any(tier.get(k) is None for k in ("lower", "estimate", "upper")):
                raise ConfigError(
                    f"parameter document {doc.get('name', '?')!r} has no values for {key!r}; "
                    "populate it before use"
                )
        return cls(
            a=BoundedEstimate(a["lower"], a["estimate"], a["upper"], "Wh/B"),
            b=BoundedEstimate(b["lower"], b["estimate"], b["upper"], "W/B"),
            pue=BoundedEstimate(pue["lower"], pue["estimate"], pue["upper"], "1"),
            name=doc.get("name", "custom"),
            version=str(doc.get("version", "")),
        )


@dataclass(frozen=True)
class FilecoinSnapshot:
    timestamp: datetime
    sealing_rate: BytesPerHour
    raw_capacity: ByteCount

    def __post_init__(self):
        object.__setattr__(self, "sealing_rate", BytesPerHour(self.sealing_rate))
        object.__setattr__(self, "raw_capacity", ByteCount(self.raw_capacity))

    def scaled(self, k: float) -> "FilecoinSnapshot":
        return FilecoinSnapshot(self.timestamp, self.sealing_rate * k, self.raw_capacity * k)


@dataclass(frozen=True)
class SealingObservation:
    p_seal: float  # kWh/day
    c_28days: float  # bytes sealed over the trailing 28 days


@dataclass(frozen=True)
class RackObservation:
    p_storage: float  # kW
    c_rack: float  # bytes


def sealing_constant(obs: SealingObservation) -> float:
    """Sealing energy per byte (Wh/byte) from one surveyed sealing setup."""
    if obs.c_28days <= 0:
        raise InvalidObservationError(f"c_28days must be > 0, got {obs.c_28days!r}")
    if obs.p_seal <= 0:
        raise InvalidObservationError(f"p_seal must be > 0, got {obs.p_seal!r}")
    return obs.p_seal * SEALING_WINDOW_DAYS * 1000 / obs.c_28days


def storage_constant(obs: RackObservation) -> float:
    """Storage power per byte (W/byte) from one rack's draw and capacity."""
    if obs.c_rack <= 0:
        raise InvalidObservationError(f"c_rack must be > 0, got {obs.c_rack!r}")
    if obs.p_storage <= 0:
        raise InvalidObservationError(f"p_storage must be > 0, got {obs.p_storage!r}")
    return obs.p_storage * 1000 / obs.c_rack


def _eq(a: float, b: float, pue: float, sealing_rate: float, raw_capacity: float) -> float:
    return (a * sealing_rate + b * raw_capacity) * pue


def instantaneous_power(a: float, b: float, pue: float, snap: FilecoinSnapshot) -> PowerWatts:
    if a <= 0 or b <= 0:
        raise ValidationError("sealing and storage constants must be > 0")
    pue = PueFactor(pue)
    return PowerWatts(_eq(a, b, pue, snap.sealing_rate, snap.raw_capacity))


def power_bounds(params: FilecoinParams, snap: FilecoinSnapshot) -> BoundedEstimate:
    # lower params pair with the lower output; valid since power is nondecreasing in a, b, pue
    sr, cap = float(snap.sealing_rate), float(snap.raw_capacity)
    return bounded_map(
        lambda a, b, pue: _eq(a, b, pue, sr, cap), params.a, params.b, params.pue, unit="W"
    )


def energy_over_window(params: FilecoinParams, series: TimeSeries) -> BoundedEstimate:
    """Energy (Wh) per bound over a snapshot series, linear between samples."""
    if len(series) < 2:
        raise InsufficientDataError(f"need at least 2 snapshots, got {len(series)}")
    bounds = series.map(lambda s: power_bounds(params, s))
    lo = integrate_power(bounds.map(lambda be: be.lower))
    est = integrate_power(bounds.map(lambda be: be.estimate))
    up = integrate_power(bounds.map(lambda be: be.upper))
    return BoundedEstimate(float(lo), float(est), float(up), EnergyWattHours.unit)


def recover_snapshot(
    params: FilecoinParams, lower_w: float, estimate_w: float, timestamp: datetime
) -> FilecoinSnapshot:
    """Back out the (sealing rate, capacity) that produced two published bounds.

    Solves the 2x2 linear system formed by the lower and estimate rows of
    the model for a single snapshot.
    """
    m = np.array(
        [
            [params.a.lower * params.pue.lower, params.b.lower * params.pue.lower],
            [params.a.estimate * params.pue.estimate, params.b.estimate * params.pue.estimate],
        ]
    )
    sr, cap = np.linalg.solve(m, np.array([lower_w, estimate_w]))
    if sr < 0 or cap < 0:
        raise ValidationError(f"published bounds imply a negative snapshot: SR={sr!r}, Cap={cap!r}")
    return FilecoinSnapshot(timestamp, float(sr), float(cap))


def _preset_path(name: str) -> Path:
    return Path(str(resources.files("ledgerwatt") / "data" / "presets" / f"{name}.json"))


def available_presets() -> list[str]:
    root = resources.files("ledgerwatt") / "data" / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_params(path: str | Path) -> FilecoinParams:
    with open(path, encoding="utf-8") as fh:
        return FilecoinParams.from_dict(json.load(fh))


def load_preset(name: str = DEFAULT_PRESET) -> FilecoinParams:
    path = _preset_path(name)
    if not path.exists():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    return load_params(path)
