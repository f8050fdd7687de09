"""Ethereum node-census power model.

Network power sums ``count * watts * pue`` over the four node classes
(validator / non-validator, cloud / other hosting). A census counts
machines, not validator keys.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import IncompleteProfileError, InvalidProfileError, SchemaError, ValidationError
from .units import BoundedEstimate, PowerWatts, PueFactor

TIERS = ("lower", "estimate", "upper")
SSD_WATTS = 5.0


class NodeType(str, Enum):
    VALIDATOR = "validator"
    NON_VALIDATOR = "non_validator"


class Hosting(str, Enum):
    CLOUD = "cloud"
    OTHER = "other"


@dataclass(frozen=True, order=True)
class NodeClass:
    node_type: NodeType
    hosting: Hosting

    def __str__(self):
        return f"{self.node_type.value}/{self.hosting.value}"


ALL_CLASSES = tuple(NodeClass(t, h) for t in NodeType for h in Hosting)


@dataclass(frozen=True)
class EthNodeCensus:
    counts: Mapping[NodeClass, int]
    timestamp: str = ""
    source: str = ""

    def __post_init__(self):
        counts = {}
        for cls, n in self.counts.items():
            if int(n) != n or n < 0:
                raise ValidationError(f"count for {cls} must be a non-negative integer, got {n!r}")
            counts[cls] = int(n)
        object.__setattr__(self, "counts", counts)

    def count(self, cls: NodeClass) -> int:
        return self.counts.get(cls, 0)

    def __add__(self, other: "EthNodeCensus") -> "EthNodeCensus":
        return EthNodeCensus(
            {c: self.count(c) + other.count(c) for c in ALL_CLASSES},
            self.timestamp,
            f"{self.source}+{other.source}",
        )

    def scaled(self, k: int) -> "EthNodeCensus":
        return EthNodeCensus({c: self.count(c) * k for c in ALL_CLASSES}, self.timestamp, self.source)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class HardwareProfileSet:
    """Per-class power demand (W) at each tier."""

    watts: Mapping[NodeClass, Mapping[str, float]]
    version: str = ""

    def __post_init__(self):
        for cls, tiers in self.watts.items():
            present = [t for t in TIERS if t in tiers]
            for t in present:
                if not tiers[t] > 0:
                    raise InvalidProfileError(f"{cls} {t} demand must be > 0, got {tiers[t]!r}")
            vals = [tiers[t] for t in present]
            if vals != sorted(vals):
                raise InvalidProfileError(f"{cls} tiers are inverted: {dict(tiers)}")

    def demand(self, cls: NodeClass, tier: str) -> float:
        try:
            return self.watts[cls][tier]
        except KeyError:
            raise IncompleteProfileError(f"no {tier!r} power demand for {cls}") from None


@dataclass(frozen=True)
class PueByHosting:
    cloud: float = 1.2
    other: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "cloud", PueFactor(self.cloud))
        object.__setattr__(self, "other", PueFactor(self.other))

    def __getitem__(self, hosting: Hosting) -> float:
        return self.cloud if hosting is Hosting.CLOUD else self.other


def cloud_instance_power(instance_watts: float, ssd_watts: float = SSD_WATTS) -> PowerWatts:
    """Cloud instance draw plus the attached SSD."""
    if instance_watts <= 0:
        raise ValidationError(f"instance_watts must be > 0, got {instance_watts!r}")
    return PowerWatts(instance_watts + ssd_watts)


def class_power(count: int, p: float, pue: float) -> PowerWatts:
    if count < 0:
        raise ValidationError(f"count must be >= 0, got {count!r}")
    return PowerWatts(count * p * pue)


def network_power(
    census: EthNodeCensus, profiles: HardwareProfileSet, tier: str, pue: PueByHosting
) -> PowerWatts:
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {TIERS}, got {tier!r}")
    total = 0.0
    for cls in ALL_CLASSES:
        n = census.count(cls)
        if n == 0:
            continue
        total += class_power(n, profiles.demand(cls, tier), pue[cls.hosting])
    return PowerWatts(total)


def network_power_bounds(
    census: EthNodeCensus, profiles: HardwareProfileSet, pue: PueByHosting
) -> BoundedEstimate:
    lo, est, up = (network_power(census, profiles, t, pue) for t in TIERS)
    if not lo <= est <= up:
        raise InvalidProfileError(f"tier inversion in network power: {lo}, {est}, {up}")
    return BoundedEstimate(float(lo), float(est), float(up), "W")


# -- bundled defaults --------------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(resources.files("ledgerwatt") / "data" / name))


DEFAULT_CENSUS_PATH = _data_path("eth_census_2023-08.csv")
DEFAULT_PROFILES_PATH = _data_path("eth_profiles.json")


def read_census_csv(path: str | Path, source: str | None = None) -> EthNodeCensus:
    """Census file with columns node_type, hosting, count."""
    path = Path(path)
    counts: dict[NodeClass, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"node_type", "hosting", "count"} - set(reader.fieldnames or [])
        if missing:
            raise SchemaError(f"census file {path.name} lacks columns", field=sorted(missing)[0])
        for row_no, row in enumerate(reader, start=2):
            try:
                cls = NodeClass(NodeType(row["node_type"].strip()), Hosting(row["hosting"].strip()))
            except ValueError:
                raise SchemaError(
                    f"unknown node class {row['node_type']!r}/{row['hosting']!r}", row=row_no, field="node_type"
                ) from None
            try:
                n = int(row["count"])
            except (TypeError, ValueError):
                raise SchemaError(f"count {row['count']!r} is not an integer", row=row_no, field="count") from None
            if n < 0:
                raise ValidationError(f"row {row_no}: count for {cls} is negative ({n})")
            if cls in counts:
                raise ValidationError(f"row {row_no}: duplicate entry for {cls}")
            counts[cls] = n
    absent = [str(c) for c in ALL_CLASSES if c not in counts]
    if absent:
        raise SchemaError(f"census file {path.name} has no row for {', '.join(absent)}", field="node_type")
    stem = path.stem
    stamp = stem.split("_")[-1] if "_" in stem else ""
    return EthNodeCensus(counts, timestamp=stamp, source=source or stem)


def read_profiles(path: str | Path = DEFAULT_PROFILES_PATH) -> tuple[HardwareProfileSet, PueByHosting]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    ssd = doc.get("ssd_watts", SSD_WATTS)
    instances = doc.get("cloud_instance_watts", {})
    watts: dict[NodeClass, dict[str, float]] = {}
    try:
        for node_type, by_hosting in doc["profiles"].items():
            for hosting, tiers in by_hosting.items():
                cls = NodeClass(NodeType(node_type), Hosting(hosting))
                resolved = {}
                for tier, v in tiers.items():
                    if isinstance(v, str):
                        if v not in instances:
                            raise SchemaError(f"unknown cloud instance size {v!r}", field=f"{cls}.{tier}")
                        v = cloud_instance_power(instances[v], ssd)
                    resolved[tier] = float(v)
                watts[cls] = resolved
    except KeyError as exc:
        raise SchemaError("profile document is incomplete", field=str(exc.args[0])) from None
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"bad profile entry: {exc}", field="profiles") from None
    pue = doc.get("pue", {})
    return (
        HardwareProfileSet(watts, version=str(doc.get("version", ""))),
        PueByHosting(pue.get("cloud", 1.2), pue.get("other", 2.0)),
    )


def default_census() -> EthNodeCensus:
    return read_census_csv(DEFAULT_CENSUS_PATH, source="monitoreth-2023-08")


def default_profiles() -> tuple[HardwareProfileSet, PueByHosting]:
    return read_profiles(DEFAULT_PROFILES_PATH)
