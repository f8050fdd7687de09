"""Run configuration loaded from a single JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .ingestion import DataSourceDescriptor

DATA_DIR = Path(str(resources.files("ledgerwatt") / "data"))

DEFAULT_SOURCES_DOC = DATA_DIR / "filecoin_sources_2023.json"
DEFAULT_WEIGHTS = DATA_DIR / "weights_2023.json"
DEFAULT_OUTLIERS = DATA_DIR / "outliers_2023.json"
DEFAULT_PUBLISHED = DATA_DIR / "published_models.json"
DEFAULT_SEED = 20230831


@dataclass
class CalibrationInputs:
    sources: Path | None = DEFAULT_SOURCES_DOC
    survey: Path | None = None
    evp: Path | None = None
    interviews: Path | None = None
    online_pue: Path | None = None
    weights: Path | None = DEFAULT_WEIGHTS
    outliers: Path | None = DEFAULT_OUTLIERS
    with_intercept: bool = True


@dataclass
class RunConfig:
    filecoin_source: DataSourceDescriptor | None = None
    census_source: DataSourceDescriptor | None = None
    preset: str | None = None
    params: dict | None = None
    params_path: Path | None = None
    profiles_path: Path | None = None
    calibration: CalibrationInputs = field(default_factory=CalibrationInputs)
    published_models: Path = DEFAULT_PUBLISHED
    cache_dir: Path | None = None
    staleness_hours: float = 24.0
    window_from: date | None = None
    window_to: date | None = None
    format: str = "table"
    out: Path | None = None
    seed: int = DEFAULT_SEED
    raw: dict = field(default_factory=dict)

    @property
    def staleness(self) -> timedelta:
        return timedelta(hours=self.staleness_hours)

    def param_sources(self) -> list[str]:
        return [k for k, v in (("preset", self.preset), ("params", self.params), ("params_path", self.params_path)) if v]

    def validate(self) -> "RunConfig":
        if len(self.param_sources()) > 1:
            raise ConfigError(f"exactly one parameter source per run, got {', '.join(self.param_sources())}")
        paths = [self.params_path, self.profiles_path, self.published_models]
        cal = self.calibration
        paths += [cal.sources, cal.survey, cal.evp, cal.interviews, cal.online_pue, cal.weights, cal.outliers]
        for src in (self.filecoin_source, self.census_source):
            if src is not None and src.kind == "local-file":
                paths.append(Path(src.locator))
        for p in paths:
            if p is not None and not Path(p).exists():
                raise ConfigError(f"file not found: {p}")
        if self.window_from and self.window_to and self.window_from > self.window_to:
            raise ConfigError(f"--from {self.window_from} is after --to {self.window_to}")
        if self.format not in ("table", "csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        return self


def _path(base: Path, value) -> Path | None:
    if value in (None, ""):
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _source(base: Path, d: dict | None) -> DataSourceDescriptor | None:
    if not d:
        return None
    d = dict(d)
    if d.get("kind") == "local-file":
        d["locator"] = str(_path(base, d.get("locator")))
    return DataSourceDescriptor.from_dict(d)


def _date(v) -> date | None:
    if v in (None, ""):
        return None
    try:
        return date.fromisoformat(str(v))
    except ValueError:
        raise ConfigError(f"dates must be YYYY-MM-DD, got {v!r}") from None


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config document; relative paths resolve against its directory."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return config_from_dict(doc, path.parent)


def config_from_dict(doc: dict, base: Path = Path(".")) -> RunConfig:
    known = {
        "sources", "preset", "params", "params_path", "profiles_path", "calibration", "published_models",
        "cache_dir", "staleness_hours", "window", "format", "out", "seed",
    }
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    sources = doc.get("sources", {})
    cal_doc = doc.get("calibration", {})
    cal = CalibrationInputs()
    for key in ("sources", "survey", "evp", "interviews", "online_pue", "weights", "outliers"):
        if key in cal_doc:
            setattr(cal, key, _path(base, cal_doc[key]))
    cal.with_intercept = bool(cal_doc.get("with_intercept", True))
    window = doc.get("window", {})
    cfg = RunConfig(
        filecoin_source=_source(base, sources.get("filecoin")),
        census_source=_source(base, sources.get("ethereum_census")),
        preset=doc.get("preset"),
        params=doc.get("params"),
        params_path=_path(base, doc.get("params_path")),
        profiles_path=_path(base, doc.get("profiles_path")),
        calibration=cal,
        published_models=_path(base, doc.get("published_models")) or DEFAULT_PUBLISHED,
        cache_dir=_path(base, doc.get("cache_dir")),
        staleness_hours=float(doc.get("staleness_hours", 24.0)),
        window_from=_date(window.get("from")),
        window_to=_date(window.get("to")),
        format=doc.get("format", "table"),
        out=_path(base, doc.get("out")),
        seed=int(doc.get("seed", DEFAULT_SEED)),
        raw=doc,
    )
    return cfg
