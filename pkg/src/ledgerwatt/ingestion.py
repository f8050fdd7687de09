"""Network metric fetching with a file cache, and loaders for local datasets.

Remote payloads are normalised through an adapter table (field names and
units per endpoint) before anything is cached, so cache entries hold only
snapshot values: never raw responses and never credentials.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .calibration.sources import EvpMonthlyRecord
from .errors import ConfigError, GapError, NetworkError, NoDataError, SchemaError, ValidationError
from .ethereum import EthNodeCensus, Hosting, NodeClass, NodeType, read_census_csv
from .filecoin import FilecoinSnapshot, RackObservation, SealingObservation
from .units import TimeSeries, convert

logger = logging.getLogger(__name__)

KINDS = ("filecoin-metrics-endpoint", "eth-census-endpoint", "local-file")
DEFAULT_STALENESS = timedelta(hours=24)
MAX_ATTEMPTS = 3
BACKOFF_SECONDS = 0.5
MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class DataSourceDescriptor:
    kind: str
    locator: str
    source: str
    token_env: str | None = None  # name of the environment variable, never the token
    adapter: str = "default"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown data source kind {self.kind!r}")
        if not self.locator:
            raise ConfigError(f"data source {self.source!r} has an empty locator")

    @classmethod
    def from_dict(cls, d: dict) -> "DataSourceDescriptor":
        try:
            return cls(d["kind"], d["locator"], d.get("source") or d["locator"], d.get("token_env"), d.get("adapter", "default"))
        except KeyError as exc:
            raise ConfigError(f"data source is missing {exc.args[0]!r}") from None


def _rfc3339(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_rfc3339(s: str) -> datetime:
    return datetime.fromisoformat(s.replace("Z", "+00:00"))


@dataclass(frozen=True)
class CacheEntry:
    source: str
    window_from: date
    window_to: date
    fetched_at: datetime
    payload: list

    def __post_init__(self):
        if self.window_from > self.window_to:
            raise ValidationError("cache window is reversed")

    def to_json(self) -> str:
        doc = {
            "source": self.source,
            "window": {"from": self.window_from.isoformat(), "to": self.window_to.isoformat()},
            "fetched_at": _rfc3339(self.fetched_at),
            "payload": self.payload,
        }
        return json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CacheEntry":
        doc = json.loads(text)
        return cls(
            source=doc["source"],
            window_from=date.fromisoformat(doc["window"]["from"]),
            window_to=date.fromisoformat(doc["window"]["to"]),
            fetched_at=_parse_rfc3339(doc["fetched_at"]),
            payload=doc["payload"],
        )


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class FileCache:
    """Directory of JSON cache entries keyed by (source label, window)."""

    def __init__(self, root: str | Path, staleness: timedelta = DEFAULT_STALENESS, clock: Callable[[], datetime] = _utcnow):
        self.root = Path(root)
        self.staleness = staleness
        self.clock = clock
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def key(source: str, start: date, end: date) -> str:
        raw = json.dumps([source, start.isoformat(), end.isoformat()])
        return hashlib.sha256(raw.encode()).hexdigest()[:32]

    def _lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def entries(self) -> Iterable[CacheEntry]:
        if not self.root.is_dir():
            return
        for path in sorted(self.root.glob("*.json")):
            try:
                yield CacheEntry.from_json(path.read_text(encoding="utf-8"))
            except (ValueError, KeyError):
                logger.warning("ignoring unreadable cache file %s", path.name)

    def lookup(self, source: str, start: date, end: date) -> CacheEntry | None:
        now = self.clock()
        best = None
        for entry in self.entries():
            if entry.source != source or entry.window_from > start or entry.window_to < end:
                continue
            if entry.fetched_at > now or now - entry.fetched_at > self.staleness:
                continue
            if best is None or entry.fetched_at > best.fetched_at:
                best = entry
        return best

    def put(self, entry: CacheEntry) -> Path:
        key = self.key(entry.source, entry.window_from, entry.window_to)
        path = self.root / f"{key}.json"
        with self._lock(key):
            self.root.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(entry.to_json())
            os.replace(tmp, path)
        return path


def load_adapters(path: str | Path | None = None) -> dict:
    if path is None:
        path = resources.files("ledgerwatt") / "data" / "filecoin_adapters.json"
    with open(str(path), encoding="utf-8") as fh:
        return json.load(fh)["adapters"]


def _dig(doc, path: Sequence[str]):
    for part in path:
        if not isinstance(doc, dict) or part not in doc:
            raise SchemaError("payload has no record list", field=".".join(path))
        doc = doc[part]
    if not isinstance(doc, list):
        raise SchemaError("record list is not a list", field=".".join(path))
    return doc


def normalise_records(records: list, adapter: dict) -> list[dict]:
    """Map raw per-day records to ``{date, sealing_rate_bytes_per_hour, raw_capacity_bytes}``."""
    out = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise SchemaError("record is not an object", row=i)
        row = {}
        for name in ("date", "sealing_rate", "raw_capacity"):
            src_field = adapter[name]
            if src_field not in rec or rec[src_field] is None:
                raise SchemaError("record lacks a required field", row=i, field=src_field)
            row[name] = rec[src_field]
        try:
            day = date.fromisoformat(str(row["date"])[:10])
        except ValueError:
            raise SchemaError(f"unparseable date {row['date']!r}", row=i, field=adapter["date"]) from None
        vals = {}
        for name, unit_key, target in (("sealing_rate", "sealing_rate_unit", "B/h"), ("raw_capacity", "raw_capacity_unit", "B")):
            try:
                v = float(row[name])
            except (TypeError, ValueError):
                raise SchemaError(f"non-numeric value {row[name]!r}", row=i, field=adapter[name]) from None
            if not math.isfinite(v) or v < 0:
                raise SchemaError(f"value {v!r} must be finite and >= 0", row=i, field=adapter[name])
            vals[name] = convert(v, adapter.get(unit_key, target), target)
        out.append(
            {
                "date": day.isoformat(),
                "sealing_rate_bytes_per_hour": vals["sealing_rate"],
                "raw_capacity_bytes": vals["raw_capacity"],
            }
        )
    return out


def _window(rows: list[dict], start: date, end: date) -> list[dict]:
    by_day = {}
    for row in rows:
        d = date.fromisoformat(row["date"])
        if start <= d <= end:
            if d in by_day and by_day[d] != row:
                raise SchemaError(f"conflicting records for {d.isoformat()}", field="date")
            by_day[d] = row
    n_days = (end - start).days + 1
    missing = [start + timedelta(days=k) for k in range(n_days) if start + timedelta(days=k) not in by_day]
    if missing:
        raise GapError(missing)
    return [by_day[d] for d in sorted(by_day)]


def _to_series(rows: list[dict]) -> TimeSeries:
    points = []
    for row in rows:
        ts = datetime.combine(date.fromisoformat(row["date"]), dtime(0), tzinfo=timezone.utc)
        points.append((ts, FilecoinSnapshot(ts, row["sealing_rate_bytes_per_hour"], row["raw_capacity_bytes"])))
    return TimeSeries(points)


class HttpClient:
    """Read-only JSON GET client that counts the requests it issues."""

    def __init__(self, session: requests.Session | None = None, timeout: float = 30.0):
        self.session = session or requests.Session()
        self.timeout = timeout
        self.requests_made = 0
        self._count_lock = threading.Lock()

    def get_json(self, url: str, params: dict | None = None, headers: dict | None = None):
        with self._count_lock:
            self.requests_made += 1
        try:
            resp = self.session.get(url, params=params, headers=headers, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise NetworkError(f"GET {url} failed: {exc.__class__.__name__}") from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise NetworkError(f"GET {url} returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ConfigError(f"GET {url} returned HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError:
            raise SchemaError(f"response from {url} is not JSON") from None


def _with_retries(fn, attempts: int = MAX_ATTEMPTS, backoff: float = BACKOFF_SECONDS, sleep=time.sleep):
    for attempt in range(attempts):
        try:
            return fn()
        except NetworkError as exc:
            if attempt == attempts - 1:
                raise
            delay = backoff * 2**attempt
            logger.info("retrying after %s (attempt %d/%d, sleeping %.2fs)", exc, attempt + 1, attempts, delay)
            sleep(delay)


def _auth_headers(src: DataSourceDescriptor) -> dict:
    if not src.token_env:
        return {}
    token = os.environ.get(src.token_env)
    if not token:
        raise ConfigError(f"environment variable {src.token_env} is not set")
    return {"Authorization": f"Bearer {token}"}


def _read_local_records(path: Path, adapter: dict) -> list[dict]:
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            raw = list(csv.DictReader(fh))
    else:
        with open(path, encoding="utf-8") as fh:
            raw = _dig(json.load(fh), adapter.get("records_path", ["records"]))
    return normalise_records(raw, adapter)


def local_file_span(src: DataSourceDescriptor, adapters: dict | None = None) -> tuple[date, date]:
    """First and last day present in a local snapshot file."""
    adapter = (adapters or load_adapters())[src.adapter]
    days = sorted(date.fromisoformat(r["date"]) for r in _read_local_records(Path(src.locator), adapter))
    if not days:
        raise NoDataError(f"{src.locator} has no records")
    return days[0], days[-1]


def fetch_filecoin_series(
    src: DataSourceDescriptor,
    start: date,
    end: date,
    *,
    cache: FileCache | None = None,
    client: HttpClient | None = None,
    adapters: dict | None = None,
    sleep=time.sleep,
) -> TimeSeries:
    """Daily Filecoin snapshots for ``start..end`` inclusive.

    Remote sources are served from ``cache`` when a fresh entry covers the
    window; otherwise they are fetched (up to three attempts with
    exponential backoff on transport errors) and the normalised records are
    cached.
    """
    if start > end:
        raise ValidationError(f"window start {start} is after end {end}")
    if src.kind not in ("filecoin-metrics-endpoint", "local-file"):
        raise ConfigError(f"{src.kind} cannot serve Filecoin metrics")
    adapters = adapters or load_adapters()
    try:
        adapter = adapters[src.adapter]
    except KeyError:
        raise ConfigError(f"no adapter named {src.adapter!r}") from None

    if src.kind == "local-file":
        return _to_series(_window(_read_local_records(Path(src.locator), adapter), start, end))

    if cache is not None:
        hit = cache.lookup(src.source, start, end)
        if hit is not None:
            logger.debug("cache hit for %s %s..%s", src.source, start, end)
            return _to_series(_window(hit.payload, start, end))

    client = client or HttpClient()
    params_map = adapter.get("params", {"from": "start_date", "to": "end_date"})
    params = {params_map["from"]: start.isoformat(), params_map["to"]: end.isoformat()}
    headers = _auth_headers(src)
    doc = _with_retries(lambda: client.get_json(src.locator, params=params, headers=headers), sleep=sleep)
    rows = _window(normalise_records(_dig(doc, adapter.get("records_path", ["records"])), adapter), start, end)
    if cache is not None:
        cache.put(CacheEntry(src.source, start, end, cache.clock(), rows))
    return _to_series(rows)


def fetch_many(
    src: DataSourceDescriptor,
    windows: Sequence[tuple[date, date]],
    *,
    max_in_flight: int = MAX_IN_FLIGHT,
    **kwargs,
) -> list[TimeSeries]:
    """Fetch several windows with bounded parallelism; results keep input order."""
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(fetch_filecoin_series, src, a, b, **kwargs) for a, b in windows]
        return [f.result() for f in futures]


def load_eth_census(src: DataSourceDescriptor, client: HttpClient | None = None) -> EthNodeCensus:
    if src.kind == "local-file":
        return read_census_csv(src.locator, source=src.source)
    if src.kind != "eth-census-endpoint":
        raise ConfigError(f"{src.kind} cannot serve an Ethereum census")
    client = client or HttpClient()
    doc = _with_retries(lambda: client.get_json(src.locator, headers=_auth_headers(src)))
    counts = {}
    for i, row in enumerate(_dig(doc, ["rows"])):
        try:
            cls = NodeClass(NodeType(row["node_type"]), Hosting(row["hosting"]))
            n = int(row["count"])
        except KeyError as exc:
            raise SchemaError("census row incomplete", row=i, field=exc.args[0]) from None
        except ValueError:
            raise SchemaError("bad census row", row=i, field="node_type") from None
        if n < 0:
            raise ValidationError(f"row {i}: count for {cls} is negative ({n})")
        counts[cls] = n
    if len(counts) != 4:
        raise SchemaError("census payload does not cover all four node classes", field="node_type")
    return EthNodeCensus(counts, timestamp=str(doc.get("timestamp", "")), source=src.source)


# -- local datasets ---------------------------------------------------------

_HEADER_RE = re.compile(r"^\s*(?P<name>[a-z0-9_]+?)\s*(?:\[(?P<unit>[^\]]+)\])?\s*$")

# canonical column -> (field, unit implied by the canonical name, dimension)
_SURVEY_COLUMNS = {
    "p_seal_kwh_per_day": ("p_seal", "kWh/day", "energy/day"),
    "c_28days_bytes": ("c_28days", "B", "data"),
    "p_storage_kw": ("p_storage", "kW", "power"),
    "c_rack_bytes": ("c_rack", "B", "data"),
}
_FIELD_DIM = {v[0]: (v[1], v[2]) for v in _SURVEY_COLUMNS.values()}


def _survey_header(col: str):
    """Resolve a header into (field, unit). Accepts canonical names or ``field[unit]``."""
    if col in _SURVEY_COLUMNS:
        fld, unit, _ = _SURVEY_COLUMNS[col]
        return fld, unit
    m = _HEADER_RE.match(col)
    if not m or m.group("name") not in _FIELD_DIM:
        return None
    fld, unit = m.group("name"), m.group("unit")
    default_unit, dim = _FIELD_DIM[fld]
    if unit is None:
        return fld, default_unit
    if dim == "energy/day":
        base, _, per = unit.partition("/")
        ok = per == "day" and base in _units_of("energy")
    else:
        ok = unit in _units_of(dim)
    if not ok:
        raise SchemaError(f"unknown unit tag {unit!r} for {fld}", field=col)
    return fld, unit


def _units_of(dim: str) -> set[str]:
    from .units import UNITS

    return {u for u, (d, _) in UNITS.items() if d == dim}


def _to_canonical(fld: str, value: float, unit: str) -> float:
    target = _FIELD_DIM[fld][0]
    if fld == "p_seal":
        return convert(value, unit.partition("/")[0], "kWh")
    return convert(value, unit, target)


@dataclass
class SurveyRecords:
    sealing: list[tuple[str, SealingObservation]] = field(default_factory=list)
    racks: list[tuple[str, RackObservation]] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def __iter__(self):
        yield [o for _, o in self.sealing]
        yield [o for _, o in self.racks]


def _cell(raw: str | None):
    if raw is None:
        return None
    raw = raw.strip()
    return None if raw == "" else raw


def load_survey_records(path: str | Path) -> SurveyRecords:
    """Survey CSV -> sealing and rack observations, with skipped rows reported.

    Columns: ``source_id``, ``p_seal_kwh_per_day``, ``c_28days_bytes``,
    ``p_storage_kw``, ``c_rack_bytes``. Any value column may instead be
    written ``name[unit]`` (e.g. ``c_rack[PiB]``). Blank cells are allowed.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    out = SurveyRecords()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "source_id" not in cols:
            raise SchemaError(f"{path.name}: missing column", field="source_id")
        mapping = {}
        for col in cols:
            if col == "source_id":
                continue
            resolved = _survey_header(col)
            if resolved is None:
                raise SchemaError(f"{path.name}: unrecognised column", field=col)
            mapping[resolved[0]] = (col, resolved[1])
        absent = [f for f in _FIELD_DIM if f not in mapping]
        if absent:
            raise SchemaError(f"{path.name}: missing column", field=absent[0])

        for row_no, row in enumerate(reader, start=2):
            rid = (_cell(row.get("source_id")) or f"row{row_no}")
            vals = {}
            for fld, (col, unit) in mapping.items():
                cell = _cell(row.get(col))
                if cell is None:
                    continue
                try:
                    vals[fld] = _to_canonical(fld, float(cell), unit)
                except ValueError:
                    raise SchemaError(f"{path.name}: non-numeric value {cell!r}", row=row_no, field=col) from None
            used = False
            for pair, build, target in (
                (("p_seal", "c_28days"), SealingObservation, out.sealing),
                (("p_storage", "c_rack"), RackObservation, out.racks),
            ):
                have = [f for f in pair if f in vals]
                if len(have) == 2:
                    if min(vals[f] for f in pair) <= 0:
                        out.skipped.append({"row": row_no, "source_id": rid, "field": pair[0], "reason": "non-positive value"})
                        continue
                    target.append((rid, build(vals[pair[0]], vals[pair[1]])))
                    used = True
                elif len(have) == 1:
                    miss = next(f for f in pair if f not in vals)
                    out.skipped.append({"row": row_no, "source_id": rid, "field": mapping[miss][0], "reason": "missing"})
            if not used and not vals:
                out.skipped.append({"row": row_no, "source_id": rid, "field": None, "reason": "no values"})
    for s in out.skipped:
        logger.info("survey %s: skipped row %s (%s %s)", path.name, s["row"], s["field"], s["reason"])
    if not out.sealing and not out.racks:
        raise NoDataError(f"{path.name}: no usable survey rows")
    return out


def load_evp_records(path: str | Path) -> list[EvpMonthlyRecord]:
    """EVP CSV with columns month (YYYY-MM), sealed_bytes, stored_bytes_avg, kwh."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    records = []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise NoDataError(f"{path.name} is empty")
        for col in ("month", "sealed_bytes", "stored_bytes_avg", "kwh"):
            if col not in reader.fieldnames:
                raise SchemaError(f"{path.name}: missing column", field=col)
        for row_no, row in enumerate(reader, start=2):
            try:
                month = datetime.strptime(row["month"].strip(), "%Y-%m").date()
            except (ValueError, AttributeError):
                raise SchemaError(f"{path.name}: month must be YYYY-MM", row=row_no, field="month") from None
            if month in seen:
                raise ValidationError(f"{path.name}: month {month:%Y-%m} appears on rows {seen[month]} and {row_no}")
            seen[month] = row_no
            vals = {}
            for col in ("sealed_bytes", "stored_bytes_avg", "kwh"):
                try:
                    vals[col] = float(row[col])
                except (TypeError, ValueError):
                    raise SchemaError(f"{path.name}: non-numeric value {row[col]!r}", row=row_no, field=col) from None
            try:
                records.append(EvpMonthlyRecord(month, vals["sealed_bytes"], vals["stored_bytes_avg"], vals["kwh"]))
            except ValidationError as exc:
                raise ValidationError(f"{path.name} row {row_no}: {exc}") from None
    if not records:
        raise NoDataError(f"{path.name} has no records")
    return sorted(records, key=lambda r: r.month)


def load_interviews(path: str | Path) -> list[dict]:
    """Interview CSV: source_id, a_wh_per_byte, b_w_per_byte, pue (blanks allowed)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "source_id" not in (reader.fieldnames or []):
            raise SchemaError(f"{Path(path).name}: missing column", field="source_id")
        for row_no, row in enumerate(reader, start=2):
            out = {"source_id": row["source_id"].strip()}
            for col in ("a_wh_per_byte", "b_w_per_byte", "pue"):
                cell = _cell(row.get(col))
                try:
                    out[col] = None if cell is None else float(cell)
                except ValueError:
                    raise SchemaError("non-numeric value", row=row_no, field=col) from None
            rows.append(out)
    if not rows:
        raise NoDataError(f"{Path(path).name} has no interview rows")
    return rows


def load_online_pues(path: str | Path) -> list[float]:
    """CSV of published data-centre PUEs, column ``pue``."""
    vals = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "pue" not in (reader.fieldnames or []):
            raise SchemaError(f"{Path(path).name}: missing column", field="pue")
        for row_no, row in enumerate(reader, start=2):
            try:
                v = float(row["pue"])
            except (TypeError, ValueError):
                raise SchemaError("non-numeric value", row=row_no, field="pue") from None
            if v < 1.0:
                raise ValidationError(f"row {row_no}: PUE {v} is below 1.0")
            vals.append(v)
    if not vals:
        raise NoDataError(f"{Path(path).name} has no PUE rows")
    return vals
