"""Report rows and their table / CSV / JSON renderings."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError, ValidationError

CSV_COLUMNS = ("model", "date", "lower_w", "estimate_w", "upper_w", "provenance")
FORMATS = ("table", "csv", "json")


@dataclass(frozen=True)
class ReportRow:
    model: str
    date: str
    lower: float | None
    estimate: float | None
    upper: float | None
    provenance: str = ""
    network: str = ""

    def __post_init__(self):
        present = [v for v in (self.lower, self.estimate, self.upper) if v is not None]
        if present != sorted(present):
            raise ValidationError(f"{self.model}: bounds out of order {self.lower}, {self.estimate}, {self.upper}")

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "date": self.date,
            "lower_w": self.lower,
            "estimate_w": self.estimate,
            "upper_w": self.upper,
            "provenance": self.provenance,
        }


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def doc_digest(doc) -> str:
    raw = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def provenance(**items) -> str:
    return "; ".join(f"{k}={v}" for k, v in items.items() if v not in (None, ""))


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _human(v: float | None, unit: str) -> str:
    if v is None:
        return "-"
    if unit == "MW":
        return f"{v / 1e6:,.3f} MW"
    return f"{v / 1e3:,.2f} kW"


def _display_unit(row: ReportRow) -> str:
    if row.network:
        return "MW" if row.network == "filecoin" else "kW"
    peak = max((v for v in (row.lower, row.estimate, row.upper) if v is not None), default=0.0)
    return "MW" if peak >= 1e7 else "kW"


def render_csv(rows: Iterable[ReportRow], extra: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + tuple(extra))
    for r in rows:
        d = r.as_dict()
        w.writerow(
            [d["model"], d["date"], _num(r.lower), _num(r.estimate), _num(r.upper), d["provenance"]]
            + [_num(getattr(r, "deltas", {}).get(k.split("_")[1])) for k in extra]
        )
    return buf.getvalue()


def render_json(rows: Iterable[ReportRow], **meta) -> str:
    doc = dict(meta)
    doc["rows"] = [r.as_dict() | ({"deltas_pct": r.deltas} if isinstance(r, ComparisonRow) else {}) for r in rows]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _delta_cell(r: ReportRow) -> str:
    d = getattr(r, "deltas", None)
    if not d:
        return ""
    return " / ".join("-" if d.get(k) is None else f"{d[k]:+.1f}%" for k in ("lower", "estimate", "upper"))


def render_table(rows: Sequence[ReportRow], title: str = "") -> str:
    header = ("Model", "Date", "Lower Bound", "Estimate", "Upper Bound")
    body = [
        (r.model, r.date, *(_human(v, _display_unit(r)) for v in (r.lower, r.estimate, r.upper)))
        for r in rows
    ]
    has_delta = any(isinstance(r, ComparisonRow) and r.deltas for r in rows)
    if has_delta:
        header += ("vs ours (L / E / U)",)
        body = [b + (_delta_cell(r),) for b, r in zip(body, rows)]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = []
    if title:
        lines.append(title)
    fmt = "  ".join("{:<%d}" % w if i < 2 else "{:>%d}" % w for i, w in enumerate(widths))
    lines.append(fmt.format(*header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt.format(*b) for b in body)
    return "\n".join(lines) + "\n"


def render(rows: Sequence[ReportRow], fmt: str, title: str = "", **meta) -> str:
    if fmt == "csv":
        extra = ("delta_lower_pct", "delta_estimate_pct", "delta_upper_pct") if any(
            isinstance(r, ComparisonRow) for r in rows) else ()
        return render_csv(rows, extra)
    if fmt == "json":
        return render_json(rows, **meta)
    if fmt == "table":
        return render_table(rows, title)
    raise ValueError(f"unknown format {fmt!r}")


# -- comparison against published models -----------------------------------------

@dataclass(frozen=True)
class ComparisonRow(ReportRow):
    deltas: dict = field(default_factory=dict)


def pct_delta(ours: float | None, theirs: float | None) -> float | None:
    """Relative difference of ``ours`` over ``theirs`` in percent."""
    if ours is None or theirs is None or theirs == 0:
        return None
    return (ours - theirs) / theirs * 100.0


def deltas(ours: ReportRow, theirs: ReportRow) -> dict:
    return {
        "lower": pct_delta(ours.lower, theirs.lower),
        "estimate": pct_delta(ours.estimate, theirs.estimate),
        "upper": pct_delta(ours.upper, theirs.upper),
    }


def read_published_models(path: str | Path) -> tuple[list[ReportRow], dict[str, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{Path(path).name} is not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{Path(path).name}: top level must be an object")
    models = doc.get("models", [])
    if not isinstance(models, list):
        raise SchemaError(f"{Path(path).name}: 'models' must be a list", field="models")
    rows = []
    for i, m in enumerate(models):
        for key in ("network", "label"):
            if not isinstance(m, dict) or key not in m:
                raise SchemaError("published model entry is incomplete", row=i, field=key)
        vals = {}
        for key in ("lower_w", "estimate_w", "upper_w"):
            v = m.get(key)
            if v is not None and not isinstance(v, (int, float)):
                raise SchemaError(f"non-numeric bound {v!r}", row=i, field=key)
            vals[key] = None if v is None else float(v)
        rows.append(
            ReportRow(m["label"], str(m.get("date", "")), vals["lower_w"], vals["estimate_w"], vals["upper_w"],
                      provenance="published", network=m["network"])
        )
    baselines = doc.get("baselines", {})
    labels = {r.model for r in rows}
    for name, members in baselines.items():
        unknown = [m for m in members if m not in labels]
        if unknown:
            raise SchemaError(f"baseline {name!r} references unknown models {unknown}", field="baselines")
    return rows, baselines


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return sum(vals) / len(vals) if len(vals) else None


def compare(computed: Sequence[ReportRow], published: Sequence[ReportRow], baselines: dict | None = None) -> list[ComparisonRow]:
    """Merge published rows with computed ones and attach percent deltas.

    Each published row (and each named baseline, the component-wise mean of
    its members) gets the delta of the computed row for the same network
    relative to it. Computed rows come first with empty deltas.
    """
    ours_by_net = {r.network: r for r in computed}
    out = [ComparisonRow(**r.__dict__, deltas={}) for r in computed]
    for r in published:
        ours = ours_by_net.get(r.network)
        out.append(ComparisonRow(**r.__dict__, deltas=deltas(ours, r) if ours else {}))
    by_label = {r.model: r for r in published}
    for name, members in (baselines or {}).items():
        rows = [by_label[m] for m in members]
        net = rows[0].network
        base = ReportRow(
            name, "", _mean(r.lower for r in rows), _mean(r.estimate for r in rows), _mean(r.upper for r in rows),
            provenance="mean of " + ", ".join(members), network=net,
        )
        ours = ours_by_net.get(net)
        out.append(ComparisonRow(**base.__dict__, deltas=deltas(ours, base) if ours else {}))
    return out
