"""Command-line entry point.

Exit status: 0 success, 1 runtime or data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

from . import ethereum, filecoin, selftest
from .calibration import (
    calibrate,
    evp_estimates,
    interview_estimates,
    online_pue_estimate,
    read_outlier_flags,
    read_sources,
    read_weights,
    survey_estimates,
)
from .config import DATA_DIR, RunConfig, load_config
from .errors import ConfigError, LedgerWattError
from .ingestion import (
    DataSourceDescriptor,
    FileCache,
    HttpClient,
    fetch_filecoin_series,
    load_eth_census,
    load_evp_records,
    load_interviews,
    load_online_pues,
    load_survey_records,
    local_file_span,
)
from .report import ReportRow, compare, doc_digest, file_digest, provenance, read_published_models, render

logger = logging.getLogger("ledgerwatt")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DEFAULT_SNAPSHOT = DataSourceDescriptor(
    "local-file", str(DATA_DIR / "filecoin_snapshot_2023-08-31.json"), "derived-2023-08-31"
)


class UsageError(ConfigError):
    pass


def _date_arg(s: str) -> date:
    try:
        return date.fromisoformat(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (JSON)")
    common.add_argument("--format", choices=("table", "csv", "json"), help="output format")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument("--preset", help="Filecoin parameter preset name")
    common.add_argument("--from", dest="window_from", type=_date_arg, metavar="YYYY-MM-DD")
    common.add_argument("--to", dest="window_to", type=_date_arg, metavar="YYYY-MM-DD")
    common.add_argument("--seed", type=int, help="seed for randomised self-checks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ledgerwatt", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("calibrate", parents=[common], help="derive Filecoin parameters from field data")

    est = sub.add_parser("estimate", help="bounded power estimate for one network")
    est_sub = est.add_subparsers(dest="network", required=True)
    est_sub.add_parser("ethereum", parents=[common])
    est_sub.add_parser("filecoin", parents=[common])

    rep = sub.add_parser("report", help="reports")
    rep_sub = rep.add_subparsers(dest="report", required=True)
    cmp_p = rep_sub.add_parser("compare", parents=[common], help="compare against published models")
    cmp_p.add_argument("--published", type=Path, help="published-models document")

    sub.add_parser("fetch", parents=[common], help="fetch and cache Filecoin network metrics")
    sub.add_parser("selftest", parents=[common], help="seeded permutation check of regression p-values")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.preset:
        if cfg.params or cfg.params_path:
            raise ConfigError("--preset conflicts with parameters given in the config")
        cfg.preset = args.preset
    for name in ("format", "out", "window_from", "window_to", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "published", None):
        cfg.published_models = args.published
    return cfg.validate()


def _config_digest(cfg: RunConfig) -> str:
    return doc_digest({
        "config": cfg.raw,
        "preset": cfg.preset,
        "from": cfg.window_from,
        "to": cfg.window_to,
    })


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- ethereum ----------------------------------------------------------------------

def ethereum_rows(cfg: RunConfig) -> list[ReportRow]:
    if cfg.census_source is not None:
        census = load_eth_census(cfg.census_source)
        census_digest = file_digest(cfg.census_source.locator) if cfg.census_source.kind == "local-file" else ""
    else:
        census = ethereum.default_census()
        census_digest = file_digest(ethereum.DEFAULT_CENSUS_PATH)
    profiles_path = cfg.profiles_path or ethereum.DEFAULT_PROFILES_PATH
    profiles, pue = ethereum.read_profiles(profiles_path)
    bounds = ethereum.network_power_bounds(census, profiles, pue)
    prov = provenance(
        census=census.source,
        census_digest=census_digest,
        profiles=profiles.version,
        profiles_digest=file_digest(profiles_path),
        config=_config_digest(cfg),
    )
    return [ReportRow("ethereum-node-census", census.timestamp, *bounds.as_tuple(), provenance=prov, network="ethereum")]


# -- filecoin ----------------------------------------------------------------------

def resolve_params(cfg: RunConfig) -> tuple[filecoin.FilecoinParams, str]:
    if cfg.params:
        p = filecoin.FilecoinParams.from_dict(cfg.params)
        return p, f"inline:{doc_digest(cfg.params)}"
    if cfg.params_path:
        p = filecoin.load_params(cfg.params_path)
        return p, f"{p.name}@{p.version}:{file_digest(cfg.params_path)}"
    p = filecoin.load_preset(cfg.preset or filecoin.DEFAULT_PRESET)
    return p, f"{p.name}@{p.version}"


def _cache(cfg: RunConfig) -> FileCache:
    root = cfg.cache_dir or Path(".ledgerwatt-cache")
    return FileCache(root, staleness=cfg.staleness)


def filecoin_series(cfg: RunConfig, client: HttpClient | None = None):
    src = cfg.filecoin_source or DEFAULT_SNAPSHOT
    start, end = cfg.window_from, cfg.window_to
    if start is None or end is None:
        if src.kind != "local-file":
            raise ConfigError("a remote Filecoin source needs --from and --to")
        first, last = local_file_span(src)
        start = start or first
        end = end or last
    return src, fetch_filecoin_series(src, start, end, cache=_cache(cfg), client=client)


def filecoin_rows(cfg: RunConfig, client: HttpClient | None = None) -> list[ReportRow]:
    params, params_label = resolve_params(cfg)
    src, series = filecoin_series(cfg, client)
    prov = provenance(preset=params_label, source=src.source, config=_config_digest(cfg))
    rows = []
    for ts, snap in series:
        b = filecoin.power_bounds(params, snap)
        rows.append(ReportRow(f"filecoin:{params.name}", ts.date().isoformat(), *b.as_tuple(), provenance=prov, network="filecoin"))
    return rows


# -- commands ------------------------------------------------------------------------

def cmd_estimate(cfg: RunConfig, network: str, client: HttpClient | None = None) -> str:
    if network == "ethereum":
        rows = ethereum_rows(cfg)
    elif network == "filecoin":
        rows = filecoin_rows(cfg, client)
    else:
        raise UsageError(f"unknown network {network!r}")
    return render(rows, cfg.format, title=f"{network} power estimate", network=network)


def cmd_report_compare(cfg: RunConfig, client: HttpClient | None = None) -> str:
    published, baselines = read_published_models(cfg.published_models)
    computed = ethereum_rows(cfg)
    fil = filecoin_rows(cfg, client)
    if fil:
        computed.append(fil[-1])
    rows = compare(computed, published, baselines)
    return render(rows, cfg.format, title="Comparison with published models", published=file_digest(cfg.published_models))


def run_calibration(cfg: RunConfig):
    cal = cfg.calibration
    estimates = read_sources(cal.sources) if cal.sources else []
    fits = {}
    notes = []
    flags = read_outlier_flags(cal.outliers) if cal.outliers else {"flagged": (), "sealing": (), "storage": ()}

    def replace_kind(kind, new):
        nonlocal estimates
        estimates = [e for e in estimates if e.kind != kind] + list(new)
        notes.append(f"{kind} estimates computed from raw data")

    if cal.survey:
        survey = load_survey_records(cal.survey)
        ests, survey_fits = survey_estimates(
            survey.sealing, survey.racks, flags["sealing"], flags["storage"], with_intercept=cal.with_intercept
        )
        replace_kind("survey", ests)
        fits.update(survey_fits)
        notes.extend(f"survey row {s['row']} ({s['source_id']}): {s['field']} {s['reason']}" for s in survey.skipped)
    if cal.evp:
        ests, fit = evp_estimates(load_evp_records(cal.evp))
        replace_kind("evp", ests)
        fits["evp"] = fit
    if cal.interviews:
        replace_kind("interview", interview_estimates(load_interviews(cal.interviews)))
    if cal.online_pue:
        replace_kind("online", [online_pue_estimate(load_online_pues(cal.online_pue))])

    weights = read_weights(cal.weights) if cal.weights else None
    w = dict(weights.weights) if weights else {}
    # weights for sources that were not supplied are ignored rather than rejected
    known = {e.label for e in estimates}
    w = {k: v for k, v in w.items() if k in known}
    inputs = {
        k: file_digest(v) for k, v in vars(cal).items() if isinstance(v, Path)
    }
    version = "calibrated-" + doc_digest(inputs)
    result = calibrate(estimates, w, flags["flagged"], fits, name="calibrated", version=version)
    result.notes.extend(notes)
    return result, inputs


def cmd_calibrate(cfg: RunConfig) -> str:
    result, inputs = run_calibration(cfg)
    if cfg.format == "json":
        doc = result.params.to_dict()
        doc["calibration"] = result.report()
        doc["calibration"]["inputs"] = inputs
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    p = result.params
    rows = [("A (Wh/byte)", p.a), ("B (W/byte)", p.b), ("PUE", p.pue)]
    if cfg.format == "csv":
        lines = ["quantity,lower,estimate,upper"]
        lines += [f"{q},{be.lower!r},{be.estimate!r},{be.upper!r}" for q, be in rows]
        return "\n".join(lines) + "\n"
    lines = [f"{'':14}{'Lower':>12}{'Average':>12}{'Upper':>12}"]
    for q, be in rows:
        lines.append(f"{q:14}" + "".join(f"{v:>12.3g}" for v in be.as_tuple()))
    lines.append("")
    for e in result.estimates:
        flag = " (outlier)" if e.outlier else ""
        lines.append(f"  {e.label:18} {e.quantity:4} {e.value:10.3g}  weight {e.weight:g}{flag}")
    for name, fit in sorted(result.fits.items()):
        r = "" if fit.pearson_r is None else f"r={fit.pearson_r:.3f} "
        ps = ", ".join(f"{n} p={p:.3g}" for n, p in zip(fit.names, fit.p_values))
        lines.append(f"  fit {name}: {r}{ps}")
    lines.extend(f"  note: {n}" for n in result.notes)
    return "\n".join(lines) + "\n"


def cmd_fetch(cfg: RunConfig, client: HttpClient | None = None) -> str:
    src, series = filecoin_series(cfg, client)
    rows = [
        {"date": ts.date().isoformat(), "sealing_rate_bytes_per_hour": float(s.sealing_rate), "raw_capacity_bytes": float(s.raw_capacity)}
        for ts, s in series
    ]
    if cfg.format == "json":
        return json.dumps({"source": src.source, "records": rows}, indent=2, sort_keys=True) + "\n"
    sep = "," if cfg.format == "csv" else "  "
    lines = [sep.join(("date", "sealing_rate_bytes_per_hour", "raw_capacity_bytes"))]
    lines += [sep.join((r["date"], repr(r["sealing_rate_bytes_per_hour"]), repr(r["raw_capacity_bytes"]))) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_selftest(cfg: RunConfig) -> str:
    results = selftest.run(cfg.seed)
    if cfg.format == "json":
        return json.dumps({"seed": cfg.seed, "results": results}, indent=2) + "\n"
    lines = [f"seed {cfg.seed}"]
    for r in results:
        if r["p_permutation"] is None:
            lines.append(f"  {r['dataset']}: {r['p_ols']:.5f}")
        else:
            lines.append(f"  dataset {r['dataset']}: ols p={r['p_ols']:.4f} permutation p={r['p_permutation']:.4f} rel diff {r['rel_diff']:.1%}")
    return "\n".join(lines) + "\n"


def main(argv=None, client: HttpClient | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        if args.command == "calibrate":
            text = cmd_calibrate(cfg)
        elif args.command == "estimate":
            text = cmd_estimate(cfg, args.network, client)
        elif args.command == "report":
            text = cmd_report_compare(cfg, client)
        elif args.command == "fetch":
            text = cmd_fetch(cfg, client)
        else:
            text = cmd_selftest(cfg)
        _emit(text, cfg)
    except ConfigError as exc:
        print(f"ledgerwatt: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"ledgerwatt: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (LedgerWattError, OSError, ValueError) as exc:
        print(f"ledgerwatt: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
