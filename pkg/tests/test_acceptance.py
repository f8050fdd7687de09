"""Exit criteria. Each test records one pass/fail line (see acceptance_log)."""

import csv
import io
import json
import os
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ledgerwatt import BoundedEstimate, bounded_map, convert
from ledgerwatt.calibration import (
    PairedObservations,
    SourceEstimate,
    combine_sources,
    ols_fit,
    ols_fit_two,
    pearson_r,
    read_outlier_flags,
    read_sources,
    read_weights,
    student_t_sf,
    weighted_mean,
)
from ledgerwatt.cli import main
from ledgerwatt.config import DEFAULT_SOURCES_DOC, DEFAULT_WEIGHTS
from ledgerwatt.ethereum import ALL_CLASSES, EthNodeCensus, default_profiles, network_power, network_power_bounds
from ledgerwatt.filecoin import FilecoinSnapshot, instantaneous_power, load_preset, power_bounds, recover_snapshot
from ledgerwatt.ingestion import load_evp_records, load_survey_records
from ledgerwatt.units import UNITS

from acceptance_log import record, skip_line
from oracles import permutation_p_freedman_lane, permutation_p_simple, t_upper_tail_quad
from synthetic import evp_dataset, simple_dataset

pytestmark = pytest.mark.acceptance

AUG31 = datetime(2023, 8, 31, tzinfo=timezone.utc)


def _run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_criterion_1_ethereum_reproduction(capsys):
    t0 = time.perf_counter()
    code, out = _run_cli(capsys, "estimate", "ethereum", "--format", "csv")
    elapsed = time.perf_counter() - t0
    row = next(csv.DictReader(io.StringIO(out)))
    got = [float(row[k]) for k in ("lower_w", "estimate_w", "upper_w")]
    published = [350.5e3, 941.79e3, 2145.25e3]
    rel = [abs(g - p) / p for g, p in zip(got, published)]
    ok = code == 0 and max(rel) <= 5e-4 and elapsed < 1.0
    detail = f"{got[0]:.2f} / {got[1]:.2f} / {got[2]:.2f} W, max rel dev {max(rel):.2e} (tol 5e-4), {elapsed:.3f} s"
    assert record(1, ok, "Ethereum bounds from bundled census and profiles", detail)


def test_criterion_2_filecoin_cross_row():
    t0 = time.perf_counter()
    params = load_preset("table5-2023")
    snap = recover_snapshot(params, 9.39e6, 79.086e6, AUG31)
    upper = power_bounds(params, snap).upper
    elapsed = time.perf_counter() - t0
    rel = abs(upper - 257.917e6) / 257.917e6
    fixtures_ok = (
        abs(snap.raw_capacity - 1.24e19) / 1.24e19 < 0.01 and abs(snap.sealing_rate - 1.7e14) / 1.7e14 < 0.01
    )
    ok = rel <= 5e-3 and fixtures_ok and elapsed < 1.0
    detail = (
        f"upper {upper / 1e6:.3f} MW vs 257.917 MW, rel dev {rel:.2e} (tol 5e-3); "
        f"Cap {snap.raw_capacity:.4e} B, SR {snap.sealing_rate:.4e} B/h, {elapsed:.3f} s"
    )
    assert record(2, ok, "Filecoin upper row from the recovered snapshot", detail)


def test_criterion_3_pue_combination():
    ests = [SourceEstimate(f"interview-{i}", "PUE", v) for i, v in enumerate([1.29, 1.75, 1.3, 1.5, 1.3, 1.33])]
    ests.append(SourceEstimate("online", "PUE", 1.435, 10, "online"))
    got = weighted_mean(ests)
    ok = abs(got - 1.426) <= 1e-3
    assert record(3, ok, "weighted PUE", f"{got:.5f} vs 1.426 (tol 1e-3)")


def test_criterion_4_calibration_bounds():
    params = combine_sources(read_sources(DEFAULT_SOURCES_DOC), read_weights(DEFAULT_WEIGHTS).weights)
    want = {"A": (7.86e-09, 1.15e-07), "B": (5.21e-13, 1.00e-11), "PUE": (1.2, 1.79)}
    got = {"A": params.a, "B": params.b, "PUE": params.pue}
    ok = all((got[q].lower, got[q].upper) == want[q] for q in want)
    detail = ", ".join(f"{q} [{got[q].lower:.3g}, {got[q].upper:.3g}]" for q in want)
    assert record(4, ok, "lower/upper selections", detail)


def _companion_dir():
    env = os.environ.get("LEDGERWATT_COMPANION_DIR")
    root = Path(env) if env else Path(__file__).parent / "fixtures" / "companion"
    if (root / "survey.csv").exists() and (root / "evp.csv").exists():
        return root
    return None


def test_criterion_5_regression_correctness():
    checks = {}

    # (a) noise-free planted recovery
    x = np.linspace(1, 20, 12)
    fit1 = ols_fit(PairedObservations(tuple(x), tuple(2.5 * x + 4.0)))
    rec1 = max(abs(fit1["slope"] - 2.5) / 2.5, abs(fit1.intercept - 4.0) / 4.0)
    records, _, _ = evp_dataset(np.random.default_rng(11), 11, noise=False)
    fit2 = ols_fit_two(records)
    rec2 = max(abs(fit2["a_wh_per_byte"] - 1.64e-8) / 1.64e-8, abs(fit2["b_w_per_byte"] - 3.21e-12) / 3.21e-12)
    checks["a"] = (max(rec1, rec2) <= 1e-9, f"max rel err {max(rec1, rec2):.1e}")

    # (b) p-values against permutation oracles, n <= 30
    rng = np.random.default_rng(20230831)
    worst = 0.0
    for k in range(5):
        n = int(rng.integers(12, 31))
        xs, ys = simple_dataset(rng, n)
        p_ols = ols_fit(PairedObservations(tuple(xs), tuple(ys))).p_value("slope")
        worst = max(worst, abs(p_ols - permutation_p_simple(xs, ys, 10_000, seed=k)) / p_ols)
    for k in range(5):
        n = int(rng.integers(12, 31))
        recs, design, wh = evp_dataset(rng, n)
        fit = ols_fit_two(recs)
        for j in range(2):
            p_perm = permutation_p_freedman_lane(design, wh, j, 10_000, seed=100 + k)
            worst = max(worst, abs(fit.p_values[j] - p_perm) / fit.p_values[j])
    checks["b"] = (worst <= 0.10, f"worst rel diff {worst:.3f} over 15 p-values")

    # (c) slope identity
    worst_c = 0.0
    for k in range(50):
        xs = rng.normal(0, 3, 20)
        ys = 1.7 * xs + rng.normal(0, 2, 20)
        obs = PairedObservations(tuple(xs), tuple(ys))
        ident = pearson_r(obs) * ys.std(ddof=1) / xs.std(ddof=1)
        worst_c = max(worst_c, abs(ols_fit(obs)["slope"] - ident) / abs(ident))
    checks["c"] = (worst_c <= 1e-9, f"max rel err {worst_c:.1e}")

    # (d) t tail against quadrature
    sf, quad = student_t_sf(2.0, 10), t_upper_tail_quad(2.0, 10)
    checks["d"] = (abs(sf - quad) <= 1e-3 and abs(sf - 0.0367) <= 1e-3, f"{sf:.6f} vs quadrature {quad:.6f}")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"({k}) {'ok' if v[0] else 'FAILED'} {v[1]}" for k, v in checks.items())
    assert record(5, ok, "regression correctness", detail)


def test_criterion_5_companion_datasets():
    root = _companion_dir()
    title = "companion survey/EVP reproduction"
    if root is None:
        skip_line(5, title, "companion survey.csv / evp.csv not present; sub-check skipped")
        pytest.skip("companion datasets not available")
    flags = read_outlier_flags(root / "outliers.json") if (root / "outliers.json").exists() else {
        "sealing": (), "storage": ()}
    survey = load_survey_records(root / "survey.csv")
    seal = [o for rid, o in survey.sealing if rid not in flags["sealing"]]
    racks = [o for rid, o in survey.racks if rid not in flags["storage"]]
    r_seal = pearson_r(PairedObservations(tuple(o.c_28days for o in seal), tuple(o.p_seal for o in seal)))
    r_rack = pearson_r(PairedObservations(tuple(o.c_rack for o in racks), tuple(o.p_storage for o in racks)))
    fit = ols_fit_two(load_evp_records(root / "evp.csv"))
    pairs = [
        (r_seal, 0.68), (r_rack, 0.97),
        (fit["a_wh_per_byte"], 1.64e-08), (fit["b_w_per_byte"], 3.21e-12),
        (fit.p_value("a_wh_per_byte"), 0.003133), (fit.p_value("b_w_per_byte"), 0.000302),
    ]
    ok = all(abs(g - w) / w <= 0.01 for g, w in pairs)
    assert record(5, ok, title, ", ".join(f"{g:.4g} vs {w:.4g}" for g, w in pairs))


# -- criterion 6: model invariants -------------------------------------------------

N = 1000
_T = datetime(2023, 8, 31, tzinfo=timezone.utc)
_PROFILES, _PUE = default_profiles()
_pos = st.floats(1e-14, 1e-6)
_pue = st.floats(1.0, 3.0)
_sr = st.floats(0, 1e16)
_cap = st.floats(0, 1e21)
_counts = st.fixed_dictionaries({c: st.integers(0, 100_000) for c in ALL_CLASSES})
_pairs = [(a, b) for a, (da, _) in UNITS.items() for b, (db, _) in UNITS.items() if da == db]


@settings(max_examples=N, deadline=None, database=None)
@given(a=_pos, b=_pos, pue=_pue, s1=_sr, c1=_cap, s2=_sr, c2=_cap, k=st.floats(0, 1e3))
def _fil_linearity(a, b, pue, s1, c1, s2, c2, k):
    p = lambda s, c: instantaneous_power(a, b, pue, FilecoinSnapshot(_T, s, c))
    assert p(s1 + s2, c1 + c2) == pytest.approx(p(s1, c1) + p(s2, c2), rel=1e-9, abs=1e-12)
    assert p(k * s1, k * c1) == pytest.approx(k * p(s1, c1), rel=1e-9, abs=1e-12)


@settings(max_examples=N, deadline=None, database=None)
@given(base=st.tuples(_pos, _pos, _pue, _sr, _cap), which=st.integers(0, 4), bump=st.floats(0, 10))
def _fil_monotone(base, which, bump):
    args = list(base)
    before = instantaneous_power(args[0], args[1], args[2], FilecoinSnapshot(_T, args[3], args[4]))
    args[which] = args[which] * (1 + bump) + (bump if which >= 3 else 0)
    after = instantaneous_power(args[0], args[1], args[2], FilecoinSnapshot(_T, args[3], args[4]))
    assert after >= before


@settings(max_examples=N, deadline=None, database=None)
@given(c1=_counts, c2=_counts, tier=st.sampled_from(["lower", "estimate", "upper"]))
def _eth_additive(c1, c2, tier):
    a, b = EthNodeCensus(c1), EthNodeCensus(c2)
    total = network_power(a + b, _PROFILES, tier, _PUE)
    assert total == pytest.approx(
        network_power(a, _PROFILES, tier, _PUE) + network_power(b, _PROFILES, tier, _PUE), rel=1e-12)


@settings(max_examples=N, deadline=None, database=None)
@given(c=_counts, k=st.integers(0, 1000))
def _eth_scaling(c, k):
    census = EthNodeCensus(c)
    base = network_power_bounds(census, _PROFILES, _PUE).as_tuple()
    assert network_power_bounds(census.scaled(k), _PROFILES, _PUE).as_tuple() == pytest.approx(
        tuple(k * v for v in base), rel=1e-12)


@settings(max_examples=N, deadline=None, database=None)
@given(
    tiers=st.lists(st.tuples(_pos, _pos, st.floats(1.0, 2.0)), min_size=3, max_size=3),
    sr=_sr, cap=_cap, c=_counts,
    coeffs=st.lists(st.floats(0, 1e3), min_size=2, max_size=2),
)
def _ordering_preserved(tiers, sr, cap, c, coeffs):
    from ledgerwatt.filecoin import FilecoinParams

    cols = [sorted(col) for col in zip(*tiers)]
    params = FilecoinParams(*(BoundedEstimate(*col) for col in cols))
    fil = power_bounds(params, FilecoinSnapshot(_T, sr, cap))
    eth = network_power_bounds(EthNodeCensus(c), _PROFILES, _PUE)
    both = bounded_map(lambda x, y: coeffs[0] * x + coeffs[1] * y, fil, eth)
    for be in (fil, eth, both, fil.to("MW"), eth.scale(coeffs[0])):
        assert be.lower <= be.estimate <= be.upper


@settings(max_examples=N, deadline=None, database=None)
@given(v=st.floats(1e-12, 1e15), pair=st.sampled_from(_pairs))
def _unit_round_trip(v, pair):
    u1, u2 = pair
    assert convert(convert(v, u1, u2), u2, u1) == pytest.approx(v, rel=1e-12)


def test_criterion_6_invariant_suite():
    props = [_fil_linearity, _fil_monotone, _eth_additive, _eth_scaling, _ordering_preserved, _unit_round_trip]
    t0 = time.perf_counter()
    failures = []
    for prop in props:
        try:
            prop()
        except Exception as exc:  # report every property, not just the first failure
            failures.append(f"{prop.__name__}: {type(exc).__name__}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    detail = f"{len(props)} properties x {N} cases in {elapsed:.1f} s (limit 60 s)"
    if failures:
        detail += "; failed " + ", ".join(failures)
    assert record(6, ok, "model invariants", detail)


def test_criterion_7_ingestion_determinism(capsys, tmp_path, endpoint):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "sources": {"filecoin": {"kind": "filecoin-metrics-endpoint", "locator": endpoint.metrics_url,
                                 "source": "fixture-endpoint"}},
        "cache_dir": "cache",
        "window": {"from": "2023-08-29", "to": "2023-08-31"},
    }))
    outputs = []
    for _ in range(2):
        code, out = _run_cli(capsys, "estimate", "filecoin", "--config", str(cfg), "--format", "csv")
        outputs.append((code, out))
    after_first = 1
    ok = (
        outputs[0][0] == 0
        and outputs[0][1] == outputs[1][1]
        and len(endpoint.requests) == after_first
        and len(outputs[0][1].splitlines()) == 4
    )
    detail = f"identical={outputs[0][1] == outputs[1][1]}, remote requests={len(endpoint.requests)} (expected 1)"
    assert record(7, ok, "fetch, cache, re-run", detail)
