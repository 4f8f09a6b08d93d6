"""Rolling-scan pipeline: bookkeeping, aggregation, nulls, detector."""

from dataclasses import replace

import numpy as np
import pytest

from hawkscan.data import IntegerSecondSeries, SessionEvents
from hawkscan.estimate import FitConfig, ParamSummary, fit_bootstrap
from hawkscan.pipeline import (
    SCAN_COLUMNS,
    ScanConfig,
    ScanReport,
    WindowEstimate,
    aggregate,
    criticality_detector,
    read_scan_csv,
    reshuffle_null_experiment,
    scan,
    window_count,
    write_scan_csv,
)
from hawkscan.scenarios import (
    case_study_scan_config,
    exogenous_case_study,
    piecewise_day,
    poisson_month,
    ramp_case_study,
    synthetic_month,
    trading_dates,
)

FAST_FIT = FitConfig(method="lbfgs", beta_min=0.05)


def small_config(**kw) -> ScanConfig:
    base = dict(window_lengths=(600.0,), step=600.0, n_realizations=6,
                fit=FAST_FIT, master_seed=5)
    base.update(kw)
    return ScanConfig(**base)


# ---------------------------------------------------------------------------
# window arithmetic and scan bookkeeping
# ---------------------------------------------------------------------------

def test_window_count_examples():
    # 9:30-16:15 session span
    assert window_count(24300.0, 600.0, 300.0) == 80
    # 6.5-hour span for comparison
    assert window_count(23400.0, 600.0, 300.0) == 77
    assert window_count(600.0, 600.0, 300.0) == 1
    assert window_count(599.0, 600.0, 300.0) == 0
    assert window_count(3600.0, 1800.0, 600.0) == 4


def test_scan_bookkeeping_statuses_partition_attempted():
    dense = synthetic_month(n_days=1, session_len=1800.0, seed=6)[0]
    sparse = poisson_month(rate=0.1, n_days=1, session_len=1800.0, seed=5)[0]
    sparse = SessionEvents(replace(sparse.session, date="2008-03-04"), sparse.raw)
    cfg = small_config(step=300.0)
    report = scan([dense, sparse], cfg)

    attempted = 2 * window_count(1800.0, 600.0, 300.0)
    assert len(report.windows) == attempted
    by = {s: len(report.by_status(s)) for s in
          ("ok", "skipped_few_events", "rejected", "failed")}
    assert sum(by.values()) == attempted
    assert all(w.status == "skipped_few_events"
               for w in report.windows if w.date == "2008-03-04")
    for w in report.windows:
        if w.status == "ok":
            assert w.summary is not None and w.verdict is not None
            assert not w.verdict.window_rejected
        if w.status == "skipped_few_events":
            assert w.n_events < cfg.min_events and w.summary is None


def test_scan_rows_ordered_by_start_then_length():
    se = synthetic_month(n_days=1, session_len=1800.0, seed=6)[0]
    cfg = small_config(window_lengths=(600.0, 1200.0), step=300.0,
                       n_realizations=3)
    report = scan([se], cfg)
    got = [(w.window_start, w.window_length) for w in report.windows]
    assert got == [(0.0, 600.0), (0.0, 1200.0), (300.0, 600.0), (300.0, 1200.0),
                   (600.0, 600.0), (600.0, 1200.0), (900.0, 600.0),
                   (1200.0, 600.0)]


def test_single_window_is_replayable_outside_the_scan():
    se = synthetic_month(n_days=1, session_len=1800.0, seed=6)[0]
    cfg = small_config(step=300.0, master_seed=7, n_realizations=5)
    report = scan([se], cfg)
    k = 2
    target = report.windows[k]
    assert target.status == "ok"

    ts = se.raw.timestamps
    start = k * cfg.step
    chunk = ts[(ts >= start) & (ts < start + 600.0)] - start
    seed = np.random.SeedSequence(cfg.master_seed, spawn_key=(0, 0, k))
    bs = fit_bootstrap(IntegerSecondSeries(chunk, 600.0), cfg.fit,
                       cfg.n_realizations, seed)
    assert bs.summary["n"].median == target.summary["n"].median
    assert bs.summary["mu"].median == target.summary["mu"].median
    assert bs.summary["beta"].std == target.summary["beta"].std


def test_scan_skips_unkept_sessions():
    days = synthetic_month(n_days=2, session_len=1800.0, seed=9)
    dropped = SessionEvents(replace(days[1].session, kept=False), days[1].raw)
    report = scan([days[0], dropped], small_config())
    assert {w.date for w in report.windows} == {days[0].session.date}


# ---------------------------------------------------------------------------
# regime recovery and the all-Poisson null
# ---------------------------------------------------------------------------

def test_piecewise_day_recovers_both_regimes():
    sessions = [piecewise_day(np.random.SeedSequence((9200, d)), date)
                for d, date in enumerate(trading_dates(6))]
    report = scan(sessions, small_config(master_seed=1))
    first = [w.n_median for w in report.windows
             if w.status == "ok" and w.window_start + 600.0 <= 3600.0]
    second = [w.n_median for w in report.windows
              if w.status == "ok" and w.window_start >= 3600.0]
    assert len(first) > 20 and len(second) > 20
    gap = np.median(second) - np.median(first)
    assert gap > 0.3


def test_poisson_month_scans_to_low_n():
    sessions = poisson_month(rate=5.0, n_days=8, session_len=3600.0, seed=21)
    report = scan(sessions, small_config(n_realizations=8, master_seed=2))
    meds = [w.n_median for w in report.windows if w.status == "ok"]
    assert len(meds) >= 40
    assert float(np.median(meds)) < 0.1


# ---------------------------------------------------------------------------
# aggregation over centered date periods
# ---------------------------------------------------------------------------

def _summary(value: float) -> dict[str, ParamSummary]:
    s = ParamSummary(mean=value, std=0.0, median=value, q05=value, q95=value)
    return {"mu": s, "n": s, "beta": s}


def _window(date, start, n_med, status="ok", length=600.0, n_events=1000):
    return WindowEstimate(date=date, window_start=start, window_length=length,
                          n_events=n_events, status=status,
                          summary=_summary(n_med) if status != "skipped_few_events" else None)


def _quantile_oracle(values, q):
    """Sort-based linear interpolation, written out longhand."""
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    return v[lo] + (pos - lo) * (v[hi] - v[lo])


def test_aggregate_constant_values_collapse_band():
    windows = [_window(d, s, 0.7)
               for d in ("2010-05-03", "2010-05-04", "2010-05-05")
               for s in (0.0, 600.0, 1200.0, 1800.0)]
    records = aggregate(ScanReport(windows=tuple(windows)), ScanConfig())
    assert records
    for r in records:
        assert r.mean == r.median == 0.7
        assert r.q90 - r.q10 == 0.0


def test_aggregate_matches_brute_force_quantiles():
    rng = np.random.default_rng(3)
    dates = ["2010-05-03", "2010-05-04", "2010-05-05"]
    vals = {d: rng.uniform(0.4, 0.9, size=7) for d in dates}
    windows = [_window(d, 600.0 * i, v)
               for d in dates for i, v in enumerate(vals[d])]
    records = aggregate(ScanReport(windows=tuple(windows)), ScanConfig())
    pooled = np.concatenate([vals[d] for d in dates])  # 61-day period spans all
    for r in records:
        if r.param != "n":
            continue
        assert r.mean == pytest.approx(pooled.mean(), abs=1e-12)
        assert r.median == pytest.approx(_quantile_oracle(pooled, 0.5), abs=1e-12)
        assert r.q10 == pytest.approx(_quantile_oracle(pooled, 0.1), abs=1e-12)
        assert r.q90 == pytest.approx(_quantile_oracle(pooled, 0.9), abs=1e-12)


def test_aggregate_period_is_centered():
    windows = [_window("2010-05-03", 0.0, 0.2), _window("2010-05-04", 0.0, 0.4),
               _window("2010-05-07", 0.0, 0.8)]
    cfg = ScanConfig(aggregate_period_days=3)  # center date +/- 1 day
    records = {(r.center_date, r.param): r
               for r in aggregate(ScanReport(windows=tuple(windows)), cfg)}
    assert records[("2010-05-03", "n")].mean == pytest.approx(0.3)
    assert records[("2010-05-04", "n")].mean == pytest.approx(0.3)
    assert records[("2010-05-07", "n")].mean == pytest.approx(0.8)


def test_aggregate_excludes_non_ok_and_skips_empty_periods():
    windows = [_window("2010-05-03", 0.0, 0.9, status="rejected"),
               _window("2010-05-03", 600.0, 0.9, status="failed"),
               _window("2010-05-03", 1200.0, 0.0, status="skipped_few_events")]
    assert aggregate(ScanReport(windows=tuple(windows)), ScanConfig()) == ()

    mixed = ScanReport(windows=tuple(
        [_window("2010-05-03", 0.0, 0.5),
         _window("2010-05-03", 600.0, 0.9, status="rejected")]))
    only_ok = aggregate(mixed, ScanConfig())
    n_rec = [r for r in only_ok if r.param == "n"]
    assert n_rec[0].mean == pytest.approx(0.5)

    with_rej = aggregate(mixed, ScanConfig(include_rejected_in_aggregate=True))
    n_rec = [r for r in with_rej if r.param == "n"]
    assert n_rec[0].mean == pytest.approx(0.7)


# ---------------------------------------------------------------------------
# reshuffle null experiment
# ---------------------------------------------------------------------------

def test_reshuffle_kills_branching_ratio_of_hawkes_month():
    # 30-minute windows: short windows leave the Poissonized arm enough
    # slow-kernel room to push its n-hat q90 estimate near the bound
    sessions = synthetic_month(n_days=8, session_len=3600.0, seed=11)
    cfg = small_config(window_lengths=(1800.0,), n_realizations=4,
                       master_seed=3)
    cmp = reshuffle_null_experiment(sessions, cfg)
    assert cmp.counts_preserved
    assert cmp.original_median_n > 0.6
    assert cmp.reshuffled_q90_n < 0.15


def test_reshuffle_of_poisson_input_is_null_on_both_arms():
    sessions = poisson_month(rate=5.0, n_days=6, session_len=3600.0, seed=13)
    cfg = small_config(window_lengths=(1800.0,), n_realizations=4,
                       master_seed=4)
    cmp = reshuffle_null_experiment(sessions, cfg)
    assert cmp.counts_preserved
    orig = [w.n_median for w in cmp.original.windows if w.status == "ok"]
    assert float(np.median(orig)) < 0.1
    assert cmp.reshuffled_q90_n < 0.15


# ---------------------------------------------------------------------------
# criticality detector
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def exo_report():
    return criticality_detector(scan(exogenous_case_study(),
                                     case_study_scan_config()))


@pytest.fixture(scope="module")
def ramp_report():
    return criticality_detector(scan(ramp_case_study(),
                                     case_study_scan_config()))


def test_exogenous_shock_day_fires_rate_flags_only(exo_report):
    day1 = [w for w in exo_report.windows if w.date == "2010-04-26"]
    day2 = [w for w in exo_report.windows if w.date == "2010-04-27"]
    assert all(w.flag_n is None and w.flag_rate is None for w in day1)
    assert sum(bool(w.flag_n) for w in day2) == 0
    assert all(bool(w.flag_rate) for w in day2)


def test_ramp_day_n_flag_fires_before_peak_rate(ramp_report):
    day2 = [w for w in ramp_report.windows if w.date == "2010-05-06"]
    peak_start = max(day2, key=lambda w: w.n_events).window_start
    flagged = [w.window_start for w in day2 if w.flag_n]
    assert flagged
    assert min(flagged) < peak_start


def test_detector_flat_history_raises_no_flags():
    windows = [_window(d, 600.0 * i, 0.7)
               for d in ("2010-05-03", "2010-05-04") for i in range(6)]
    out = criticality_detector(ScanReport(windows=tuple(windows)))
    day2 = [w for w in out.windows if w.date == "2010-05-04"]
    assert all(w.flag_n is False and w.flag_rate is False for w in day2)


def test_detector_undefined_without_populated_reference():
    lone = [_window("2010-05-03", 600.0 * i, 0.7) for i in range(6)]
    out = criticality_detector(ScanReport(windows=tuple(lone)))
    assert all(w.flag_n is None for w in out.windows)

    thin_ref = [_window("2010-05-03", 600.0 * i, 0.7) for i in range(4)]
    day2 = [_window("2010-05-04", 600.0 * i, 0.9) for i in range(6)]
    out = criticality_detector(ScanReport(windows=tuple(thin_ref + day2)))
    assert all(w.flag_n is None for w in out.windows)

    ref = [_window("2010-05-03", 600.0 * i, 0.7) for i in range(6)]
    bad = [_window("2010-05-04", 0.0, 0.9, status="failed"),
           _window("2010-05-04", 600.0, 0.9)]
    out = criticality_detector(ScanReport(windows=tuple(ref + bad)))
    flags = {w.window_start: w.flag_n for w in out.windows
             if w.date == "2010-05-04"}
    assert flags[0.0] is None
    assert flags[600.0] is True


def test_detector_band_raise_never_adds_flags(ramp_report):
    rng = np.random.default_rng(8)
    ref = [_window("2010-05-03", 600.0 * i, v, n_events=int(900 + 40 * v))
           for i, v in enumerate(rng.uniform(0.55, 0.8, size=12))]
    day2 = [_window("2010-05-04", 600.0 * i, v, n_events=int(900 + 400 * v))
            for i, v in enumerate(rng.uniform(0.5, 0.95, size=12))]
    base = ScanReport(windows=tuple(ref + day2))

    def n_flags(report):
        return sum(bool(w.flag_n) for w in report.windows) + \
            sum(bool(w.flag_rate) for w in report.windows)

    fabricated_95 = n_flags(criticality_detector(base, band=(0.05, 0.95)))
    fabricated_99 = n_flags(criticality_detector(base, band=(0.05, 0.99)))
    assert fabricated_99 <= fabricated_95

    plain = ScanReport(windows=tuple(
        replace(w, flag_n=None, flag_rate=None) for w in ramp_report.windows))
    real_95 = n_flags(criticality_detector(plain, band=(0.05, 0.95)))
    real_99 = n_flags(criticality_detector(plain, band=(0.05, 0.99)))
    assert real_99 <= real_95


# ---------------------------------------------------------------------------
# determinism, serialization, parallel merge
# ---------------------------------------------------------------------------

def test_scan_is_byte_deterministic_and_csv_roundtrips(tmp_path):
    sessions = synthetic_month(n_days=1, session_len=1800.0, seed=6)
    cfg = small_config(step=300.0, n_realizations=4)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report = scan(sessions, cfg)
    write_scan_csv(a, report)
    write_scan_csv(b, scan(sessions, cfg))
    assert a.read_bytes() == b.read_bytes()

    rows = read_scan_csv(a)
    assert len(rows) == len(report.windows)
    assert list(rows[0].keys()) == SCAN_COLUMNS
    assert rows[0]["date"] == report.windows[0].date
    assert rows[0]["status"] == report.windows[0].status
    assert float(rows[0]["n_med"]) == report.windows[0].summary["n"].median
    assert rows[0]["flag_n"] == ""  # detector never ran


def test_parallel_jobs_merge_matches_serial(tmp_path):
    sessions = synthetic_month(n_days=1, session_len=1800.0, seed=7)
    serial = scan(sessions, small_config(step=300.0, n_realizations=4, jobs=1))
    twin = scan(sessions, small_config(step=300.0, n_realizations=4, jobs=2))
    pa, pb = tmp_path / "serial.csv", tmp_path / "twin.csv"
    write_scan_csv(pa, serial)
    write_scan_csv(pb, twin)
    assert pa.read_bytes() == pb.read_bytes()


def test_window_lengths_agree_on_stationary_data():
    sessions = synthetic_month(n_days=6, session_len=3600.0, seed=17,
                               integer_seconds=False)
    cfg = small_config(window_lengths=(600.0, 1200.0, 1800.0),
                       n_realizations=1, master_seed=9)
    records = aggregate(scan(sessions, cfg), cfg)
    by_len = {}
    for r in records:
        if r.param == "n":
            by_len.setdefault(r.center_date, {})[r.window_length] = r
    assert by_len
    for per_len in by_len.values():
        assert len(per_len) == 3
        for la, ra in per_len.items():
            for lb, rb in per_len.items():
                assert rb.q10 - 1e-12 <= ra.median <= rb.q90 + 1e-12
