"""Rolling-window calibration across sessions, aggregation, null runs, flags.

A scan sweeps windows of several lengths through each session with a
fixed step, runs the randomization bootstrap plus the residual test on
every window, and keeps per-window status so that skipped or failed
windows stay visible instead of silently vanishing.  Aggregation rolls
a centered two-month (61-day) date window over the per-window bootstrap
medians.  The criticality detector compares each window's median n-hat
(and its event count) against quantile bands of the previous session,
which is how a largely endogenous day announces itself: the event rate
can look ordinary while n-hat walks out of yesterday's band.

Window seeds derive from the master seed through a documented counter:
SeedSequence(master, spawn_key=(session_index, length_index,
window_index)), so any single window can be refitted in isolation and
the full scan is byte-reproducible.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date as _date
from datetime import timedelta
from typing import Optional, Sequence

import numpy as np

from hawkscan.data import IntegerSecondSeries, SessionEvents, poissonize_within_day
from hawkscan.estimate import (
    FitConfig,
    NonConvergenceError,
    ParamSummary,
    fit_bootstrap,
)
from hawkscan.gof import GofVerdict, window_rejection

__all__ = [
    "ScanConfig",
    "WindowEstimate",
    "AggregateRecord",
    "ScanReport",
    "ReshuffleComparison",
    "window_count",
    "scan",
    "aggregate",
    "reshuffle_null_experiment",
    "criticality_detector",
    "write_scan_csv",
    "write_aggregate_csv",
    "read_scan_csv",
]

SCAN_COLUMNS = [
    "date", "window_start_s", "len_s", "n_events",
    "mu_med", "mu_std", "n_med", "n_mean", "n_std", "beta_med",
    "ll", "ks_pmax", "status", "flag_n", "flag_rate",
]
AGGREGATE_COLUMNS = ["center_date", "len_s", "param", "mean", "median", "q10", "q90"]

# spawn_key tag separating per-session poissonization seeds from window seeds
_RESHUFFLE_TAG = 0x5E5F


@dataclass(frozen=True)
class ScanConfig:
    window_lengths: tuple[float, ...] = (600.0, 1200.0, 1800.0)
    step: float = 300.0
    min_events: int = 100
    n_realizations: int = 50
    # beta_min floors the kernel at a 20 s timescale: a rolling window
    # cannot tell slower kernels from background drift, and leaving them
    # reachable lets null data buy spurious n-hat with slow-beta optima.
    # Clear or lower it when hunting genuinely slow kernels.
    fit: FitConfig = field(default_factory=lambda: FitConfig(method="lbfgs",
                                                             beta_min=0.05))
    master_seed: int = 0
    alpha: float = 0.05  # per-realization KS rejection level
    include_rejected_in_aggregate: bool = False
    aggregate_period_days: int = 61  # two months, centered
    sub_quantiles: tuple[float, float] = (0.1, 0.9)
    jobs: Optional[int] = None  # worker processes; None means one per core


@dataclass(frozen=True)
class WindowEstimate:
    date: str
    window_start: float
    window_length: float
    n_events: int
    status: str  # ok | skipped_few_events | rejected | failed
    summary: Optional[dict[str, ParamSummary]] = None
    verdict: Optional[GofVerdict] = None
    log_likelihood: Optional[float] = None  # median over converged fits
    flag_n: Optional[bool] = None  # set by criticality_detector
    flag_rate: Optional[bool] = None

    @property
    def n_median(self) -> Optional[float]:
        return self.summary["n"].median if self.summary else None


@dataclass(frozen=True)
class AggregateRecord:
    center_date: str
    window_length: float
    param: str
    mean: float
    median: float
    q10: float
    q90: float


@dataclass(frozen=True)
class ScanReport:
    windows: tuple[WindowEstimate, ...]
    aggregation: tuple[AggregateRecord, ...] = ()
    config: Optional[ScanConfig] = None

    def by_status(self, status: str) -> list[WindowEstimate]:
        return [w for w in self.windows if w.status == status]


@dataclass(frozen=True)
class ReshuffleComparison:
    original: ScanReport
    reshuffled: ScanReport
    original_median_n: float
    reshuffled_q90_n: float
    counts_preserved: bool


def window_count(session_length: float, window_length: float, step: float) -> int:
    """Closed-form number of attempted windows: floor((L_sess - L)/step) + 1."""
    if window_length > session_length:
        return 0
    return int(np.floor((session_length - window_length) / step)) + 1


def _scan_one(series: IntegerSecondSeries, config: ScanConfig, seed) -> tuple:
    """(status, summary, verdict, ll) for one window."""
    try:
        bs = fit_bootstrap(series, config.fit, config.n_realizations, seed)
        verdict = window_rejection(bs, config.alpha)
    except (NonConvergenceError, ValueError):
        return "failed", None, None, None
    lls = [f.log_likelihood for f in bs.fits if f.converged]
    ll = float(np.median(lls))
    status = "rejected" if verdict.window_rejected else "ok"
    return status, bs.summary, verdict, ll


def _fit_window(chunk: np.ndarray, length: float, config: ScanConfig, seed) -> tuple:
    return _scan_one(IntegerSecondSeries(chunk, length), config, seed)


def scan(sessions: Sequence[SessionEvents], config: ScanConfig = ScanConfig()) -> ScanReport:
    """Sweep all window lengths through every kept session.

    Windows with fewer than min_events events are emitted with status
    skipped_few_events; fit or usability failures become status failed.
    One bad window never aborts the scan.  Report rows are ordered by
    (session, window_start, window_length) and window fits run on
    config.jobs worker processes; results merge in report order no
    matter which worker finishes first, so output is reproducible at
    any parallelism degree.
    """
    tasks: list[tuple[str, float, float, np.ndarray, np.random.SeedSequence]] = []
    for si, se in enumerate(sessions):
        if not se.session.kept:
            continue
        ts = se.raw.timestamps
        horizon = se.raw.horizon
        keys = [(k * config.step, length, li, k)
                for li, length in enumerate(config.window_lengths)
                for k in range(window_count(horizon, length, config.step))]
        keys.sort(key=lambda t: (t[0], t[1]))
        for start, length, li, k in keys:
            chunk = ts[(ts >= start) & (ts < start + length)] - start
            seed = np.random.SeedSequence(config.master_seed,
                                          spawn_key=(si, li, k))
            tasks.append((se.session.date, start, length, chunk, seed))

    todo = [i for i, t in enumerate(tasks) if t[3].size >= config.min_events]
    jobs = config.jobs if config.jobs is not None else (os.cpu_count() or 1)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(i, pool.submit(_fit_window, tasks[i][3], tasks[i][2],
                                       config, tasks[i][4])) for i in todo]
            results = {i: f.result() for i, f in futures}
    else:
        results = {i: _fit_window(tasks[i][3], tasks[i][2], config, tasks[i][4])
                   for i in todo}

    windows: list[WindowEstimate] = []
    for i, (date, start, length, chunk, _seed) in enumerate(tasks):
        n_events = int(chunk.size)
        if i not in results:
            windows.append(WindowEstimate(
                date=date, window_start=start, window_length=length,
                n_events=n_events, status="skipped_few_events"))
            continue
        status, summary, verdict, ll = results[i]
        windows.append(WindowEstimate(
            date=date, window_start=start, window_length=length,
            n_events=n_events, status=status, summary=summary,
            verdict=verdict, log_likelihood=ll))
    return ScanReport(windows=tuple(windows), config=config)


def aggregate(report: ScanReport, config: Optional[ScanConfig] = None) -> tuple[AggregateRecord, ...]:
    """Centered rolling aggregation of per-window bootstrap medians.

    For every session date and window length, all ok windows whose date
    falls within +/- half the aggregation period contribute their median
    mu / n / beta; a (date, length) pair with no contributing windows
    produces no record at all.
    """
    config = config or report.config or ScanConfig()
    half = timedelta(days=config.aggregate_period_days // 2)
    q_lo, q_hi = config.sub_quantiles
    statuses = {"ok", "rejected"} if config.include_rejected_in_aggregate else {"ok"}
    usable = [w for w in report.windows if w.status in statuses]
    dates = sorted({w.date for w in report.windows})
    lengths = sorted({w.window_length for w in report.windows})

    records: list[AggregateRecord] = []
    for center in dates:
        c = _date.fromisoformat(center)
        for length in lengths:
            rows = [w for w in usable
                    if w.window_length == length
                    and abs(_date.fromisoformat(w.date) - c) <= half]
            if not rows:
                continue
            for param in ("mu", "n", "beta"):
                vals = np.array([w.summary[param].median for w in rows])
                if np.all(vals == vals[0]):
                    # constant input aggregates exactly, no rounding drift
                    m = float(vals[0])
                    records.append(AggregateRecord(
                        center_date=center, window_length=length, param=param,
                        mean=m, median=m, q10=m, q90=m))
                    continue
                records.append(AggregateRecord(
                    center_date=center, window_length=length, param=param,
                    mean=float(vals.mean()), median=float(np.median(vals)),
                    q10=float(np.quantile(vals, q_lo)),
                    q90=float(np.quantile(vals, q_hi))))
    return tuple(records)


def reshuffle_null_experiment(
    sessions: Sequence[SessionEvents],
    config: ScanConfig = ScanConfig(),
) -> ReshuffleComparison:
    """Scan the sessions and their within-day Poissonization identically.

    The reshuffled arm destroys intraday clustering while preserving
    every daily count, so any branching ratio left standing there is an
    artifact of rate, not self-excitation.
    """
    shuffled: list[SessionEvents] = []
    for si, se in enumerate(sessions):
        seed = np.random.SeedSequence(config.master_seed,
                                      spawn_key=(si, _RESHUFFLE_TAG))
        ev = poissonize_within_day(se.raw, seed)
        shuffled.append(SessionEvents(
            se.session, IntegerSecondSeries(ev.timestamps, se.raw.horizon)))

    original = scan(sessions, config)
    reshuffled = scan(shuffled, config)
    orig_n = [w.n_median for w in original.windows if w.status == "ok"]
    resh_n = [w.n_median for w in reshuffled.windows if w.status == "ok"]
    counts = all(len(a.raw) == len(b.raw) for a, b in zip(sessions, shuffled))
    return ReshuffleComparison(
        original=original,
        reshuffled=reshuffled,
        original_median_n=float(np.median(orig_n)) if orig_n else np.nan,
        reshuffled_q90_n=float(np.quantile(resh_n, 0.9)) if resh_n else np.nan,
        counts_preserved=counts,
    )


def criticality_detector(
    report: ScanReport,
    band: tuple[float, float] = (0.05, 0.95),
    min_windows: int = 5,
) -> ScanReport:
    """Flag windows whose n-hat or event rate leaves yesterday's band.

    For each window the reference set is the previous session's ok
    windows of the same length; a window is flagged when its bootstrap
    median n-hat (resp. its event count) strictly exceeds the
    band-upper quantile of the reference values.  Sessions without a
    sufficiently populated previous day keep flags undefined (None).
    """
    upper = band[1]
    dates = sorted({w.date for w in report.windows})
    prev = {d: dates[i - 1] if i > 0 else None for i, d in enumerate(dates)}
    by_key: dict[tuple[str, float], list[WindowEstimate]] = {}
    for w in report.windows:
        by_key.setdefault((w.date, w.window_length), []).append(w)

    out = []
    for w in report.windows:
        ref_date = prev[w.date]
        ref = [r for r in by_key.get((ref_date, w.window_length), ())
               if r.status == "ok"] if ref_date else []
        if len(ref) < min_windows or w.status != "ok":
            out.append(w)  # flags stay None: undefined
            continue
        n_band = float(np.quantile([r.n_median for r in ref], upper))
        rate_band = float(np.quantile([r.n_events for r in ref], upper))
        out.append(replace(w,
                           flag_n=bool(w.n_median > n_band),
                           flag_rate=bool(w.n_events > rate_band)))
    return replace(report, windows=tuple(out))


# ---------------------------------------------------------------------------
# CSV serialization (column orders are part of the public contract)
# ---------------------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_scan_csv(path, report: ScanReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SCAN_COLUMNS) + "\n")
        for w in report.windows:
            s = w.summary
            row = [
                w.date, _cell(w.window_start), _cell(w.window_length),
                str(w.n_events),
                _cell(s["mu"].median if s else None),
                _cell(s["mu"].std if s else None),
                _cell(s["n"].median if s else None),
                _cell(s["n"].mean if s else None),
                _cell(s["n"].std if s else None),
                _cell(s["beta"].median if s else None),
                _cell(w.log_likelihood),
                _cell(w.verdict.p_value if w.verdict else None),
                w.status,
                _cell(w.flag_n),
                _cell(w.flag_rate),
            ]
            fh.write(",".join(row) + "\n")


def read_scan_csv(path) -> list[dict]:
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != SCAN_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(SCAN_COLUMNS)}")
        return list(reader)


def write_aggregate_csv(path, records: Sequence[AggregateRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join([
                r.center_date, _cell(r.window_length), r.param,
                _cell(r.mean), _cell(r.median), _cell(r.q10), _cell(r.q90),
            ]) + "\n")
