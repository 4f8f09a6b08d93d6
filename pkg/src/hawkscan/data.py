"""Quote ingestion, mid-price event extraction and timestamp surgery.

The input feed is a plain CSV with header ``ts,type,bid,ask,price,volume,
contract``: ``type`` is Q for quote updates and T for trades, ``ts`` is
integer epoch seconds.  Mid-price change events derived from it carry
integer-second timestamps (possibly tied), which is why the calibration
path randomizes the sub-second part before fitting and why the
Poissonization shuffle can destroy intraday clustering while preserving
every daily count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Iterable, Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from hawkscan.core import EventSeries

__all__ = [
    "IngestError",
    "QuoteRecord",
    "MidPriceEvent",
    "ExtractionResult",
    "IntegerSecondSeries",
    "TradingSession",
    "SessionEvents",
    "extract_midprice_events",
    "filter_sessions",
    "randomize_subsecond",
    "poissonize_within_day",
    "ingest_quotes",
    "parse_rth",
    "read_quote_csv",
    "write_quote_csv",
    "read_event_csv",
    "write_event_csv",
    "read_sessions_csv",
    "write_sessions_csv",
    "load_session_dir",
    "write_session_dir",
]

DEFAULT_RTH = (9 * 3600 + 30 * 60, 16 * 3600 + 15 * 60)  # 09:30-16:15


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class QuoteRecord:
    ts: int
    type: str  # Q or T
    bid: Optional[float] = None
    ask: Optional[float] = None
    price: Optional[float] = None
    volume: Optional[float] = None
    contract: Optional[str] = None


@dataclass(frozen=True)
class MidPriceEvent:
    timestamp: int
    mid: float


@dataclass(frozen=True)
class ExtractionResult:
    events: tuple[MidPriceEvent, ...]
    skipped_missing: int
    skipped_crossed: int


@dataclass(frozen=True)
class IntegerSecondSeries:
    """Non-decreasing timestamps (ties allowed) inside a session [0, horizon].

    Timestamps are usually whole seconds; a series that already carries
    sub-second resolution is passed through randomize_subsecond untouched.
    """

    timestamps: np.ndarray
    horizon: float

    def __post_init__(self):
        ts = np.ascontiguousarray(np.asarray(self.timestamps, dtype=np.float64))
        if ts.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        if ts.size and np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be finite and > 0, got {self.horizon}")
        if ts.size and (ts[0] < 0 or ts[-1] >= self.horizon + 1):
            raise ValueError("timestamps must lie inside the session")
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def is_integer_resolution(self) -> bool:
        return bool(np.all(self.timestamps == np.floor(self.timestamps)))


@dataclass(frozen=True)
class TradingSession:
    date: str  # ISO YYYY-MM-DD
    open_s: int  # seconds from local midnight
    close_s: int
    volume: float
    n_events: int
    active: bool = True
    kept: bool = True

    def __post_init__(self):
        if self.close_s <= self.open_s:
            raise ValueError(f"close ({self.close_s}) must be after open ({self.open_s})")

    @property
    def length_s(self) -> int:
        return self.close_s - self.open_s


@dataclass(frozen=True)
class SessionEvents:
    session: TradingSession
    raw: IntegerSecondSeries


def extract_midprice_events(quotes: Iterable[QuoteRecord]) -> ExtractionResult:
    """One event per change of (bid + ask) / 2; magnitude and sign discarded.

    The first valid quote emits the initial mid as an event.  Records
    with a missing side are skipped, crossed books (ask < bid) are
    skipped and counted separately.
    """
    events: list[MidPriceEvent] = []
    skipped_missing = 0
    skipped_crossed = 0
    last_mid = None
    last_ts = None
    for i, q in enumerate(quotes):
        if last_ts is not None and q.ts < last_ts:
            raise IngestError(f"timestamps not time-ordered at record {i} (ts={q.ts})")
        last_ts = q.ts
        if q.type != "Q":
            continue
        if q.bid is None or q.ask is None:
            skipped_missing += 1
            continue
        if q.ask < q.bid:
            skipped_crossed += 1
            continue
        mid = (q.bid + q.ask) / 2.0
        if last_mid is None or mid != last_mid:
            events.append(MidPriceEvent(q.ts, mid))
            last_mid = mid
    return ExtractionResult(tuple(events), skipped_missing, skipped_crossed)


def filter_sessions(
    sessions: Sequence[TradingSession],
    quantile: float = 0.05,
    min_events: int = 0,
    require_active: bool = True,
) -> list[TradingSession]:
    """Flag low-volume and inactive sessions; nothing is dropped.

    The volume threshold is the per-calendar-year empirical quantile
    (linear interpolation) over all sessions of that year, and only days
    strictly below it lose their kept flag, so applying the filter twice
    is a no-op.
    """
    by_year: dict[str, list[float]] = {}
    for s in sessions:
        by_year.setdefault(s.date[:4], []).append(s.volume)
    thresholds = {y: float(np.quantile(v, quantile)) for y, v in by_year.items()}
    out = []
    for s in sessions:
        kept = s.volume >= thresholds[s.date[:4]]
        if min_events and s.n_events < min_events:
            kept = False
        if require_active and not s.active:
            kept = False
        out.append(replace(s, kept=kept))
    return out


def _strictly_increasing_or_retry(draw, rng, max_attempts: int = 100) -> np.ndarray:
    # float collisions after sorting have probability ~0; redraw if one occurs
    for _ in range(max_attempts):
        ts = np.sort(draw(rng))
        if ts.size < 2 or np.all(np.diff(ts) > 0):
            return ts
    raise RuntimeError("could not draw strictly increasing timestamps")


def randomize_subsecond(raw: IntegerSecondSeries, seed) -> EventSeries:
    """Spread tied integer-second events uniformly within their second.

    Each event at whole second s moves to s + U, U ~ uniform[0, 1),
    preserving per-second counts exactly.  A series that already has
    sub-second resolution is returned as is.
    """
    if not raw.is_integer_resolution:
        return EventSeries(raw.timestamps.copy(), raw.horizon)
    rng = np.random.default_rng(seed)
    base = raw.timestamps
    ts = _strictly_increasing_or_retry(lambda r: base + r.random(base.size), rng)
    return EventSeries(ts, max(raw.horizon, float(ts[-1]) if ts.size else raw.horizon))


def poissonize_within_day(raw: IntegerSecondSeries, seed) -> EventSeries:
    """Replace the day's event times by sorted uniforms over the session.

    This is a homogeneous Poisson process conditioned on the daily
    count: clustering is destroyed, every daily total is preserved.
    """
    rng = np.random.default_rng(seed)
    n = len(raw)
    ts = _strictly_increasing_or_retry(lambda r: r.uniform(0.0, raw.horizon, size=n), rng)
    return EventSeries(ts, raw.horizon)


def parse_rth(text: str) -> tuple[int, int]:
    """'09:30-16:15' -> (34200, 58500) seconds from midnight."""
    try:
        lo, hi = text.split("-")
        oh, om = (int(x) for x in lo.split(":"))
        ch, cm = (int(x) for x in hi.split(":"))
    except ValueError as exc:
        raise ValueError(f"bad RTH spec {text!r}, expected HH:MM-HH:MM") from exc
    open_s, close_s = oh * 3600 + om * 60, ch * 3600 + cm * 60
    if close_s <= open_s:
        raise ValueError(f"RTH close must be after open in {text!r}")
    return open_s, close_s


def ingest_quotes(
    records: Sequence[QuoteRecord],
    tz: str = "America/New_York",
    rth: tuple[int, int] = DEFAULT_RTH,
    min_events: int = 0,
    volume_quantile: float = 0.05,
) -> tuple[list[SessionEvents], list[ExtractionResult]]:
    """Group a quote feed into RTH sessions of mid-price change events.

    Per day, the most active contract (most trade records; ties break
    lexicographically) is selected before extraction, approximating
    front-month rollover.  Event timestamps are rebased to seconds from
    the session open; daily volume is the traded volume of the selected
    contract inside RTH.
    """
    zone = ZoneInfo(tz)
    open_s, close_s = rth
    by_date: dict[str, list[tuple[int, QuoteRecord]]] = {}
    last_ts = None
    for i, q in enumerate(records):
        if last_ts is not None and q.ts < last_ts:
            raise IngestError(f"timestamps not time-ordered at record {i} (ts={q.ts})")
        last_ts = q.ts
        dt = datetime.fromtimestamp(q.ts, tz=zone)
        tod = dt.hour * 3600 + dt.minute * 60 + dt.second
        if not open_s <= tod < close_s:
            continue
        by_date.setdefault(dt.date().isoformat(), []).append((tod, q))

    out: list[SessionEvents] = []
    extractions: list[ExtractionResult] = []
    for date in sorted(by_date):
        rows = by_date[date]
        trade_counts: dict[str, int] = {}
        for _, q in rows:
            if q.type == "T" and q.contract:
                trade_counts[q.contract] = trade_counts.get(q.contract, 0) + 1
        if trade_counts:
            best = max(trade_counts.items(), key=lambda kv: (kv[1], kv[0]))[0]
            rows = [(tod, q) for tod, q in rows if q.contract in (None, best)]
        extraction = extract_midprice_events([q for _, q in rows])
        extractions.append(extraction)
        # events carry epoch seconds; rebase to seconds from the session open
        tod_by_ts = {q.ts: tod for tod, q in rows}
        rel = np.array([tod_by_ts[e.timestamp] - open_s for e in extraction.events],
                       dtype=np.float64)
        volume = sum(q.volume or 0.0 for _, q in rows if q.type == "T")
        session = TradingSession(
            date=date,
            open_s=open_s,
            close_s=close_s,
            volume=float(volume),
            n_events=len(extraction.events),
            active=len(extraction.events) > 0,
        )
        horizon = float(close_s - open_s)
        out.append(SessionEvents(session, IntegerSecondSeries(rel, horizon)))

    filtered = filter_sessions([se.session for se in out],
                               quantile=volume_quantile, min_events=min_events)
    out = [SessionEvents(sess, se.raw) for sess, se in zip(filtered, out)]
    return out, extractions


# ---------------------------------------------------------------------------
# CSV formats (column orders are part of the public contract)
# ---------------------------------------------------------------------------

QUOTE_COLUMNS = ["ts", "type", "bid", "ask", "price", "volume", "contract"]
SESSION_COLUMNS = ["date", "volume", "n_events", "kept"]


def _opt_float(text: str) -> Optional[float]:
    return float(text) if text not in ("", None) else None


def read_quote_csv(path) -> list[QuoteRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != QUOTE_COLUMNS:
            raise IngestError(f"{path}: expected header {','.join(QUOTE_COLUMNS)}")
        last_ts = None
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = int(row["ts"])
            except (TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: bad timestamp {row['ts']!r}") from exc
            if last_ts is not None and ts < last_ts:
                raise IngestError(f"{path}:{lineno}: timestamps not time-ordered")
            last_ts = ts
            records.append(QuoteRecord(
                ts=ts,
                type=row["type"],
                bid=_opt_float(row["bid"]),
                ask=_opt_float(row["ask"]),
                price=_opt_float(row["price"]),
                volume=_opt_float(row["volume"]),
                contract=row["contract"] or None,
            ))
    return records


def write_quote_csv(path, records: Sequence[QuoteRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUOTE_COLUMNS)
        for q in records:
            writer.writerow([
                q.ts, q.type,
                "" if q.bid is None else repr(float(q.bid)),
                "" if q.ask is None else repr(float(q.ask)),
                "" if q.price is None else repr(float(q.price)),
                "" if q.volume is None else repr(float(q.volume)),
                q.contract or "",
            ])


def write_event_csv(path, timestamps, metadata: dict, genealogy=None) -> None:
    """Event CSV: '#'-prefixed key=value metadata, then one row per event.

    Floats are written with repr so a read-back is bit-exact.
    """
    with open(path, "w", newline="") as fh:
        for key in sorted(metadata):
            fh.write(f"# {key}={metadata[key]}\n")
        if genealogy is None:
            fh.write("time_s\n")
            for t in timestamps:
                fh.write(f"{float(t)!r}\n")
        else:
            fh.write("time_s,generation,parent_index\n")
            for c in genealogy:
                pid = "" if c.parent_index is None else c.parent_index
                fh.write(f"{float(c.time)!r},{c.generation},{pid}\n")


def read_event_csv(path) -> tuple[np.ndarray, dict]:
    metadata = {}
    times = []
    with open(path) as fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                metadata[key] = value
                continue
            if header is None:
                header = line.split(",")
                if header[0] != "time_s":
                    raise IngestError(f"{path}:{lineno}: expected time_s column")
                continue
            times.append(float(line.split(",", 1)[0]))
    return np.asarray(times, dtype=np.float64), metadata


def write_sessions_csv(path, sessions: Sequence[TradingSession]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SESSION_COLUMNS)
        for s in sessions:
            writer.writerow([s.date, repr(float(s.volume)), s.n_events, int(s.kept)])


def read_sessions_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SESSION_COLUMNS:
            raise IngestError(f"{path}: expected header {','.join(SESSION_COLUMNS)}")
        return [dict(date=row["date"], volume=float(row["volume"]),
                     n_events=int(row["n_events"]), kept=bool(int(row["kept"])))
                for row in reader]


def write_session_dir(outdir, session_events: Sequence[SessionEvents]) -> None:
    """sessions.csv plus one events_<date>.csv per session, times session-relative."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_sessions_csv(outdir / "sessions.csv", [se.session for se in session_events])
    for se in session_events:
        meta = {
            "date": se.session.date,
            "open_s": se.session.open_s,
            "close_s": se.session.close_s,
            "horizon": repr(float(se.raw.horizon)),
        }
        write_event_csv(outdir / f"events_{se.session.date}.csv", se.raw.timestamps, meta)


def load_session_dir(path) -> list[SessionEvents]:
    from pathlib import Path

    path = Path(path)
    rows = read_sessions_csv(path / "sessions.csv")
    out = []
    for row in rows:
        times, meta = read_event_csv(path / f"events_{row['date']}.csv")
        session = TradingSession(
            date=row["date"],
            open_s=int(meta.get("open_s", 0)),
            close_s=int(meta.get("close_s", int(float(meta["horizon"])))),
            volume=row["volume"],
            n_events=row["n_events"],
            active=row["n_events"] > 0,
            kept=row["kept"],
        )
        out.append(SessionEvents(session, IntegerSecondSeries(times, float(meta["horizon"]))))
    return out
