"""Command-line drivers: simulate, ingest, fit, gof, scan, reshuffle,
detect, report.

Every command resolves its configuration as defaults < config file <
flags, writes its outputs plus exactly one manifest.json into the
output directory, and exits 0 on success, 2 on usage errors, 3 when a
simulation hits its event cap, 4 on insufficient or empty input data,
and 5 on anything unexpected.  The manifest records the resolved
configuration, the master seed, SHA-256 digests of inputs and outputs,
and the tool version; reruns with equal inputs and flags reproduce
every data file byte for byte (the manifest's created_at field is the
one intentional exception).

The config file is plain key=value text ('#' starts a comment); keys
are the long flag names with hyphens as underscores.  HAWKSCAN_CONFIG
names a default config file applied when --config is not given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

import hawkscan
from hawkscan.core import EventSeries, HawkesParams
from hawkscan.data import (
    IngestError,
    IntegerSecondSeries,
    ingest_quotes,
    load_session_dir,
    parse_rth,
    read_event_csv,
    read_quote_csv,
    write_event_csv,
    write_session_dir,
)
from hawkscan.estimate import (
    FitConfig,
    InsufficientDataError,
    NonConvergenceError,
    fit_bootstrap,
    fit_mle,
)
from hawkscan.gof import ks_uniform_test, residual_transform, window_rejection
from hawkscan.pipeline import (
    ScanConfig,
    aggregate,
    criticality_detector,
    read_scan_csv,
    reshuffle_null_experiment,
    scan,
    write_aggregate_csv,
    write_scan_csv,
)
from hawkscan.simulate import ExplosionError, simulate_branching, simulate_thinning

__all__ = ["RunManifest", "main"]

CONFIG_ENV_VAR = "HAWKSCAN_CONFIG"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EXPLOSION = 3
EXIT_NO_DATA = 4
EXIT_INTERNAL = 5


class UsageError(ValueError):
    """Flag combinations argparse cannot catch on its own."""


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    inputs: dict[str, str]
    outputs: dict[str, str]
    version: str
    created_at: str

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": self.version,
            "created_at": self.created_at,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digest_tree(path) -> dict[str, str]:
    p = Path(path)
    if p.is_file():
        return {p.name: _sha256(p)}
    return {str(f.relative_to(p)): _sha256(f)
            for f in sorted(p.rglob("*")) if f.is_file()}


def write_manifest(outdir, command: str, config: dict, seed: Optional[int],
                   inputs: Sequence, outputs: Sequence) -> Path:
    digests_in: dict[str, str] = {}
    for item in inputs:
        digests_in.update({f"{item}:{k}" if Path(item).is_dir() else str(item): v
                           for k, v in _digest_tree(item).items()})
    digests_out = {str(Path(o).relative_to(outdir)): _sha256(o) for o in outputs}
    manifest = RunManifest(
        command=command, config=config, seed=seed,
        inputs=digests_in, outputs=digests_out,
        version=hawkscan.__version__,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    path = Path(outdir) / "manifest.json"
    path.write_text(manifest.to_json())
    return path


# ---------------------------------------------------------------------------
# config resolution: defaults < config file < flags
# ---------------------------------------------------------------------------

def load_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ValueError(f"{path}:{i}: expected key=value, got {line!r}")
        key, value = text.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _floats_csv(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(","))


def _pair(text: str) -> tuple[float, float]:
    parts = _floats_csv(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return parts[0], parts[1]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def resolve(args: argparse.Namespace, spec: dict[str, tuple[Callable, object]]) -> dict:
    """Overlay defaults, then config-file values, then explicit flags."""
    cfg_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    file_cfg = load_config_file(cfg_path) if cfg_path else {}
    out = {}
    for key, (conv, default) in spec.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            out[key] = conv(file_cfg[key])
        else:
            out[key] = default
    return out


def _scan_spec() -> dict[str, tuple[Callable, object]]:
    base = ScanConfig()
    return {
        "lengths": (_floats_csv, base.window_lengths),
        "step": (float, base.step),
        "min_events": (int, base.min_events),
        "realizations": (int, base.n_realizations),
        "alpha": (float, base.alpha),
        "seed": (int, base.master_seed),
        "jobs": (int, None),
        "include_rejected": (_bool, False),
        "period_days": (int, base.aggregate_period_days),
        "quantiles": (_pair, base.sub_quantiles),
        "n_max": (float, 1.0),
        "beta_min": (float, base.fit.beta_min),
        "beta_max": (float, None),
        "method": (str, base.fit.method),
    }


def _scan_config(cfg: dict, step: Optional[float] = None) -> ScanConfig:
    fit = FitConfig(method=cfg["method"], n_max=cfg["n_max"],
                    beta_min=cfg["beta_min"], beta_max=cfg["beta_max"],
                    min_events=cfg["min_events"])
    return ScanConfig(
        window_lengths=tuple(cfg["lengths"]),
        step=step if step is not None else cfg["step"],
        min_events=cfg["min_events"],
        n_realizations=cfg["realizations"],
        fit=fit,
        master_seed=cfg["seed"],
        alpha=cfg["alpha"],
        include_rejected_in_aggregate=cfg["include_rejected"],
        aggregate_period_days=cfg["period_days"],
        sub_quantiles=cfg["quantiles"],
        jobs=cfg["jobs"],
    )


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_sessions(path):
    sessions = load_session_dir(path)
    if not sessions:
        raise InsufficientDataError(f"no sessions found under {path}")
    return sessions


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = {
        "mu": (float, 1.0), "n": (float, 0.5), "beta": (float, 1.0),
        "horizon": (float, 600.0), "seed": (int, 0),
        "sampler": (str, "thinning"), "max_events": (int, 1_000_000),
    }
    cfg = resolve(args, spec)
    out = _outdir(args)
    params = HawkesParams(cfg["mu"], cfg["n"], cfg["beta"])
    sampler = simulate_branching if cfg["sampler"] == "branching" else simulate_thinning
    events = sampler(params, cfg["horizon"],
                     np.random.SeedSequence(cfg["seed"]),
                     max_events=cfg["max_events"])
    target = out / "events.csv"
    write_event_csv(target, events.timestamps, metadata={
        "mu": cfg["mu"], "n": cfg["n"], "beta": cfg["beta"],
        "horizon": cfg["horizon"], "seed": cfg["seed"],
        "sampler": cfg["sampler"],
    })
    write_manifest(out, "simulate", cfg, cfg["seed"], [], [target])
    print(f"simulate: {len(events)} events -> {target}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    spec = {
        "tz": (str, "America/New_York"),
        "rth": (str, "09:30-16:15"),
        "volume_quantile": (float, 0.05),
        "min_events": (int, 0),
    }
    cfg = resolve(args, spec)
    out = _outdir(args)
    quotes = read_quote_csv(args.input)
    if not quotes:
        raise InsufficientDataError(f"no quote records in {args.input}")
    sessions, extractions = ingest_quotes(
        quotes, tz=cfg["tz"], rth=parse_rth(cfg["rth"]),
        min_events=cfg["min_events"], volume_quantile=cfg["volume_quantile"])
    if not sessions:
        raise InsufficientDataError("no sessions fell inside trading hours")
    write_session_dir(out, sessions)
    outputs = [p for p in sorted(out.rglob("*")) if p.is_file()]
    write_manifest(out, "ingest", cfg, None, [args.input], outputs)
    kept = sum(se.session.kept for se in sessions)
    skipped = sum(e.skipped_missing + e.skipped_crossed for e in extractions)
    print(f"ingest: {len(sessions)} sessions ({kept} kept), "
          f"{skipped} quotes skipped -> {out}")
    return EXIT_OK


def _raw_from_csv(path, horizon_flag: Optional[float]):
    timestamps, metadata = read_event_csv(path)
    horizon = horizon_flag
    if horizon is None and "horizon" in metadata:
        horizon = float(metadata["horizon"])
    if horizon is None:
        horizon = float(timestamps[-1]) if timestamps.size else 0.0
    return timestamps, horizon


def _events_from_csv(path, horizon_flag: Optional[float]) -> EventSeries:
    timestamps, horizon = _raw_from_csv(path, horizon_flag)
    return EventSeries(timestamps, horizon)


def cmd_fit(args) -> int:
    spec = {
        "bootstrap": (int, 0), "seed": (int, 0),
        "n_max": (float, 1.0), "beta_min": (float, None),
        "beta_max": (float, None), "method": (str, "nm"),
        "min_events": (int, 100), "horizon": (float, None),
    }
    cfg = resolve(args, spec)
    out = _outdir(args)
    fit_cfg = FitConfig(n_max=cfg["n_max"], beta_min=cfg["beta_min"],
                        beta_max=cfg["beta_max"], method=cfg["method"],
                        min_events=cfg["min_events"])

    if cfg["bootstrap"] > 0:
        # tied timestamps are expected here: integer-second data goes
        # through the jitter bootstrap, not a direct fit
        timestamps, horizon = _raw_from_csv(args.input, cfg["horizon"])
        raw = IntegerSecondSeries(timestamps, horizon)
        bs = fit_bootstrap(raw, fit_cfg, cfg["bootstrap"],
                           np.random.SeedSequence(cfg["seed"]))
        verdict = window_rejection(bs)
        payload = {
            "mode": "bootstrap",
            "n_realizations": bs.n_realizations,
            "n_converged": bs.n_converged,
            "usable": bs.usable,
            "summary": {
                name: {"mean": s.mean, "std": s.std, "median": s.median,
                       "q05": s.q05, "q95": s.q95}
                for name, s in bs.summary.items()
            },
            "ks_pmax": verdict.p_value,
            "window_rejected": verdict.window_rejected,
        }
        line = (f"fit: bootstrap n={bs.summary['n'].median:.4f} "
                f"(std {bs.summary['n'].std:.4f}) over {bs.n_realizations} realizations")
    else:
        events = _events_from_csv(args.input, cfg["horizon"])
        result = fit_mle(events, fit_cfg)
        res = residual_transform(result.params, events)
        d, p = ks_uniform_test(res.u)
        payload = {
            "mode": "single",
            "mu": result.params.mu, "n": result.params.n,
            "beta": result.params.beta,
            "ll": result.log_likelihood,
            "converged": result.converged,
            "n_events": result.n_events,
            "starts_tried": result.starts_tried,
            "boundary_flag": result.boundary_flag,
            "ks_stat": d, "ks_p": p,
        }
        line = (f"fit: mu={result.params.mu:.4f} n={result.params.n:.4f} "
                f"beta={result.params.beta:.4f} ks_p={p:.3f}")
    target = out / "fit.json"
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "fit", {k: _jsonable(v) for k, v in cfg.items()},
                   cfg["seed"], [args.input], [target])
    print(line)
    return EXIT_OK


def cmd_gof(args) -> int:
    spec = {
        "mu": (float, None), "n": (float, None), "beta": (float, None),
        "horizon": (float, None), "alpha": (float, 0.05),
    }
    cfg = resolve(args, spec)
    out = _outdir(args)
    if args.fit_json:
        fitted = json.loads(Path(args.fit_json).read_text())
        for key in ("mu", "n", "beta"):
            if cfg[key] is None:
                cfg[key] = fitted[key]
    missing = [k for k in ("mu", "n", "beta") if cfg[k] is None]
    if missing:
        raise UsageError(f"missing parameters {missing}: pass flags or --fit-json")
    events = _events_from_csv(args.input, cfg["horizon"])
    res = residual_transform(HawkesParams(cfg["mu"], cfg["n"], cfg["beta"]), events)
    d, p = ks_uniform_test(res.u)
    res_path = out / "residuals.csv"
    with open(res_path, "w") as fh:
        fh.write("xi,delta,u\n")
        for xi, delta, u in zip(res.xi, res.deltas, res.u):
            fh.write(f"{xi!r},{delta!r},{u!r}\n")
    verdict_path = out / "gof.json"
    verdict_path.write_text(json.dumps({
        "ks_stat": d, "p_value": p,
        "rejected": bool(p < cfg["alpha"]),
        "alpha": cfg["alpha"],
        "n_events": int(res.u.size),
    }, indent=2, sort_keys=True) + "\n")
    inputs = [args.input] + ([args.fit_json] if args.fit_json else [])
    write_manifest(out, "gof", cfg, None, inputs, [res_path, verdict_path])
    print(f"gof: ks={d:.4f} p={p:.4f}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = resolve(args, _scan_spec())
    out = _outdir(args)
    sessions = _load_sessions(args.input)
    config = _scan_config(cfg)
    report = scan(sessions, config)
    records = aggregate(report, config)
    scan_path = out / "scan.csv"
    agg_path = out / "aggregate.csv"
    write_scan_csv(scan_path, report)
    write_aggregate_csv(agg_path, records)
    write_manifest(out, "scan", {k: _jsonable(v) for k, v in cfg.items()},
                   cfg["seed"], [args.input], [scan_path, agg_path])
    ok = len(report.by_status("ok"))
    print(f"scan: {len(report.windows)} windows ({ok} ok) over "
          f"{len(sessions)} sessions -> {scan_path}")
    return EXIT_OK


def cmd_reshuffle(args) -> int:
    cfg = resolve(args, _scan_spec())
    out = _outdir(args)
    sessions = _load_sessions(args.input)
    config = _scan_config(cfg)
    cmp = reshuffle_null_experiment(sessions, config)
    orig_path = out / "scan_original.csv"
    resh_path = out / "scan_reshuffled.csv"
    cmp_path = out / "comparison.json"
    write_scan_csv(orig_path, cmp.original)
    write_scan_csv(resh_path, cmp.reshuffled)
    cmp_path.write_text(json.dumps({
        "original_median_n": cmp.original_median_n,
        "reshuffled_q90_n": cmp.reshuffled_q90_n,
        "counts_preserved": cmp.counts_preserved,
    }, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "reshuffle", {k: _jsonable(v) for k, v in cfg.items()},
                   cfg["seed"], [args.input], [orig_path, resh_path, cmp_path])
    print(f"reshuffle: original median n={cmp.original_median_n:.3f}, "
          f"reshuffled q90 n={cmp.reshuffled_q90_n:.3f}")
    return EXIT_OK


def cmd_detect(args) -> int:
    spec = _scan_spec()
    spec["lengths"] = (_floats_csv, (600.0,))
    spec["band"] = (_pair, (0.05, 0.95))
    spec["min_windows"] = (int, 5)
    spec["step"] = (float, None)  # default: non-overlapping windows
    cfg = resolve(args, spec)
    out = _outdir(args)
    sessions = _load_sessions(args.input)
    step = cfg["step"] if cfg["step"] is not None else min(cfg["lengths"])
    config = _scan_config(cfg, step=step)
    report = criticality_detector(scan(sessions, config), band=cfg["band"],
                                  min_windows=cfg["min_windows"])
    detect_path = out / "detect.csv"
    write_scan_csv(detect_path, report)
    cfg["step"] = step
    write_manifest(out, "detect", {k: _jsonable(v) for k, v in cfg.items()},
                   cfg["seed"], [args.input], [detect_path])
    n_flags = sum(bool(w.flag_n) for w in report.windows)
    r_flags = sum(bool(w.flag_rate) for w in report.windows)
    print(f"detect: {n_flags} n-flags, {r_flags} rate-flags -> {detect_path}")
    return EXIT_OK


def _report_rows(path) -> list[dict]:
    rows = read_scan_csv(path)
    if not rows:
        raise InsufficientDataError(f"no scan rows in {path}")
    return rows


def cmd_report(args) -> int:
    from hawkscan.estimate import ParamSummary
    from hawkscan.pipeline import ScanReport, WindowEstimate

    spec = {"period_days": (int, 61), "quantiles": (_pair, (0.1, 0.9))}
    cfg = resolve(args, spec)
    out = _outdir(args)
    rows = _report_rows(args.input)

    windows = []
    for r in rows:
        summary = None
        if r["status"] in ("ok", "rejected") and r["n_med"]:
            summary = {}
            for param, col in (("mu", "mu_med"), ("n", "n_med"), ("beta", "beta_med")):
                med = float(r[col])
                summary[param] = ParamSummary(mean=med, std=0.0, median=med,
                                              q05=med, q95=med)
        windows.append(WindowEstimate(
            date=r["date"], window_start=float(r["window_start_s"]),
            window_length=float(r["len_s"]), n_events=int(r["n_events"]),
            status=r["status"], summary=summary))
    report = ScanReport(windows=tuple(windows))

    scan_cfg = ScanConfig(aggregate_period_days=cfg["period_days"],
                          sub_quantiles=cfg["quantiles"])
    bands_path = out / "bands.csv"
    write_aggregate_csv(bands_path, aggregate(report, scan_cfg))

    intraday_path = out / "intraday.csv"
    by_start: dict[tuple[float, float], list[float]] = {}
    for w in report.windows:
        if w.status == "ok" and w.summary:
            by_start.setdefault((w.window_start, w.window_length), []).append(
                w.summary["n"].median)
    with open(intraday_path, "w") as fh:
        fh.write("window_start_s,len_s,n_windows,n_mean,n_median,q10,q90\n")
        for (start, length), vals in sorted(by_start.items()):
            v = np.asarray(vals)
            fh.write(",".join([
                repr(start), repr(length), str(v.size),
                repr(float(v.mean())), repr(float(np.median(v))),
                repr(float(np.quantile(v, cfg["quantiles"][0]))),
                repr(float(np.quantile(v, cfg["quantiles"][1]))),
            ]) + "\n")

    cdf_path = out / "pvalue_cdf.csv"
    pvals = sorted(float(r["ks_pmax"]) for r in rows if r["ks_pmax"])
    with open(cdf_path, "w") as fh:
        fh.write("p,cum_frac\n")
        total = len(pvals)
        for i, p in enumerate(pvals):
            fh.write(f"{p!r},{(i + 1) / total!r}\n")

    timeline_path = out / "detector_timeline.csv"
    with open(timeline_path, "w") as fh:
        fh.write("date,window_start_s,len_s,n_events,n_med,flag_n,flag_rate\n")
        for r in rows:
            fh.write(",".join([r["date"], r["window_start_s"], r["len_s"],
                               r["n_events"], r["n_med"], r["flag_n"],
                               r["flag_rate"]]) + "\n")

    outputs = [bands_path, intraday_path, cdf_path, timeline_path]
    write_manifest(out, "report", {k: _jsonable(v) for k, v in cfg.items()},
                   None, [args.input], outputs)
    print(f"report: 4 files -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _add_common(sub, input_help: Optional[str] = None):
    if input_help:
        sub.add_argument("-i", "--input", required=True, help=input_help)
    sub.add_argument("-o", "--outdir", required=True, help="output directory")
    sub.add_argument("--config", default=None,
                     help=f"key=value config file (default: ${CONFIG_ENV_VAR})")


def _add_scan_flags(sub):
    sub.add_argument("--lengths", type=_floats_csv, default=None,
                     help="window lengths in seconds, comma separated")
    sub.add_argument("--step", type=float, default=None, help="sweep step in seconds")
    sub.add_argument("--min-events", type=int, default=None)
    sub.add_argument("--realizations", type=int, default=None,
                     help="bootstrap realizations per window")
    sub.add_argument("--alpha", type=float, default=None,
                     help="per-realization KS rejection level")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--jobs", type=int, default=None,
                     help="worker processes (default: one per core)")
    sub.add_argument("--include-rejected", action="store_const", const=True,
                     default=None, help="let rejected windows into aggregation")
    sub.add_argument("--period-days", type=int, default=None,
                     help="centered aggregation period in days")
    sub.add_argument("--quantiles", type=_pair, default=None,
                     help="aggregation band quantiles, e.g. 0.1,0.9")
    sub.add_argument("--n-max", type=float, default=None)
    sub.add_argument("--beta-min", type=float, default=None)
    sub.add_argument("--beta-max", type=float, default=None)
    sub.add_argument("--method", choices=("nm", "lbfgs"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkscan",
        description="Hawkes calibration and rolling branching-ratio scans")
    parser.add_argument("--version", action="version",
                        version=f"hawkscan {hawkscan.__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="sample a Hawkes event stream")
    for flag in ("--mu", "--n", "--beta", "--horizon"):
        p.add_argument(flag, type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sampler", choices=("thinning", "branching"), default=None)
    p.add_argument("--max-events", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("ingest", help="quote CSV to filtered session directory")
    p.add_argument("--tz", default=None)
    p.add_argument("--rth", default=None, help="trading hours, e.g. 09:30-16:15")
    p.add_argument("--volume-quantile", type=float, default=None)
    p.add_argument("--min-events", type=int, default=None)
    _add_common(p, input_help="quote CSV")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("fit", help="fit one event stream")
    p.add_argument("--bootstrap", type=int, default=None,
                   help="randomization bootstrap realizations (0 = single fit)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-max", type=float, default=None)
    p.add_argument("--beta-min", type=float, default=None)
    p.add_argument("--beta-max", type=float, default=None)
    p.add_argument("--method", choices=("nm", "lbfgs"), default=None)
    p.add_argument("--min-events", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    _add_common(p, input_help="event CSV")
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("gof", help="residual analysis at given parameters")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--n", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--fit-json", default=None,
                   help="take parameters from a fit command's fit.json")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    _add_common(p, input_help="event CSV")
    p.set_defaults(func=cmd_gof)

    p = subs.add_parser("scan", help="rolling-window scan over a session directory")
    _add_scan_flags(p)
    _add_common(p, input_help="session directory")
    p.set_defaults(func=cmd_scan)

    p = subs.add_parser("reshuffle", help="scan vs within-day Poissonization")
    _add_scan_flags(p)
    _add_common(p, input_help="session directory")
    p.set_defaults(func=cmd_reshuffle)

    p = subs.add_parser("detect", help="previous-day-band criticality flags")
    _add_scan_flags(p)
    p.add_argument("--band", type=_pair, default=None,
                   help="reference band quantiles, e.g. 0.05,0.95")
    p.add_argument("--min-windows", type=int, default=None,
                   help="minimum ok reference windows per day")
    _add_common(p, input_help="session directory")
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("report", help="tidy plot-data CSVs from a scan CSV")
    p.add_argument("--period-days", type=int, default=None)
    p.add_argument("--quantiles", type=_pair, default=None)
    _add_common(p, input_help="scan CSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExplosionError as exc:
        print(f"hawkscan: simulation exploded: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except UsageError as exc:
        print(f"hawkscan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InsufficientDataError, IngestError, FileNotFoundError) as exc:
        print(f"hawkscan: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except (NonConvergenceError, ValueError, OSError) as exc:
        print(f"hawkscan: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
