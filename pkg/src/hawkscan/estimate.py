"""Maximum likelihood calibration with multi-start search and bootstraps.

The likelihood is maximized on an unconstrained transform of the box
mu in (0, inf), n in (0, n_max), beta in (beta_min, beta_max):

    x0 = ln mu
    x1 = logit(n / n_max)
    x2 = logit((ln beta - ln beta_min) / (ln beta_max - ln beta_min))

The default beta box is (1/T, 1e3/mean_gap): kernels slower than the
window or faster than the timestamp resolution are not identifiable.
Simplex search over a 3x3 start grid is the robust baseline; a
gradient polish (and the all-gradient 'lbfgs' method used by the
rolling scans) runs L-BFGS-B with the analytic gradient mapped through
the same transform.

Bootstraps follow the sub-second randomization protocol: the same
integer-second window is randomized n_realizations times and each
realization refitted, warm-started from the first realization's
optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from hawkscan.core import (
    DEFAULT_INTENSITY_FLOOR,
    EventSeries,
    HawkesParams,
    _loglik,
    _loglik_grad,
)
from hawkscan.data import IntegerSecondSeries, randomize_subsecond

__all__ = [
    "InsufficientDataError",
    "NonConvergenceError",
    "FitConfig",
    "FitResult",
    "ParamSummary",
    "BootstrapResult",
    "multistart_grid",
    "fit_mle",
    "fit_bootstrap",
]


class InsufficientDataError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, diagnostics: list):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class FitConfig:
    n_max: float = 1.0
    min_events: int = 100
    beta_min: Optional[float] = None  # default 1 / horizon
    beta_max: Optional[float] = None  # default 1e3 / mean inter-event gap
    xtol: float = 1e-6
    ftol: float = 1e-8
    max_iter: int = 2000
    method: str = "nm"  # 'nm' simplex baseline | 'lbfgs' all-gradient
    refine: bool = True  # gradient polish after the simplex
    starts: str = "grid"  # 'grid' 3x3 | 'fast' single moment start
    parametrization: str = "mu_n_beta"  # | 'mu_alpha_beta'
    intensity_floor: float = DEFAULT_INTENSITY_FLOOR
    min_converged: int = 25  # bootstrap usability threshold


@dataclass(frozen=True)
class FitResult:
    params: HawkesParams
    log_likelihood: float
    converged: bool
    n_events: int
    starts_tried: int
    boundary_flag: bool
    clamp_events: int = 0
    grad_norm: float = np.nan
    method: str = "nm"


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    std: float
    median: float
    q05: float
    q95: float

    @property
    def rel_std(self) -> float:
        return self.std / abs(self.mean) if self.mean else np.nan


@dataclass(frozen=True)
class BootstrapResult:
    fits: tuple[FitResult, ...]
    series: tuple[EventSeries, ...]  # parallel to fits: what each fit saw
    summary: dict[str, ParamSummary]
    n_realizations: int
    n_converged: int
    usable: bool
    n_failed: int = 0

    @property
    def median_params(self) -> HawkesParams:
        return HawkesParams(self.summary["mu"].median,
                            self.summary["n"].median,
                            self.summary["beta"].median)


class _Transform:
    """Box <-> unconstrained coordinates, plus the chain-rule gradient."""

    def __init__(self, n_max: float, beta_min: float, beta_max: float, parametrization: str):
        if not 0 < beta_min < beta_max:
            raise ValueError(f"bad beta box ({beta_min}, {beta_max})")
        self.n_max = n_max
        self.lb = np.log(beta_min)
        self.ub = np.log(beta_max)
        self.parametrization = parametrization

    def _beta(self, x2: float) -> tuple[float, float]:
        s = expit(x2)
        beta = np.exp(self.lb + (self.ub - self.lb) * s)
        return beta, beta * (self.ub - self.lb) * s * (1.0 - s)

    def unpack(self, x: np.ndarray) -> tuple[float, float, float]:
        mu = np.exp(min(x[0], 700.0))
        beta, _ = self._beta(x[2])
        if self.parametrization == "mu_alpha_beta":
            alpha = np.exp(min(x[1], 700.0))
            return mu, alpha / beta, beta
        return mu, self.n_max * expit(x[1]), beta

    def pack(self, mu: float, n: float, beta: float) -> np.ndarray:
        eps = 1e-9
        frac = np.clip((np.log(beta) - self.lb) / (self.ub - self.lb), eps, 1 - eps)
        if self.parametrization == "mu_alpha_beta":
            x1 = np.log(max(n * beta, 1e-300))
        else:
            x1 = logit(np.clip(n / self.n_max, eps, 1 - eps))
        return np.array([np.log(mu), x1, logit(frac)])

    def chain(self, x: np.ndarray, mu: float, n: float, beta: float,
              gmu: float, gn: float, gb: float) -> np.ndarray:
        beta_, dbeta = self._beta(x[2])
        if self.parametrization == "mu_alpha_beta":
            # n = alpha/beta couples x2 to both beta and n
            g1 = gn * n
            g2 = (gb - gn * n / beta) * dbeta
        else:
            g1 = gn * n * (1.0 - n / self.n_max)
            g2 = gb * dbeta
        return np.array([gmu * mu, g1, g2])


def _resolve_boxes(events: EventSeries, config: FitConfig) -> tuple[float, float, float]:
    ts, horizon = events.timestamps, events.horizon
    n_ev = len(events)
    gap = (ts[-1] - ts[0]) / (n_ev - 1) if n_ev > 1 else horizon / max(n_ev, 1)
    gap = max(gap, 1e-12)
    beta_min = config.beta_min if config.beta_min is not None else 1.0 / horizon
    beta_max = config.beta_max if config.beta_max is not None else 1e3 / gap
    if beta_max <= beta_min:
        beta_max = beta_min * 1e3
    return gap, beta_min, beta_max


def multistart_grid(events: EventSeries, config: FitConfig = FitConfig()) -> list[HawkesParams]:
    """The start points fit_mle sweeps: n x beta grid with moment-matched mu."""
    gap, beta_min, beta_max = _resolve_boxes(events, config)
    n_ev = len(events)
    horizon = events.horizon
    rate = n_ev / horizon
    if config.starts == "fast":
        pairs = [(0.5 * min(config.n_max, 1.0), 1.0)]
    else:
        pairs = [(f * config.n_max, m) for f in (0.1, 0.5, 0.9) for m in (0.1, 1.0, 10.0)]
    starts = []
    for n0, mult in pairs:
        beta0 = float(np.clip(mult / gap, beta_min * 1.001, beta_max * 0.999))
        mu0 = max(rate * (1.0 - n0), 0.05 * rate, 1e-8)
        starts.append(HawkesParams(mu=mu0, n=n0, beta=beta0))
    return starts


def _optimize(events: EventSeries, config: FitConfig, x0_list: list[np.ndarray],
              transform: _Transform, method: str):
    ts, horizon, floor = events.timestamps, events.horizon, config.intensity_floor

    def negll(x):
        mu, n, beta = transform.unpack(x)
        ll, _ = _loglik(ts, horizon, mu, n, beta, floor)
        return -ll if np.isfinite(ll) else np.inf

    def negll_grad(x):
        mu, n, beta = transform.unpack(x)
        ll, gmu, gn, gb, _ = _loglik_grad(ts, horizon, mu, n, beta, floor)
        if not np.isfinite(ll):
            return np.inf, np.zeros(3)
        return -ll, -transform.chain(x, mu, n, beta, gmu, gn, gb)

    results = []
    for x0 in x0_list:
        if method == "nm":
            r = minimize(negll, x0, method="Nelder-Mead",
                         options=dict(xatol=config.xtol, fatol=config.ftol,
                                      maxiter=config.max_iter, maxfev=4 * config.max_iter))
        else:
            r = minimize(negll_grad, x0, jac=True, method="L-BFGS-B",
                         options=dict(maxiter=config.max_iter, ftol=1e-12, gtol=1e-7))
        results.append(r)
    return results, negll_grad


STATIONARITY_GTOL = 1e-2  # transformed-coordinate gradient norm


def _finalize(events: EventSeries, config: FitConfig, transform: _Transform,
              best_x: np.ndarray, converged: bool, starts_tried: int,
              method: str, negll_grad) -> FitResult:
    mu, n, beta = transform.unpack(best_x)
    ll, _, _, _, clamped = _loglik_grad(events.timestamps, events.horizon,
                                        mu, n, beta, config.intensity_floor)
    f, g = negll_grad(best_x)
    g_norm = float(np.linalg.norm(g))
    # an uncertified stop at a stationary point still counts as converged
    return FitResult(
        params=HawkesParams(mu, n, beta),
        log_likelihood=float(ll),
        converged=converged or g_norm < STATIONARITY_GTOL,
        n_events=len(events),
        starts_tried=starts_tried,
        boundary_flag=bool(n >= config.n_max * (1.0 - 1e-4)),
        clamp_events=int(clamped),
        grad_norm=g_norm,
        method=method,
    )


def fit_mle(events: EventSeries, config: FitConfig = FitConfig()) -> FitResult:
    """Best multi-start MLE of (mu, n, beta) on one window."""
    if len(events) < config.min_events:
        raise InsufficientDataError(
            f"{len(events)} events < min_events={config.min_events}")
    _, beta_min, beta_max = _resolve_boxes(events, config)
    transform = _Transform(config.n_max, beta_min, beta_max, config.parametrization)
    starts = multistart_grid(events, config)
    x0_list = [transform.pack(p.mu, p.n, p.beta) for p in starts]

    results, negll_grad = _optimize(events, config, x0_list, transform, config.method)
    if not any(r.success for r in results):
        if config.method != "nm":
            # gradient path can stall on rough windows; the simplex is the fallback
            results, negll_grad = _optimize(events, config, x0_list, transform, "nm")
        if not any(r.success for r in results):
            raise NonConvergenceError(
                f"no start converged in {len(results)} attempts",
                [(r.message, float(r.fun)) for r in results])

    best = min(results, key=lambda r: r.fun)
    best_x, best_fun, converged = best.x, best.fun, bool(best.success)
    if config.method == "nm" and config.refine:
        r = minimize(negll_grad, best_x, jac=True, method="L-BFGS-B",
                     options=dict(maxiter=config.max_iter, ftol=1e-12, gtol=1e-7))
        if r.success and r.fun <= best_fun:
            best_x, best_fun, converged = r.x, r.fun, True
    if not converged:
        # typically an abnormal line-search stop at the optimum; let the
        # simplex certify (its best vertex can never be worse than x0)
        r = minimize(lambda x: negll_grad(x)[0], best_x, method="Nelder-Mead",
                     options=dict(xatol=config.xtol, fatol=config.ftol,
                                  maxiter=config.max_iter, maxfev=4 * config.max_iter))
        if r.success and r.fun <= best_fun:
            best_x, best_fun, converged = r.x, r.fun, True
    return _finalize(events, config, transform, best_x, converged,
                     len(results), config.method, negll_grad)


def _fit_warm(events: EventSeries, config: FitConfig, warm: HawkesParams) -> FitResult:
    """Single gradient fit from a warm start, simplex fallback, grid last."""
    _, beta_min, beta_max = _resolve_boxes(events, config)
    transform = _Transform(config.n_max, beta_min, beta_max, config.parametrization)
    x0 = transform.pack(warm.mu, warm.n, warm.beta)
    results, negll_grad = _optimize(events, config, [x0], transform, "lbfgs")
    if not results[0].success:
        results, negll_grad = _optimize(events, config, [x0], transform, "nm")
    if not results[0].success:
        return fit_mle(events, config)
    return _finalize(events, config, transform, results[0].x, True, 1,
                     "warm", negll_grad)


def _summaries(fits: Sequence[FitResult]) -> dict[str, ParamSummary]:
    arrays = {
        "mu": np.array([f.params.mu for f in fits]),
        "n": np.array([f.params.n for f in fits]),
        "beta": np.array([f.params.beta for f in fits]),
    }
    out = {}
    for name, vals in arrays.items():
        if vals.size > 1 and not np.all(vals == vals[0]):
            std = float(vals.std(ddof=1))
        else:
            std = 0.0  # coincident realizations: spread exactly zero
        out[name] = ParamSummary(
            mean=float(vals.mean()),
            std=std,
            median=float(np.median(vals)),
            q05=float(np.quantile(vals, 0.05)),
            q95=float(np.quantile(vals, 0.95)),
        )
    return out


def fit_bootstrap(
    raw: IntegerSecondSeries,
    config: FitConfig = FitConfig(),
    n_realizations: int = 50,
    seed=0,
) -> BootstrapResult:
    """Randomize the sub-second part n_realizations times and refit each.

    Realization seeds are spawned from one SeedSequence, so a bootstrap
    is replayable from (raw, config, n_realizations, seed) alone.  A
    series that already carries sub-second resolution randomizes to
    itself, so all realizations coincide and every spread is zero.
    """
    if len(raw) < config.min_events:
        raise InsufficientDataError(f"{len(raw)} events < min_events={config.min_events}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(n_realizations)

    fits: list[FitResult] = []
    series: list[EventSeries] = []
    warm: Optional[HawkesParams] = None
    n_failed = 0
    frozen = not raw.is_integer_resolution  # randomization is the identity
    for i in range(n_realizations):
        ev = randomize_subsecond(raw, children[i])
        if frozen and i > 0:
            if fits:
                fits.append(fits[0])
                series.append(series[0])
            else:
                n_failed += 1
            continue
        try:
            fit = fit_mle(ev, config) if warm is None else _fit_warm(ev, config, warm)
        except NonConvergenceError:
            n_failed += 1
            continue
        if warm is None:
            warm = fit.params
        fits.append(fit)
        series.append(ev)

    ok = [f for f in fits if f.converged]
    if not ok:
        raise NonConvergenceError(
            f"no bootstrap realization converged ({n_failed} failed outright)", [])
    summary = _summaries(ok)
    return BootstrapResult(
        fits=tuple(fits),
        series=tuple(series),
        summary=summary,
        n_realizations=n_realizations,
        n_converged=len(ok),
        n_failed=n_failed,
        usable=len(ok) >= min(config.min_converged, n_realizations),
    )
