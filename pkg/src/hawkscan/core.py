"""Exponential-kernel Hawkes process: parameters, intensity, likelihood.

The process is parametrized by (mu, n, beta):

    lambda(t) = mu + n * beta * sum_{t_i < t} exp(-beta * (t - t_i))

where mu is the background rate, beta the kernel decay rate and n the
branching ratio (the kernel integral, so alpha = n * beta).  n is carried
as an explicit parameter because it is the quantity the rest of the
toolkit cares about: the expected fraction of endogenously triggered
events, with n = 1 the critical boundary.

All quantities are in seconds and events per second.  Timestamps are
window-relative (the likelihood conditions on an empty pre-window
history), and the O(N) recursions work on inter-event gaps so absolute
epoch offsets never enter an exp().
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "HawkesParams",
    "EventSeries",
    "ClusterStats",
    "intensity",
    "compensator",
    "log_likelihood",
    "log_likelihood_gradient",
    "branching_ratio",
    "endogenous_fraction",
]

# ln(lambda) floor; keeps the optimizer out of -inf while staying far
# below any physically meaningful rate.
DEFAULT_INTENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class HawkesParams:
    """Parameter triple (mu, n, beta); alpha is derived, never stored."""

    mu: float
    n: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be finite and > 0, got {self.mu}")
        if not (np.isfinite(self.n) and self.n >= 0):
            raise ValueError(f"n must be finite and >= 0, got {self.n}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")

    @property
    def alpha(self) -> float:
        return self.n * self.beta

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.n, self.beta])


@dataclass(frozen=True)
class EventSeries:
    """Strictly increasing event timestamps on an observation window [0, T]."""

    timestamps: np.ndarray
    horizon: float

    def __post_init__(self):
        ts = np.ascontiguousarray(np.asarray(self.timestamps, dtype=np.float64))
        if ts.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        if ts.size and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be finite and > 0, got {self.horizon}")
        if ts.size and (ts[0] < 0 or ts[-1] > self.horizon):
            raise ValueError("timestamps must lie inside [0, horizon]")
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.timestamps.size)


@dataclass(frozen=True)
class ClusterStats:
    """Stationary cluster bookkeeping for a sub-critical branching ratio."""

    fraction: float
    descendants_per_immigrant: float
    mean_cluster_size: float


# ---------------------------------------------------------------------------
# numba kernels
#
# A_i = sum_{j<i} exp(-beta (t_i - t_j)) satisfies
#   A_1 = 0,  A_i = exp(-beta (t_i - t_{i-1})) (1 + A_{i-1})
# so lambda(t_i) = mu + n beta A_i and the log-likelihood
#   ll = sum_i ln lambda(t_i) - mu T - n sum_i (1 - exp(-beta (T - t_i)))
# is O(N).  B_i = sum_{j<i} (t_i - t_j) exp(-beta (t_i - t_j)) = -dA_i/dbeta
# has the companion recursion used by the analytic gradient.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _decay_sums(ts, beta):
    a = np.empty(ts.shape[0])
    acc = 0.0
    for i in range(ts.shape[0]):
        if i > 0:
            acc = np.exp(-beta * (ts[i] - ts[i - 1])) * (1.0 + acc)
        a[i] = acc
    return a


@njit(cache=True)
def _loglik(ts, horizon, mu, n, beta, floor):
    ll = 0.0
    a = 0.0
    clamped = 0
    for i in range(ts.shape[0]):
        if i > 0:
            a = np.exp(-beta * (ts[i] - ts[i - 1])) * (1.0 + a)
        lam = mu + n * beta * a
        if lam < floor:
            lam = floor
            clamped += 1
        ll += np.log(lam)
    comp = mu * horizon
    for i in range(ts.shape[0]):
        comp += n * (1.0 - np.exp(-beta * (horizon - ts[i])))
    return ll - comp, clamped


@njit(cache=True)
def _loglik_grad(ts, horizon, mu, n, beta, floor):
    ll = 0.0
    gmu = 0.0
    gn = 0.0
    gb = 0.0
    a = 0.0
    b = 0.0
    clamped = 0
    for i in range(ts.shape[0]):
        if i > 0:
            dt = ts[i] - ts[i - 1]
            w = np.exp(-beta * dt)
            b = w * (b + dt * (1.0 + a))
            a = w * (1.0 + a)
        lam = mu + n * beta * a
        if lam < floor:
            lam = floor
            clamped += 1
        ll += np.log(lam)
        inv = 1.0 / lam
        gmu += inv
        gn += beta * a * inv
        gb += n * (a - beta * b) * inv
    ll -= mu * horizon
    gmu -= horizon
    for i in range(ts.shape[0]):
        rem = horizon - ts[i]
        e = np.exp(-beta * rem)
        ll -= n * (1.0 - e)
        gn -= 1.0 - e
        gb -= n * rem * e
    return ll, gmu, gn, gb, clamped


def intensity(params: HawkesParams, events: EventSeries, t: float) -> float:
    """Conditional intensity at time t given the (strictly prior) history.

    Only events with t_i < t contribute; an event exactly at t does not
    excite itself.
    """
    if not 0.0 <= t <= events.horizon:
        raise ValueError(f"t={t} outside [0, {events.horizon}]")
    ts = events.timestamps
    past = ts[ts < t]
    return float(params.mu + params.n * params.beta * np.exp(-params.beta * (t - past)).sum())


def compensator(params: HawkesParams, events: EventSeries, t: float) -> float:
    """Integrated intensity Lambda(t) = mu t + n sum (1 - exp(-beta (t - t_i)))."""
    if not 0.0 <= t <= events.horizon:
        raise ValueError(f"t={t} outside [0, {events.horizon}]")
    ts = events.timestamps
    past = ts[ts < t]
    return float(params.mu * t + params.n * (1.0 - np.exp(-params.beta * (t - past))).sum())


def log_likelihood(
    params: HawkesParams,
    events: EventSeries,
    floor: float = DEFAULT_INTENSITY_FLOOR,
) -> float:
    """Exact log-likelihood of the event series under params, O(N)."""
    ll, _ = _loglik(events.timestamps, events.horizon, params.mu, params.n, params.beta, floor)
    if not np.isfinite(ll):
        raise ArithmeticError(f"non-finite log-likelihood at {params}")
    return float(ll)


def log_likelihood_gradient(
    params: HawkesParams,
    events: EventSeries,
    floor: float = DEFAULT_INTENSITY_FLOOR,
) -> np.ndarray:
    """Analytic gradient of the log-likelihood w.r.t. (mu, n, beta)."""
    ll, gmu, gn, gb, _ = _loglik_grad(
        events.timestamps, events.horizon, params.mu, params.n, params.beta, floor
    )
    g = np.array([gmu, gn, gb])
    if not (np.isfinite(ll) and np.all(np.isfinite(g))):
        raise ArithmeticError(f"non-finite gradient at {params}")
    return g


def branching_ratio(alpha: float, beta: float) -> float:
    """Kernel integral int_0^inf alpha exp(-beta t) dt = alpha / beta."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return alpha / beta

def endogenous_fraction(n: float) -> ClusterStats:
    """Cluster statistics implied by branching ratio n < 1.

    Each event triggers n + n^2 + ... = n/(1-n) descendants on average,
    so a fraction n of all events is endogenous and the mean cluster
    size (immigrant plus all generations) is 1/(1-n).
    """
    if not 0 <= n < 1:
        raise ValueError(f"n must be in [0, 1), got {n}")
    return ClusterStats(
        fraction=n,
        descendants_per_immigrant=n / (1.0 - n),
        mean_cluster_size=1.0 / (1.0 - n),
    )
